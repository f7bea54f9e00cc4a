use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn embias(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embias"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to spawn embias")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("killed by signal")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = embias(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Enough repeated structure for every word to clear --min-count 5.
fn small_corpus(dir: &Path) {
    let mut text = String::new();
    for i in 0..400u32 {
        text.push_str(&format!(
            "the w{} sat on w{} mat near w{}\n",
            i % 9,
            (i * 7) % 13,
            (i * 3) % 5
        ));
    }
    fs::write(dir.join("corpus.txt"), text).unwrap();
}

#[test]
fn vocab_filters_by_min_count() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.txt"), "a a b").unwrap();
    ok(dir.path(), &["vocab", "t.txt", "--min-count", "2", "-o", "v.txt"]);
    assert_eq!(fs::read_to_string(dir.path().join("v.txt")).unwrap(), "a 2\n");
    assert!(dir.path().join("v.txt.manifest.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = embias(dir.path(), &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&embias(dir.path(), &["vocab", "x.txt", "-o", "v", "--bogus"])), 1);
    assert_eq!(code(&embias(dir.path(), &["frobnicate"])), 1);
    fs::write(dir.path().join("t.txt"), "a").unwrap();
    assert_eq!(
        code(&embias(dir.path(), &["vocab", "t.txt", "-o", "v", "--min-count", "0"])),
        1
    );
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&embias(dir.path(), &["--help"])), 0);
    assert_eq!(code(&embias(dir.path(), &["--version"])), 0);
    assert_eq!(code(&embias(dir.path(), &["experiment", "--help"])), 0);
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = embias(dir.path(), &["vocab", "missing.txt", "-o", "v.txt"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
}

#[test]
fn corrupt_table_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("v.txt"), "a 3\nb 2\n").unwrap();
    fs::write(dir.path().join("c.bin"), [0u8; 7]).unwrap();
    let out = embias(
        dir.path(),
        &["pmi", "--vocab", "v.txt", "--cooc", "c.bin", "-o", "p.csv"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn step_by_step_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    ok(dir, &["vocab", "corpus.txt", "--min-count", "5", "-o", "vocab.txt"]);
    ok(
        dir,
        &[
            "count",
            "corpus.txt",
            "--vocab",
            "vocab.txt",
            "--window",
            "4",
            "-o",
            "cooc.bin",
        ],
    );
    let table = ["--vocab", "vocab.txt", "--cooc", "cooc.bin"];
    let glove = [
        &table[..],
        &["--dim", "8", "--iters", "5", "--x-max", "10", "--out-dir", "glove"],
    ]
    .concat();
    ok(dir, &[&["train-glove"][..], &glove].concat());
    for f in [
        "manifest.json",
        "trace.csv",
        "vectors.txt",
        "context_vectors.txt",
        "biases.txt",
        "context_biases.txt",
        "scatter.csv",
    ] {
        assert!(dir.join("glove").join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(dir.join("glove/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);
    assert_eq!(trace.lines().next(), Some("iter,r_word,r_context,r_sum"));

    let biases = [
        "--biases",
        "glove/biases.txt",
        "--context-biases",
        "glove/context_biases.txt",
        "--scatter",
        "s.csv",
    ];
    let out = ok(dir, &[&["analyze"][..], &table, &biases].concat());
    let stdout = String::from_utf8(out.stdout).unwrap();
    // The last trace record was computed from the same biases and seed.
    let last = trace.lines().last().unwrap();
    let r_word = stdout.lines().next().unwrap().split('\t').nth(1).unwrap();
    assert_eq!(last.split(',').nth(1), Some(r_word));
    assert!(dir.join("s.csv.manifest.json").exists());

    ok(dir, &[&["pmi"][..], &table, &["--k", "1", "-o", "pmi.csv"]].concat());
    assert!(fs::read_to_string(dir.join("pmi.csv")).unwrap().lines().count() > 10);

    let sgns = ["--dim", "8", "--iters", "3"];
    ok(
        dir,
        &[&["train-sgns"][..], &table, &sgns, &["--out-dir", "sgns_m"]].concat(),
    );
    ok(
        dir,
        &[
            &["train-sgns", "corpus.txt", "--vocab", "vocab.txt", "--window", "3"][..],
            &sgns,
            &["--out-dir", "sgns_s"],
        ]
        .concat(),
    );
    for d in ["sgns_m", "sgns_s"] {
        assert!(dir.join(d).join("vectors.txt").exists());
        assert!(dir.join(d).join("manifest.json").exists());
    }
    // Both sources at once is a usage error.
    let both = embias(
        dir,
        &[&["train-sgns", "corpus.txt"][..], &table, &["--out-dir", "x"]].concat(),
    );
    assert_eq!(code(&both), 1);
}

#[test]
fn experiment_writes_one_trace_per_x_max_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    let args = |out: &'static str| {
        vec![
            "experiment",
            "corpus.txt",
            "--min-count",
            "5",
            "--window",
            "4",
            "--x-max",
            "10",
            "--x-max",
            "100",
            "--alpha",
            "0.75",
            "--dim",
            "50",
            "--iters",
            "50",
            "--quiet",
            "--out-dir",
            out,
        ]
    };
    ok(dir, &args("a"));
    for x in ["10", "100"] {
        let trace = fs::read_to_string(dir.join(format!("a/trace_xmax{x}.csv"))).unwrap();
        assert_eq!(trace.lines().count(), 51, "header plus 50 records");
    }
    ok(dir, &args("b"));
    let mut names: Vec<_> = fs::read_dir(dir.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 15);
    for name in names {
        let a = fs::read(dir.join("a").join(&name)).unwrap();
        let b = fs::read(dir.join("b").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs between runs");
    }
}
