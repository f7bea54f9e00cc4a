use embias::analysis::{correlate_bias_vectors, correlate_biases};
use embias::cooccur::{self, CoocCell, CoocTable};
use embias::corpus::TokenStream;
use embias::glove::{self, TrainConfig, WeightingConfig};
use embias::pmi::residual_report;
use embias::sgns::{self, SgnsConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(n: u32, seed: u64) -> CoocTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| CoocCell::new(i, j, rng.random_range(1.0..500.0)))
        .collect();
    CoocTable::from_cells(n as usize, cells).unwrap()
}

/// A Zipf-like stream with a little local structure.
fn zipf_table(seed: u64) -> CoocTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<u32> = (0..20_000)
        .map(|p| {
            let r: f64 = rng.random_range(0.0..1.0);
            ((200.0 * r * r * r) as u32 + (p as u32 / 50) % 3) % 200
        })
        .collect();
    cooccur::count(&TokenStream::new(ids, 200).unwrap(), 5, true).unwrap()
}

#[test]
fn glove_cost_falls_in_nearly_every_epoch() {
    let wcfg = WeightingConfig::default();
    for (table, dim, iterations) in [(dense(10, 1), 10, 500), (zipf_table(1), 20, 40)] {
        let tcfg = TrainConfig {
            dim,
            iterations,
            ..TrainConfig::default()
        };
        let mut costs = vec![glove::total_cost(
            &glove::GloveParams::random(table.vocab_size(), dim, &mut ChaCha8Rng::seed_from_u64(tcfg.seed)),
            &table,
            &wcfg,
        )];
        glove::train(&table, &tcfg, &wcfg, |_, p| {
            costs.push(glove::total_cost(p, &table, &wcfg));
            Ok(())
        })
        .unwrap();
        let falls = costs.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(
            falls as f64 >= 0.95 * (costs.len() - 1) as f64,
            "{falls}/{}: {costs:?}",
            costs.len() - 1
        );
    }
}

#[test]
fn glove_full_rank_reaches_log_counts() {
    let table = dense(10, 2);
    let tcfg = TrainConfig {
        dim: 10,
        iterations: 5000,
        ..TrainConfig::default()
    };
    let p = glove::train(&table, &tcfg, &WeightingConfig::default(), |_, _| Ok(())).unwrap();
    assert!(residual_report(&p, &table, 1).unwrap().max_abs < 0.05);
}

#[test]
fn sgns_matrix_full_rank_reaches_shifted_pmi() {
    for (n, epochs) in [(5, 5000), (10, 10_000)] {
        let table = dense(n, 3);
        let cfg = SgnsConfig {
            dim: n as usize,
            epochs,
            ..SgnsConfig::default()
        };
        let p = sgns::train_matrix(&table, &cfg, |_, _| Ok(())).unwrap();
        let r = residual_report(&p, &table, cfg.k).unwrap();
        assert!(r.max_abs < 0.1, "{n}x{n}: {r:?}");
    }
}

#[test]
fn hogwild_glove_matches_single_threaded_cost() {
    let table = zipf_table(4);
    let wcfg = WeightingConfig::default();
    let cost = |threads| {
        let tcfg = TrainConfig {
            dim: 10,
            iterations: 15,
            threads,
            ..TrainConfig::default()
        };
        let p = glove::train(&table, &tcfg, &wcfg, |_, _| Ok(())).unwrap();
        assert!(p.is_finite());
        glove::total_cost(&p, &table, &wcfg)
    };
    let (single, racy) = (cost(1), cost(4));
    assert!((racy - single).abs() < 0.05 * single, "{single} vs {racy}");
}

#[test]
fn single_threaded_training_is_reproducible() {
    let table = zipf_table(5);
    let tcfg = TrainConfig {
        dim: 8,
        iterations: 3,
        ..TrainConfig::default()
    };
    let run = || glove::train(&table, &tcfg, &WeightingConfig::default(), |_, _| Ok(())).unwrap();
    assert_eq!(run(), run());
    let other = glove::train(
        &table,
        &TrainConfig {
            seed: 2,
            ..tcfg.clone()
        },
        &WeightingConfig::default(),
        |_, _| Ok(()),
    )
    .unwrap();
    assert_ne!(run(), other);

    let cfg = SgnsConfig {
        dim: 8,
        epochs: 3,
        ..SgnsConfig::default()
    };
    let run = || sgns::train_matrix(&table, &cfg, |_, _| Ok(())).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn bias_correlations_are_reproducible() {
    let table = zipf_table(6);
    let tcfg = TrainConfig {
        dim: 8,
        iterations: 2,
        ..TrainConfig::default()
    };
    let p = glove::train(&table, &tcfg, &WeightingConfig::default(), |_, _| Ok(())).unwrap();
    let a = correlate_biases(&p, &table, 2, 500, 9).unwrap();
    let b = correlate_biases(&p, &table, 2, 500, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn random_biases_are_uncorrelated_with_log_counts() {
    // |V| = 1000 with Zipf marginals; under the null, r ~ N(0, 1/1000), so
    // |r| < 0.1 should fail well under 1% of the time.
    let n = 1000u32;
    let cells = (0..n).map(|i| CoocCell::new(i, i, 1e5 / (i + 1) as f64)).collect();
    let table = CoocTable::from_cells(n as usize, cells).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 500;
    let mut inside = 0;
    for _ in 0..trials {
        let wb: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cb: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (r_word, r_context, _) = correlate_bias_vectors(&wb, &cb, &table, 1000, 1).unwrap();
        inside += (r_word.abs() < 0.1) as usize + (r_context.abs() < 0.1) as usize;
    }
    assert!(inside as f64 >= 0.99 * (2 * trials) as f64, "{inside}/{}", 2 * trials);
}
