#!/usr/bin/env python3
"""Assemble a desk-scale English corpus from public-domain npm packages.

Sources (all public domain):
  kjv                  King James Version, 1769 text
  world-english-bible  World English Bible
  wordnet-db           WordNet 3.1 glosses and usage examples

The output is one normalized line per verse or gloss: lowercase ASCII
words separated by single spaces, punctuation removed. The tokenizer in
the Rust crates only splits on whitespace, so all cleanup happens here.

Usage: python3 scripts/prepare_corpus.py [--out data/corpus.txt]
"""

import argparse
import json
import re
import subprocess
import sys
import tarfile
import tempfile
import unicodedata
from pathlib import Path

PACKAGES = {
    "kjv": "1.0.0",
    "world-english-bible": "1.0.1",
    "wordnet-db": "3.1.14",
}

WORD = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


def normalize(line):
    line = unicodedata.normalize("NFKD", line)
    line = line.encode("ascii", "ignore").decode("ascii").lower()
    line = line.replace("_", " ")
    return " ".join(WORD.findall(line))


def fetch(workdir):
    roots = {}
    for name, version in PACKAGES.items():
        pkg = f"{name}@{version}"
        out = subprocess.run(
            ["npm", "pack", pkg, "--silent"],
            cwd=workdir,
            check=True,
            capture_output=True,
            text=True,
        ).stdout.strip().splitlines()[-1]
        dest = workdir / name
        with tarfile.open(workdir / out) as tar:
            tar.extractall(dest)
        roots[name] = dest / "package"
    return roots


def kjv_lines(root):
    verses = json.loads((root / "json" / "verses-1769.json").read_text())
    for text in verses.values():
        yield text.replace("[", "").replace("]", "")


def web_lines(root):
    for path in sorted((root / "json").glob("*.json")):
        for item in json.loads(path.read_text()):
            if "value" in item:
                yield item["value"]


def wordnet_lines(root):
    for pos in ("noun", "verb", "adj", "adv"):
        with open(root / "dict" / f"data.{pos}", encoding="latin-1") as fh:
            for raw in fh:
                if raw.startswith("  "):
                    continue  # license preamble
                _, _, gloss = raw.partition(" | ")
                for part in gloss.split(";"):
                    yield part.strip().strip('"')


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/corpus.txt", type=Path)
    args = parser.parse_args()

    args.out.parent.mkdir(parents=True, exist_ok=True)
    tokens = 0
    with tempfile.TemporaryDirectory() as tmp:
        roots = fetch(Path(tmp))
        with open(args.out, "w", encoding="ascii") as out:
            for lines in (
                kjv_lines(roots["kjv"]),
                web_lines(roots["world-english-bible"]),
                wordnet_lines(roots["wordnet-db"]),
            ):
                for line in lines:
                    norm = normalize(line)
                    if norm:
                        out.write(norm + "\n")
                        tokens += norm.count(" ") + 1
    print(f"wrote {args.out} ({tokens} tokens)", file=sys.stderr)


if __name__ == "__main__":
    main()
