#!/usr/bin/env python3
"""Convert the VADER lexicon (MIT) into the bd lexicon format.

Usage: build_lexicon.py <vader_lexicon.txt> <vaderSentiment.py> > data/lexicon.tsv

Valences are rescaled from [-4, 4] to [-1, 1]. Entries that the bd tokenizer
can never produce (emoticons, tokens with leading/trailing punctuation) and
zero-valence entries are dropped.
"""
import ast
import re
import sys

TOKEN = re.compile(r"^[a-z0-9](?:[a-z0-9'\-]*[a-z0-9])?$")


def negators(source):
    tree = ast.parse(open(source, encoding="utf-8").read())
    for node in tree.body:
        if isinstance(node, ast.Assign) and any(
            isinstance(t, ast.Name) and t.id == "NEGATE" for t in node.targets
        ):
            return ast.literal_eval(node.value)
    raise SystemExit("NEGATE list not found")


def main():
    lexicon_path, source_path = sys.argv[1], sys.argv[2]
    rows = {}
    with open(lexicon_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                continue
            token, valence = parts[0].lower(), float(parts[1])
            if not TOKEN.match(token) or valence == 0.0:
                continue
            rows[token] = max(-1.0, min(1.0, valence / 4.0))
    out = sys.stdout
    out.write("# Valence lexicon derived from VADER 3.3.2 (C.J. Hutto, MIT License).\n")
    out.write("# Valences rescaled from [-4, 4] to [-1, 1].\n")
    out.write("# format: token<TAB>valence; negators follow the [negators] header.\n")
    for token in sorted(rows):
        out.write(f"{token}\t{rows[token]:.4f}\n")
    out.write("[negators]\n")
    for word in sorted(set(w for w in negators(source_path) if TOKEN.match(w))):
        out.write(f"{word}\n")


if __name__ == "__main__":
    main()
