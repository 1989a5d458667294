#!/usr/bin/env python3
"""Regenerate data/sentiment_lexicon.csv and data/pos_lexicon.tsv.

Usage: build_lexicons.py <unpacked-textblob-dir> <out-data-dir>

The sentiment lexicon averages polarity/subjectivity over all senses of a word
form. The POS lexicon keeps the first (most frequent) Brill tag per lowercased
word, preferring entries that were already lowercase in the source.
"""
import collections
import pathlib
import re
import sys
import xml.etree.ElementTree as ET

PENN_TAGS = set(
    "CC CD DT EX FW IN JJ JJR JJS LS MD NN NNS NNP NNPS PDT POS PRP PRP$ RB RBR "
    "RBS RP SYM TO UH VB VBD VBG VBN VBP VBZ WDT WP WP$ WRB".split()
)


def build_sentiment(src: pathlib.Path, out: pathlib.Path) -> int:
    senses = collections.defaultdict(list)
    for w in ET.parse(src).getroot().iter("word"):
        form = w.get("form").lower()
        if " " in form or "," in form:
            continue
        senses[form].append((float(w.get("polarity")), float(w.get("subjectivity"))))
    with out.open("w") as f:
        f.write("word,polarity,subjectivity\n")
        for form in sorted(senses):
            ps = senses[form]
            pol = sum(p for p, _ in ps) / len(ps)
            subj = sum(s for _, s in ps) / len(ps)
            f.write(f"{form},{round(pol, 4)},{round(subj, 4)}\n")
    return len(senses)


def build_pos(src: pathlib.Path, out: pathlib.Path) -> int:
    tags, from_lower = {}, {}
    for line in src.open(encoding="utf-8"):
        if line.startswith(";;;"):
            continue
        parts = line.split()
        if len(parts) < 2 or parts[1] not in PENN_TAGS:
            continue
        word, tag = parts[0], parts[1]
        if not re.fullmatch(r"[A-Za-z][A-Za-z'\-]*", word):
            continue
        lw = word.lower()
        if lw in tags and (from_lower[lw] or word != lw):
            continue
        tags[lw], from_lower[lw] = tag, word == lw
    with out.open("w") as f:
        for w in sorted(tags):
            f.write(f"{w}\t{tags[w]}\n")
    return len(tags)


def main() -> None:
    src = pathlib.Path(sys.argv[1]) / "textblob" / "en"
    dst = pathlib.Path(sys.argv[2])
    print("sentiment entries:", build_sentiment(src / "en-sentiment.xml", dst / "sentiment_lexicon.csv"))
    print("pos entries:", build_pos(src / "en-lexicon.txt", dst / "pos_lexicon.tsv"))


if __name__ == "__main__":
    main()
