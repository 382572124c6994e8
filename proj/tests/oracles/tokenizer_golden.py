"""Freezes BPE token sequences from open_clip's SimpleTokenizer.

Usage: python3 tokenizer_golden.py <fixtures_dir>
Reads <fixtures_dir>/mini_clip and <fixtures_dir>/toy_bundle merges and writes
<fixtures_dir>/tokenizer/golden.json.
"""
import gzip
import html
import json
import os
import sys
import tempfile

import ftfy
from open_clip.tokenizer import SimpleTokenizer

LONG = "a printed and scanned photograph of a face " * 12

STRINGS = [
    "",
    "a",
    "a photo of a face",
    "A PHOTO Of A MoRpHeD FACE",
    "  leading and   trailing   spaces  ",
    "tabs\tand\nnew lines\nhere",
    "don't we'll they're I'M you've she'd it's",
    "numbers 12345 and 3.14 and 2nd",
    "punctuation!!! ??? ... ;;; (brackets) [x]",
    "hyphen-ated face-morph pre-processing",
    "émigré café naïve",
    "Straße in München",
    "日本語のテキスト",
    "Ελληνικά ΓΡΆΜΜΑΤΑ",
    "Привет МИР",
    "emoji 😀 face 👍",
    "#hashtag @mention $100 50%",
    "morphing attack detection",
    "bona fide versus morph",
    "x" * 200,
    LONG,
    "supercalifragilisticexpialidocious antidisestablishmentarianism",
    "a face with\u2003odd\u2009spaces",
    "MiXeD CaSe ÜMLAUTS ÄÖÜ",
    "z",
    "<start_of_text>a face<end_of_text>",
    "x<end_of_text>!<end_of_text>",
    "!",
]


def tokenizer_for(merges_path, tmp):
    gz = os.path.join(tmp, os.path.basename(os.path.dirname(merges_path)) + ".gz")
    with open(merges_path, "rb") as src, gzip.open(gz, "wb") as dst:
        dst.write(src.read().rstrip(b"\n"))
    return SimpleTokenizer(bpe_path=gz)


def main(fixtures):
    for s in STRINGS:
        assert ftfy.fix_text(s) == s and html.unescape(s) == s, f"cleaning is not the identity on {s!r}"
    out = {"context_length": 77, "vocabularies": {}}
    with tempfile.TemporaryDirectory() as tmp:
        for name in ("mini_clip", "toy_bundle"):
            tok = tokenizer_for(os.path.join(fixtures, name, "merges.txt"), tmp)
            cases = []
            for s in STRINGS:
                ids = tok([s])[0].tolist()
                used = len(ids) - next(i for i, v in enumerate(reversed(ids)) if v != 0)
                cases.append({"text": s, "ids": ids[:used]})
            out["vocabularies"][name] = cases
    os.makedirs(os.path.join(fixtures, "tokenizer"), exist_ok=True)
    with open(os.path.join(fixtures, "tokenizer", "golden.json"), "w") as fh:
        json.dump(out, fh, ensure_ascii=False, indent=1)
    print(f"wrote {len(STRINGS)} strings x {len(out['vocabularies'])} vocabularies")


if __name__ == "__main__":
    main(sys.argv[1])
