"""Exports the scikit-learn handwritten digits set in the worker's
dataset file format.

This is the desk-scale stand-in for a 10-class grayscale digit
benchmark: 8x8 images with integer pixel values 0..16 (scale 16). The
training split takes the first 80 images of every class in dataset
order; everything else becomes the test split. A small disjoint fixture
set for protocol tests can be written alongside.

Usage:
    python3 scripts/export_digits.py --out data/digits.json \
        --tiny-out test/fixtures/tinyset.json
"""

import argparse
import json
from collections import defaultdict
from pathlib import Path

from sklearn.datasets import load_digits

TRAIN_PER_CLASS = 80
TINY_TRAIN_PER_CLASS = 6
TINY_TEST_PER_CLASS = 3


def split_per_class(labels, take):
    """First `take` indices of every class, in dataset order."""
    seen = defaultdict(int)
    picked = []
    rest = []
    for i, label in enumerate(labels):
        if seen[label] < take:
            picked.append(i)
            seen[label] += 1
        else:
            rest.append(i)
    return picked, rest


def as_split(images, labels, rows):
    return {
        "images": [[int(v) for v in images[i]] for i in rows],
        "labels": [int(labels[i]) for i in rows],
    }


def payload(images, labels, train_rows, test_rows):
    return {
        "name": "digits",
        "imageSize": 8,
        "channels": 1,
        "classes": 10,
        "scale": 16.0,
        "train": as_split(images, labels, train_rows),
        "test": as_split(images, labels, test_rows),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="main dataset file")
    parser.add_argument("--tiny-out", default=None, help="optional tiny fixture file")
    args = parser.parse_args()

    bundle = load_digits()
    images = bundle.data
    labels = bundle.target

    train_rows, test_rows = split_per_class(labels, TRAIN_PER_CLASS)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload(images, labels, train_rows, test_rows)) + "\n")
    print(f"wrote {out}: {len(train_rows)} train / {len(test_rows)} test images")

    if args.tiny_out:
        tiny_train, remainder = split_per_class(labels, TINY_TRAIN_PER_CLASS)
        tiny_test, _ = split_per_class([labels[i] for i in remainder], TINY_TEST_PER_CLASS)
        tiny_test = [remainder[i] for i in tiny_test]
        tiny = Path(args.tiny_out)
        tiny.parent.mkdir(parents=True, exist_ok=True)
        body = payload(images, labels, tiny_train, tiny_test)
        body["name"] = "tinyset"
        tiny.write_text(json.dumps(body) + "\n")
        print(f"wrote {tiny}: {len(tiny_train)} train / {len(tiny_test)} test images")


if __name__ == "__main__":
    main()
