#!/usr/bin/env python3
"""Regenerate the committed test fixture bundles.

Usage: python3 exporter/scripts/build_fixtures.py [dest]

Writes tests/fixtures/bundle (trained, biased) and
tests/fixtures/bundle_biasfree (same architecture without bias terms,
for conservation checks).  Overwrites whatever is there.
"""

import sys
from pathlib import Path

from fixture_exporter import build_bundle


def main(argv) -> int:
    dest = Path(argv[1]) if len(argv) > 1 else (
        Path(__file__).resolve().parents[2] / "tests" / "fixtures"
    )
    for name, bias in (("bundle", True), ("bundle_biasfree", False)):
        bundle = build_bundle(dest / name, bias=bias)
        print(f"{name}: train accuracy {bundle.train_accuracy:.3f} -> {bundle.root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
