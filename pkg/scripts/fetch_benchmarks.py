#!/usr/bin/env python3
"""Provision the benchmark datasets used by the acceptance suite into data/.

Twonorm and ringnorm are regenerated locally (no network needed). Letter and
cod-rna are downloaded from their canonical sources and converted to binary
libsvm files; run this on a machine with network access and copy data/ across
if the test machine is offline.
"""

import argparse
import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from multilevel_svm.datasets import (SOURCE_URLS, generate_synthetic,
                                     prepare_codrna, prepare_letter)


def download(url: str, dest: Path) -> Path:
    print(f"downloading {url}")
    with urllib.request.urlopen(url, timeout=120) as response:
        dest.write_bytes(response.read())
    return dest


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default=Path(__file__).resolve().parents[1] / "data")
    parser.add_argument("--skip-downloads", action="store_true",
                        help="only regenerate the synthetic benchmarks")
    args = parser.parse_args()
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    for name in ("twonorm", "ringnorm"):
        out = data_dir / f"{name}.libsvm"
        generate_synthetic(name, str(out))
        print(f"wrote {out}")

    if args.skip_downloads:
        return 0

    failures = []
    raw_dir = data_dir / "raw"
    raw_dir.mkdir(exist_ok=True)
    try:
        raw = download(SOURCE_URLS["letter"], raw_dir / "letter-recognition.data")
        prepare_letter(str(raw), str(data_dir / "letter.libsvm"))
        print(f"wrote {data_dir / 'letter.libsvm'} (letter Z vs rest)")
    except OSError as exc:
        failures.append(f"letter: {exc}")
    try:
        raw = download(SOURCE_URLS["cod-rna"], raw_dir / "cod-rna")
        prepare_codrna(str(raw), str(data_dir / "cod-rna.libsvm"))
        print(f"wrote {data_dir / 'cod-rna.libsvm'}")
    except OSError as exc:
        failures.append(f"cod-rna: {exc}")

    for failure in failures:
        print(f"FAILED {failure}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
