#!/usr/bin/env python3
"""Convert the UCI Heart Disease file into the CSV the test suite expects.

Manual step (no automatic downloading here):

    1. Fetch `processed.cleveland.data` from the UCI Machine Learning
       Repository ("Heart Disease" dataset, Cleveland subset, 303 rows).
    2. Run:  python3 scripts/prepare_heart_disease.py processed.cleveland.data \
             tests/data/heart_disease.csv

Assumptions made here (the raw file has no header):
  - Column names follow the UCI documentation order:
    age, sex, cp, trestbps, chol, fbs, restecg, thalach, exang, oldpeak,
    slope, ca, thal, num.
  - sex is coded 1 = male, 0 = female; we write the labels out so the
    column is treated as categorical.
  - '?' cells are left as-is; the loader treats them as missing.
"""

import csv
import sys
from pathlib import Path

COLUMNS = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
    "thalach", "exang", "oldpeak", "slope", "ca", "thal", "num",
]
SEX_LABELS = {"1.0": "male", "1": "male", "0.0": "female", "0": "female"}


def main(argv):
    if len(argv) != 3:
        print(__doc__)
        return 1
    src, dst = Path(argv[1]), Path(argv[2])
    rows = []
    with open(src, "r", encoding="utf-8") as fh:
        for line in fh:
            cells = [c.strip() for c in line.strip().split(",") if line.strip()]
            if not cells or len(cells) != len(COLUMNS):
                continue
            cells[1] = SEX_LABELS.get(cells[1], cells[1])
            rows.append(cells)
    if len(rows) != 303:
        print(f"warning: expected 303 rows, found {len(rows)}")
    dst.parent.mkdir(parents=True, exist_ok=True)
    with open(dst, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {dst}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
