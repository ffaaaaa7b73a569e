#!/usr/bin/env python3
"""Write the Efron et al. diabetes table as CSV (AGE..S6, Y) from scikit-learn's bundled copy."""
import gzip
import os
import sys

import sklearn

base = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "data")
out = sys.argv[1] if len(sys.argv) > 1 else "diabetes.csv"

with gzip.open(os.path.join(base, "diabetes_data_raw.csv.gz"), "rt") as f:
    rows = [line.split() for line in f if line.strip()]
with gzip.open(os.path.join(base, "diabetes_target.csv.gz"), "rt") as f:
    targets = [float(line) for line in f if line.strip()]
assert len(rows) == len(targets)

with open(out, "w") as f:
    f.write("AGE,SEX,BMI,BP,S1,S2,S3,S4,S5,S6,Y\n")
    for row, y in zip(rows, targets):
        f.write(",".join(row + ["%g" % y]) + "\n")
