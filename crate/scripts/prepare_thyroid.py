#!/usr/bin/env python3
"""Convert a raw UCI thyroid file into the CSV layout of datasets/thyroid/schema.toml.

Accepts the comma-separated `thyroid0387`-style files (one record per line,
the diagnosis after the last field, optionally followed by `[record id]`) or a
CSV that already has a header with the column names below. Missing
continuous values are filled with the column median. Missing sex becomes
`unknown`. Referral sources other than SVHC and SVI are folded into `other`.

    python3 scripts/prepare_thyroid.py thyroid0387.data datasets/thyroid/thyroid.csv
"""

import argparse
import csv
import statistics
import sys

# Column order of the raw UCI thyroid records (thyroid0387.names).
RAW_COLUMNS = [
    "age", "sex", "on_thyroxine", "query_on_thyroxine", "on_antithyroid_medication",
    "sick", "pregnant", "thyroid_surgery", "I131_treatment", "query_hypothyroid",
    "query_hyperthyroid", "lithium", "goitre", "tumor", "hypopituitary", "psych",
    "TSH_measured", "TSH", "T3_measured", "T3", "TT4_measured", "TT4", "T4U_measured",
    "T4U", "FTI_measured", "FTI", "TBG_measured", "TBG", "referral_source", "class",
]
CONTINUOUS = ["age", "TSH", "T3", "TT4", "T4U", "FTI", "TBG"]
OUTPUT = CONTINUOUS + ["sex", "referral_source", "class"]


def parse_class(value):
    # "-" or "negative" marks a normal record; "S|..." style codes keep the
    # letters before the bracketed id.
    value = value.split("[")[0].strip().rstrip(".")
    return "negative" if value in ("-", "negative", "") else value


def read_records(path):
    with open(path, newline="") as f:
        first = f.readline()
        f.seek(0)
        if "age" in first.lower().split(",")[0]:
            yield from csv.DictReader(f)
            return
        for row in csv.reader(f):
            if not row or row[0].startswith("|"):
                continue
            if len(row) < len(RAW_COLUMNS):
                continue
            yield dict(zip(RAW_COLUMNS, row[: len(RAW_COLUMNS)]))


def number(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw")
    ap.add_argument("out")
    args = ap.parse_args()

    records = list(read_records(args.raw))
    if not records:
        sys.exit(f"no records parsed from {args.raw}")
    medians = {}
    for name in CONTINUOUS:
        present = [v for v in (number(r.get(name)) for r in records) if v is not None]
        medians[name] = statistics.median(present) if present else 0.0

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(OUTPUT)
        for r in records:
            row = []
            for name in CONTINUOUS:
                v = number(r.get(name))
                row.append(medians[name] if v is None else v)
            sex = (r.get("sex") or "").strip()
            row.append(sex if sex in ("F", "M") else "unknown")
            ref = (r.get("referral_source") or "").strip()
            row.append(ref if ref in ("SVHC", "SVI") else "other")
            row.append(parse_class(r.get("class", "")))
            w.writerow(row)
    anomalies = sum(1 for r in records if parse_class(r.get("class", "")) != "negative")
    print(f"wrote {len(records)} rows ({anomalies} anomalies) to {args.out}")


if __name__ == "__main__":
    main()
