"""Run the default stack on the public credit-card fraud table.

The table (``creditcard.csv``: Time, V1..V28, Amount, Class) is not shipped
with the package. Rows are placed on a 1 s grid by row index, every
``Class == 1`` row becomes a point event at its row time, and ``fit`` runs
with a short window (width 2, width_events 1 s). Whatever F1 comes
out is printed; there is no pass threshold.

    python scripts/stretch_creditcard.py --csv creditcard.csv --out stretch-out
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from eventseer.cli import main as cli_main


def convert(src: Path, dest: Path) -> int:
    """Write ``dataset.csv`` and ``events.csv`` into ``dest``; return the event count."""
    dest.mkdir(parents=True, exist_ok=True)
    n_events = 0
    with open(src, newline="") as fin, \
            open(dest / "dataset.csv", "w", newline="") as fdata, \
            open(dest / "events.csv", "w", newline="") as fev:
        reader = csv.reader(fin)
        header = next(reader)
        try:
            label = header.index("Class")
        except ValueError:
            sys.exit(f"{src}: no 'Class' column")
        feats = [k for k, h in enumerate(header) if k != label and h != "Time"]
        data = csv.writer(fdata, lineterminator="\n")
        events = csv.writer(fev, lineterminator="\n")
        data.writerow(["time"] + [header[k] for k in feats])
        events.writerow(["mid"])
        for i, row in enumerate(reader):
            data.writerow([i] + [row[k] for k in feats])
            if float(row[label]) == 1:
                events.writerow([i])
                n_events += 1
    return n_events


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--csv", required=True, help="path to creditcard.csv")
    ap.add_argument("--out", default="stretch-out", help="output directory")
    ap.add_argument("--combiner", default="average", choices=("average", "ffn"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    src = Path(args.csv)
    if not src.is_file():
        print(f"{src}: not found (download the credit-card fraud table first)", file=sys.stderr)
        return 2
    out = Path(args.out)
    n = convert(src, out / "data")
    print(f"converted {src}: {n} fraud events")
    code = cli_main([
        "fit", "--dataset", str(out / "data" / "dataset.csv"),
        "--events", str(out / "data" / "events.csv"),
        "--width", "2", "--width-events", "1", "--combiner", args.combiner,
        "--seed", str(args.seed), "--output-dir", str(out / "run"),
    ])
    if code == 0:
        m = json.loads((out / "run" / "metrics.json").read_text())
        print(f"precision {m['precision']:.4f}  recall {m['recall']:.4f}  f1 {m['f1']:.4f}")
    return code


if __name__ == "__main__":
    sys.exit(main())
