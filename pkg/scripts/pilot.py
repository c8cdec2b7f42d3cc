"""Freeze the scale windows and histogram bins used by the perturbation checks.

Runs the perturbation process at depth 5 over 20 seeds, scores every
candidate window rule and writes the chosen ones (plus the full candidate
table) to src/fiberdim/data/pilot_thresholds.json.

    python3 scripts/pilot.py [--out PATH]
"""

import argparse
import json
import os
import tempfile

from fiberdim import calibrate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(calibrate.DEFAULT_PATH))
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    doc = calibrate.run_pilot(depth=args.depth, seeds=range(args.seeds))
    os.makedirs(os.path.dirname(args.out), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(args.out), suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, args.out)
    print(f"fiber window {doc['fiber_window']}, graph window {doc['graph_window']}, bins {doc['bins']}")


if __name__ == "__main__":
    main()
