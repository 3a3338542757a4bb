#!/usr/bin/env python3
"""Generate the bundled synthetic datasets into data/.

Writes the 5300-point banana benchmark CSV and the two-room LiDAR scan
log (JSONL). Convert the scans to labeled points with:

    dgvi convert-lidar --in data/two_room_scans.jsonl --out data/two_room.csv
"""

import argparse
from pathlib import Path

from dgvi.data import save_labeled_csv, save_scans_jsonl
from dgvi.synth import make_banana_dataset, simulate_two_room_scans


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    banana = make_banana_dataset(5300, seed=args.seed)
    save_labeled_csv(banana, out / "banana.csv")
    print(f"wrote {len(banana)} points: {out / 'banana.csv'}")

    scans = simulate_two_room_scans(n_scans=180, beams_per_scan=45, seed=args.seed + 3)
    save_scans_jsonl(scans, out / "two_room_scans.jsonl")
    print(f"wrote {len(scans)} scans: {out / 'two_room_scans.jsonl'}")


if __name__ == "__main__":
    main()
