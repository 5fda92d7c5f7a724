"""Run the trig desk experiment over several master seeds and tabulate E_K.

    python scripts/desk_trend.py --seeds 0 1 2 --out runs/desk
"""
import argparse
import json
from pathlib import Path

from cpodnb.config import PipelineConfig
from cpodnb.pipeline import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--config", help="optional JSON config; seeds override master_seed")
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()

    base = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    print(f"{'seed':>4} {'K':>2} {'d':>3} {'E_true':>10} {'E_pred':>10} {'rate':>7}")
    for seed in args.seeds:
        summary = run_all(base.with_seed(seed), Path(args.out) / f"seed{seed}")
        for r in summary["results"]:
            if r["status"] != "ok":
                print(f"{seed:>4} {r['K']:>2}  failed: {r.get('reason', '')}")
                continue
            rate = "-" if r["error_rate"] is None else f"{r['error_rate']:.3f}"
            print(f"{seed:>4} {r['K']:>2} {r['dims'][0]:>3} {r['errors_true']['E']:>10.6f} "
                  f"{r['errors_predicted']['E']:>10.6f} {rate:>7}")
    print(json.dumps({"out": str(args.out)}))


if __name__ == "__main__":
    main()
