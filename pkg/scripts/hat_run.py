"""Hat-shaped strength with white noise, five heights; prints the label/height crosstab."""
import argparse
from pathlib import Path

from cpodnb.config import PipelineConfig
from cpodnb.pipeline import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-train", type=int, default=100)
    ap.add_argument("--n-test", type=int, default=50)
    ap.add_argument("--out", default="runs/hat")
    args = ap.parse_args()

    cfg = PipelineConfig(generator="hat", n_train=args.n_train, n_test=args.n_test,
                         master_seed=args.seed)
    summary = run_all(cfg, Path(args.out))
    heights = cfg.hat.heights
    for r in summary["results"]:
        if r["status"] != "ok":
            continue
        print(f"K={r['K']}  E_true={r['errors_true']['E']:.6f}  E_pred={r['errors_predicted']['E']:.6f}"
              f"  rate={r['error_rate']}")
        print("   label | " + " ".join(f"a={h:<4}" for h in heights))
        for k, row in enumerate(r["height_crosstab"], start=1):
            print(f"   {k:>5} | " + " ".join(f"{c:>6}" for c in row))


if __name__ == "__main__":
    main()
