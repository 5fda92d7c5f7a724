"""Manufactured-solution refinement study for the full-order Burgers solver.

Exact solution u = (1 + sin(2t)/2)(1 + cos(pi x)/2) with matching forcing,
refined simultaneously in space and time.
"""
import argparse
import math

import numpy as np

from cpodnb.burgers import BurgersFOM, FomConfig
from cpodnb.ensemble import RandomInput, inner_product


def exact(t, x):
    return (1 + 0.5 * np.sin(2 * t)) * (1 + 0.5 * np.cos(np.pi * x))


def make_forcing(Re):
    def forcing(t, x):
        g, gt = 1 + 0.5 * np.sin(2 * t), np.cos(2 * t)
        phi = 1 + 0.5 * np.cos(np.pi * x)
        phix = -0.5 * np.pi * np.sin(np.pi * x)
        return gt * phi + g * 0.5 * np.pi ** 2 * np.cos(np.pi * x) / Re + g * g * phi * phix
    return forcing


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--Re", type=float, default=10.0)
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--levels", type=int, nargs="+", default=[16, 32, 64, 128, 256])
    args = ap.parse_args()

    prev = None
    for n in args.levels:
        cfg = FomConfig(Re=args.Re, M=n + 1, T=0.5, m=n, inlet_scale=1.0, theta=args.theta)
        fom = BurgersFOM(cfg)
        x = fom.grid.nodes
        u = fom.solve(RandomInput(exact(cfg.times, 0.0)), u0=exact(0.0, x),
                      forcing=make_forcing(args.Re), return_states=True)[-1]
        e = u - exact(cfg.T, x)
        err = math.sqrt(inner_product(e, e, fom.grid))
        order = "" if prev is None else f"{math.log2(prev / err):.3f}"
        print(f"n={n:>4}  L2 error {err:.3e}  order {order}")
        prev = err


if __name__ == "__main__":
    main()
