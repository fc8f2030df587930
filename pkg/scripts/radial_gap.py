"""Radial level m_{lambda,r} against the unconstrained box level for the slow-a configuration.

    python3 scripts/radial_gap.py [--lambdas 0 1 10 100 1000] [--out out/radial_gap.csv]
"""
import argparse
import csv
import os
from dataclasses import replace

from nehari import BoxGrid, CoefficientProfile, ProblemParams
from nehari.ground_state import SolverOptions, cached_limit, minimize, reference_level, scan_initial
from nehari.topology import radial_level

A = CoefficientProfile.exp(0.01, 0.25)
B = CoefficientProfile.bump(1.0, 1.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0, 1, 10, 100, 1000])
    ap.add_argument("--box", type=float, default=30.0)
    ap.add_argument("--out", default="out/radial_gap.csv")
    args = ap.parse_args()
    P = ProblemParams(2, 3.0)
    m_inf = cached_limit(P).m_inf
    rs = radial_level(P, A, B, args.lambdas)
    g = BoxGrid.from_spacing(2, args.box, 0.2)
    ref = reference_level(P, g)
    rows = []
    for lam, r in zip(args.lambdas, rs):
        Pl = P.with_lambda(lam)
        box = minimize(Pl, A, B, g, replace(SolverOptions(), init=scan_initial(Pl, A, B, g)))
        rows.append((lam, r.m, box.m, m_inf, ref))
        print(f"lambda={lam:<8g} m_radial={r.m:.5f} m_box={box.m:.5f}  (m_inf={m_inf:.5f}, box ref {ref:.5f})")
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "m_radial", "m_box", "m_inf", "m_inf_box"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
