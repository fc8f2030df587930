"""Limit soliton: m_inf, peak and decay rate under grid refinement, for N = 1, 2, 3.

    python3 scripts/limit_convergence.py [--out out/limit_convergence.csv]
"""
import argparse
import csv
import math
import time

from nehari import ProblemParams
from nehari.limit_problem import default_radial_grid, solve_limit


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/limit_convergence.csv")
    args = ap.parse_args()
    rows = []
    for N in (1, 2, 3):
        P = ProblemParams(N, 3.0)
        prev = None
        for h in (0.04, 0.02, 0.01, 0.005):
            t = time.time()
            st = solve_limit(P, default_radial_grid(P, h=h))
            dt = time.time() - t
            order = math.nan
            if prev is not None and len(rows) >= 2 and rows[-2][0] == N:
                d1 = abs(rows[-2][2] - rows[-1][2])
                d2 = abs(rows[-1][2] - st.m_inf)
                order = math.log2(d1 / d2) if d2 > 0 else math.nan
            rows.append((N, h, st.m_inf, st.peak, st.rate_fit, st.big_m, order, dt))
            prev = st
            print(f"N={N} h={h:<6} m_inf={st.m_inf:.8f} peak={st.peak:.7f} rate={st.rate_fit:.5f} "
                  f"order={order:.2f} ({dt:.2f}s)")
    import os
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "h", "m_inf", "peak", "rate", "big_m", "observed_order", "seconds"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
