"""Two-bump surface Psi_rho: S_rho, T_rho and the penalized B_0 estimate along a rho ladder.

Runs the (H4)+(H5) configuration at a saturated lambda.

    python3 scripts/level_chain.py [--lam 1] [--rho 3 4 5] [--out out/level_chain.csv]
"""
import argparse
import csv
import os

from nehari import BoxGrid, CoefficientProfile, ProblemParams
from nehari.ground_state import cached_limit
from nehari.topology import estimate_b0, psi_surface

A = CoefficientProfile.exp(1.0, 3.0)
B = CoefficientProfile.bump(0.1, 1.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--rho", type=float, nargs="+", default=[3.0, 4.0, 5.0])
    ap.add_argument("--h", type=float, default=0.2)
    ap.add_argument("--resolution", type=int, default=16)
    ap.add_argument("--out", default="out/level_chain.csv")
    args = ap.parse_args()
    P = ProblemParams(2, 3.0, lam=args.lam)
    lim = cached_limit(P)
    b0 = estimate_b0(P, A, B, BoxGrid.from_spacing(2, 12.0, args.h), limit=lim)
    print(f"B0 estimate (heuristic) = {b0.value:.6f}, |beta| = {b0.beta_norm:.1e}")
    rows = []
    for rho in args.rho:
        S = psi_surface(rho, P, A, B, lim, args.resolution, h=args.h, b0=b0.value)
        rows.append((rho, S.m_inf, S.s_rho, S.t_rho, S.two_m_inf, S.epsilon_rho, b0.value))
        print(f"rho={rho:<4g} m_inf={S.m_inf:.6f} S={S.s_rho:.6f} T={S.t_rho:.6f} 2m_inf={S.two_m_inf:.6f} "
              f"eps={S.epsilon_rho:.3e}  chain={'ok' if S.m_inf <= S.s_rho <= S.t_rho < S.two_m_inf else 'broken'}")
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "m_inf", "s_rho", "t_rho", "two_m_inf", "epsilon_rho", "b0_estimate"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
