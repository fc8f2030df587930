"""Escape to infinity on growing boxes: repulsive compact a, no b, lambda = 1e3.

    python3 scripts/escape_ladder.py [--sizes 10 20 40] [--h 0.25]
"""
import argparse
from dataclasses import replace

from nehari import BoxGrid, CoefficientProfile, ProblemParams
from nehari.ground_state import (SolverOptions, detect_escape, discretization_budget, minimize,
                                 reference_level, scan_initial)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=float, nargs="+", default=[10.0, 20.0, 40.0])
    ap.add_argument("--h", type=float, default=0.25)
    ap.add_argument("--lam", type=float, default=1000.0)
    args = ap.parse_args()
    P = ProblemParams(2, 3.0, lam=args.lam)
    a, b = CoefficientProfile.bump(1.0, 1.0), CoefficientProfile.zero()
    rs = []
    for L in args.sizes:
        g = BoxGrid.from_spacing(2, L, args.h)
        r = minimize(P, a, b, g, replace(SolverOptions(), init=scan_initial(P, a, b, g)))
        rs.append(r)
        print(f"L={L:<5g} m={r.m:.10f} m - m_inf(grid)={r.m - reference_level(P, g):.2e} "
              f"boundary_mass={r.boundary_mass:.2e} barycenter={[round(x, 2) for x in r.barycenter]}")
    g = rs[-1].u.grid
    print(detect_escape(rs, reference_level(P, g), 3 * discretization_budget(P, g)))


if __name__ == "__main__":
    main()
