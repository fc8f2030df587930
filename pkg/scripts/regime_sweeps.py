"""Fast-a versus slow-a desk configurations: lambda ladders on a box ladder and lambda*.

    NEHARI_WORKERS=2 python3 scripts/regime_sweeps.py [--h 0.2] [--out out/regimes]
"""
import argparse
import json
import math
import os
import time

from nehari import BoxGrid, CoefficientProfile, ProblemParams, classify_hypotheses
from nehari.sweep import audit_map_properties, estimate_lambda_star, lambda_sweep

CONFIGS = {
    "h3": (CoefficientProfile.bump(1.0, 1.0), CoefficientProfile.exp(1.0, 0.5), 0.81),
    "h4": (CoefficientProfile.exp(0.01, 0.25), CoefficientProfile.bump(1.0, 1.0), 0.25),
    "h45": (CoefficientProfile.exp(1.0, 3.0), CoefficientProfile.bump(0.1, 1.0), 0.81),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=0.2)
    ap.add_argument("--sizes", type=float, nargs="+", default=[22.5, 30.0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0, 1, 10, 100, 1000])
    ap.add_argument("--only", nargs="*", default=sorted(CONFIGS))
    ap.add_argument("--out", default="out/regimes")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    P = ProblemParams(2, 3.0)
    ladder = [BoxGrid.from_spacing(2, L, args.h) for L in args.sizes]
    for name in args.only:
        a, b, sigma = CONFIGS[name]
        rep = classify_hypotheses(a, b, P, sigma)
        t = time.time()
        S = lambda_sweep(P, a, b, args.lambdas, ladder)
        S.lambda_star = estimate_lambda_star(S, 3 * S.delta_h)
        dt = time.time() - t
        audit = audit_map_properties(S)
        print(f"[{name}] regime={rep.regime} h5={rep.h5} m_inf(grid)={S.m_inf:.6f} delta_h={S.delta_h:.4f}")
        for e in S.entries:
            print(f"   lambda={e.lam:<8g} m={e.m:.6f} levels={[round(x, 6) for x in e.levels]} "
                  f"{e.escape.label:<12} ({e.source})")
        print(f"   lambda*: {S.lambda_star}   monotone={audit.ok}   {dt:.0f}s")
        S.to_csv(os.path.join(args.out, f"{name}_sweep.csv"))
        with open(os.path.join(args.out, f"{name}_summary.json"), "w") as fh:
            json.dump({"hypotheses": rep.to_dict(), "sweep": S.summary(), "audit": audit.to_dict(),
                       "seconds": dt}, fh, indent=2, sort_keys=True, default=lambda x: None if math.isnan(x) else x)


if __name__ == "__main__":
    main()
