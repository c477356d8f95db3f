"""Finite-difference check of the attention backward pass on the seeded fixture.

    python scripts/gradcheck_report.py --seed 8
"""

import argparse
import json

from panobev.gradcheck import check_pd_attention, gradcheck_fixture, kink_margin


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--step", type=float, default=1e-4)
    args = ap.parse_args()
    q, s, mask, feat, params, up = gradcheck_fixture(seed=args.seed)
    rep = check_pd_attention(q, s, mask, feat, params, up, h=args.step)
    rep["kink_margin"] = kink_margin(q, s, mask, feat, params)
    for name, g in rep["groups"].items():
        print(f"{name:>6}: max rel err {g['max_rel_error']:.3e} ({g['size']} entries)")
    print(json.dumps({"max_rel_error": rep["max_rel_error"], "kink_margin": rep["kink_margin"],
                      "pass": rep["max_rel_error"] <= 1e-4}))


if __name__ == "__main__":
    main()
