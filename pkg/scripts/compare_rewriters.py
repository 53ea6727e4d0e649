"""Recall of the Recency, SocialCoef and trained linear rewriters, averaged over seeds.

    python3 scripts/compare_rewriters.py --seeds 0 1 2 3 4 --t 1 3 5
"""

import argparse

import numpy as np

from socialsearch.eval.ablation import compare_rewriters
from socialsearch.eval.synthetic import SyntheticConfig, generate
from socialsearch.rewriter import uniform


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--t", type=int, nargs="+", default=[1, 3, 5], help="uniform thresholds to report")
    ap.add_argument("--queries", type=int, default=SyntheticConfig.queries)
    ap.add_argument("--ridge", type=float, default=1e-3)
    args = ap.parse_args()

    results = {t: [] for t in args.t}
    for seed in args.seeds:
        data = generate(SyntheticConfig(seed=seed, queries=args.queries), with_clicks=False)
        for t in args.t:
            r = compare_rewriters(data.ground_truth, uniform(t), ridge=args.ridge)
            results[t].append(r)
            print(f"seed={seed} t={t} " + " ".join(f"{k}={100 * v:.2f}%" for k, v in r.items()))

    print()
    print(f"{'t':>3} {'Recency':>9} {'SocialCoef':>11} {'LinearModel':>12}")
    for t, rows in results.items():
        m = {k: 100 * np.mean([r[k] for r in rows]) for k in rows[0]}
        print(f"{t:>3} {m['Recency']:>8.2f}% {m['SocialCoef']:>10.2f}% {m['LinearModel']:>11.2f}%")


if __name__ == "__main__":
    main()
