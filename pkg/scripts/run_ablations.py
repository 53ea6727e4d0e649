"""Generate a synthetic corpus and print the six-way ranker ablation table.

    python3 scripts/run_ablations.py --seed 0
    python3 scripts/run_ablations.py --sessions 5000 --epochs 2 --settings ctr,ctr+ngram
"""

import argparse
import logging
import time

from socialsearch.eval.ablation import ALL_SETTINGS, run_ablations
from socialsearch.eval.synthetic import SyntheticConfig, generate
from socialsearch.ranker.model import AblationSetting
from socialsearch.ranker.training import TrainConfig


def main():
    d = SyntheticConfig()
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0, help="generator and training seed")
    ap.add_argument("--sessions", type=int, default=d.sessions)
    ap.add_argument("--postings", type=int, default=d.postings)
    ap.add_argument("--a", type=float, default=d.a)
    ap.add_argument("--b", type=float, default=d.b)
    ap.add_argument("--noise", type=float, default=d.noise)
    ap.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    ap.add_argument("--settings", default="all")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    t0 = time.perf_counter()
    data = generate(SyntheticConfig(seed=args.seed, sessions=args.sessions, postings=args.postings,
                                    a=args.a, b=args.b, noise=args.noise))
    train_recs, eval_recs = data.train_eval_split()
    print(f"generated {len(data.docs)} postings, {len(train_recs)} train / {len(eval_recs)} eval records "
          f"in {time.perf_counter() - t0:.0f}s")
    settings = ALL_SETTINGS if args.settings == "all" else [AblationSetting.parse(s) for s in args.settings.split(",")]
    rep = run_ablations(train_recs, eval_recs, settings, seed=args.seed,
                        train_config=TrainConfig(seed=args.seed, epochs=args.epochs))
    print(rep.table())
    print(f"total {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
