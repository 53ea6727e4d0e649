"""``socialsearch`` command line: generate, index, search, train-rewriter, sweep-tp, train-ranker, ablate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .corpus import CorpusError, read_clicks, read_corpus, write_clicks, write_corpus
from .graph import GraphError, NodeKind
from .index import InvertedIndex, InvertedIndexError
from .query import ParseError, execute, pretty, render
from .ranker.checkpoint import CheckpointError
from .rewriter import (
    NoConnections,
    PrefixClass,
    RewriteModel,
    keyword_query,
    read_rows,
    recall_at_t,
    rewrite,
    sweep_tp,
    train_weights,
    uniform,
    write_rows,
)

log = logging.getLogger("socialsearch")


class UsageError(Exception):
    """Bad input from the user; exit code 2."""


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_float(s: str) -> float:
    v = float(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    return p


def _load_corpus(path):
    g, docs, header = read_corpus(_existing(path))
    return g, docs, header


def _rows(path):
    try:
        return read_rows(_existing(path))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _thresholds(text: str) -> dict[PrefixClass, int]:
    """``5`` for uniform, or ``involves=1,authored-by=5,...``."""
    if "=" not in text:
        return uniform(int(text))
    out = {p: 0 for p in PrefixClass}
    for part in text.split(","):
        k, v = part.split("=")
        out[PrefixClass.from_prefix(k.strip())] = int(v)
    return out


# -- commands --------------------------------------------------------------


def cmd_generate(args) -> int:
    from .eval.synthetic import SyntheticConfig, generate

    names = {f.name for f in fields(SyntheticConfig)}
    cfg = SyntheticConfig(**{k: v for k, v in vars(args).items() if k in names and v is not None})
    data = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(out / "corpus.jsonl", data.graph, data.docs, {"now": data.now, "seed": cfg.seed})
    write_clicks(out / "clicks.tsv", data.clicks)
    write_rows(data.ground_truth, out / "ground_truth.tsv")
    with open(out / "workload.tsv", "w", encoding="utf-8") as fh:
        for s in data.sessions:
            fh.write(f"{s.searcher}\t{s.query}\n")
    cut = data.split_time()
    first_eval = next((s.session_id for s in data.sessions if s.time >= cut), len(data.sessions))
    (out / "split.json").write_text(json.dumps({"first_eval_session": first_eval}, sort_keys=True) + "\n")
    print(f"persons={cfg.persons} postings={len(data.docs)} sessions={len(data.sessions)} "
          f"clicks={len(data.clicks)} ground_truth_rows={len(data.ground_truth)} -> {out}")
    return 0


def cmd_index(args) -> int:
    _, docs, _ = _load_corpus(args.corpus)
    idx = InvertedIndex.build(docs)
    idx.save(args.out)
    print(f"docs={idx.num_docs} terms={len(idx.terms())} -> {args.out}")
    return 0


def _bm25_order(idx, query, docs):
    from .ranker.features import tr_dense

    scored = [(d, tr_dense(idx, query, d).bm25) for d in docs]
    return sorted(scored, key=lambda x: (-x[1], x[0].id))


def cmd_search(args) -> int:
    g, docs, header = _load_corpus(args.corpus)
    idx = InvertedIndex.load(_existing(args.index))
    if args.searcher not in g.nodes or g.nodes[args.searcher] is not NodeKind.PERSON:
        raise UsageError(f"unknown searcher id {args.searcher}")
    now = int(args.now if args.now is not None else header.get("now", 0))
    try:
        kw = keyword_query(args.query)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    expr = kw
    if not args.no_rewrite:
        model = RewriteModel(thresholds=uniform(10**9))
        if args.rewriter:
            model = RewriteModel.from_dict(json.loads(_existing(args.rewriter).read_text()))
        try:
            expr = rewrite(g, args.searcher, kw, model, now)
        except NoConnections as exc:
            log.warning("%s; falling back to keyword-only search", exc)
    res = execute(idx, expr)
    by_id = {d.id: d for d in docs}
    hits = [by_id[i] for i in res.doc_ids.tolist()]
    if args.model:
        from .ranker.checkpoint import load
        from .ranker.training import rank

        ranked = rank(load(_existing(args.model)), idx, g, args.query, args.searcher, hits, now)
    else:
        ranked = _bm25_order(idx, args.query, hits)
    print(pretty(expr))
    print(f"# {render(expr)}")
    print(f"# results={len(hits)} postings_touched={res.cost.postings_touched} terms_opened={res.cost.terms_opened}")
    for i, (d, s) in enumerate(ranked[: args.top], 1):
        print(f"{i}\t{d.id}\t{s:.6f}\t{d.title}")
    return 0


def cmd_train_rewriter(args) -> int:
    rows = _rows(args.rows)
    if not rows:
        raise UsageError("no ground-truth rows")
    weights = train_weights(rows, ridge=args.ridge)
    try:
        t = _thresholds(args.t)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad --t {args.t!r}: {exc}") from None
    model = RewriteModel(weights, t)
    Path(args.out).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")
    for p in PrefixClass:
        print(f"{p.prefix:<12} " + " ".join(f"{w:+.6f}" for w in weights[p]))
    print(f"recall_at_t={recall_at_t(rows, weights, t):.6f} -> {args.out}")
    return 0


def _read_workload(path):
    out = []
    with open(_existing(path), encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                u, q = line.rstrip("\n").split("\t", 1)
                out.append((int(u), keyword_query(q)))
            except ValueError as exc:
                raise UsageError(f"{path}:{n}: {exc}") from None
    return out


def cmd_sweep_tp(args) -> int:
    if not args.budget > 0:
        raise UsageError("--budget must be > 0")
    rows = None
    if args.example:
        from .demo import sweep_example

        workload, g, idx = sweep_example()
        weights = RewriteModel().weights
        now = 0
    else:
        if not (args.corpus and args.workload):
            raise UsageError("sweep-tp needs --example or both --corpus and --workload")
        g, docs, header = _load_corpus(args.corpus)
        idx = InvertedIndex.load(_existing(args.index)) if args.index else InvertedIndex.build(docs)
        workload = _read_workload(args.workload)
        if args.limit:
            workload = workload[: args.limit]
        model = RewriteModel.from_dict(json.loads(_existing(args.rewriter).read_text())) if args.rewriter else RewriteModel()
        weights = model.weights
        now = int(header.get("now", 0))
        if args.rows:
            rows = _rows(args.rows)
    for u, _ in workload:
        if u not in g.nodes or g.nodes[u] is not NodeKind.PERSON:
            raise UsageError(f"unknown searcher id {u} in workload")
    res = sweep_tp(workload, g, idx, weights, args.budget, now, rows=rows)
    for t, c in enumerate(res.uniform_costs):
        print(f"t={t} mean_cost={c:g}")
    print(f"t* = {res.uniform_t}")
    print("thresholds " + " ".join(f"{p.prefix}={v}" for p, v in res.thresholds.items()) + f" mean_cost={res.mean_cost:g}")
    if args.out:
        Path(args.out).write_text(json.dumps(RewriteModel(weights, res.thresholds).to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def _load_clicks(args):
    g, docs, header = _load_corpus(args.corpus)
    idx = InvertedIndex.build(docs)
    records = read_clicks(_existing(args.clicks), {d.id: d for d in docs}, idx)
    if not records:
        raise UsageError("empty click log")
    return records


def cmd_train_ranker(args) -> int:
    from .ranker.checkpoint import save
    from .ranker.model import AblationSetting, ModelConfig, TwoTowerModel
    from .ranker.training import TrainConfig, train

    records = _load_clicks(args)
    model = TwoTowerModel(ModelConfig(setting=AblationSetting.parse(args.setting)), seed=args.seed)
    trace = train(model, records, TrainConfig(lr=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed))
    save(model, args.out)
    print("loss_trace=" + ",".join(f"{x:.6f}" for x in trace) + f" -> {args.out}")
    return 0


def cmd_ablate(args) -> int:
    from .eval.ablation import ALL_SETTINGS, run_ablations
    from .ranker.model import AblationSetting
    from .ranker.training import TrainConfig

    records = _load_clicks(args)
    if args.settings == "all":
        settings = list(ALL_SETTINGS)
    else:
        try:
            settings = [AblationSetting.parse(s) for s in args.settings.split(",")]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    split_path = Path(args.split) if args.split else Path(args.clicks).with_name("split.json")
    if split_path.exists():
        first_eval = int(json.loads(split_path.read_text())["first_eval_session"])
    else:
        sids = sorted({r.session_id for r in records})
        first_eval = sids[int(len(sids) * (1 - args.eval_fraction))]
    train_recs = [r for r in records if r.session_id < first_eval]
    eval_recs = [r for r in records if r.session_id >= first_eval]
    if not train_recs or not eval_recs:
        raise UsageError("train/eval split leaves one side empty")
    rep = run_ablations(train_recs, eval_recs, settings, seed=args.seed,
                        train_config=TrainConfig(lr=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed))
    print(rep.table())
    print()
    print(rep.key_values())
    return 0


# -- wiring ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .eval.synthetic import SyntheticConfig

    d = SyntheticConfig()
    ap = argparse.ArgumentParser(prog="socialsearch", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus, click log and ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    for name in ("persons", "groups", "pages", "postings", "vocab", "queries", "sessions", "topics"):
        p.add_argument(f"--{name}", type=_positive, default=getattr(d, name))
    p.add_argument("--a", type=float, default=d.a, help="text-match weight of the click model")
    p.add_argument("--b", type=float, default=d.b, help="social-affinity weight of the click model")
    p.add_argument("--noise", type=_nonneg_float, default=d.noise)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("index", help="build and save the inverted index of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="rewrite, execute and rank one query")
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--searcher", type=int, required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--no-rewrite", action="store_true")
    p.add_argument("--rewriter", help="rewriter model JSON (default: keep every connection)")
    p.add_argument("--model", help="ranker checkpoint (default: BM25 order)")
    p.add_argument("--top", type=_positive, default=10)
    p.add_argument("--now", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("train-rewriter", help="fit per-prefix linear weights on ground-truth rows")
    p.add_argument("--rows", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ridge", type=_nonneg_float, default=1e-3)
    p.add_argument("--t", default="5", help="thresholds: N or prefix=N,...")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_rewriter)

    p = sub.add_parser("sweep-tp", help="largest per-prefix thresholds under a mean cost budget")
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--example", action="store_true", help="use the built-in 100/180/270 workload")
    p.add_argument("--corpus")
    p.add_argument("--index")
    p.add_argument("--workload")
    p.add_argument("--rewriter")
    p.add_argument("--rows", help="ground-truth rows to order per-class raises by recall gain")
    p.add_argument("--limit", type=_positive)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep_tp)

    for name, func, helptext in (
        ("train-ranker", cmd_train_ranker, "train a two-tower ranker on a click log"),
        ("ablate", cmd_ablate, "run the six-way feature ablation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--corpus", required=True)
        p.add_argument("--clicks", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--lr", type=_nonneg_float, default=0.01)
        p.add_argument("--epochs", type=_positive, default=1)
        p.add_argument("--batch-size", type=_positive, default=512)
        p.set_defaults(func=func)
        if name == "train-ranker":
            p.add_argument("--out", required=True)
            p.add_argument("--setting", default="ctr+tr+ngram")
        else:
            p.add_argument("--settings", default="all")
            p.add_argument("--split", help="split.json written by generate (default: next to the click log)")
            p.add_argument("--eval-fraction", type=float, default=1 / 7)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CorpusError, InvertedIndexError, CheckpointError, ParseError, GraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
