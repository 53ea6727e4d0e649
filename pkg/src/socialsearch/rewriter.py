"""Social query rewriting with a budgeted per-prefix linear model.

A searcher's candidate connections are split into prefix classes, scored by
a linear model over the five social features, and the top ``t_p`` of each
class become ``involves:`` / ``authored-by:`` / ``group-of:`` / ``page-of:``
atoms OR-ed together and AND-ed onto the keyword expression.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import NodeKind, SocialGraph, social_features
from .index import InvertedIndex, Term, tokenize
from .query import And, Or, SExpr, TermNode, cost_of

log = logging.getLogger(__name__)

N_SOCIAL_FEATURES = 5


class PrefixClass(enum.IntEnum):
    INVOLVES = 0
    AUTHORED_BY = 1
    GROUP_OF = 2
    PAGE_OF = 3

    @property
    def prefix(self) -> str:
        return ("involves", "authored-by", "group-of", "page-of")[self]

    @classmethod
    def from_prefix(cls, s: str) -> PrefixClass:
        return {"involves": cls.INVOLVES, "authored-by": cls.AUTHORED_BY,
                "group-of": cls.GROUP_OF, "page-of": cls.PAGE_OF}[s]


_CLASS_OF_KIND = {
    NodeKind.PERSON: PrefixClass.AUTHORED_BY,
    NodeKind.GROUP: PrefixClass.GROUP_OF,
    NodeKind.PAGE: PrefixClass.PAGE_OF,
}


class NoConnections(Exception):
    """Rewriting kept no social atoms; the caller may fall back to keyword-only search."""


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Candidate:
    prefix: PrefixClass
    entity: int
    features: np.ndarray

    def atom(self) -> TermNode:
        return TermNode(Term(self.prefix.prefix, str(self.entity)))


def _default_weights() -> dict[PrefixClass, np.ndarray]:
    # social coefficient only, zero bias
    w = np.zeros(N_SOCIAL_FEATURES + 1)
    w[4] = 1.0
    return {p: w.copy() for p in PrefixClass}


@dataclass
class RewriteModel:
    """Per-class weights (5 features then bias) and keep-thresholds."""

    weights: dict[PrefixClass, np.ndarray] = field(default_factory=_default_weights)
    thresholds: dict[PrefixClass, int] = field(default_factory=lambda: {p: 0 for p in PrefixClass})

    def __post_init__(self):
        for p in PrefixClass:
            w = np.asarray(self.weights[p], dtype=np.float64)
            if w.shape != (N_SOCIAL_FEATURES + 1,) or not np.all(np.isfinite(w)):
                raise ValueError(f"bad weights for {p.name}: {w}")
            self.weights[p] = w
            if self.thresholds.get(p, 0) < 0:
                raise ValueError(f"negative threshold for {p.name}")
            self.thresholds[p] = int(self.thresholds.get(p, 0))

    def with_thresholds(self, thresholds: dict[PrefixClass, int]) -> RewriteModel:
        return RewriteModel({p: w.copy() for p, w in self.weights.items()}, dict(thresholds))

    def score(self, c: Candidate) -> float:
        w = self.weights[c.prefix]
        return float(c.features @ w[:N_SOCIAL_FEATURES] + w[N_SOCIAL_FEATURES])

    def to_dict(self) -> dict:
        return {
            p.prefix: {"weights": self.weights[p].tolist(), "threshold": self.thresholds[p]}
            for p in PrefixClass
        }

    @classmethod
    def from_dict(cls, d: dict) -> RewriteModel:
        return cls(
            {PrefixClass.from_prefix(k): np.array(v["weights"]) for k, v in d.items()},
            {PrefixClass.from_prefix(k): int(v["threshold"]) for k, v in d.items()},
        )


def uniform(t: int) -> dict[PrefixClass, int]:
    return {p: t for p in PrefixClass}


# -- candidate enumeration and rewriting -----------------------------------


def candidates(g: SocialGraph, u: int, now: int) -> list[Candidate]:
    """The searcher itself (as ``involves``) plus every 1-degree entity connection."""
    g.require(u, NodeKind.PERSON)
    out = [Candidate(PrefixClass.INVOLVES, u, social_features(g, u, u, now))]
    for e in sorted(g.neighbor_entities(u) - {u}):
        out.append(Candidate(_CLASS_OF_KIND[g.nodes[e]], e, social_features(g, u, e, now)))
    return out


def select(cands: list[Candidate], model: RewriteModel) -> list[Candidate]:
    """Top ``t_p`` candidates per class, classes in enum order, descending score, ties by id."""
    by_class = defaultdict(list)
    for c in cands:
        by_class[c.prefix].append(c)
    kept = []
    for p in PrefixClass:
        t = model.thresholds[p]
        if t == 0:
            continue
        ranked = sorted(by_class[p], key=lambda c: (-model.score(c), c.entity))
        kept.extend(ranked[:t])
    return kept


def rewrite_candidates(cands: list[Candidate], keyword_expr: SExpr, model: RewriteModel) -> SExpr:
    kept = select(cands, model)
    if not kept:
        raise NoConnections("no social connections kept under the current thresholds")
    return And((keyword_expr, Or(tuple(c.atom() for c in kept))))


def rewrite(g: SocialGraph, u: int, keyword_expr: SExpr, model: RewriteModel, now: int) -> SExpr:
    """``(and keyword_expr (or <kept social atoms>))``; raises ``NoConnections`` when nothing is kept."""
    return rewrite_candidates(candidates(g, u, now), keyword_expr, model)


def keyword_query(query: str) -> SExpr:
    """OR of the query's text tokens (raises ValueError for a token-free query)."""
    toks = list(dict.fromkeys(tokenize(query)))
    if not toks:
        raise ValueError(f"query {query!r} has no tokens")
    return Or(tuple(TermNode(Term.text(t)) for t in toks))


# -- ground truth ----------------------------------------------------------


@dataclass(frozen=True)
class GroundTruthRow:
    query: str
    searcher: int
    result_doc: int
    source_entity: int
    prefix: PrefixClass
    features: tuple
    label: int

    def to_line(self) -> str:
        feats = "\t".join(repr(float(f)) for f in self.features)
        return "\t".join([
            self.query.replace("\t", " "), str(self.searcher), str(self.result_doc),
            str(self.source_entity), self.prefix.prefix, feats, str(self.label),
        ])

    @classmethod
    def from_line(cls, line: str) -> GroundTruthRow:
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 11:
            raise ValueError(f"expected 11 fields, got {len(parts)}")
        return cls(
            parts[0], int(parts[1]), int(parts[2]), int(parts[3]), PrefixClass.from_prefix(parts[4]),
            tuple(float(x) for x in parts[5:10]), int(parts[10]),
        )


def anonymize(rows: list[GroundTruthRow]) -> list[GroundTruthRow]:
    """Replace searcher/doc/entity ids by surrogates numbered in order of first appearance.

    Per-session grouping survives; raw identifiers do not.
    """
    maps = ({}, {}, {})

    def sub(m, x):
        return m.setdefault(x, len(m))

    return [
        GroundTruthRow(
            r.query, sub(maps[0], r.searcher), sub(maps[1], r.result_doc), sub(maps[2], r.source_entity),
            r.prefix, r.features, r.label,
        )
        for r in rows
    ]


def write_rows(rows, path, anonymized: bool = False) -> None:
    if anonymized:
        rows = anonymize(rows)
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(r.to_line() + "\n")


def read_rows(path) -> list[GroundTruthRow]:
    rows = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append(GroundTruthRow.from_line(line))
        except ValueError as exc:
            raise ValueError(f"{path}:{n}: {exc}") from exc
    return rows


# -- training and evaluation -----------------------------------------------


def train_weights(rows: list[GroundTruthRow], ridge: float = 1e-3) -> dict[PrefixClass, np.ndarray]:
    """Per-class ridge regression of the 0/1 label on the social features.

    Solves ``(X'X + ridge*D) w = X'y`` where ``D`` penalises every weight but
    the bias. Classes with no rows keep zero weights. Rows are put in a
    canonical order first so the result does not depend on input order.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    by_class = defaultdict(list)
    for r in rows:
        by_class[r.prefix].append((tuple(r.features), r.label))
    penalty = np.diag([1.0] * N_SOCIAL_FEATURES + [0.0])
    out = {}
    for p in PrefixClass:
        data = sorted(by_class.get(p, ()))
        if not data:
            out[p] = np.zeros(N_SOCIAL_FEATURES + 1)
            continue
        X = np.array([f + (1.0,) for f, _ in data])
        y = np.array([lbl for _, lbl in data], dtype=np.float64)
        A = X.T @ X + ridge * penalty
        if ridge == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
            raise SingularSystemError(f"singular normal equations for {p.name}; use ridge > 0")
        out[p] = np.linalg.solve(A, X.T @ y)
    return out


def _groups(rows):
    by_session = defaultdict(list)
    for r in rows:
        by_session[(r.query, r.searcher)].append(r)
    return by_session


def recall_at_t(rows: list[GroundTruthRow], weights: dict[PrefixClass, np.ndarray], t: dict[PrefixClass, int]) -> float:
    """Fraction of ideal rows whose source entity ranks in the top ``t_p`` of its class.

    Rows are grouped per (query, searcher); the competing candidates of an
    ideal row are the group's rows of the same prefix class.
    """
    if not rows:
        raise ValueError("recall_at_t needs at least one row")
    hits = total = 0
    for group in _groups(rows).values():
        seen = {}
        for r in group:
            seen.setdefault((r.prefix, r.source_entity), r)
        cands = list(seen.values())
        for ideal in (r for r in group if r.label == 1):
            total += 1
            tp = t.get(ideal.prefix, 0)
            if tp <= 0:
                continue
            w = weights[ideal.prefix]

            def score(r):
                return float(np.dot(r.features, w[:N_SOCIAL_FEATURES]) + w[N_SOCIAL_FEATURES])

            same = sorted((c for c in cands if c.prefix == ideal.prefix), key=lambda c: (-score(c), c.source_entity))
            rank = next(i for i, c in enumerate(same) if c.source_entity == ideal.source_entity)
            hits += rank < tp
    if total == 0:
        raise ValueError("no ideal (label 1) rows")
    return hits / total


# -- threshold sweep -------------------------------------------------------


@dataclass
class SweepResult:
    thresholds: dict[PrefixClass, int]
    uniform_t: int
    mean_cost: float
    uniform_costs: list[float]
    only_zero: bool = False


class _Workload:
    def __init__(self, workload, g, idx, now):
        self.items = []
        for searcher, kw in workload:
            cands = candidates(g, searcher, now)
            self.items.append((cands, kw))
        self.idx = idx
        self.caps = {p: 0 for p in PrefixClass}
        for cands, _ in self.items:
            counts = defaultdict(int)
            for c in cands:
                counts[c.prefix] += 1
            for p, n in counts.items():
                self.caps[p] = max(self.caps[p], n)

    def mean_cost(self, model: RewriteModel) -> float:
        total = 0
        for cands, kw in self.items:
            try:
                expr = rewrite_candidates(cands, kw, model)
            except NoConnections:
                continue  # nothing is executed without social atoms
            total += cost_of(self.idx, expr).postings_touched
        return total / len(self.items)


def workload_cost(workload, g, idx, model: RewriteModel, now: int) -> float:
    """Mean ``postings_touched`` of the rewritten queries over ``workload``."""
    return _Workload(workload, g, idx, now).mean_cost(model)


def sweep_tp(
    workload,
    g: SocialGraph,
    idx: InvertedIndex,
    weights: dict[PrefixClass, np.ndarray],
    budget: float,
    now: int,
    rows: list[GroundTruthRow] | None = None,
) -> SweepResult:
    """Largest thresholds whose mean workload cost stays within ``budget``.

    First pass: uniform ``t = 0, 1, 2, ...`` up to the largest per-class
    candidate count, keeping the last ``t`` within budget. Second pass: try
    raising single classes to ``t + 1`` in a fixed order (best marginal
    recall per unit cost when ``rows`` are given, else cheapest first) and
    stop at the first raise that breaks the budget. Both passes follow a
    path that does not depend on ``budget``, so a larger budget never
    lowers any threshold.
    """
    if not workload:
        raise ValueError("empty workload")
    if not budget > 0:
        raise ValueError("budget must be > 0")
    wl = _Workload(workload, g, idx, now)
    base = RewriteModel({p: np.asarray(w, dtype=np.float64) for p, w in weights.items()})
    t_max = max(wl.caps.values())

    costs = []
    best = 0
    for t in range(t_max + 1):
        c = wl.mean_cost(base.with_thresholds(uniform(t)))
        costs.append(c)
        if c <= budget:
            best = t
        else:
            break
    thresholds = uniform(best)
    cost = costs[best]

    bumps = []
    for p in PrefixClass:
        if wl.caps[p] > best:
            trial = dict(thresholds)
            trial[p] = best + 1
            dc = wl.mean_cost(base.with_thresholds(trial)) - cost
            if rows:
                dr = recall_at_t(rows, base.weights, trial) - recall_at_t(rows, base.weights, thresholds)
                key = (-(dr / dc) if dc > 0 else -math.inf, int(p))
            else:
                key = (dc, int(p))
            bumps.append((key, p, dc))
    for _, p, _ in sorted(bumps, key=lambda b: b[0]):
        trial = dict(thresholds)
        trial[p] = best + 1
        c = wl.mean_cost(base.with_thresholds(trial))
        if c > budget:
            break
        thresholds, cost = trial, c

    only_zero = all(v == 0 for v in thresholds.values())
    if only_zero:
        log.warning("no threshold above zero fits budget %s", budget)
    return SweepResult(thresholds, best, cost, costs, only_zero)
