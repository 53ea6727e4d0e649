"""ROC-AUC and NDCG over click labels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class MetricReport:
    roc_auc: float
    ndcg: float
    n_sessions: int
    n_records: int
    n_sessions_skipped: int = 0


def roc_auc(scores, labels) -> float:
    """P(random positive outscores random negative), ties counting one half.

    Uses the rank-sum statistic with average ranks for ties.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative label")
    # average ranks are multiples of 0.5, so the numerator is exact
    r = rankdata(s, method="average")
    u = r[y].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def roc_auc_pairs(scores, labels) -> float:
    """Brute-force double loop over every (positive, negative) pair."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    if not pos or not neg:
        raise ValueError("roc_auc needs at least one positive and one negative label")
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def session_ndcg(scores, labels) -> float | None:
    """Binary-gain NDCG of one session; ``None`` when it has no positive."""
    labels = list(labels)
    n_pos = sum(1 for l in labels if l)
    if n_pos == 0:
        return None
    order = sorted(range(len(labels)), key=lambda i: -scores[i])  # stable: ties keep input order
    dcg = sum(1.0 / math.log2(rank + 2) for rank, i in enumerate(order) if labels[i])
    idcg = sum(1.0 / math.log2(rank + 2) for rank in range(n_pos))
    return dcg / idcg


def ndcg(sessions) -> float:
    """Mean NDCG over sessions given as lists of (score, label); sessions without positives are skipped."""
    vals = _session_values(sessions)
    if not vals:
        raise ValueError("no session has a positive label")
    return float(np.mean(vals))


def _session_values(sessions) -> list[float]:
    vals = []
    for sess in sessions:
        if not sess:
            raise ValueError("empty session")
        v = session_ndcg([s for s, _ in sess], [l for _, l in sess])
        if v is not None:
            vals.append(v)
    return vals


def group_sessions(session_ids, scores, labels) -> list[list[tuple]]:
    """Split flat arrays into per-session (score, label) lists, sessions in first-seen order."""
    groups: dict = {}
    for sid, s, l in zip(np.asarray(session_ids).tolist(), np.asarray(scores).tolist(), np.asarray(labels).tolist()):
        groups.setdefault(sid, []).append((s, int(l)))
    return list(groups.values())


def report(session_ids, scores, labels) -> MetricReport:
    sessions = group_sessions(session_ids, scores, labels)
    vals = _session_values(sessions)
    return MetricReport(
        roc_auc=roc_auc(scores, labels),
        ndcg=float(np.mean(vals)) if vals else float("nan"),
        n_sessions=len(sessions),
        n_records=len(labels),
        n_sessions_skipped=len(sessions) - len(vals),
    )
