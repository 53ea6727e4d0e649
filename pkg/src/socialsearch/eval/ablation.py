"""Six-way ranker ablation and the rewriter baseline comparison."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..ranker.data import EncodedRecords
from ..ranker.model import AblationSetting, ModelConfig, TwoTowerModel
from ..ranker.training import TrainConfig, predict, train
from ..rewriter import GroundTruthRow, PrefixClass, recall_at_t, train_weights
from .metrics import MetricReport, report

log = logging.getLogger(__name__)

ALL_SETTINGS = tuple(AblationSetting)
TABLE_ORDER = (
    AblationSetting.CTR_ONLY,
    AblationSetting.TR_ONLY,
    AblationSetting.CTR_TR,
    AblationSetting.NGRAM_ONLY,
    AblationSetting.CTR_NGRAM,
    AblationSetting.CTR_TR_NGRAM,
)


@dataclass
class AblationRow:
    setting: AblationSetting
    metrics: MetricReport
    loss_trace: list[float] = field(default_factory=list)
    seconds: float = 0.0


@dataclass
class AblationReport:
    rows: list[AblationRow]

    def __getitem__(self, setting: AblationSetting) -> MetricReport:
        for r in self.rows:
            if r.setting is setting:
                return r.metrics
        raise KeyError(setting)

    def table(self) -> str:
        head = f"{'setting':<14} {'ROC-AUC':>8} {'NDCG':>8} {'sessions':>9} {'records':>8}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            m = r.metrics
            lines.append(f"{r.setting.value:<14} {100 * m.roc_auc:>7.2f}% {100 * m.ndcg:>7.2f}% {m.n_sessions:>9d} {m.n_records:>8d}")
        return "\n".join(lines)

    def key_values(self) -> str:
        out = []
        for r in self.rows:
            m = r.metrics
            k = r.setting.value
            out += [
                f"{k}.roc_auc={m.roc_auc!r}",
                f"{k}.ndcg={m.ndcg!r}",
                f"{k}.n_sessions={m.n_sessions}",
                f"{k}.n_records={m.n_records}",
                f"{k}.n_sessions_skipped={m.n_sessions_skipped}",
            ]
        return "\n".join(out)


def run_ablations(
    train_records,
    eval_records,
    settings=ALL_SETTINGS,
    seed: int = 0,
    train_config: TrainConfig | None = None,
    model_config: ModelConfig | None = None,
) -> AblationReport:
    """Train one model per setting with the same seed and hyperparameters; score the held-out records.

    Records are encoded once and shared, so the settings differ only in
    which feature groups their models read.
    """
    tr = train_records if isinstance(train_records, EncodedRecords) else EncodedRecords(list(train_records))
    ev = eval_records if isinstance(eval_records, EncodedRecords) else EncodedRecords(list(eval_records))
    tcfg = train_config or TrainConfig(seed=seed)
    base = model_config or ModelConfig()
    base_dict = base.to_dict()
    rows = []
    for st in settings:
        st = AblationSetting.parse(st) if isinstance(st, str) else st
        t0 = time.perf_counter()
        cfg = ModelConfig.from_dict({**base_dict, "setting": st.value})
        model = TwoTowerModel(cfg, seed=seed)
        trace = train(model, tr, tcfg)
        scores = predict(model, ev)
        m = report(ev.session_ids, scores, ev.labels)
        rows.append(AblationRow(st, m, trace, time.perf_counter() - t0))
        log.info("%s auc=%.4f ndcg=%.4f (%.1fs)", st.value, m.roc_auc, m.ndcg, rows[-1].seconds)
    return AblationReport(rows)


# -- rewriter baselines ----------------------------------------------------

# feature order: recently_visited, log_time_since_visit, liked, joined, coefficient; then bias
_RECENCY = np.array([0.0, -1.0, 0.0, 0.0, 0.0, 0.0])
_SOCIAL_COEF = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def recency_weights() -> dict[PrefixClass, np.ndarray]:
    """Rank candidates by most recent interaction (never visited ranks last)."""
    return {p: _RECENCY.copy() for p in PrefixClass}


def social_coef_weights() -> dict[PrefixClass, np.ndarray]:
    return {p: _SOCIAL_COEF.copy() for p in PrefixClass}


def split_rows(rows: list[GroundTruthRow], train_fraction: float = 0.5):
    """Split by (query, searcher) session in first-seen order, so no session straddles the split."""
    keys = list(dict.fromkeys((r.query, r.searcher) for r in rows))
    cut = int(round(len(keys) * train_fraction))
    train_keys = set(keys[:cut])
    train = [r for r in rows if (r.query, r.searcher) in train_keys]
    test = [r for r in rows if (r.query, r.searcher) not in train_keys]
    return train, test


def compare_rewriters(
    rows: list[GroundTruthRow],
    t: dict[PrefixClass, int],
    train_rows: list[GroundTruthRow] | None = None,
    ridge: float = 1e-3,
) -> dict[str, float]:
    """recall_at_t of the Recency, SocialCoef and trained LinearModel rankings.

    Without ``train_rows`` the first half of the sessions trains the linear
    model and all three are scored on the second half.
    """
    if train_rows is None:
        train_rows, rows = split_rows(rows)
    linear = train_weights(train_rows, ridge=ridge)
    return {
        "Recency": recall_at_t(rows, recency_weights(), t),
        "SocialCoef": recall_at_t(rows, social_coef_weights(), t),
        "LinearModel": recall_at_t(rows, linear, t),
    }


def rewriter_table(results: dict[str, float]) -> str:
    lines = [f"{'rewriter':<12} {'recall':>8}", "-" * 21]
    lines += [f"{k:<12} {100 * v:>7.2f}%" for k, v in results.items()]
    return "\n".join(lines)
