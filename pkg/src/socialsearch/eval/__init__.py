from ..ranker.model import AblationSetting
from .ablation import AblationReport, compare_rewriters, recency_weights, run_ablations, social_coef_weights
from .metrics import MetricReport, ndcg, report, roc_auc
from .synthetic import SyntheticConfig, SyntheticData, generate

__all__ = [
    "AblationReport",
    "AblationSetting",
    "MetricReport",
    "SyntheticConfig",
    "SyntheticData",
    "compare_rewriters",
    "generate",
    "ndcg",
    "recency_weights",
    "report",
    "roc_auc",
    "run_ablations",
    "social_coef_weights",
]
