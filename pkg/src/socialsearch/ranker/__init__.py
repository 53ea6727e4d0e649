from .data import ClickRecord, EncodedRecords
from .features import TRDenseFeatures, dense_features, ngrams, sparse_features, tr_dense
from .model import AblationSetting, ModelConfig, TwoTowerModel, bce, fm_pairwise, fm_pairwise_naive
from .training import TrainConfig, TrainingDiverged, loss_and_grads, predict, rank, train

__all__ = [
    "AblationSetting",
    "ClickRecord",
    "EncodedRecords",
    "ModelConfig",
    "TRDenseFeatures",
    "TrainConfig",
    "TrainingDiverged",
    "TwoTowerModel",
    "bce",
    "dense_features",
    "fm_pairwise",
    "fm_pairwise_naive",
    "loss_and_grads",
    "ngrams",
    "predict",
    "rank",
    "sparse_features",
    "tr_dense",
    "train",
]
