"""Two-tower click model: hashed n-gram cosine tower + dense/sparse CTR tower + FM head."""

from __future__ import annotations

import enum
from contextlib import contextmanager
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .features import SPARSE_BUCKETS, TEXT_BUCKETS

N_QUERY_BAGS = 2
N_DOC_BAGS = 4
N_TR = 3


class AblationSetting(enum.Enum):
    CTR_ONLY = "ctr"
    TR_ONLY = "tr"
    CTR_TR = "ctr+tr"
    NGRAM_ONLY = "ngram"
    CTR_NGRAM = "ctr+ngram"
    CTR_TR_NGRAM = "ctr+tr+ngram"

    @property
    def uses_ctr(self) -> bool:
        return "ctr" in self.value.split("+")

    @property
    def uses_tr(self) -> bool:
        return "tr" in self.value.split("+")

    @property
    def uses_ngram(self) -> bool:
        return "ngram" in self.value.split("+")

    @classmethod
    def parse(cls, s: str) -> AblationSetting:
        s = s.strip()
        for m in cls:
            if s in (m.value, m.name, m.name.lower()):
                return m
        raise ValueError(f"unknown ablation setting {s!r}")


@dataclass
class ModelConfig:
    setting: AblationSetting = AblationSetting.CTR_TR_NGRAM
    ctr_dim: int = 15
    emb_dim: int = 32
    text_buckets: int = TEXT_BUCKETS
    sparse_buckets: int = SPARSE_BUCKETS
    fm_dim: int = 16
    mlp_dims: tuple = (256, 128)
    head_dims: tuple = (64, 32)
    dropout: float = 0.2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["setting"] = self.setting.value
        d["mlp_dims"] = list(self.mlp_dims)
        d["head_dims"] = list(self.head_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        d = dict(d)
        d["setting"] = AblationSetting(d["setting"])
        d["mlp_dims"] = tuple(d["mlp_dims"])
        d["head_dims"] = tuple(d["head_dims"])
        return cls(**d)

    @property
    def dense_in(self) -> int:
        return self.ctr_dim * self.setting.uses_ctr + N_TR * self.setting.uses_tr


def _mlp(dims, dropout: float) -> nn.Sequential:
    """fc, batchnorm, relu per layer; dropout after the first layer only."""
    layers = []
    for i in range(len(dims) - 1):
        layers += [nn.Linear(dims[i], dims[i + 1]), nn.BatchNorm1d(dims[i + 1]), nn.ReLU()]
        if i == 0:
            layers.append(nn.Dropout(dropout))
    return nn.Sequential(*layers)


def safe_cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Row-wise cosine; exactly 0 where either row has zero norm."""
    na = a.norm(dim=1)
    nb = b.norm(dim=1)
    ok = (na > 0) & (nb > 0)
    denom = torch.where(ok, na * nb, torch.ones_like(na))
    cos = (a * b).sum(dim=1) / denom
    return torch.where(ok, cos, torch.zeros_like(cos)).clamp(-1.0, 1.0)


def fm_pairwise(x: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """sum_{i<j} <v_i, v_j> x_i x_j via the half-of-squares identity. x: (B, n), v: (n, k)."""
    xv = x @ v
    return 0.5 * (xv.pow(2) - (x.pow(2) @ v.pow(2))).sum(dim=1)


def fm_pairwise_naive(x: np.ndarray, v: np.ndarray) -> float:
    """Direct sum over every pair i < j; the oracle for ``fm_pairwise``."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    i, j = np.triu_indices(len(x), k=1)
    return float(np.sum(np.einsum("pk,pk->p", v[i], v[j]) * x[i] * x[j]))


class TwoTowerModel(nn.Module):
    """Click-probability model whose towers are switched on per ablation setting.

    With both a dense tower and n-grams the input ``x = [ctr_mlp(dense),
    sparse_emb, x_tr]`` feeds a factorization machine whose ``[x, w.x, s]``
    goes through a 3-layer MLP; every other setting puts a logistic layer
    directly on its concatenated tower outputs.
    """

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        super().__init__()
        self.config = cfg = config or ModelConfig()
        st = cfg.setting
        with _seeded(seed):
            self.query_tables = nn.ModuleList()
            self.doc_tables = nn.ModuleList()
            if st.uses_ngram:
                for _ in range(N_QUERY_BAGS):
                    self.query_tables.append(nn.EmbeddingBag(cfg.text_buckets, cfg.emb_dim, mode="mean"))
                for _ in range(N_DOC_BAGS):
                    self.doc_tables.append(nn.EmbeddingBag(cfg.text_buckets, cfg.emb_dim, mode="mean"))
            self.sparse_tables = nn.ModuleList()
            if st.uses_ctr:
                for _ in range(2):
                    self.sparse_tables.append(nn.Embedding(cfg.sparse_buckets, cfg.emb_dim))
            self.ctr_mlp = _mlp((cfg.dense_in,) + tuple(cfg.mlp_dims), cfg.dropout) if cfg.dense_in else None
            x_dim = (cfg.mlp_dims[-1] if cfg.dense_in else 0) + cfg.emb_dim * len(self.sparse_tables)
            x_dim += N_QUERY_BAGS * N_DOC_BAGS * st.uses_ngram
            self.x_dim = x_dim
            self.two_tower = st.uses_ngram and cfg.dense_in > 0
            if self.two_tower:
                self.fm_w = nn.Parameter(torch.empty(x_dim).uniform_(-0.05, 0.05))
                self.fm_v = nn.Parameter(torch.randn(x_dim, cfg.fm_dim) * 0.05)
                dims = (x_dim + 2,) + tuple(cfg.head_dims)
                self.head = nn.Sequential(_mlp(dims, cfg.dropout), nn.Linear(dims[-1], 1))
            else:
                self.head = nn.Linear(x_dim, 1)
            for t in list(self.query_tables) + list(self.doc_tables) + list(self.sparse_tables):
                nn.init.normal_(t.weight, std=0.1)

    @property
    def setting(self) -> AblationSetting:
        return self.config.setting

    def tr_vector(self, batch: dict) -> torch.Tensor:
        """(B, 8) cosines: query bag q x document bag d, row-major over (q, d)."""
        qs = [t(ids, off) for t, (ids, off) in zip(self.query_tables, batch["query_bags"])]
        ds = [t(ids, off) for t, (ids, off) in zip(self.doc_tables, batch["doc_bags"])]
        return torch.stack([safe_cosine(q, d) for q in qs for d in ds], dim=1)

    def features(self, batch: dict) -> torch.Tensor:
        parts = []
        if self.ctr_mlp is not None:
            parts.append(self.ctr_mlp(batch["dense"]))
        for i, t in enumerate(self.sparse_tables):
            parts.append(t(batch["sparse"][:, i]))
        if self.config.setting.uses_ngram:
            parts.append(self.tr_vector(batch))
        return torch.cat(parts, dim=1)

    def forward(self, batch: dict) -> torch.Tensor:
        """Click logits, shape (B,)."""
        x = self.features(batch)
        if not self.two_tower:
            return self.head(x).squeeze(1)
        first = x @ self.fm_w
        second = fm_pairwise(x, self.fm_v)
        z = torch.cat([x, first.unsqueeze(1), second.unsqueeze(1)], dim=1)
        return self.head(z).squeeze(1)

    def predict_proba(self, batch: dict) -> torch.Tensor:
        return torch.sigmoid(self.forward(batch))


def bce(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7]."""
    p = torch.sigmoid(logits).clamp(1e-7, 1 - 1e-7)
    return -(labels * torch.log(p) + (1 - labels) * torch.log(1 - p)).mean()


@contextmanager
def _seeded(seed: int):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def freeze_batchnorm(model: nn.Module) -> None:
    """Put batch-norm layers in fixed-statistics (running stats) mode, leave the rest as is."""
    for m in model.modules():
        if isinstance(m, nn.BatchNorm1d):
            m.eval()
