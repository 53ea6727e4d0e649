"""Adam training loop, batched scoring and result ranking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch

from .data import ClickRecord, EncodedRecords
from .features import dense_features, sparse_features, tr_dense
from .model import AblationSetting, TwoTowerModel, bce

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.01
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 512
    epochs: int = 1
    seed: int = 0


def _as_encoded(data) -> EncodedRecords:
    return data if isinstance(data, EncodedRecords) else EncodedRecords(data)


def _dtype(model: TwoTowerModel) -> torch.dtype:
    return next(model.parameters()).dtype


def loss_and_grads(model: TwoTowerModel, batch: dict) -> tuple[float, dict[str, torch.Tensor]]:
    """Mean BCE on ``batch`` and the gradient of every parameter (zeros where untouched)."""
    model.zero_grad(set_to_none=False)
    loss = bce(model(batch), batch["labels"])
    loss.backward()
    grads = {n: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)) for n, p in model.named_parameters()}
    return loss.item(), grads


def train(model: TwoTowerModel, data, config: TrainConfig | None = None) -> list[float]:
    """Adam over seeded mini-batch shuffles; returns the mean training loss of each epoch.

    Indices inside each mini-batch are sorted, so batch composition alone
    (not order within it) determines the update.
    """
    cfg = config or TrainConfig()
    enc = _as_encoded(data)
    dtype = _dtype(model)
    opt = torch.optim.Adam(
        model.parameters(), lr=cfg.lr, betas=tuple(cfg.betas), eps=cfg.eps,
        fused=dtype == torch.float32,
    )
    rng = np.random.default_rng(cfg.seed)
    trace = []
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        model.train()
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(enc))
            total, count = 0.0, 0
            for b, start in enumerate(range(0, len(enc), cfg.batch_size)):
                idx = np.sort(order[start : start + cfg.batch_size])
                if len(idx) < 2 and len(enc) >= 2:
                    continue  # batchnorm needs more than one row
                batch = enc.batch(idx, model.setting, dtype)
                opt.zero_grad(set_to_none=True)
                loss = bce(model(batch), batch["labels"])
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(f"non-finite loss {value} at epoch {epoch} batch {b} (lr={cfg.lr})")
                loss.backward()
                opt.step()
                total += value * len(idx)
                count += len(idx)
            trace.append(total / count)
            log.info("epoch %d loss %.5f", epoch, trace[-1])
    model.eval()
    return trace


@torch.no_grad()
def predict(model: TwoTowerModel, data, batch_size: int = 4096) -> np.ndarray:
    """Eval-mode click probabilities in record order."""
    enc = _as_encoded(data)
    was_training = model.training
    model.eval()
    out = []
    dtype = _dtype(model)
    for start in range(0, len(enc), batch_size):
        idx = np.arange(start, min(start + batch_size, len(enc)))
        out.append(model.predict_proba(enc.batch(idx, model.setting, dtype)).double().numpy())
    model.train(was_training)
    return np.concatenate(out)


def rank(model: TwoTowerModel, idx, g, query: str, searcher: int, docs, now: int,
         setting: AblationSetting | None = None) -> list[tuple]:
    """Score ``docs`` for (query, searcher) and sort by descending score, ties by ascending id.

    ``setting`` may name a subset of the model's feature groups; the other
    groups are zeroed out before scoring.
    """
    docs = list(docs)
    if not docs:
        return []
    records = [
        ClickRecord(0, query, d, dense_features(g, searcher, d, now), sparse_features(g, searcher),
                    tr_dense(idx, query, d), 0, searcher)
        for d in docs
    ]
    enc = EncodedRecords(records)
    if setting is not None and setting is not model.setting:
        st = model.setting
        if (setting.uses_ctr and not st.uses_ctr) or (setting.uses_tr and not st.uses_tr) or (setting.uses_ngram and not st.uses_ngram):
            raise ValueError(f"setting {setting.value} is not a subset of the model's {st.value}")
        if not setting.uses_ctr:
            enc.ctr[:] = 0
            enc.sparse[:] = 0
        if not setting.uses_tr:
            enc.tr[:] = 0
        if not setting.uses_ngram:
            for b in enc.query_bags + enc.doc_bags:
                b.ids = b.ids[:0]
                b.offsets[:] = 0
    scores = predict(model, enc)
    order = sorted(range(len(docs)), key=lambda i: (-scores[i], docs[i].id))
    return [(docs[i], float(scores[i])) for i in order]
