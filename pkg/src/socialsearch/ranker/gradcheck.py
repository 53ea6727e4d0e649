"""Central finite-difference check of ``loss_and_grads``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .model import TwoTowerModel, bce
from .training import loss_and_grads


@dataclass
class BlockCheck:
    name: str
    checked: int
    max_rel_error: float
    worst: tuple  # (flat index, analytic, numeric)


def _touched_rows(grad: torch.Tensor) -> np.ndarray:
    return np.flatnonzero(grad.abs().sum(dim=1).numpy() > 0)


def finite_difference_check(
    model: TwoTowerModel,
    batch: dict,
    eps: float = 1e-4,
    per_block: int = 24,
    seed: int = 0,
    floor: float = 1e-5,
) -> list[BlockCheck]:
    """Compare analytic gradients with (f(p+eps) - f(p-eps)) / 2eps on sampled entries of every block.

    The model should be float64 and in eval mode (dropout off, batchnorm on
    running statistics). Embedding tables are sampled among the rows the
    batch actually touches; ``floor`` keeps the relative error finite for
    gradients that are zero.

    A central difference that straddles a ReLU kink measures a secant, not a
    derivative, so an entry whose +/-eps perturbation flips any ReLU
    activation is replaced by another sampled entry of the same block.
    """
    _, grads = loss_and_grads(model, batch)
    rng = np.random.default_rng(seed)
    params = dict(model.named_parameters())
    relus = [m for m in model.modules() if isinstance(m, torch.nn.ReLU)]
    out = []

    def loss_and_pattern():
        seen = []
        hooks = [m.register_forward_hook(lambda _m, inp, _o: seen.append(inp[0] > 0)) for m in relus]
        try:
            value = bce(model(batch), batch["labels"]).item()
        finally:
            for h in hooks:
                h.remove()
        return value, seen

    with torch.no_grad():
        _, base = loss_and_pattern()
        for name in sorted(params):
            p = params[name]
            g = grads[name]
            if p.dim() == 2 and ("tables" in name):
                rows = _touched_rows(g)
                cand = (rows[:, None] * p.shape[1] + np.arange(p.shape[1])[None, :]).ravel()
            else:
                cand = np.arange(p.numel())
            order = rng.permutation(cand)
            flat = p.view(-1)
            gflat = g.reshape(-1)
            worst = (-1, 0.0, 0.0)
            max_err = 0.0
            checked = 0
            for i in order.tolist():
                if checked == per_block:
                    break
                orig = flat[i].item()
                flat[i] = orig + eps
                up, pat_up = loss_and_pattern()
                flat[i] = orig - eps
                down, pat_down = loss_and_pattern()
                flat[i] = orig
                if any(not torch.equal(a, b) for pat in (pat_up, pat_down) for a, b in zip(pat, base)):
                    continue
                checked += 1
                num = (up - down) / (2 * eps)
                ana = gflat[i].item()
                err = abs(ana - num) / max(abs(ana), abs(num), floor)
                if err > max_err:
                    max_err, worst = err, (i, ana, num)
            out.append(BlockCheck(name, checked, max_err, worst))
    return out


def perturb_batchnorm(model: torch.nn.Module, seed: int = 0) -> None:
    """Give every batchnorm layer non-trivial running statistics and affine parameters."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, torch.nn.BatchNorm1d):
                dt = m.running_mean.dtype
                m.running_mean.copy_(0.5 * torch.randn(m.num_features, generator=gen, dtype=dt))
                m.running_var.copy_(0.5 + 1.5 * torch.rand(m.num_features, generator=gen, dtype=dt))
                m.weight.copy_(0.5 + torch.rand(m.num_features, generator=gen, dtype=dt))
                m.bias.copy_(0.1 * torch.randn(m.num_features, generator=gen, dtype=dt))
