import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from socialsearch.eval.metrics import ndcg
from socialsearch.graph import PostingDoc
from socialsearch.ranker.checkpoint import CheckpointError, from_bytes, load, save, to_bytes
from socialsearch.ranker.data import ClickRecord, EncodedRecords
from socialsearch.ranker.features import TRDenseFeatures
from socialsearch.ranker.gradcheck import finite_difference_check, perturb_batchnorm
from socialsearch.ranker.model import AblationSetting, ModelConfig, TwoTowerModel, bce, fm_pairwise, fm_pairwise_naive
from socialsearch.ranker.training import TrainConfig, TrainingDiverged, loss_and_grads, predict, rank, train

from .conftest import mixed_batch_indices

A = AblationSetting


@pytest.fixture(scope="module")
def enc(small_data):
    return EncodedRecords(small_data.clicks)


def _zero(model):
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    return model.eval()


def test_setting_parse_and_groups():
    assert A.parse("ctr+tr+ngram") is A.CTR_TR_NGRAM
    assert A.parse("NGRAM_ONLY") is A.NGRAM_ONLY
    assert [s.uses_ngram for s in A] == [False, False, False, True, True, True]
    assert not A.NGRAM_ONLY.uses_ctr and not A.NGRAM_ONLY.uses_tr
    with pytest.raises(ValueError):
        A.parse("bm25")


def test_full_model_input_width():
    m = TwoTowerModel(ModelConfig(ctr_dim=12))
    assert m.x_dim == 128 + 64 + 8 == 200
    assert m.two_tower
    assert not TwoTowerModel(ModelConfig(setting=A.NGRAM_ONLY)).two_tower


@pytest.mark.parametrize("setting", list(A))
def test_zero_parameters_give_one_half(enc, setting):
    m = _zero(TwoTowerModel(ModelConfig(setting=setting)))
    p = m.predict_proba(enc.batch(np.arange(16), setting))
    assert torch.all(p == 0.5)


def test_fm_two_inputs_is_factor_dot():
    v = torch.tensor([[0.3, -1.2, 2.0], [1.5, 0.25, -0.5]], dtype=torch.float64)
    x = torch.ones(1, 2, dtype=torch.float64)
    assert fm_pairwise(x, v).item() == pytest.approx(float(v[0] @ v[1]), abs=1e-15)
    assert fm_pairwise(x, torch.zeros_like(v)).item() == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 16))
def test_fm_identity(seed, n, k):
    rng = np.random.default_rng(seed)
    x, v = rng.normal(size=n), rng.normal(size=(n, k))
    fast = fm_pairwise(torch.from_numpy(x)[None], torch.from_numpy(v)).item()
    assert abs(fast - fm_pairwise_naive(x, v)) <= 1e-10 * max(1.0, abs(fast))


def test_bce_values():
    logits = torch.zeros(4, dtype=torch.float64)
    assert bce(logits, torch.tensor([1.0, 0.0, 1.0, 0.0], dtype=torch.float64)).item() == pytest.approx(math.log(2))
    assert bce(torch.tensor([40.0]), torch.tensor([1.0])).item() < 1e-6
    clamped = bce(torch.tensor([100.0], dtype=torch.float64), torch.tensor([0.0], dtype=torch.float64))
    assert clamped.item() == pytest.approx(-math.log(1e-7), rel=1e-6)


def test_eval_mode_is_deterministic_train_mode_uses_dropout(enc):
    m = TwoTowerModel(ModelConfig(), seed=4)
    b = enc.batch(np.arange(64), A.CTR_TR_NGRAM)
    m.eval()
    assert torch.equal(m(b), m(b))
    m.train()
    assert not torch.equal(m(b), m(b))


@pytest.mark.parametrize("setting", list(A))
def test_finite_differences_per_setting(small_data, enc, setting):
    m = TwoTowerModel(ModelConfig(setting=setting), seed=2).double()
    perturb_batchnorm(m, seed=1)
    m.eval()
    idx = mixed_batch_indices(small_data.clicks)
    checks = finite_difference_check(m, enc.batch(idx, setting, torch.float64), eps=1e-4)
    assert checks
    for c in checks:
        assert c.checked > 0, c
        assert c.max_rel_error < 1e-3, c


def test_gradients_reach_touched_embedding_rows_only(enc):
    m = TwoTowerModel(ModelConfig(), seed=0)
    b = enc.batch(np.arange(8), A.CTR_TR_NGRAM)
    _, grads = loss_and_grads(m, b)
    ids = b["query_bags"][0][0].unique()
    rows = grads["query_tables.0.weight"].abs().sum(dim=1).nonzero().flatten()
    assert set(rows.tolist()) <= set(ids.tolist())
    assert len(rows) > 0


def test_permuting_a_batch_keeps_loss_and_gradients(enc):
    m = TwoTowerModel(ModelConfig(dropout=0.0), seed=0).double().train()
    idx = np.arange(32)
    perm = np.random.default_rng(0).permutation(32)
    la, ga = loss_and_grads(m, enc.batch(idx, A.CTR_TR_NGRAM, torch.float64))
    lb, gb = loss_and_grads(m, enc.batch(idx[perm], A.CTR_TR_NGRAM, torch.float64))
    assert la == pytest.approx(lb, abs=1e-9)
    for name in ga:
        torch.testing.assert_close(ga[name], gb[name], rtol=0, atol=1e-9)


def _separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(n):
        y = int(i % 2)
        dense = rng.normal(size=15) + (2.0 if y else -2.0)
        doc = PostingDoc(10_000 + i, "alpha beta" if y else "gamma delta", "body words", 1)
        recs.append(ClickRecord(i // 5, "alpha", doc, dense, (1, 2), TRDenseFeatures(float(y), 0.0, 1.0), y))
    return recs


@pytest.mark.parametrize("setting", [A.CTR_ONLY, A.CTR_TR_NGRAM])
def test_training_reduces_loss(setting):
    m = TwoTowerModel(ModelConfig(setting=setting), seed=0)
    trace = train(m, _separable(), TrainConfig(epochs=5, batch_size=32, seed=0))
    assert trace[-1] < trace[0]


def test_training_is_reproducible(enc):
    traces, preds = [], []
    for _ in range(2):
        m = TwoTowerModel(ModelConfig(), seed=5)
        traces.append(train(m, enc, TrainConfig(batch_size=256, seed=9)))
        preds.append(predict(m, enc))
    assert traces[0] == traces[1]
    assert preds[0].tobytes() == preds[1].tobytes()


def test_zero_learning_rate_changes_nothing(enc):
    m = TwoTowerModel(ModelConfig(dropout=0.0), seed=1)
    before = {k: v.clone() for k, v in m.state_dict().items() if "running" not in k and "num_batches" not in k}
    trace = train(m, enc, TrainConfig(lr=0.0, epochs=3, batch_size=len(enc), seed=0))
    assert trace[0] == trace[1] == trace[2]
    for k, v in before.items():
        assert torch.equal(m.state_dict()[k], v)


def test_non_finite_loss_aborts(enc):
    m = TwoTowerModel(ModelConfig(setting=A.CTR_ONLY), seed=0)
    with torch.no_grad():
        m.head.weight.fill_(float("nan"))
    with pytest.raises(TrainingDiverged, match="non-finite"):
        train(m, enc, TrainConfig(batch_size=64))


def test_rank_single_and_ties(small_data):
    d = small_data
    docs = [d.index.docs[i] for i in sorted(d.index.docs)[:5]]
    m = _zero(TwoTowerModel(ModelConfig()))
    assert [x.id for x, _ in rank(m, d.index, d.graph, "q", 0, docs[:1], d.now)] == [docs[0].id]
    out = rank(m, d.index, d.graph, "q", 0, list(reversed(docs)), d.now)
    assert [x.id for x, _ in out] == [x.id for x in docs]
    assert rank(m, d.index, d.graph, "q", 0, [], d.now) == []


def test_rank_feature_masks(small_data):
    d = small_data
    docs = [d.index.docs[i] for i in sorted(d.index.docs)[:20]]
    m = TwoTowerModel(ModelConfig(), seed=3).eval()
    full = rank(m, d.index, d.graph, "a b", 1, docs, d.now)
    masked = rank(m, d.index, d.graph, "a b", 1, docs, d.now, setting=A.CTR_NGRAM)
    assert sorted(x.id for x, _ in full) == sorted(x.id for x, _ in masked)
    assert [s for _, s in full] != [s for _, s in masked]
    ctr_only = TwoTowerModel(ModelConfig(setting=A.CTR_ONLY))
    with pytest.raises(ValueError):
        rank(ctr_only, d.index, d.graph, "a", 1, docs, d.now, setting=A.CTR_TR)


def test_trained_ranking_beats_random_order(small_data):
    d = small_data
    train_recs, eval_recs = d.train_eval_split()
    m = TwoTowerModel(ModelConfig(setting=A.CTR_TR), seed=0)
    train(m, train_recs, TrainConfig(seed=0, batch_size=256, epochs=3))
    sessions = {}
    for r in eval_recs:
        sessions.setdefault(r.session_id, []).append(r)
    model_sessions, random_sessions = [], []
    rng = np.random.default_rng(0)
    for recs in sessions.values():
        s0 = d.sessions[recs[0].session_id]
        label = {r.doc.id: r.label for r in recs}
        ranked = rank(m, d.index, d.graph, s0.query, s0.searcher, [r.doc for r in recs], s0.time)
        model_sessions.append([(-i, label[doc.id]) for i, (doc, _) in enumerate(ranked)])
        random_sessions.append([(float(rng.random()), label[r.doc.id]) for r in recs])
    assert ndcg(model_sessions) > ndcg(random_sessions)


def test_checkpoint_roundtrip(tmp_path, enc):
    m = TwoTowerModel(ModelConfig(), seed=7)
    train(m, enc, TrainConfig(batch_size=256))
    p = tmp_path / "m.sstt"
    save(m, p)
    back = load(p)
    assert to_bytes(back) == p.read_bytes()
    assert back.config == m.config
    np.testing.assert_array_equal(predict(back, enc), predict(m, enc))
    d64 = TwoTowerModel(ModelConfig(setting=A.TR_ONLY), seed=1).double()
    assert to_bytes(from_bytes(to_bytes(d64))) == to_bytes(d64)


def test_corrupt_checkpoint(tmp_path):
    data = to_bytes(TwoTowerModel(ModelConfig(setting=A.CTR_ONLY)))
    assert data[:4] == b"SSTT" and data[4] == 1
    for bad in (data[:-3], data[:100], b"SSTX" + data[4:], data[:50] + bytes([data[50] ^ 0xFF]) + data[51:]):
        with pytest.raises(CheckpointError):
            from_bytes(bad)
