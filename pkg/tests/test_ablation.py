import pytest

from socialsearch.eval.ablation import (
    ALL_SETTINGS,
    TABLE_ORDER,
    compare_rewriters,
    recency_weights,
    rewriter_table,
    run_ablations,
    split_rows,
)
from socialsearch.ranker.model import AblationSetting
from socialsearch.ranker.training import TrainConfig
from socialsearch.rewriter import uniform


@pytest.fixture(scope="module")
def six(small_data):
    tr, ev = small_data.train_eval_split()
    return run_ablations(tr, ev, ALL_SETTINGS, seed=0, train_config=TrainConfig(seed=0, batch_size=256))


def test_six_rows_share_the_protocol(six):
    assert [r.setting for r in six.rows] == list(ALL_SETTINGS)
    assert set(TABLE_ORDER) == set(ALL_SETTINGS)
    shapes = {(r.metrics.n_records, r.metrics.n_sessions, r.metrics.n_sessions_skipped) for r in six.rows}
    assert len(shapes) == 1
    for r in six.rows:
        assert 0.0 <= r.metrics.roc_auc <= 1.0 and 0.0 < r.metrics.ndcg <= 1.0
        assert len(r.loss_trace) == 1
    assert len(six.table().splitlines()) == 8
    assert six[AblationSetting.CTR_ONLY] is six.rows[0].metrics
    with pytest.raises(KeyError):
        six.__class__([])[AblationSetting.CTR_ONLY]


def test_rows_are_bit_reproducible(small_data, six):
    tr, ev = small_data.train_eval_split()
    again = run_ablations(tr, ev, [AblationSetting.CTR_TR, "ctr+ngram"], seed=0, train_config=TrainConfig(seed=0, batch_size=256))
    for row in again.rows:
        assert row.metrics == six[row.setting]
        assert row.loss_trace == next(r.loss_trace for r in six.rows if r.setting is row.setting)
    lines = set(six.key_values().splitlines())
    assert set(again.key_values().splitlines()) <= lines


def test_split_rows_keeps_sessions_whole(small_data):
    rows = small_data.ground_truth
    a, b = split_rows(rows)
    assert len(a) + len(b) == len(rows)
    ka = {(r.query, r.searcher) for r in a}
    kb = {(r.query, r.searcher) for r in b}
    assert not ka & kb
    assert abs(len(ka) - len(kb)) <= 1


def test_compare_rewriters_shape(small_data):
    res = compare_rewriters(small_data.ground_truth, uniform(3))
    assert list(res) == ["Recency", "SocialCoef", "LinearModel"]
    assert all(0.0 <= v <= 1.0 for v in res.values())
    assert "LinearModel" in rewriter_table(res)
    w = recency_weights()
    w[next(iter(w))][0] = 99.0
    assert recency_weights()[next(iter(w))][0] == 0.0
