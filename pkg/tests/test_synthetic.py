import numpy as np
import pytest
from scipy.stats import chi2_contingency

from socialsearch.corpus import click_line, corpus_lines
from socialsearch.eval.ablation import recency_weights, social_coef_weights
from socialsearch.eval.synthetic import SyntheticConfig, affinity_click_table, generate
from socialsearch.graph import conn_postings
from socialsearch.rewriter import PrefixClass, recall_at_t, uniform

from .conftest import SMALL

# sparse enough that a (searcher, source) pair rarely repeats across sessions
INDEPENDENCE = dict(persons=2000, groups=200, pages=200, postings=8000, vocab=2000, queries=20, sessions=1500)


def _fingerprint(d):
    return (
        corpus_lines(d.graph, d.docs),
        [click_line(r) for r in d.clicks],
        [r.oracle for r in d.clicks],
        d.ground_truth,
        d.sessions,
    )


def test_same_seed_same_everything(small_data):
    again = generate(SyntheticConfig(seed=3, **SMALL))
    assert _fingerprint(again) == _fingerprint(small_data)
    other = generate(SyntheticConfig(seed=4, **SMALL))
    assert corpus_lines(other.graph, other.docs) != corpus_lines(small_data.graph, small_data.docs)


@pytest.mark.parametrize("bad", [
    dict(persons=0), dict(postings=0), dict(sessions=0), dict(vocab=30, topics=10), dict(eval_days=0),
    dict(eval_days=35),
])
def test_invalid_config(bad):
    with pytest.raises(ValueError):
        SyntheticConfig(**{**SMALL, **bad})


def test_shape(small_data):
    d = small_data
    assert len(d.docs) == SMALL["postings"]
    assert len({(r.query, r.searcher) for r in d.ground_truth}) == SMALL["queries"]
    assert len(d.sessions) + d.skipped_sessions == SMALL["sessions"]
    assert len(d.click_affinity) == len(d.clicks)
    times = [s.time for s in d.sessions]
    assert times == sorted(times)
    labels = {r.label for r in d.clicks}
    assert labels == {0, 1}


def test_serp_results_come_from_the_social_graph(small_data):
    d = small_data
    by_id = {s.session_id: s for s in d.sessions}
    reach = {}
    for r in d.clicks:
        u = by_id[r.session_id].searcher
        if u not in reach:
            reach[u] = conn_postings(d.graph, u)
        assert r.doc.id in reach[u]
        assert len([x for x in d.clicks if x.session_id == r.session_id]) <= d.config.serp_size


def test_split_is_by_time(small_data):
    d = small_data
    tr, ev = d.train_eval_split()
    assert tr and ev and len(tr) + len(ev) == len(d.clicks)
    times = {s.session_id: s.time for s in d.sessions}
    assert max(times[r.session_id] for r in tr) < min(times[r.session_id] for r in ev)


def test_no_signal_means_coin_flips():
    d = generate(SyntheticConfig(seed=1, a=0.0, b=0.0, noise=0.0, **SMALL))
    assert d.clicks
    assert all(r.oracle == 0.5 for r in d.clicks)


@pytest.mark.slow
def test_clicks_ignore_affinity_when_b_is_zero():
    pvalues = []
    for seed in range(10):
        d = generate(SyntheticConfig(b=0.0, seed=seed, **INDEPENDENCE))
        pvalues.append(chi2_contingency(affinity_click_table(d)).pvalue)
    assert min(pvalues) > 0.01, pvalues


def test_affinity_drives_clicks_by_default(small_data):
    assert chi2_contingency(affinity_click_table(small_data)).pvalue < 1e-6


def test_recent_only_ideals_favor_recency():
    d = generate(SyntheticConfig(seed=2, ideal_recent_only=True, **SMALL), with_clicks=False)
    rows = d.ground_truth
    assert all(r.features[0] == 1.0 for r in rows if r.label)
    groups = {}
    for r in rows:
        key = (r.query, r.searcher, r.prefix)
        groups[key] = groups.get(key, 0) + int(r.features[0] == 1.0)
    t = {p: max([n for (_, _, q), n in groups.items() if q is p], default=0) for p in PrefixClass}
    assert recall_at_t(rows, recency_weights(), t) == 1.0
    assert recall_at_t(rows, social_coef_weights(), t) < 1.0


def test_zero_thresholds_recall_nothing(small_data):
    rows = small_data.ground_truth
    for w in (recency_weights(), social_coef_weights()):
        assert recall_at_t(rows, w, uniform(0)) == 0.0
        assert recall_at_t(rows, w, uniform(10**6)) == 1.0
