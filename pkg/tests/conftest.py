import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from socialsearch.eval.synthetic import SyntheticConfig, generate
from socialsearch.graph import NodeKind, PostingDoc

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SMALL = dict(persons=200, groups=20, pages=20, postings=2000, vocab=800, queries=120, sessions=600, topics=10)


@pytest.fixture(scope="session")
def small_data():
    return generate(SyntheticConfig(seed=3, **SMALL))


@pytest.fixture(scope="session")
def default_data():
    return generate(SyntheticConfig(seed=0))


def mixed_batch_indices(records, n=10):
    """Half short, half long queries so every n-gram table is touched."""
    longs = [i for i, r in enumerate(records) if len(r.query.split()) >= 3]
    shorts = [i for i, r in enumerate(records) if len(r.query.split()) < 3]
    return np.array(sorted(shorts[: n - n // 2] + longs[: n // 2]))


def random_docs(rng: np.random.Generator, n_docs: int, vocab: list[str], persons=(1, 2, 3, 4), groups=(50, 51), pages=(60, 61)):
    """Postings with random text over ``vocab`` and random social fields; ids start at 1000."""
    docs = []
    for i in range(n_docs):
        words = rng.choice(vocab, size=int(rng.integers(1, 6)))
        author = int(rng.choice(persons))
        r = rng.random()
        container = kind = None
        if r < 0.3:
            container, kind = int(rng.choice(groups)), NodeKind.GROUP
        elif r < 0.5:
            container, kind = int(rng.choice(pages)), NodeKind.PAGE
        involved = {int(p) for p in rng.choice(persons, size=int(rng.integers(0, 3)))}
        docs.append(PostingDoc(1000 + i, " ".join(words[:2]), " ".join(words[2:]), author, container, kind, frozenset(involved)))
    return docs
