"""Feature extraction for the ranker: n-gram bags, dense/sparse CTR features, TR features."""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..graph import NEVER_VISITED_LOG, RECENT_VISIT_SECONDS, EdgeKind, NodeKind, PostingDoc, SocialGraph, social_features
from ..index import InvertedIndex, tokenize

TEXT_BUCKETS = 2**16
SPARSE_BUCKETS = 2**12
BM25_K1 = 1.2
BM25_B = 0.75

CTR_FEATURE_NAMES = (
    "authored_by_searcher",
    "from_friend",
    "from_joined_group",
    "from_followed_page",
    "recently_seen",
    "log_serp_clicks",
    "has_photo",
    "log_age",
    "log_comments",
    "log_num_friends",
    "log_num_followees",
    "log_serp_impressions",
)
# optional extension slot: social relationship with the posting's source
EXTENSION_FEATURE_NAMES = (
    "source_social_coefficient",
    "source_time_since_visit",
    "source_recently_visited",
)
TR_FEATURE_NAMES = ("bm25", "avg_tfidf", "last_match_pos")

# (source, n) pairs; query tables are disjoint from document tables
QUERY_BAGS = (("query", 1), ("query", 2))
DOC_BAGS = (("title", 1), ("title", 2), ("body", 1), ("body", 2))


def ngrams(text: str, n: int) -> Counter:
    """Multiset of space-joined ``n`` consecutive tokens."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    toks = tokenize(text)
    return Counter(" ".join(toks[i : i + n]) for i in range(len(toks) - n + 1))


@lru_cache(maxsize=1 << 20)
def hash64(s: str) -> int:
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")


def bucket(gram: str, buckets: int = TEXT_BUCKETS) -> int:
    return hash64(gram) % buckets


def bag_ids(text: str, n: int) -> list[int]:
    """Bucket ids of every n-gram occurrence (repeats kept, so the mean is multiset-weighted)."""
    return [bucket(g) for g, c in sorted(ngrams(text, n).items()) for _ in range(c)]


def sparse_bucket(value: int | None) -> int:
    """Bucket 0 is reserved for a missing id."""
    if value is None:
        return 0
    return 1 + hash64(f"id:{value}") % (SPARSE_BUCKETS - 1)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class TRDenseFeatures:
    bm25: float
    avg_tfidf: float
    last_match_pos: float

    def as_array(self) -> np.ndarray:
        return np.array([self.bm25, self.avg_tfidf, self.last_match_pos])


def tr_dense(idx: InvertedIndex, query: str, doc: PostingDoc) -> TRDenseFeatures:
    """BM25 (k1=1.2, b=0.75), mean tf-idf and relative position of the last matched query token."""
    q = tokenize(query)
    toks = idx.tokens(doc.id) if doc.id in idx.docs else tokenize(doc.title) + tokenize(doc.body)
    tf = Counter(toks)
    n_docs = idx.num_docs
    dl = len(toks)
    avgdl = idx.avgdl or 1.0
    bm25 = 0.0
    tfidf = []
    for t in q:
        df = idx.df(f"text:{t}")
        f = tf.get(t, 0)
        if f:
            idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            bm25 += idf * f * (BM25_K1 + 1) / (f + BM25_K1 * (1 - BM25_B + BM25_B * dl / avgdl))
        tfidf.append(f * math.log(n_docs / df) if df else 0.0)
    qset = set(q)
    last = max((i + 1 for i, t in enumerate(toks) if t in qset), default=None)
    last_pos = 1.0 if last is None else last / dl
    return TRDenseFeatures(bm25, sum(tfidf) / len(tfidf) if tfidf else 0.0, last_pos)


def dense_features(
    g: SocialGraph,
    searcher: int,
    doc: PostingDoc,
    now: int,
    extensions: bool = True,
) -> np.ndarray:
    """The hand-crafted CTR dense vector (counts and ages log-transformed).

    "Recently seen" reads the (searcher, posting) interaction record.
    """
    seen = g.interaction(searcher, doc.id)
    seen_time = None if seen is None else seen.last_visit_time
    out_edges = g.out_edges(searcher)
    friends = {n for n, k in out_edges if k is EdgeKind.FRIEND_OF}
    followees = {n for n, k in out_edges if k in (EdgeKind.FOLLOWS, EdgeKind.LIKES)}
    groups = {n for n, k in out_edges if k is EdgeKind.MEMBER_OF}
    prof = g.profile(searcher)
    ck = doc.container_kind
    feats = [
        float(doc.author == searcher),
        float(doc.author in friends),
        float(ck is NodeKind.GROUP and doc.container in groups),
        float(ck is NodeKind.PAGE and doc.container in followees),
        float(seen_time is not None and 0 <= now - seen_time <= RECENT_VISIT_SECONDS),
        math.log1p(doc.serp_click_count),
        float(doc.has_photo),
        math.log1p(max(0, now - doc.created_time)),
        math.log1p(doc.comment_count),
        math.log1p(len(friends)),
        math.log1p(len(followees)),
        math.log1p(prof.serp_impressions),
    ]
    if extensions:
        sources = [p for p in sorted(doc.involved) if p == searcher or p in friends]
        if doc.container is not None and (doc.container in groups or doc.container in followees):
            sources.append(doc.container)
        best = np.array([0.0, NEVER_VISITED_LOG, 0.0, 0.0, 0.0])
        for e in sources:
            f = social_features(g, searcher, e, now)
            if f[4] > best[4] or (f[4] == best[4] and f[1] < best[1]):
                best = f
        feats += [best[4], best[1], best[0]]
    return np.array(feats, dtype=np.float64)


def sparse_features(g: SocialGraph, searcher: int) -> tuple[int | None, int | None]:
    prof = g.profile(searcher)
    return prof.region_id, prof.city_id
