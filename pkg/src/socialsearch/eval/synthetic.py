"""Seeded synthetic social network, posting corpus, rewriter ground truth and click logs.

Latent structure:

* every person, group and page has a topic; topics own overlapping word sets;
* every (searcher, connection) pair has a latent affinity in [0, 1] which
  drives the observable interaction record (visits, likes, coefficient);
* ground-truth ideal connections are drawn with probability increasing in
  affinity;
* clicks are Bernoulli(sigmoid(a * text_match + b * affinity + noise)) over
  results retrieved through the real rewrite + execute path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..graph import (
    SECONDS_PER_DAY,
    EdgeKind,
    InteractionRecord,
    NodeKind,
    PersonProfile,
    PostingDoc,
    SocialGraph,
)
from ..index import InvertedIndex, tokenize
from ..query import execute
from ..ranker.data import ClickRecord
from ..ranker.features import dense_features, sparse_features, tr_dense
from ..rewriter import GroundTruthRow, PrefixClass, RewriteModel, candidates, keyword_query, rewrite_candidates, uniform

SNAPSHOT_TIME = 1_600_000_000
_SYLLABLES = [c + v for c in "bcdfghjklmnprstvwz" for v in "aeiou"]


@dataclass
class SyntheticConfig:
    persons: int = 2000
    groups: int = 200
    pages: int = 200
    postings: int = 50_000
    vocab: int = 5000
    queries: int = 2000
    sessions: int = 20_000
    topics: int = 40
    # click model: logit = a * text_match + b * affinity + noise * N(0, 1)
    a: float = 2.0
    b: float = 2.5
    noise: float = 0.5
    serp_size: int = 10
    days: int = 35
    eval_days: int = 5
    # sharpness of the ideal-connection draw, P(e) ~ exp(ideal_temperature * affinity)
    ideal_temperature: float = 6.0
    ideal_recent_only: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("persons", "groups", "pages", "postings", "vocab", "queries", "sessions", "topics", "serp_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.vocab < 4 * self.topics:
            raise ValueError("vocab too small for the number of topics")
        if not 0 < self.eval_days < self.days:
            raise ValueError("need 0 < eval_days < days")


@dataclass
class Session:
    session_id: int
    searcher: int
    query: str
    time: int
    topic: int


@dataclass
class SyntheticData:
    config: SyntheticConfig
    graph: SocialGraph
    docs: list[PostingDoc]
    index: InvertedIndex
    now: int
    ground_truth: list[GroundTruthRow] = field(default_factory=list)
    sessions: list[Session] = field(default_factory=list)
    clicks: list[ClickRecord] = field(default_factory=list)
    affinity: dict = field(default_factory=dict)
    # latent affinity behind each click record, parallel to ``clicks``
    click_affinity: list[float] = field(default_factory=list)
    doc_topic: dict = field(default_factory=dict)
    skipped_sessions: int = 0

    @property
    def workload(self) -> list[tuple[int, str]]:
        """(searcher, query) pairs of the click sessions."""
        return [(s.searcher, s.query) for s in self.sessions]

    def split_time(self) -> int:
        return self.now + (self.config.days - self.config.eval_days) * SECONDS_PER_DAY

    def train_eval_split(self) -> tuple[list[ClickRecord], list[ClickRecord]]:
        """Train on sessions before the cutoff, evaluate on sessions strictly after it."""
        cut = self.split_time()
        times = {s.session_id: s.time for s in self.sessions}
        train = [r for r in self.clicks if times[r.session_id] < cut]
        test = [r for r in self.clicks if times[r.session_id] >= cut]
        return train, test


def _words(rng: np.random.Generator, n: int) -> list[str]:
    out, seen = [], set()
    while len(out) < n:
        k = int(rng.integers(2, 4))
        w = "".join(_SYLLABLES[i] for i in rng.integers(0, len(_SYLLABLES), size=k))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


class _Builder:
    def __init__(self, cfg: SyntheticConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.g = SocialGraph()
        self.affinity: dict[tuple[int, int], float] = {}

    # -- vocabulary -------------------------------------------------------

    def vocabulary(self):
        cfg, rng = self.cfg, self.rng
        words = _words(rng, cfg.vocab)
        n_general = max(1, cfg.vocab // 5)
        self.general = words[:n_general]
        topical = words[n_general:]
        per_topic = max(4, len(topical) * 5 // (2 * cfg.topics))
        self.topic_words = []
        for _ in range(cfg.topics):
            self.topic_words.append([topical[i] for i in rng.choice(len(topical), size=min(per_topic, len(topical)), replace=False)])
        ranks = np.arange(1, per_topic + 1)
        self.zipf = (1.0 / ranks) / (1.0 / ranks).sum()
        gr = np.arange(1, n_general + 1)
        self.general_p = (1.0 / gr) / (1.0 / gr).sum()

    def topic_text(self, topic: int, n: int, p_topic: float) -> str:
        rng = self.rng
        words = self.topic_words[topic]
        out = []
        for _ in range(n):
            if rng.random() < p_topic:
                out.append(words[rng.choice(len(words), p=self.zipf[: len(words)] / self.zipf[: len(words)].sum())])
            else:
                out.append(self.general[rng.choice(len(self.general), p=self.general_p)])
        return " ".join(out)

    # -- graph ------------------------------------------------------------

    def graph(self):
        cfg, rng, g = self.cfg, self.rng, self.g
        P, G, Pg = cfg.persons, cfg.groups, cfg.pages
        self.persons = list(range(P))
        self.groups = list(range(P, P + G))
        self.pages = list(range(P + G, P + G + Pg))
        self.topic_of = {}
        for u in self.persons:
            g.add_node(u, NodeKind.PERSON)
            self.topic_of[u] = int(rng.integers(cfg.topics))
            g.profiles[u] = PersonProfile(
                region_id=int(rng.integers(20)), city_id=int(rng.integers(300)),
                serp_impressions=int(rng.poisson(40)),
            )
        for e in self.groups:
            g.add_node(e, NodeKind.GROUP)
            self.topic_of[e] = int(rng.integers(cfg.topics))
        for e in self.pages:
            g.add_node(e, NodeKind.PAGE)
            self.topic_of[e] = int(rng.integers(cfg.topics))
        by_topic = {}
        for u in self.persons:
            by_topic.setdefault(self.topic_of[u], []).append(u)
        groups_by_topic, pages_by_topic = {}, {}
        for e in self.groups:
            groups_by_topic.setdefault(self.topic_of[e], []).append(e)
        for e in self.pages:
            pages_by_topic.setdefault(self.topic_of[e], []).append(e)

        def pick(pool_same, pool_all, p_same):
            if pool_same and rng.random() < p_same:
                return pool_same[int(rng.integers(len(pool_same)))]
            return pool_all[int(rng.integers(len(pool_all)))]

        if P > 1:
            for u in self.persons:
                for _ in range(1 + int(rng.poisson(9))):
                    v = pick(by_topic[self.topic_of[u]], self.persons, 0.5)
                    if v != u:
                        g.add_edge(u, v, EdgeKind.FRIEND_OF)
        for u in self.persons:
            for _ in range(1 + int(rng.poisson(2))):
                g.add_edge(u, pick(groups_by_topic.get(self.topic_of[u]), self.groups, 0.6), EdgeKind.MEMBER_OF)
            for _ in range(1 + int(rng.poisson(2))):
                e = pick(pages_by_topic.get(self.topic_of[u]), self.pages, 0.6)
                self._page_edge(u, e)
        # interaction records: one latent affinity per (person, connected entity)
        for u in self.persons:
            self.affinity[(u, u)] = float(rng.beta(2, 2))
            for e in sorted(g.neighbor_entities(u)):
                alpha = float(rng.beta(2, 2))
                self.affinity[(u, e)] = alpha
                g.set_interaction(u, e, self._interaction(alpha, self.g.nodes[e], u, e))

    def _page_edge(self, u: int, e: int):
        # like vs follow is decided once the affinity is known; follow is the placeholder
        self.g.add_edge(u, e, EdgeKind.FOLLOWS)

    def _interaction(self, alpha: float, kind: NodeKind, u: int, e: int) -> InteractionRecord:
        rng = self.rng
        last = None
        if rng.random() < 0.15 + 0.8 * alpha:
            scale = 60 * SECONDS_PER_DAY * (1 - alpha) + SECONDS_PER_DAY
            last = SNAPSHOT_TIME - int(scale * math.exp(rng.normal(0.0, 0.8)))
        coef = float(np.clip(alpha + rng.normal(0.0, 0.25), 0.0, 1.0))
        liked = False
        if kind is NodeKind.PAGE and rng.random() < 0.2 + 0.6 * alpha:
            liked = True
            self.g.add_edge(u, e, EdgeKind.LIKES)
        return InteractionRecord(last_visit_time=last, liked=liked, joined=kind is NodeKind.GROUP, social_coefficient=coef)

    # -- postings ---------------------------------------------------------

    def postings(self):
        cfg, rng, g = self.cfg, self.rng, self.g
        base = cfg.persons + cfg.groups + cfg.pages
        self.docs = []
        self.doc_topic = {}
        activity = rng.lognormal(0.0, 1.0, size=cfg.persons)
        activity /= activity.sum()
        authors = rng.choice(cfg.persons, size=cfg.postings, p=activity)
        for i in range(cfg.postings):
            doc_id = base + i
            author = int(authors[i])
            topic = self.topic_of[author] if rng.random() < 0.7 else int(rng.integers(cfg.topics))
            container = container_kind = None
            r = rng.random()
            if r < 0.35:
                mine = sorted(n for n, k in g.out_edges(author) if k is EdgeKind.MEMBER_OF)
                if mine:
                    container, container_kind = mine[int(rng.integers(len(mine)))], NodeKind.GROUP
            elif r < 0.55:
                container, container_kind = self.pages[int(rng.integers(len(self.pages)))], NodeKind.PAGE
            if container is not None and rng.random() < 0.7:
                topic = self.topic_of[container]
            involved = {author}
            if rng.random() < 0.15:
                fr = sorted(n for n, k in g.out_edges(author) if k is EdgeKind.FRIEND_OF)
                if fr:
                    involved.add(fr[int(rng.integers(len(fr)))])
            doc = PostingDoc(
                id=doc_id,
                title=self.topic_text(topic, int(rng.integers(3, 7)), 0.85),
                body=self.topic_text(topic, int(rng.integers(10, 31)), 0.7),
                author=author,
                container=container,
                container_kind=container_kind,
                involved=frozenset(involved),
                created_time=SNAPSHOT_TIME - int(rng.integers(1, 365 * SECONDS_PER_DAY)),
                comment_count=int(rng.poisson(3)),
                has_photo=bool(rng.random() < 0.3),
                serp_click_count=int(rng.poisson(5)),
            )
            self.docs.append(doc)
            self.doc_topic[doc_id] = topic
            g.add_posting(doc)
        self.index = InvertedIndex.build(self.docs)

    # -- rewriter ground truth --------------------------------------------

    def entity_postings(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for d in self.docs:
            out.setdefault(d.author, []).append(d.id)
            if d.container is not None:
                out.setdefault(d.container, []).append(d.id)
        return out

    def ground_truth(self) -> list[GroundTruthRow]:
        cfg, rng, g = self.cfg, self.rng, self.g
        by_entity = self.entity_postings()
        involves: dict[int, list[int]] = {}
        for d in self.docs:
            for p in d.involved:
                involves.setdefault(p, []).append(d.id)
        rows = []
        made = attempts = 0
        while made < cfg.queries:
            attempts += 1
            if attempts > 50 * cfg.queries:
                raise ValueError("could not draw enough ground-truth sessions; corpus too sparse")
            u = int(rng.integers(cfg.persons))
            cands = candidates(g, u, SNAPSHOT_TIME)

            def posts_of(c):
                return involves.get(u, []) if c.prefix is PrefixClass.INVOLVES else by_entity.get(c.entity, [])

            eligible = [c for c in cands if posts_of(c)]
            if cfg.ideal_recent_only:
                eligible = [c for c in eligible if c.features[0] == 1.0]
            if not eligible:
                continue
            logits = np.array([cfg.ideal_temperature * self.affinity[(u, c.entity)] for c in eligible])
            p = np.exp(logits - logits.max())
            ideal = eligible[int(rng.choice(len(eligible), p=p / p.sum()))]
            pool = posts_of(ideal)
            doc_id = pool[int(rng.integers(len(pool)))]
            toks = tokenize(self.index.docs[doc_id].title)
            q = " ".join(toks[: int(rng.integers(1, 3))])
            for c in cands:
                if c is ideal:
                    result = doc_id
                else:
                    own = posts_of(c)
                    result = own[int(rng.integers(len(own)))] if own else doc_id
                rows.append(GroundTruthRow(q, u, result, c.entity, c.prefix, tuple(float(x) for x in c.features), int(c is ideal)))
            made += 1
        return rows

    # -- click sessions ---------------------------------------------------

    def text_match(self, q_tokens: list[str], q_topic: int, doc_id: int) -> float:
        toks = set(self.index.tokens(doc_id))
        overlap = sum(1 for t in q_tokens if t in toks) / len(q_tokens)
        same = 1.0 if self.doc_topic[doc_id] == q_topic else 0.0
        return 2.0 * (0.6 * same + 0.4 * overlap) - 1.0

    def doc_affinity(self, u: int, doc: PostingDoc) -> float:
        """Affinity of the posting's primary social source: author, else container, else a tagged friend."""
        if (u, doc.author) in self.affinity:
            return self.affinity[(u, doc.author)]
        if doc.container is not None and (u, doc.container) in self.affinity:
            return self.affinity[(u, doc.container)]
        for p in sorted(doc.involved):
            if (u, p) in self.affinity:
                return self.affinity[(u, p)]
        return 0.5

    def clicks(self):
        cfg, rng, g = self.cfg, self.rng, self.g
        keep_all = RewriteModel(thresholds=uniform(10**9))
        times = np.sort(rng.integers(0, cfg.days * SECONDS_PER_DAY, size=cfg.sessions)) + SNAPSHOT_TIME
        cand_cache: dict[int, list] = {}
        sessions, records, alphas = [], [], []
        skipped = 0
        for s in range(cfg.sessions):
            u = int(rng.integers(cfg.persons))
            topic = self.topic_of[u] if rng.random() < 0.6 else int(rng.integers(cfg.topics))
            n_words = int(rng.integers(1, 4))
            q = self.topic_text(topic, n_words, 1.0)
            q_tokens = tokenize(q)
            now = int(times[s])
            cands = cand_cache.get(u)
            if cands is None:
                cands = cand_cache[u] = candidates(g, u, SNAPSHOT_TIME)
            expr = rewrite_candidates(cands, keyword_query(q), keep_all)
            hits = execute(self.index, expr).doc_ids
            if len(hits) == 0:
                skipped += 1
                continue
            shown = np.sort(rng.choice(hits, size=min(cfg.serp_size, len(hits)), replace=False))
            sid = len(sessions)
            sessions.append(Session(sid, u, q, now, topic))
            for doc_id in shown.tolist():
                doc = self.index.docs[doc_id]
                alpha = self.doc_affinity(u, doc)
                if rng.random() < 0.05 + 0.25 * alpha:
                    g.set_interaction(u, doc_id, InteractionRecord(last_visit_time=now - int(rng.integers(0, 20 * SECONDS_PER_DAY))))
                tm = self.text_match(q_tokens, topic, doc_id)
                z = cfg.a * tm + cfg.b * (2.0 * alpha - 1.0) + cfg.noise * rng.normal()
                p = 1.0 / (1.0 + math.exp(-z))
                y = int(rng.random() < p)
                records.append(ClickRecord(
                    session_id=sid, query=q, doc=doc,
                    dense=dense_features(g, u, doc, now),
                    sparse=sparse_features(g, u),
                    tr_dense=tr_dense(self.index, q, doc),
                    label=y, searcher=u, oracle=p,
                ))
                alphas.append(alpha)
        return sessions, records, alphas, skipped


def affinity_click_table(data: SyntheticData) -> np.ndarray:
    """2x2 counts of (affinity above the median, clicked)."""
    alpha = np.asarray(data.click_affinity)
    high = alpha > np.median(alpha)
    y = np.array([r.label for r in data.clicks], dtype=bool)
    return np.array([[np.sum(~high & ~y), np.sum(~high & y)], [np.sum(high & ~y), np.sum(high & y)]])


def generate(cfg: SyntheticConfig | None = None, with_clicks: bool = True) -> SyntheticData:
    """Build graph, corpus, index, ground-truth rows and (optionally) click logs from one seed."""
    cfg = cfg or SyntheticConfig()
    b = _Builder(cfg)
    b.vocabulary()
    b.graph()
    b.postings()
    data = SyntheticData(cfg, b.g, b.docs, b.index, SNAPSHOT_TIME, affinity=b.affinity, doc_topic=b.doc_topic)
    data.ground_truth = b.ground_truth()
    if with_clicks:
        data.sessions, data.clicks, data.click_affinity, data.skipped_sessions = b.clicks()
    return data
