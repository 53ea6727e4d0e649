"""Typed social graph with interaction metadata.

Nodes are persons, groups, pages and postings; edges are directed and typed.
``conn`` and ``conn_postings`` are implemented as full scans over the edge
list so they can serve as oracles for the retrieval path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SECONDS_PER_DAY = 86_400
RECENT_VISIT_SECONDS = 30 * SECONDS_PER_DAY
NEVER_VISITED_SECONDS = 10 * 365 * SECONDS_PER_DAY
NEVER_VISITED_LOG = math.log1p(NEVER_VISITED_SECONDS)
SOCIAL_FEATURE_NAMES = (
    "recently_visited",
    "time_since_last_visit",
    "liked_page",
    "joined_group",
    "social_coefficient",
)


class GraphError(ValueError):
    pass


class UnknownNodeError(GraphError, KeyError):
    pass


class NodeKind(enum.IntEnum):
    PERSON = 0
    GROUP = 1
    PAGE = 2
    POSTING = 3

    @property
    def is_entity(self) -> bool:
        return self is not NodeKind.POSTING


ENTITY_KINDS = frozenset({NodeKind.PERSON, NodeKind.GROUP, NodeKind.PAGE})


class EdgeKind(enum.IntEnum):
    FRIEND_OF = 0
    AUTHORED_BY = 1
    INVOLVES = 2
    POSTED_IN_GROUP = 3
    POSTED_IN_PAGE = 4
    FOLLOWS = 5
    LIKES = 6
    MEMBER_OF = 7


# (allowed src kind, allowed dst kind)
_EDGE_ENDPOINTS = {
    EdgeKind.FRIEND_OF: (NodeKind.PERSON, NodeKind.PERSON),
    EdgeKind.AUTHORED_BY: (NodeKind.POSTING, NodeKind.PERSON),
    EdgeKind.INVOLVES: (NodeKind.POSTING, NodeKind.PERSON),
    EdgeKind.POSTED_IN_GROUP: (NodeKind.POSTING, NodeKind.GROUP),
    EdgeKind.POSTED_IN_PAGE: (NodeKind.POSTING, NodeKind.PAGE),
    EdgeKind.FOLLOWS: (NodeKind.PERSON, NodeKind.PAGE),
    EdgeKind.LIKES: (NodeKind.PERSON, NodeKind.PAGE),
    EdgeKind.MEMBER_OF: (NodeKind.PERSON, NodeKind.GROUP),
}


@dataclass(frozen=True, order=True)
class Edge:
    src: int
    dst: int
    kind: EdgeKind


@dataclass
class InteractionRecord:
    last_visit_time: int | None = None
    liked: bool = False
    joined: bool = False
    social_coefficient: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.social_coefficient <= 1.0:
            raise GraphError(f"social_coefficient out of [0,1]: {self.social_coefficient}")


@dataclass
class PersonProfile:
    """User-side attributes used by the ranker (region/city ids, SERP impressions)."""

    region_id: int | None = None
    city_id: int | None = None
    serp_impressions: int = 0


@dataclass
class PostingDoc:
    id: int
    title: str
    body: str
    author: int
    container: int | None = None
    container_kind: NodeKind | None = None
    involved: frozenset[int] = field(default_factory=frozenset)
    created_time: int = 0
    comment_count: int = 0
    has_photo: bool = False
    serp_click_count: int = 0

    def __post_init__(self):
        # authoring is a form of involvement
        self.involved = frozenset(self.involved) | {self.author}
        if (self.container is None) != (self.container_kind is None):
            raise GraphError(f"posting {self.id}: container and container_kind must both be set")
        if self.container_kind is not None:
            self.container_kind = NodeKind(self.container_kind)
            if self.container_kind not in (NodeKind.GROUP, NodeKind.PAGE):
                raise GraphError(f"posting {self.id}: container must be a group or page")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "body": self.body,
            "author": self.author,
            "container": self.container,
            "container_kind": None if self.container_kind is None else self.container_kind.name.lower(),
            "involved": sorted(self.involved),
            "created_time": self.created_time,
            "comment_count": self.comment_count,
            "has_photo": self.has_photo,
            "serp_click_count": self.serp_click_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PostingDoc:
        ck = d.get("container_kind")
        return cls(
            id=int(d["id"]),
            title=d["title"],
            body=d["body"],
            author=int(d["author"]),
            container=None if d.get("container") is None else int(d["container"]),
            container_kind=None if ck is None else NodeKind[ck.upper()],
            involved=frozenset(int(x) for x in d.get("involved", ())),
            created_time=int(d.get("created_time", 0)),
            comment_count=int(d.get("comment_count", 0)),
            has_photo=bool(d.get("has_photo", False)),
            serp_click_count=int(d.get("serp_click_count", 0)),
        )


class SocialGraph:
    """Directed typed graph ``<U, V>`` plus per-(person, entity) interactions.

    Adjacency dicts give fast neighbourhood access; ``edge_arrays`` exposes a
    flat columnar copy of the edge set used by the scan-based oracles.
    """

    def __init__(self):
        self.nodes: dict[int, NodeKind] = {}
        self.interactions: dict[tuple[int, int], InteractionRecord] = {}
        self.profiles: dict[int, PersonProfile] = {}
        self._edges: set[Edge] = set()
        self._out: dict[int, set[tuple[int, EdgeKind]]] = {}
        self._in: dict[int, set[tuple[int, EdgeKind]]] = {}
        self._arrays = None

    # -- construction -----------------------------------------------------

    def add_node(self, node_id: int, kind: NodeKind) -> None:
        if node_id < 0 or node_id >= 2**64:
            raise GraphError(f"node id out of u64 range: {node_id}")
        kind = NodeKind(kind)
        prev = self.nodes.get(node_id)
        if prev is not None and prev is not kind:
            raise GraphError(f"node {node_id} already exists as {prev.name}")
        self.nodes[node_id] = kind

    def add_edge(self, src: int, dst: int, kind: EdgeKind) -> None:
        """Insert an edge; FriendOf is stored in both directions. Duplicates are ignored."""
        kind = EdgeKind(kind)
        want_src, want_dst = _EDGE_ENDPOINTS[kind]
        if self.kind_of(src) is not want_src or self.kind_of(dst) is not want_dst:
            raise GraphError(
                f"{kind.name} needs {want_src.name}->{want_dst.name}, got "
                f"{self.nodes[src].name}->{self.nodes[dst].name}"
            )
        self._insert(Edge(src, dst, kind))
        if kind is EdgeKind.FRIEND_OF:
            self._insert(Edge(dst, src, kind))

    def _insert(self, e: Edge) -> None:
        if e in self._edges:
            return
        self._edges.add(e)
        self._out.setdefault(e.src, set()).add((e.dst, e.kind))
        self._in.setdefault(e.dst, set()).add((e.src, e.kind))
        self._arrays = None

    def add_posting(self, doc: PostingDoc) -> None:
        """Add a posting node and the edges implied by its fields."""
        self.add_node(doc.id, NodeKind.POSTING)
        self.add_edge(doc.id, doc.author, EdgeKind.AUTHORED_BY)
        for p in doc.involved:
            self.add_edge(doc.id, p, EdgeKind.INVOLVES)
        if doc.container_kind is NodeKind.GROUP:
            self.add_edge(doc.id, doc.container, EdgeKind.POSTED_IN_GROUP)
        elif doc.container_kind is NodeKind.PAGE:
            self.add_edge(doc.id, doc.container, EdgeKind.POSTED_IN_PAGE)

    def set_interaction(self, person: int, entity: int, record: InteractionRecord) -> None:
        self.require(person, NodeKind.PERSON)
        self.kind_of(entity)
        self.interactions[(person, entity)] = record

    def interaction(self, person: int, entity: int) -> InteractionRecord | None:
        return self.interactions.get((person, entity))

    def profile(self, person: int) -> PersonProfile:
        return self.profiles.get(person) or PersonProfile()

    # -- access -----------------------------------------------------------

    def kind_of(self, node_id: int) -> NodeKind:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node id {node_id}") from None

    def require(self, node_id: int, kind: NodeKind) -> None:
        if self.kind_of(node_id) is not kind:
            raise GraphError(f"node {node_id} is {self.nodes[node_id].name}, expected {kind.name}")

    @property
    def edges(self) -> frozenset[Edge]:
        return frozenset(self._edges)

    def num_edges(self) -> int:
        return len(self._edges)

    def out_edges(self, node_id: int):
        return self._out.get(node_id, ())

    def in_edges(self, node_id: int):
        return self._in.get(node_id, ())

    def nodes_of_kind(self, kind: NodeKind) -> list[int]:
        return sorted(n for n, k in self.nodes.items() if k is kind)

    def neighbor_entities(self, u: int) -> set[int]:
        """Entities adjacent to ``u`` in either direction (adjacency fast path of ``conn``)."""
        out = {n for n, _ in self.out_edges(u)} | {n for n, _ in self.in_edges(u)}
        return {n for n in out if self.nodes[n] is not NodeKind.POSTING}

    def edge_arrays(self) -> dict[str, np.ndarray]:
        """Columnar view of the edge set (cached until the next mutation)."""
        if self._arrays is None:
            ordered = list(self._edges)
            n = len(ordered)
            src = np.fromiter((e.src for e in ordered), dtype=np.uint64, count=n)
            dst = np.fromiter((e.dst for e in ordered), dtype=np.uint64, count=n)
            kind = np.fromiter((int(e.kind) for e in ordered), dtype=np.int8, count=n)
            src_kind = np.fromiter((int(self.nodes[e.src]) for e in ordered), dtype=np.int8, count=n)
            dst_kind = np.fromiter((int(self.nodes[e.dst]) for e in ordered), dtype=np.int8, count=n)
            self._arrays = {"src": src, "dst": dst, "kind": kind, "src_kind": src_kind, "dst_kind": dst_kind}
        return self._arrays


def _require_person(g: SocialGraph, u: int) -> None:
    g.require(u, NodeKind.PERSON)


def conn(g: SocialGraph, u: int) -> set[int]:
    """Entities with an edge to or from ``u``, plus ``u`` itself (full edge scan)."""
    _require_person(g, u)
    a = g.edge_arrays()
    uu = np.uint64(u)
    posting = np.int8(NodeKind.POSTING)
    fwd = a["dst"][(a["src"] == uu) & (a["dst_kind"] != posting)]
    back = a["src"][(a["dst"] == uu) & (a["src_kind"] != posting)]
    return {u} | {int(x) for x in fwd} | {int(x) for x in back}


def conn_postings(g: SocialGraph, u: int) -> set[int]:
    """Postings with an edge to or from some member of ``conn(g, u)`` (full edge scan)."""
    entities = np.fromiter(conn(g, u), dtype=np.uint64)
    a = g.edge_arrays()
    posting = np.int8(NodeKind.POSTING)
    fwd = a["src"][(a["src_kind"] == posting) & np.isin(a["dst"], entities)]
    back = a["dst"][(a["dst_kind"] == posting) & np.isin(a["src"], entities)]
    return {int(x) for x in fwd} | {int(x) for x in back}


def social_features(g: SocialGraph, searcher: int, entity: int, now: int) -> np.ndarray:
    """The five rewriting features of (searcher, entity), in ``SOCIAL_FEATURE_NAMES`` order."""
    _require_person(g, searcher)
    if not g.kind_of(entity).is_entity:
        raise GraphError(f"node {entity} is not an entity")
    rec = g.interaction(searcher, entity) or InteractionRecord()
    if rec.last_visit_time is None:
        recent, since = 0.0, NEVER_VISITED_LOG
    else:
        elapsed = max(0, now - rec.last_visit_time)
        recent = 1.0 if elapsed <= RECENT_VISIT_SECONDS else 0.0
        since = math.log1p(elapsed)
    return np.array(
        [recent, since, float(rec.liked), float(rec.joined), float(rec.social_coefficient)],
        dtype=np.float64,
    )
