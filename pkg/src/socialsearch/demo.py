"""Small hand-built scenarios used by the CLI, the tests and the README."""

from __future__ import annotations

from .graph import EdgeKind, InteractionRecord, NodeKind, PostingDoc, SocialGraph
from .index import InvertedIndex
from .query import And, Or, term

BILLIE_QUERY = "Billie Eilish"
BILLIE_EXPECTED = And((
    Or((term("text:billie"), term("text:eilish"))),
    Or((
        term("involves:0"),
        term("authored-by:1"),
        term("authored-by:2"),
        term("group-of:3"),
        term("page-of:4"),
    )),
))


def billie_graph() -> tuple[SocialGraph, list[PostingDoc]]:
    """Person 0 with friends 1 and 2, member of group 3, owner of page 4, plus a stranger 5.

    Postings 100..105 mention the query; 105 is by the stranger and must not
    survive rewriting.
    """
    g = SocialGraph()
    for p in (0, 1, 2, 5):
        g.add_node(p, NodeKind.PERSON)
    g.add_node(3, NodeKind.GROUP)
    g.add_node(4, NodeKind.PAGE)
    g.add_edge(0, 1, EdgeKind.FRIEND_OF)
    g.add_edge(0, 2, EdgeKind.FRIEND_OF)
    g.add_edge(0, 3, EdgeKind.MEMBER_OF)
    g.add_edge(0, 4, EdgeKind.LIKES)
    g.set_interaction(0, 1, InteractionRecord(last_visit_time=0, social_coefficient=0.9))
    g.set_interaction(0, 2, InteractionRecord(last_visit_time=0, social_coefficient=0.8))
    g.set_interaction(0, 3, InteractionRecord(joined=True, social_coefficient=0.7))
    g.set_interaction(0, 4, InteractionRecord(liked=True, social_coefficient=0.6))
    docs = [
        PostingDoc(100, "billie eilish live", "my own clip", author=0),
        PostingDoc(101, "new billie eilish album", "listening all day", author=1),
        PostingDoc(102, "eilish interview", "a long read", author=2),
        PostingDoc(103, "billie eilish tickets", "group ride", author=1, container=3, container_kind=NodeKind.GROUP),
        PostingDoc(104, "official billie news", "tour dates", author=0, container=4, container_kind=NodeKind.PAGE),
        PostingDoc(105, "billie eilish fan theory", "stranger danger", author=5),
        PostingDoc(106, "cooking pasta", "no music here", author=1),
    ]
    for d in docs:
        g.add_posting(d)
    return g, docs


def sweep_example() -> tuple[list, SocialGraph, InvertedIndex]:
    """One-query workload whose mean cost at uniform t = 1, 2, 3 is 100, 180, 270.

    The keyword term matches 30 postings by an unconnected person; the
    searcher's own 10 postings add 10 at t >= 1; friends ranked by social
    coefficient add 60, 80 and 90 postings in turn.
    """
    g = SocialGraph()
    searcher, stranger = 0, 9
    friends = [(1, 0.9, 60), (2, 0.5, 80), (3, 0.1, 90)]
    for p in (searcher, stranger, *(f for f, _, _ in friends)):
        g.add_node(p, NodeKind.PERSON)
    for f, coef, _ in friends:
        g.add_edge(searcher, f, EdgeKind.FRIEND_OF)
        g.set_interaction(searcher, f, InteractionRecord(social_coefficient=coef))
    docs = []
    next_id = 1000

    def post(author, text, n):
        nonlocal next_id
        for _ in range(n):
            docs.append(PostingDoc(next_id, text, "", author=author))
            next_id += 1

    post(stranger, "needle", 30)
    post(searcher, "mine", 10)
    for f, _, n in friends:
        post(f, "chatter", n)
    for d in docs:
        g.add_posting(d)
    workload = [(searcher, Or((term("text:needle"),)))]
    return workload, g, InvertedIndex.build(docs)
