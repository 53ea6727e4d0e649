"""Social-network search: prefixed-term index, s-expression queries, social rewriting and a two-tower ranker."""

from .graph import EdgeKind, InteractionRecord, NodeKind, PostingDoc, SocialGraph, conn, conn_postings
from .index import InvertedIndex, Term, tokenize
from .query import And, Or, TermNode, cost_of, execute, parse, render
from .rewriter import NoConnections, PrefixClass, RewriteModel, rewrite, sweep_tp, train_weights

__version__ = "0.1.0"

__all__ = [
    "And",
    "EdgeKind",
    "InteractionRecord",
    "InvertedIndex",
    "NoConnections",
    "NodeKind",
    "Or",
    "PostingDoc",
    "PrefixClass",
    "RewriteModel",
    "SocialGraph",
    "Term",
    "TermNode",
    "conn",
    "conn_postings",
    "cost_of",
    "execute",
    "parse",
    "render",
    "rewrite",
    "sweep_tp",
    "tokenize",
    "train_weights",
]
