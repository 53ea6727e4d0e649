"""Corpus (JSON lines) and click-log (TSV) files.

A corpus file starts with a header line and then holds one JSON object per
line, tagged by ``kind``: ``node``, ``profile``, ``edge``, ``posting``,
``interaction``. Edges implied by postings are not stored; they are
re-derived when the posting is loaded.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graph import EdgeKind, GraphError, InteractionRecord, NodeKind, PersonProfile, PostingDoc, SocialGraph
from .index import InvertedIndex
from .ranker.data import ClickRecord
from .ranker.features import tr_dense

CORPUS_FORMAT = "sscorpus"
CORPUS_VERSION = 1
_POSTING_EDGES = {EdgeKind.AUTHORED_BY, EdgeKind.INVOLVES, EdgeKind.POSTED_IN_GROUP, EdgeKind.POSTED_IN_PAGE}


class CorpusError(ValueError):
    """Malformed corpus or click-log file; the message carries the line number."""


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def corpus_lines(g: SocialGraph, docs: list[PostingDoc], meta: dict | None = None) -> list[str]:
    lines = [_dump({"kind": "header", "format": CORPUS_FORMAT, "version": CORPUS_VERSION, **(meta or {})})]
    doc_ids = {d.id for d in docs}
    for n, k in sorted(g.nodes.items()):
        if n not in doc_ids:
            lines.append(_dump({"kind": "node", "id": n, "type": k.name}))
    for n, p in sorted(g.profiles.items()):
        lines.append(_dump({"kind": "profile", "id": n, "region_id": p.region_id, "city_id": p.city_id,
                            "serp_impressions": p.serp_impressions}))
    for e in sorted(g.edges):
        if e.kind in _POSTING_EDGES or (e.kind is EdgeKind.FRIEND_OF and e.src > e.dst):
            continue
        lines.append(_dump({"kind": "edge", "src": e.src, "dst": e.dst, "type": e.kind.name}))
    for d in sorted(docs, key=lambda d: d.id):
        lines.append(_dump({"kind": "posting", **d.to_dict()}))
    for (u, e), r in sorted(g.interactions.items()):
        lines.append(_dump({"kind": "interaction", "person": u, "entity": e, "last_visit_time": r.last_visit_time,
                            "liked": r.liked, "joined": r.joined, "social_coefficient": r.social_coefficient}))
    return lines


def write_corpus(path, g: SocialGraph, docs: list[PostingDoc], meta: dict | None = None) -> None:
    Path(path).write_text("\n".join(corpus_lines(g, docs, meta)) + "\n", encoding="utf-8")


def read_corpus(path) -> tuple[SocialGraph, list[PostingDoc], dict]:
    """Load a corpus file; returns (graph, postings in file order, header)."""
    g = SocialGraph()
    docs: list[PostingDoc] = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                kind = rec.pop("kind")
                if header is None:
                    if kind != "header" or rec.get("format") != CORPUS_FORMAT:
                        raise CorpusError("missing corpus header")
                    if rec.get("version") != CORPUS_VERSION:
                        raise CorpusError(f"unsupported corpus version {rec.get('version')}")
                    header = rec
                elif kind == "node":
                    g.add_node(int(rec["id"]), NodeKind[rec["type"]])
                elif kind == "profile":
                    g.profiles[int(rec["id"])] = PersonProfile(rec["region_id"], rec["city_id"], int(rec["serp_impressions"]))
                elif kind == "edge":
                    g.add_edge(int(rec["src"]), int(rec["dst"]), EdgeKind[rec["type"]])
                elif kind == "posting":
                    d = PostingDoc.from_dict(rec)
                    g.add_posting(d)
                    docs.append(d)
                elif kind == "interaction":
                    g.set_interaction(int(rec["person"]), int(rec["entity"]), InteractionRecord(
                        rec["last_visit_time"], bool(rec["liked"]), bool(rec["joined"]), float(rec["social_coefficient"])))
                else:
                    raise CorpusError(f"unknown record kind {kind!r}")
            except CorpusError as exc:
                raise CorpusError(f"{path}:{n}: {exc}") from None
            except (ValueError, KeyError, TypeError, GraphError) as exc:
                raise CorpusError(f"{path}:{n}: bad record: {exc!r}") from None
    if header is None:
        raise CorpusError(f"{path}: empty corpus file")
    return g, docs, header


# -- click logs ------------------------------------------------------------


def _fmt(x) -> str:
    return "" if x is None else repr(float(x)) if isinstance(x, float) else str(x)


def click_line(r: ClickRecord) -> str:
    query = " ".join(r.query.split())  # no tabs or newlines inside the field
    dense = ",".join(repr(float(v)) for v in r.dense)
    sparse = ",".join(_fmt(v) for v in r.sparse)
    return f"{r.session_id}\t{query}\t{r.doc.id}\t{r.label}\t{dense}\t{sparse}"


def write_clicks(path, records: list[ClickRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(click_line(r) + "\n")


def read_clicks(path, docs: dict[int, PostingDoc], idx: InvertedIndex) -> list[ClickRecord]:
    """Parse a click log; text-relevance features are recomputed from ``idx``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            try:
                if len(parts) != 6:
                    raise ValueError(f"expected 6 fields, got {len(parts)}")
                sid, query, doc_id, label, dense, sparse = parts
                doc = docs[int(doc_id)]
                y = int(label)
                if y not in (0, 1):
                    raise ValueError(f"label must be 0 or 1, got {y}")
                sp = tuple(int(v) if v else None for v in sparse.split(","))
                if len(sp) != 2:
                    raise ValueError("sparse field needs region,city")
                out.append(ClickRecord(
                    int(sid), query, doc,
                    np.array([float(v) for v in dense.split(",")]),
                    sp, tr_dense(idx, query, doc), y,
                ))
            except KeyError as exc:
                raise CorpusError(f"{path}:{n}: unknown doc id {exc}") from None
            except ValueError as exc:
                raise CorpusError(f"{path}:{n}: {exc}") from None
    return out
