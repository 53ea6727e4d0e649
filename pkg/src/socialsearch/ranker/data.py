"""Click records and their tensor encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..graph import PostingDoc
from .features import DOC_BAGS, QUERY_BAGS, TRDenseFeatures, bag_ids, sparse_bucket


@dataclass
class ClickRecord:
    session_id: int
    query: str
    doc: PostingDoc
    dense: np.ndarray
    sparse: tuple
    tr_dense: TRDenseFeatures
    label: int
    searcher: int | None = None
    # latent click probability from the generator; evaluation only, never a model input
    oracle: float | None = None


def _doc_field(doc: PostingDoc, name: str) -> str:
    return doc.title if name == "title" else doc.body


class _Bags:
    """CSR store of bucket ids for one (source, n) bag over all records."""

    def __init__(self, rows: list[list[int]]):
        lens = np.fromiter((len(r) for r in rows), dtype=np.int64, count=len(rows))
        self.offsets = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lens, out=self.offsets[1:])
        self.ids = np.fromiter((i for r in rows for i in r), dtype=np.int64, count=int(self.offsets[-1]))

    def gather(self, idx: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        starts = self.offsets[idx]
        ends = self.offsets[idx + 1]
        lens = ends - starts
        offsets = np.zeros(len(idx), dtype=np.int64)
        np.cumsum(lens[:-1], out=offsets[1:])
        ids = np.concatenate([self.ids[s:e] for s, e in zip(starts.tolist(), ends.tolist())]) if len(idx) else self.ids[:0]
        return torch.from_numpy(ids.astype(np.int64)), torch.from_numpy(offsets)


class EncodedRecords:
    """Column-oriented, model-ready view of a list of click records."""

    def __init__(self, records: list[ClickRecord]):
        if not records:
            raise ValueError("no records to encode")
        self.n = len(records)
        self.ctr = np.stack([r.dense for r in records]).astype(np.float64)
        self.tr = np.stack([r.tr_dense.as_array() for r in records]).astype(np.float64)
        self.sparse = np.array([[sparse_bucket(r.sparse[0]), sparse_bucket(r.sparse[1])] for r in records], dtype=np.int64)
        self.labels = np.array([r.label for r in records], dtype=np.float64)
        self.session_ids = np.array([r.session_id for r in records], dtype=np.int64)
        qcache: dict = {}
        dcache: dict = {}
        qrows = [[] for _ in QUERY_BAGS]
        drows = [[] for _ in DOC_BAGS]
        for r in records:
            q = qcache.get(r.query)
            if q is None:
                q = qcache[r.query] = [bag_ids(r.query, n) for _, n in QUERY_BAGS]
            d = dcache.get(r.doc.id)
            if d is None:
                d = dcache[r.doc.id] = [bag_ids(_doc_field(r.doc, f), n) for f, n in DOC_BAGS]
            for i, b in enumerate(q):
                qrows[i].append(b)
            for i, b in enumerate(d):
                drows[i].append(b)
        self.query_bags = [_Bags(rows) for rows in qrows]
        self.doc_bags = [_Bags(rows) for rows in drows]

    def __len__(self) -> int:
        return self.n

    def batch(self, idx, setting, dtype=torch.float32) -> dict:
        idx = np.asarray(idx, dtype=np.int64)
        dense_parts = []
        if setting.uses_ctr:
            dense_parts.append(self.ctr[idx])
        if setting.uses_tr:
            dense_parts.append(self.tr[idx])
        out = {"labels": torch.from_numpy(self.labels[idx]).to(dtype)}
        if dense_parts:
            out["dense"] = torch.from_numpy(np.concatenate(dense_parts, axis=1)).to(dtype)
        if setting.uses_ctr:
            out["sparse"] = torch.from_numpy(self.sparse[idx])
        if setting.uses_ngram:
            out["query_bags"] = [b.gather(idx) for b in self.query_bags]
            out["doc_bags"] = [b.gather(idx) for b in self.doc_bags]
        return out
