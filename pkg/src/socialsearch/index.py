"""Inverted index over posting documents with prefixed terms.

Social edges and text tokens share one term space: ``authored-by:17``,
``group-of:3``, ``text:billie``.  Posting lists are sorted ``uint64`` arrays.
"""

from __future__ import annotations

import json
import re
import struct
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import NodeKind, PostingDoc

PREFIXES = ("text", "authored-by", "involves", "group-of", "page-of")
INDEX_MAGIC = b"SSIX"
INDEX_VERSION = 1

_TOKEN_RE = re.compile(r"[^\W_]+")
_EMPTY = np.zeros(0, dtype=np.uint64)


class InvertedIndexError(ValueError):
    pass


class DuplicateDocError(InvertedIndexError):
    pass


class IndexFormatError(InvertedIndexError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric codepoint."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True, order=True)
class Term:
    prefix: str
    value: str

    def __post_init__(self):
        if self.prefix not in PREFIXES:
            raise ValueError(f"unknown prefix {self.prefix!r}")
        if not self.value or any(c.isspace() for c in self.value) or "(" in self.value or ")" in self.value:
            raise ValueError(f"bad term value {self.value!r}")

    def __str__(self) -> str:
        return f"{self.prefix}:{self.value}"

    @classmethod
    def parse(cls, s: str) -> Term:
        prefix, sep, value = s.partition(":")
        if not sep:
            raise ValueError(f"missing ':' in term {s!r}")
        return cls(prefix, value)

    @classmethod
    def text(cls, token: str) -> Term:
        return cls("text", token)


def doc_terms(doc: PostingDoc) -> set[str]:
    """All canonical term strings a posting is indexed under."""
    terms = {f"authored-by:{doc.author}"}
    terms.update(f"involves:{p}" for p in doc.involved)
    if doc.container_kind is NodeKind.GROUP:
        terms.add(f"group-of:{doc.container}")
    elif doc.container_kind is NodeKind.PAGE:
        terms.add(f"page-of:{doc.container}")
    terms.update(f"text:{t}" for t in doc_tokens(doc))
    return terms


def doc_tokens(doc: PostingDoc) -> list[str]:
    return tokenize(doc.title) + tokenize(doc.body)


class InvertedIndex:
    def __init__(self):
        self.docs: dict[int, PostingDoc] = {}
        self.doc_len: dict[int, int] = {}
        self._building: dict[str, list[int]] = {}
        self._lists: dict[str, np.ndarray] = {}
        self._tokens: dict[int, list[str]] = {}
        self._total_len = 0

    @classmethod
    def build(cls, docs) -> InvertedIndex:
        idx = cls()
        for d in docs:
            idx.add(d)
        return idx

    def add(self, doc: PostingDoc) -> None:
        if doc.id in self.docs:
            raise DuplicateDocError(f"doc {doc.id} already indexed")
        self.docs[doc.id] = doc
        n = len(doc_tokens(doc))
        self.doc_len[doc.id] = n
        self._total_len += n
        for t in doc_terms(doc):
            self._building.setdefault(t, []).append(doc.id)

    def _finalize(self) -> None:
        for t, ids in self._building.items():
            old = self._lists.get(t)
            arr = np.asarray(ids, dtype=np.uint64)
            if old is not None:
                arr = np.concatenate([old, arr])
            arr.sort()
            self._lists[t] = arr
        self._building = {}

    # -- reads ------------------------------------------------------------

    def lookup(self, term) -> np.ndarray:
        """Posting list for ``term`` (a ``Term`` or canonical string); empty when unknown."""
        if self._building:
            self._finalize()
        return self._lists.get(str(term), _EMPTY)

    def df(self, term) -> int:
        return len(self.lookup(term))

    def terms(self) -> list[str]:
        if self._building:
            self._finalize()
        return sorted(self._lists)

    @property
    def num_docs(self) -> int:
        return len(self.docs)

    @property
    def avgdl(self) -> float:
        return self._total_len / len(self.docs) if self.docs else 0.0

    def tokens(self, doc_id: int) -> list[str]:
        toks = self._tokens.get(doc_id)
        if toks is None:
            toks = doc_tokens(self.docs[doc_id])
            self._tokens[doc_id] = toks
        return toks

    def term_counts(self, doc_id: int) -> Counter:
        return Counter(self.tokens(doc_id))

    # -- persistence ------------------------------------------------------

    def to_bytes(self) -> bytes:
        terms = self.terms()
        out = bytearray(INDEX_MAGIC)
        out.append(INDEX_VERSION)
        out += struct.pack("<I", len(terms))
        for t in terms:
            raw = t.encode("utf-8")
            out += struct.pack("<I", len(raw))
            out += raw
        for t in terms:
            ids = self._lists[t]
            out += struct.pack("<I", len(ids))
            out += _encode_varints(np.diff(ids, prepend=np.uint64(0)))
        out += struct.pack("<I", len(self.docs))
        for doc_id in sorted(self.docs):
            raw = json.dumps(self.docs[doc_id].to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")
            out += struct.pack("<I", len(raw))
            out += raw
        out += struct.pack("<I", zlib.crc32(out))
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> InvertedIndex:
        if len(data) < 9 or data[:4] != INDEX_MAGIC:
            raise IndexFormatError("not an index file (bad magic)")
        if data[4] != INDEX_VERSION:
            raise IndexFormatError(f"unsupported index version {data[4]}")
        (crc,) = struct.unpack_from("<I", data, len(data) - 4)
        if zlib.crc32(data[:-4]) != crc:
            raise IndexFormatError("index checksum mismatch (truncated or corrupt file)")
        r = _Reader(data, 5, len(data) - 4)
        try:
            terms = [r.bytes(r.u32()).decode("utf-8") for _ in range(r.u32())]
            lists = {}
            for t in terms:
                count = r.u32()
                lists[t] = np.cumsum(r.varints(count), dtype=np.uint64)
            docs = [PostingDoc.from_dict(json.loads(r.bytes(r.u32()))) for _ in range(r.u32())]
        except (struct.error, UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
            raise IndexFormatError(f"corrupt index: {exc}") from exc
        if r.pos != r.end:
            raise IndexFormatError("trailing bytes in index")
        idx = cls()
        for d in docs:
            idx.docs[d.id] = d
            n = len(doc_tokens(d))
            idx.doc_len[d.id] = n
            idx._total_len += n
        idx._lists = lists
        return idx

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> InvertedIndex:
        return cls.from_bytes(Path(path).read_bytes())


def _encode_varints(values: np.ndarray) -> bytes:
    out = bytearray()
    for v in values.tolist():
        while v >= 0x80:
            out.append((v & 0x7F) | 0x80)
            v >>= 7
        out.append(v)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, pos: int, end: int):
        self.data, self.pos, self.end = data, pos, end

    def u32(self) -> int:
        if self.pos + 4 > self.end:
            raise IndexFormatError("unexpected end of index data")
        (v,) = struct.unpack_from("<I", self.data, self.pos)
        self.pos += 4
        return v

    def bytes(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise IndexFormatError("unexpected end of index data")
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b

    def varints(self, count: int) -> np.ndarray:
        out = []
        data, pos, end = self.data, self.pos, self.end
        for _ in range(count):
            v = shift = 0
            while True:
                if pos >= end:
                    raise IndexFormatError("unexpected end of index data")
                b = data[pos]
                pos += 1
                v |= (b & 0x7F) << shift
                if b < 0x80:
                    break
                shift += 7
            out.append(v)
        self.pos = pos
        return np.array(out, dtype=np.uint64)
