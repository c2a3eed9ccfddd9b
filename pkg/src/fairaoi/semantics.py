"""Semantic payload accounting and image-to-graph similarity.

Embeddings are supplied as plain vectors; no model is run here.

The similarity is read as a projection: the triple embeddings are
orthonormalised, the graph embedding is projected onto their span, and the
projection norm is divided by the graph-vector norm. That is the only reading
of the weighted sum ``q_n <q_n, g>`` that yields a scalar-weighted vector sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

GS_DROP_TOL = 1e-10


@dataclass(frozen=True)
class SemanticTriple:
    subject: str
    relation: str
    object: str

    def __post_init__(self):
        for name in ("subject", "relation", "object"):
            if not getattr(self, name):
                raise ConfigurationError(f"triple {name} must be non-empty")

    def __len__(self):
        # str length counts code points, not bytes
        return len(self.subject) + len(self.relation) + len(self.object)


@dataclass(frozen=True)
class TripleSet:
    triples: tuple

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))
        if not self.triples:
            raise ConfigurationError("a triple set needs at least one triple")


def payload_length(ts: TripleSet) -> int:
    return sum(len(t) for t in ts.triples)


def mean_payload_bits(sets: Sequence[TripleSet], bits_per_char: float) -> float:
    if not sets:
        raise DomainError("need at least one triple set")
    if bits_per_char <= 0:
        raise DomainError("bits_per_char must be positive")
    return bits_per_char * sum(payload_length(s) for s in sets) / len(sets)


def gram_schmidt(vectors, drop_tol: float = GS_DROP_TOL) -> np.ndarray:
    """Modified Gram-Schmidt; returns orthonormal rows.

    A vector whose residual norm falls below ``drop_tol * ||input||`` is
    linearly dependent on the earlier ones and is dropped.
    """
    basis = []
    for v in np.atleast_2d(np.asarray(vectors, dtype=float)):
        peak = np.max(np.abs(v))
        if peak == 0:
            continue
        r = v / peak  # rescale first so tiny inputs do not underflow in the norm
        scale = np.linalg.norm(r)
        for q in basis:
            r -= (q @ r) * q
        norm = np.linalg.norm(r)
        if norm <= drop_tol * scale:
            continue
        basis.append(r / norm)
    if not basis:
        return np.zeros((0, np.atleast_2d(vectors).shape[1]))
    return np.array(basis)


def similarity(triple_vecs, graph_vec) -> float:
    g = np.asarray(graph_vec, dtype=float)
    vecs = np.atleast_2d(np.asarray(triple_vecs, dtype=float))
    if vecs.shape[1] != g.shape[0]:
        raise DomainError("triple and graph embeddings differ in dimension")
    if not np.all(np.isfinite(vecs)) or not np.all(np.isfinite(g)):
        raise DomainError("embeddings must be finite")
    g_norm = np.linalg.norm(g)
    if g_norm == 0:
        raise DomainError("graph embedding is the zero vector")
    q = gram_schmidt(vecs)
    if len(q) == 0:
        return 0.0
    proj = (q @ g) @ q
    return float(min(1.0, np.linalg.norm(proj) / g_norm))


def mean_similarity(scores: Sequence[float], cap: int) -> float:
    if len(scores) == 0:
        raise DomainError("need at least one similarity score")
    if cap < 1:
        raise DomainError("cap must be at least 1")
    return float(np.mean(np.asarray(scores[:cap], dtype=float)))


def read_triples(path) -> TripleSet:
    """One ``subject<TAB>relation<TAB>object`` per line; blank lines skipped."""
    triples = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ConfigurationError(f"{path}:{lineno}: expected 3 tab-separated fields")
        triples.append(SemanticTriple(*parts))
    return TripleSet(triples)


def read_embeddings(path) -> np.ndarray:
    """First line holds the dimension, then one comma-separated vector per line."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ConfigurationError(f"{path}: empty embedding file")
    dim = int(lines[0])
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        row = [float(x) for x in line.split(",")]
        if len(row) != dim:
            raise ConfigurationError(f"{path}:{lineno}: expected {dim} values, got {len(row)}")
        rows.append(row)
    return np.array(rows, dtype=float).reshape(len(rows), dim)


def write_embeddings(path, vectors: Iterable[Sequence[float]]) -> None:
    arr = np.atleast_2d(np.asarray(list(vectors), dtype=float))
    body = "\n".join(",".join(repr(float(x)) for x in row) for row in arr)
    Path(path).write_text(f"{arr.shape[1]}\n{body}\n", encoding="utf-8")
