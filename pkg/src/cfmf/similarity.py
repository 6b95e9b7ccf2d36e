"""
Shrunk, mean-centred cosine similarity and top-N neighbour lists.

For items ``i`` and ``j`` with co-rater set ``C``, ratings are centred by
each rater's mean before the cosine is taken; for users ``u`` and ``v`` with
co-rated item set ``C``, ratings are centred by each item's mean.  The cosine
is then damped by ``|C| / (|C| + shrink)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from os import PathLike
from typing import Literal

import numpy as np
from numba import njit

from .baseline import BiasModel
from .dataset import RatingsTable

_log = logging.getLogger(__name__)

Axis = Literal["user", "item"]


@dataclass(frozen=True)
class SimilarityParams:
    shrink: float = 100.0
    top_n: int = 10
    axis: Axis = "item"

    def __post_init__(self):
        if not self.shrink >= 0:
            raise ValueError("shrink must be nonnegative")
        if self.top_n < 0:
            raise ValueError("top_n must be nonnegative")
        if self.axis not in ("user", "item"):
            raise ValueError(f"unknown axis {self.axis!r}")


def _axis_arrays(table: RatingsTable, bias: BiasModel, axis: Axis):
    """Entity CSR, member CSR, and per-member centring means for an axis."""
    if axis == "item":
        return (
            (table.item_ptr, table.item_users, table.item_ratings),
            (table.user_ptr, table.user_items, table.user_ratings),
            np.ascontiguousarray(bias.user_mean, dtype=np.float64),
        )
    return (
        (table.user_ptr, table.user_items, table.user_ratings),
        (table.item_ptr, table.item_users, table.item_ratings),
        np.ascontiguousarray(bias.item_mean, dtype=np.float64),
    )


@njit(cache=True, nogil=True)
def _finish(num, na, nb, cnt, shrink):
    if cnt == 0:
        return 0.0
    den = math.sqrt(na) * math.sqrt(nb)
    if den == 0.0:
        return 0.0
    cos = num / den
    if cos > 1.0:
        cos = 1.0
    elif cos < -1.0:
        cos = -1.0
    return cos * (cnt / (cnt + shrink))


@njit(cache=True, nogil=True)
def _pair_kernel(ptr, idx, val, center, a, b, shrink):
    pa, ea = ptr[a], ptr[a + 1]
    pb, eb = ptr[b], ptr[b + 1]
    num = 0.0
    na = 0.0
    nb = 0.0
    cnt = 0
    while pa < ea and pb < eb:
        ma = idx[pa]
        mb = idx[pb]
        if ma < mb:
            pa += 1
        elif mb < ma:
            pb += 1
        else:
            x = val[pa] - center[ma]
            y = val[pb] - center[ma]
            num += x * y
            na += x * x
            nb += y * y
            cnt += 1
            pa += 1
            pb += 1
    return _finish(num, na, nb, cnt, shrink)


@njit(cache=True, nogil=True)
def _store_kernel(eptr, eidx, eval_, mptr, midx, mval, center, shrink, top_n):
    n_ent = len(eptr) - 1
    num = np.zeros(n_ent)
    na = np.zeros(n_ent)
    nb = np.zeros(n_ent)
    cnt = np.zeros(n_ent, dtype=np.int64)
    touched = np.empty(n_ent, dtype=np.int64)

    counts = np.zeros(n_ent, dtype=np.int64)
    out_nbr = np.empty(n_ent * top_n, dtype=np.int64)
    out_score = np.empty(n_ent * top_n)

    for a in range(n_ent):
        nt = 0
        # members ascending, so each pair's sums accumulate in member order
        for p in range(eptr[a], eptr[a + 1]):
            m = eidx[p]
            x = eval_[p] - center[m]
            for q in range(mptr[m], mptr[m + 1]):
                b = midx[q]
                if b == a:
                    continue
                if cnt[b] == 0:
                    touched[nt] = b
                    nt += 1
                y = mval[q] - center[m]
                num[b] += x * y
                na[b] += x * x
                nb[b] += y * y
                cnt[b] += 1

        cand = np.sort(touched[:nt])
        scores = np.empty(nt)
        for t in range(nt):
            b = cand[t]
            scores[t] = _finish(num[b], na[b], nb[b], cnt[b], shrink)
            num[b] = 0.0
            na[b] = 0.0
            nb[b] = 0.0
            cnt[b] = 0

        # stable sort keeps lower entity index first among equal scores
        order = np.argsort(-scores, kind="mergesort")
        k = 0
        base = a * top_n
        for t in order:
            if k >= top_n:
                break
            if scores[t] == 0.0:
                continue
            out_nbr[base + k] = cand[t]
            out_score[base + k] = scores[t]
            k += 1
        counts[a] = k

    ptr = np.zeros(n_ent + 1, dtype=np.int64)
    for a in range(n_ent):
        ptr[a + 1] = ptr[a] + counts[a]
    nbr = np.empty(ptr[n_ent], dtype=np.int64)
    score = np.empty(ptr[n_ent])
    for a in range(n_ent):
        for k in range(counts[a]):
            nbr[ptr[a] + k] = out_nbr[a * top_n + k]
            score[ptr[a] + k] = out_score[a * top_n + k]
    return ptr, nbr, score


def pair_similarity(
    a: int, b: int, table: RatingsTable, bias: BiasModel, params: SimilarityParams
) -> float:
    """
    Shrunk mean-centred cosine similarity between two users or two items.

    Returns 0 when the entities share no ratings or either centred co-rating
    vector is all zeros.
    """
    (ptr, idx, val), _, center = _axis_arrays(table, bias, params.axis)
    n = len(ptr) - 1
    if not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"{params.axis} index out of range (have {n})")
    if a == b:
        raise ValueError("similarity of an entity with itself is undefined here")
    return float(_pair_kernel(ptr, idx, val, center, a, b, float(params.shrink)))


class NeighborStore:
    """
    Per-entity top-N neighbour lists in CSR layout.

    ``ptr[e]:ptr[e+1]`` slices ``neighbors`` and ``scores`` for entity ``e``;
    each slice is sorted by descending score, lower index first on ties.
    """

    def __init__(self, params: SimilarityParams, ptr, neighbors, scores):
        self.params = params
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.neighbors = np.asarray(neighbors, dtype=np.int64)
        self.scores = np.asarray(scores, dtype=np.float64)
        for a in (self.ptr, self.neighbors, self.scores):
            a.setflags(write=False)

    @property
    def num_entities(self) -> int:
        return len(self.ptr) - 1

    def __len__(self):
        return len(self.neighbors)

    def neighbors_of(self, e: int) -> list[tuple[int, float]]:
        if not 0 <= e < self.num_entities:
            return []
        lo, hi = self.ptr[e], self.ptr[e + 1]
        return list(zip(self.neighbors[lo:hi].tolist(), self.scores[lo:hi].tolist()))

    def pairs(self):
        """Iterate ``(entity, neighbor, score)`` in storage order."""
        for e in range(self.num_entities):
            for n, s in self.neighbors_of(e):
                yield e, n, s

    def save(self, path: str | PathLike):
        """Write the tab-separated ``entity neighbor score`` cache format."""
        p = self.params
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(
                f"# axis={p.axis} shrink={p.shrink!r} top_n={p.top_n} "
                f"entities={self.num_entities}\n"
            )
            for e, n, s in self.pairs():
                f.write(f"{e}\t{n}\t{s:.9g}\n")

    @classmethod
    def load(cls, path: str | PathLike) -> NeighborStore:
        with open(path, encoding="utf-8") as f:
            header = f.readline()
            if not header.startswith("#"):
                raise ValueError(f"{path}: missing neighbor-store header")
            meta = dict(kv.split("=", 1) for kv in header[1:].split())
            params = SimilarityParams(float(meta["shrink"]), int(meta["top_n"]), meta["axis"])
            n_ent = int(meta["entities"])
            rows = [line.split("\t") for line in f if line.strip()]
        ents = np.array([int(r[0]) for r in rows], dtype=np.int64)
        ptr = np.zeros(n_ent + 1, dtype=np.int64)
        np.cumsum(np.bincount(ents, minlength=n_ent), out=ptr[1:])
        nbrs = [int(r[1]) for r in rows]
        scores = [float(r[2]) for r in rows]
        return cls(params, ptr, nbrs, scores)

    def __repr__(self):
        return f"<NeighborStore {self.params.axis} top_n={self.params.top_n}, {len(self)} links>"


def build_neighbor_store(
    table: RatingsTable, bias: BiasModel, params: SimilarityParams
) -> NeighborStore:
    """
    Compute similarities against every other entity and keep each entity's
    ``top_n`` highest-scoring neighbours.

    Candidates come from an inverted index over co-ratings, which only skips
    pairs whose score is 0 anyway.  Zero scores are never stored; negative
    scores are kept and ranked by signed value.
    """
    if len(table) == 0:
        raise ValueError("cannot build neighbors from an empty table")
    (eptr, eidx, evals), (mptr, midx, mvals), center = _axis_arrays(table, bias, params.axis)
    ptr, nbr, score = _store_kernel(
        eptr, eidx, evals, mptr, midx, mvals, center, float(params.shrink), int(params.top_n)
    )
    store = NeighborStore(params, ptr, nbr, score)
    _log.info("built %s", store)
    return store
