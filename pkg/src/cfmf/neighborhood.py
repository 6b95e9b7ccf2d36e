"""
Neighbourhood collaborative filtering on top of the bias baseline.

Item axis: ``r(u,i) = b(u,i) + sum_j s(i,j) (r(u,j) - b(u,j)) / sum_j s(i,j)``
over the stored neighbours ``j`` of ``i`` that ``u`` has rated.  The user
axis is the mirror image.  The denominator is the signed similarity sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baseline import BiasModel
from .dataset import RatingsTable
from .similarity import Axis, NeighborStore

#: below this |sum of similarities| the prediction falls back to the baseline
MIN_DENOMINATOR = 1e-12


@dataclass(frozen=True, eq=False)
class CfPredictor:
    store: NeighborStore
    bias: BiasModel
    table: RatingsTable
    axis: Axis = "item"

    def __post_init__(self):
        if self.store.params.axis != self.axis:
            raise ValueError(
                f"neighbor store axis {self.store.params.axis!r} does not match {self.axis!r}"
            )

    def predict_one(self, u: int, i: int) -> tuple[float, bool]:
        """Return ``(prediction, used_fallback)``."""
        base = self.bias.predict(u, i)
        num = 0.0
        den = 0.0
        n = 0
        if self.axis == "item":
            for j, s in self.store.neighbors_of(i):
                r = self.table.rating(u, j)
                if r is not None:
                    num += s * (r - self.bias.predict(u, j))
                    den += s
                    n += 1
        else:
            for v, s in self.store.neighbors_of(u):
                r = self.table.rating(v, i)
                if r is not None:
                    num += s * (r - self.bias.predict(v, i))
                    den += s
                    n += 1
        if n == 0 or abs(den) < MIN_DENOMINATOR:
            return base, True
        return base + num / den, False

    def predict_many(self, users, items) -> tuple[np.ndarray, np.ndarray]:
        """Predict many pairs; returns predictions and a fallback mask."""
        res = [self.predict_one(u, i) for u, i in zip(np.asarray(users).tolist(), np.asarray(items).tolist())]
        preds = np.array([p for p, _ in res], dtype=np.float64)
        fallback = np.array([f for _, f in res], dtype=bool)
        return preds, fallback


def predict_cf(u: int, i: int, p: CfPredictor) -> float:
    """Neighbourhood CF prediction, falling back to the baseline when no
    eligible neighbour contributes."""
    return p.predict_one(u, i)[0]
