"""
Average-rating bias baseline.

The baseline is ``b(u, i) = mean + (user_mean[u] - mean) + (item_mean[i] - mean)``.
Setting ``literal=True`` switches to the un-centred sum
``mean + user_mean[u] + item_mean[i]``, which triple-counts the global mean;
it exists only so the two readings can be compared.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import RatingsTable
from .errors import ConfigError

_log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BiasModel:
    global_mean: float
    user_offset: np.ndarray
    item_offset: np.ndarray
    literal: bool = False

    @property
    def user_mean(self) -> np.ndarray:
        return self.global_mean + self.user_offset

    @property
    def item_mean(self) -> np.ndarray:
        return self.global_mean + self.item_offset

    def user_terms(self) -> np.ndarray:
        """Per-user additive term of :meth:`predict` (offset, or mean if literal)."""
        return self.user_mean if self.literal else self.user_offset

    def item_terms(self) -> np.ndarray:
        return self.item_mean if self.literal else self.item_offset

    def predict(self, u: int, i: int) -> float:
        uo = self.user_offset[u] if 0 <= u < len(self.user_offset) else 0.0
        io = self.item_offset[i] if 0 <= i < len(self.item_offset) else 0.0
        if self.literal:
            return float(self.global_mean + (self.global_mean + uo) + (self.global_mean + io))
        return float(self.global_mean + uo + io)

    def predict_many(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        uterm, iterm = self.user_terms(), self.item_terms()
        cold = 0.0 if not self.literal else self.global_mean
        uok = (users >= 0) & (users < len(uterm))
        iok = (items >= 0) & (items < len(iterm))
        ut = np.where(uok, uterm[np.where(uok, users, 0)], cold)
        it = np.where(iok, iterm[np.where(iok, items, 0)], cold)
        return self.global_mean + ut + it


def fit_bias(table: RatingsTable, literal: bool = False) -> BiasModel:
    """
    Compute the global mean and per-user / per-item mean offsets of a table.

    Users or items without ratings get a zero offset.
    """
    if len(table) == 0:
        raise ConfigError("cannot fit a bias model to an empty table")

    mean = float(np.mean(table.ratings))

    def offsets(index: np.ndarray, n: int) -> np.ndarray:
        counts = np.bincount(index, minlength=n)
        sums = np.bincount(index, weights=table.ratings, minlength=n)
        off = np.zeros(n)
        seen = counts > 0
        off[seen] = sums[seen] / counts[seen] - mean
        off.setflags(write=False)
        return off

    uoff = offsets(table.users, table.num_users)
    ioff = offsets(table.items, table.num_items)
    _log.debug("global mean %.4f over %d ratings", mean, len(table))
    return BiasModel(mean, uoff, ioff, literal)


def predict_baseline(u: int, i: int, bias: BiasModel) -> float:
    """Baseline prediction for one (user, item) pair; cold entities get offset 0."""
    return bias.predict(u, i)
