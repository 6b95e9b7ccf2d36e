"""Error metrics and per-epoch training traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

SelectBy = Literal["min-test-mae", "final"]


def mae(predictions: Iterable[tuple[float, float]]) -> float:
    """Mean absolute error over ``(predicted, actual)`` pairs."""
    pairs = np.asarray(list(predictions), dtype=np.float64)
    if pairs.size == 0:
        raise ValueError("MAE of an empty prediction list")
    return float(np.mean(np.abs(pairs[:, 0] - pairs[:, 1])))


def mae_arrays(predicted: np.ndarray, actual: np.ndarray) -> float:
    """MAE of two aligned arrays; NaN when they are empty."""
    if len(actual) == 0:
        return math.nan
    return float(np.mean(np.abs(np.asarray(predicted) - np.asarray(actual))))


def rmse_arrays(predicted: np.ndarray, actual: np.ndarray) -> float:
    if len(actual) == 0:
        return math.nan
    return float(np.sqrt(np.mean(np.square(np.asarray(predicted) - np.asarray(actual)))))


def relative_change(current: float, previous: float) -> float:
    """``|f(t) - f(t-1)| / f(t-1)``; 0 if both are 0, inf if only the previous is."""
    diff = abs(current - previous)
    if previous == 0:
        return 0.0 if diff == 0 else math.inf
    return diff / abs(previous)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    objective: float
    mae: float
    relative_change: float


@dataclass
class TrainingTrace:
    """
    Objective and test-MAE history of an iterative fit.

    ``selected_epoch`` is the epoch whose parameters the returned model holds.
    ``half_objectives`` is only filled by ALS (objective after each user pass
    and each item pass, starting with the initial objective).
    """

    initial_objective: float
    epochs: list[EpochRecord] = field(default_factory=list)
    converged: bool = False
    selected_epoch: int = 0
    half_objectives: list[float] = field(default_factory=list)

    @property
    def n_epochs(self) -> int:
        return len(self.epochs)

    def per_epoch(self) -> list[tuple[int, float, float]]:
        return [(e.epoch, e.objective, e.mae) for e in self.epochs]


class BestTracker:
    """Remember the lowest-MAE epoch's parameters (earliest wins on ties)."""

    def __init__(self, select_by: SelectBy):
        if select_by not in ("min-test-mae", "final"):
            raise ValueError(f"unknown select_by {select_by!r}")
        self.select_by = select_by
        self.epoch = 0
        self.mae = math.inf
        self.state = None

    def offer(self, epoch: int, mae_value: float, snapshot):
        if self.select_by == "final":
            self.epoch, self.mae, self.state = epoch, mae_value, None
            return
        if not math.isnan(mae_value) and mae_value < self.mae:
            self.epoch, self.mae, self.state = epoch, mae_value, snapshot()
