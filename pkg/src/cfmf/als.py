"""
Matrix factorization ``r(u,i) = mean + p_u . q_i`` trained by alternating
least squares.

Each sweep re-solves every user row with the item factors fixed, then every
item row with the user factors fixed.  Row solves are exact ridge
regressions on the residual ``r - mean``, done with a Cholesky factorization
of ``reg * I + sum q q^T``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dataset import Dataset, RatingsTable
from .errors import ConfigError, SolverError
from .metrics import BestTracker, EpochRecord, SelectBy, TrainingTrace, mae_arrays, relative_change

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlsConfig:
    k: int = 20
    reg: float = 10.0
    max_iter: int = 100
    epsilon: float = 1e-4
    init: Literal["constant", "uniform"] = "constant"
    seed: int | None = None
    raw_targets: bool = False
    select_by: SelectBy = "min-test-mae"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.reg < 0:
            raise ConfigError("reg must be nonnegative")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.init not in ("constant", "uniform"):
            raise ConfigError(f"unknown init {self.init!r}")


@dataclass(frozen=True, eq=False)
class FactorModel:
    P: np.ndarray
    Q: np.ndarray
    global_mean: float

    @property
    def k(self) -> int:
        return self.P.shape[1]

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        return self.global_mean + np.einsum("ij,ij->i", self.P[users], self.Q[items])


def predict_mf(u: int, i: int, model: FactorModel) -> float:
    if not (0 <= u < model.P.shape[0]):
        raise IndexError(f"user index {u} out of range")
    if not (0 <= i < model.Q.shape[0]):
        raise IndexError(f"item index {i} out of range")
    return float(model.global_mean + model.P[u] @ model.Q[i])


def init_factors(n: int, k: int, init: str, rng: np.random.Generator | None) -> np.ndarray:
    """Factor matrix filled with 1/k, or uniform(0, 1/k) draws."""
    if init == "uniform":
        return rng.uniform(0.0, 1.0 / k, size=(n, k))
    return np.full((n, k), 1.0 / k)


def als_objective(table: RatingsTable, P, Q, global_mean: float, reg: float) -> float:
    """Squared error of ``mean + p.q`` over the table plus ``reg (|P|^2 + |Q|^2)``."""
    pred = global_mean + np.einsum("ij,ij->i", P[table.users], Q[table.items])
    err = table.ratings - pred
    return float(err @ err + reg * (np.sum(P * P) + np.sum(Q * Q)))


def _solve_rows(ptr, idx, targets, other, this, reg, kind):
    k = other.shape[1]
    ridge = reg * np.eye(k)
    for row in range(len(ptr) - 1):
        lo, hi = ptr[row], ptr[row + 1]
        if lo == hi:
            this[row] = 0.0
            continue
        X = other[idx[lo:hi]]
        A = ridge + X.T @ X
        b = X.T @ targets[lo:hi]
        try:
            this[row] = cho_solve(cho_factor(A, lower=True, check_finite=False), b)
        except LinAlgError:
            if not np.any(b):
                # zero right-hand side: the zero row is the minimum-norm minimizer
                this[row] = 0.0
                continue
            raise SolverError(f"singular normal matrix for {kind} {row}") from None


def fit_als(data: Dataset, cfg: AlsConfig) -> tuple[FactorModel, TrainingTrace]:
    """
    Train a :class:`FactorModel` by ALS.

    Stops once the relative objective change after a full sweep is at most
    ``cfg.epsilon``, or after ``cfg.max_iter`` sweeps.  With
    ``select_by="min-test-mae"`` the returned factors are those of the sweep
    with the lowest test MAE (this peeks at the test set); ``"final"``
    returns the last sweep.
    """
    train = data.train
    if len(train) == 0:
        raise ConfigError("training data is empty")
    gm = float(np.mean(train.ratings))
    rng = np.random.default_rng(cfg.seed) if cfg.init == "uniform" else None
    P = init_factors(train.num_users, cfg.k, cfg.init, rng)
    Q = init_factors(train.num_items, cfg.k, cfg.init, rng)

    shift = 0.0 if cfg.raw_targets else gm
    user_targets = train.user_ratings - shift
    item_targets = train.item_ratings - shift

    test = data.test
    f_prev = als_objective(train, P, Q, gm, cfg.reg)
    trace = TrainingTrace(initial_objective=f_prev, half_objectives=[f_prev])
    best = BestTracker(cfg.select_by)

    for it in range(1, cfg.max_iter + 1):
        _solve_rows(train.user_ptr, train.user_items, user_targets, Q, P, cfg.reg, "user")
        trace.half_objectives.append(als_objective(train, P, Q, gm, cfg.reg))
        _solve_rows(train.item_ptr, train.item_users, item_targets, P, Q, cfg.reg, "item")
        f = als_objective(train, P, Q, gm, cfg.reg)
        trace.half_objectives.append(f)

        model = FactorModel(P, Q, gm)
        test_mae = mae_arrays(model.predict_many(test.users, test.items), test.ratings)
        rel = relative_change(f, f_prev)
        trace.epochs.append(EpochRecord(it, f, test_mae, rel))
        best.offer(it, test_mae, lambda: (P.copy(), Q.copy()))
        _log.debug("ALS sweep %d: objective %.6g, test MAE %.5f", it, f, test_mae)
        if not math.isfinite(f):
            raise SolverError(f"objective became non-finite at sweep {it}")
        if rel <= cfg.epsilon:
            trace.converged = True
            break
        f_prev = f

    if best.state is not None:
        P, Q = best.state
        trace.selected_epoch = best.epoch
    else:
        trace.selected_epoch = trace.n_epochs
    _log.info(
        "ALS finished after %d sweeps (converged=%s), using sweep %d",
        trace.n_epochs, trace.converged, trace.selected_epoch,
    )
    return FactorModel(P.copy(), Q.copy(), gm), trace
