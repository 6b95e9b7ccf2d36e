"""
Integrated neighbourhood + latent-factor model trained by SGD.

Prediction::

    r(u,i) = a1[u] * (mean + bu[u] + bi[i])
           + a2[u] * p_u . q_i
           + a3[u] * sum_{j in N(i), u rated j} w[i,j] * (r(u,j) - b(u,j))

``N(i)`` is the frozen item neighbour list, ``b`` the frozen average-rating
baseline and ``w`` one learned weight per stored neighbour link.  Version
``"v1"`` pins ``a1 = a2 = a3 = 1``; version ``"v2"`` learns them per user.

Training minimises::

    sum (r - r_hat)^2 + l1 (|bu|^2 + |bi|^2) + l2 (|P|^2 + |Q|^2)
        + l3 |w|^2 [+ l4 (|a1|^2 + |a2|^2 + |a3|^2)   for v2]

one rating at a time.  Every parameter touched by a rating moves against
half the gradient of that rating's term (squared error plus the touched
parameters' penalties), scaled by its learning rate, all computed from the
pre-update values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np
from numba import njit

from .als import init_factors
from .baseline import BiasModel
from .dataset import Dataset, RatingsTable
from .errors import ConfigError, DivergenceError
from .metrics import BestTracker, EpochRecord, SelectBy, TrainingTrace, mae_arrays, relative_change
from .similarity import NeighborStore

_log = logging.getLogger(__name__)

Version = Literal["v1", "v2"]

#: training aborts once the objective exceeds this multiple of its initial value
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class SgdConfig:
    k: int = 20
    top_n: int = 10
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 1.0
    lambda4: float = 1.0
    lr1: float = 0.002
    lr2: float = 0.005
    lr3: float = 0.002
    lr4: float = 0.002
    max_iter: int = 100
    epsilon: float = 1e-4
    seed: int | None = None
    init: Literal["constant", "uniform"] = "constant"
    select_by: SelectBy = "min-test-mae"
    center_a_reg: bool = False
    blend_scaled_updates: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.top_n < 0:
            raise ConfigError("top_n must be nonnegative")
        for name in ("lr1", "lr2", "lr3", "lr4"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be nonnegative")
        for name in ("lr1", "lr2", "lr3"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.init not in ("constant", "uniform"):
            raise ConfigError(f"unknown init {self.init!r}")

    @classmethod
    def published(cls, version: Version = "v1", **overrides) -> SgdConfig:
        """Published hyperparameters for the given model version."""
        if version == "v2":
            base = dict(lr2=0.01)
        elif version == "v1":
            base = {}
        else:
            raise ValueError(f"unknown version {version!r}")
        base.update(overrides)
        return cls(**base)

    def lambdas(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3, self.lambda4])

    def rates(self) -> np.ndarray:
        return np.array([self.lr1, self.lr2, self.lr3, self.lr4])


@dataclass(eq=False)
class IntegratedModel:
    """
    Learned parameters plus the frozen structures prediction depends on.

    ``w`` is aligned with the storage order of ``neighbor_store`` (one weight
    per stored link) and ``a`` holds the per-user blend weights as columns.
    ``train`` supplies the ``r(u,j)`` ratings of the neighbourhood term.
    """

    version: Version
    bu: np.ndarray
    bi: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    w: np.ndarray
    a: np.ndarray
    global_mean: float
    neighbor_store: NeighborStore
    bias: BiasModel
    train: RatingsTable | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.P.shape[1]

    @property
    def a1(self) -> np.ndarray:
        return self.a[:, 0]

    @property
    def a2(self) -> np.ndarray:
        return self.a[:, 1]

    @property
    def a3(self) -> np.ndarray:
        return self.a[:, 2]

    def weights(self) -> dict[tuple[int, int], float]:
        """Neighbour weights keyed by ``(item, neighbor item)``."""
        return {
            (i, j): float(self.w[s])
            for s, (i, j, _) in enumerate(self.neighbor_store.pairs())
        }

    def copy(self) -> IntegratedModel:
        return replace(
            self, bu=self.bu.copy(), bi=self.bi.copy(), P=self.P.copy(), Q=self.Q.copy(),
            w=self.w.copy(), a=self.a.copy(),
        )

    def predict_many(self, users, items) -> np.ndarray:
        if self.train is None:
            raise ValueError("model has no training table attached")
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        M, N = self.P.shape[0], self.Q.shape[0]
        if len(users) and (users.min() < 0 or users.max() >= M or items.min() < 0 or items.max() >= N):
            raise IndexError("user or item index out of range")
        terms = neighbor_terms(self.train, self.bias, self.neighbor_store, users, items)
        return _predict(self, users, items, terms)


@dataclass(frozen=True, eq=False)
class NeighborTerms:
    """
    For each (u, i) pair, the active neighbour links and their deviations.

    ``slot[ptr[t]:ptr[t+1]]`` index into the store / ``w``; ``dev`` holds
    ``r(u,j) - b(u,j)`` for the same links.
    """

    ptr: np.ndarray
    slot: np.ndarray
    dev: np.ndarray


@njit(cache=True, nogil=True)
def _match_links(u, i, sptr, snbr, uptr, uitems, slots, positions):
    """Fill store slots / rating positions of ``i``'s neighbours rated by ``u``."""
    n = 0
    if u < 0 or u >= len(uptr) - 1 or i < 0 or i >= len(sptr) - 1:
        return 0
    lo = uptr[u]
    hi = uptr[u + 1]
    for s in range(sptr[i], sptr[i + 1]):
        j = snbr[s]
        pos = lo + np.searchsorted(uitems[lo:hi], j)
        if pos < hi and uitems[pos] == j:
            slots[n] = s
            positions[n] = pos
            n += 1
    return n


@njit(cache=True, nogil=True)
def _terms_kernel(users, items, sptr, snbr, uptr, uitems, uratings, gm, cu, ci):
    n = len(users)
    width = 0
    for i in range(len(sptr) - 1):
        width = max(width, sptr[i + 1] - sptr[i])
    slots = np.empty(width, dtype=np.int64)
    positions = np.empty(width, dtype=np.int64)

    ptr = np.zeros(n + 1, dtype=np.int64)
    for t in range(n):
        ptr[t + 1] = ptr[t] + _match_links(users[t], items[t], sptr, snbr, uptr, uitems, slots, positions)
    slot = np.empty(ptr[n], dtype=np.int64)
    dev = np.empty(ptr[n])
    for t in range(n):
        u = users[t]
        c = _match_links(u, items[t], sptr, snbr, uptr, uitems, slots, positions)
        for k in range(c):
            s = slots[k]
            j = snbr[s]
            slot[ptr[t] + k] = s
            dev[ptr[t] + k] = uratings[positions[k]] - (gm + cu[u] + ci[j])
    return ptr, slot, dev


def neighbor_terms(
    train: RatingsTable, bias: BiasModel, store: NeighborStore, users, items
) -> NeighborTerms:
    """Active neighbour links ``j in N(i)`` with ``r(u,j)`` known, per pair."""
    ptr, slot, dev = _terms_kernel(
        np.asarray(users, dtype=np.int64), np.asarray(items, dtype=np.int64),
        store.ptr, store.neighbors, train.user_ptr, train.user_items, train.user_ratings,
        float(bias.global_mean),
        np.ascontiguousarray(bias.user_terms(), dtype=np.float64),
        np.ascontiguousarray(bias.item_terms(), dtype=np.float64),
    )
    return NeighborTerms(ptr, slot, dev)


@njit(cache=True, nogil=True)
def _predict_kernel(users, items, nptr, nslot, ndev, gm, bu, bi, P, Q, w, a, out):
    K = P.shape[1]
    for t in range(len(users)):
        u = users[t]
        i = items[t]
        base = gm + bu[u] + bi[i]
        mf = 0.0
        for k in range(K):
            mf += P[u, k] * Q[i, k]
        cf = 0.0
        for s in range(nptr[t], nptr[t + 1]):
            cf += ndev[s] * w[nslot[s]]
        out[t] = a[u, 0] * base + a[u, 1] * mf + a[u, 2] * cf


@njit(cache=True, nogil=True)
def _sgd_kernel(order, users, items, ratings, nptr, nslot, ndev, gm,
                bu, bi, P, Q, w, a, lam, lr, update_a, blend_scaled, a_center):
    K = P.shape[1]
    l1, l2, l3, l4 = lam[0], lam[1], lam[2], lam[3]
    r1, r2, r3, r4 = lr[0], lr[1], lr[2], lr[3]
    for t in order:
        u = users[t]
        i = items[t]
        bu_u = bu[u]
        bi_i = bi[i]
        base = gm + bu_u + bi_i
        mf = 0.0
        for k in range(K):
            mf += P[u, k] * Q[i, k]
        cf = 0.0
        for s in range(nptr[t], nptr[t + 1]):
            cf += ndev[s] * w[nslot[s]]
        a1 = a[u, 0]
        a2 = a[u, 1]
        a3 = a[u, 2]
        e = ratings[t] - (a1 * base + a2 * mf + a3 * cf)
        if blend_scaled:
            g1 = e * a1
            g2 = e * a2
            g3 = e * a3
        else:
            g1 = e
            g2 = e
            g3 = e

        bu[u] = bu_u - r1 * (l1 * bu_u - g1)
        bi[i] = bi_i - r1 * (l1 * bi_i - g1)
        for k in range(K):
            pk = P[u, k]
            qk = Q[i, k]
            P[u, k] = pk - r2 * (l2 * pk - g2 * qk)
            Q[i, k] = qk - r2 * (l2 * qk - g2 * pk)
        for s in range(nptr[t], nptr[t + 1]):
            ws = w[nslot[s]]
            w[nslot[s]] = ws - r3 * (l3 * ws - g3 * ndev[s])
        if update_a:
            a[u, 0] = a1 - r4 * (l4 * (a1 - a_center) - e * base)
            a[u, 1] = a2 - r4 * (l4 * (a2 - a_center) - e * mf)
            a[u, 2] = a3 - r4 * (l4 * (a3 - a_center) - e * cf)


def _predict(m: IntegratedModel, users, items, terms: NeighborTerms) -> np.ndarray:
    out = np.empty(len(users))
    _predict_kernel(
        users, items, terms.ptr, terms.slot, terms.dev, float(m.global_mean),
        m.bu, m.bi, m.P, m.Q, m.w, m.a, out,
    )
    return out


def predict_integrated(u: int, i: int, m: IntegratedModel) -> float:
    return float(m.predict_many([u], [i])[0])


def _objective(m: IntegratedModel, table: RatingsTable, terms: NeighborTerms, cfg: SgdConfig) -> float:
    # overflow shows up as a non-finite objective, which the caller reports
    with np.errstate(over="ignore", invalid="ignore"):
        err = table.ratings - _predict(m, table.users, table.items, terms)
        f = float(err @ err)
        f += cfg.lambda1 * float(m.bu @ m.bu + m.bi @ m.bi)
        f += cfg.lambda2 * float(np.sum(m.P * m.P) + np.sum(m.Q * m.Q))
        f += cfg.lambda3 * float(m.w @ m.w)
        if m.version == "v2":
            ad = m.a - 1.0 if cfg.center_a_reg else m.a
            f += cfg.lambda4 * float(np.sum(ad * ad))
    return f


def objective(m: IntegratedModel, data: Dataset, cfg: SgdConfig) -> float:
    """Regularised squared-error objective over the training set."""
    terms = neighbor_terms(data.train, m.bias, m.neighbor_store, data.train.users, data.train.items)
    return _objective(m, data.train, terms, cfg)


def init_model(
    data: Dataset, store: NeighborStore, bias: BiasModel, cfg: SgdConfig, version: Version
) -> IntegratedModel:
    """
    Starting point for training: biases at the observed mean offsets, factor
    entries at 1/K (or seeded uniform(0, 1/K)), blend weights at 1 and
    neighbour weights at their similarity scores.
    """
    if version not in ("v1", "v2"):
        raise ValueError(f"unknown version {version!r}")
    if store.params.axis != "item":
        raise ConfigError("the integrated model needs an item-axis neighbor store")
    if store.params.top_n != cfg.top_n:
        raise ConfigError(f"neighbor store top_n={store.params.top_n} but config top_n={cfg.top_n}")
    train = data.train
    if store.num_entities != train.num_items:
        raise ConfigError("neighbor store does not match the training items")
    rng = np.random.default_rng(cfg.seed) if cfg.init == "uniform" else None
    return IntegratedModel(
        version=version,
        bu=np.array(bias.user_offset, dtype=np.float64),
        bi=np.array(bias.item_offset, dtype=np.float64),
        P=init_factors(train.num_users, cfg.k, cfg.init, rng),
        Q=init_factors(train.num_items, cfg.k, cfg.init, rng),
        w=np.array(store.scores, dtype=np.float64),
        a=np.ones((train.num_users, 3)),
        global_mean=float(bias.global_mean),
        neighbor_store=store,
        bias=bias,
        train=train,
    )


def sgd_epoch(m: IntegratedModel, table: RatingsTable, terms: NeighborTerms, cfg: SgdConfig, order):
    """Run SGD updates in place over the training pairs listed in ``order``."""
    _sgd_kernel(
        np.asarray(order, dtype=np.int64), table.users, table.items, table.ratings,
        terms.ptr, terms.slot, terms.dev, float(m.global_mean),
        m.bu, m.bi, m.P, m.Q, m.w, m.a, cfg.lambdas(), cfg.rates(),
        m.version == "v2", cfg.blend_scaled_updates, 1.0 if cfg.center_a_reg else 0.0,
    )


def fit_integrated(
    data: Dataset,
    store: NeighborStore,
    bias: BiasModel,
    cfg: SgdConfig,
    version: Version = "v2",
    callback: Callable[[int, IntegratedModel], None] | None = None,
) -> tuple[IntegratedModel, TrainingTrace]:
    """
    Train an integrated model by SGD over the training ratings.

    Ratings are visited in dataset order every epoch, or in a fresh seeded
    permutation per epoch when ``cfg.seed`` is set.  Training stops after the
    first epoch whose relative objective change is below ``cfg.epsilon``,
    or after ``cfg.max_iter`` epochs.  ``callback(epoch, model)`` sees the
    live model after each epoch.

    Raises:
        DivergenceError: the objective became non-finite or grew past
            ``DIVERGENCE_FACTOR`` times its initial value.
    """
    train, test = data.train, data.test
    m = init_model(data, store, bias, cfg, version)
    train_terms = neighbor_terms(train, bias, store, train.users, train.items)
    test_terms = neighbor_terms(train, bias, store, test.users, test.items)

    f0 = _objective(m, train, train_terms, cfg)
    trace = TrainingTrace(initial_objective=f0)
    best = BestTracker(cfg.select_by)
    shuffler = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    order = np.arange(len(train), dtype=np.int64)

    f_prev = f0
    for epoch in range(1, cfg.max_iter + 1):
        if shuffler is not None:
            order = shuffler.permutation(len(train))
        sgd_epoch(m, train, train_terms, cfg, order)
        f = _objective(m, train, train_terms, cfg)
        if not math.isfinite(f) or f > DIVERGENCE_FACTOR * f0:
            raise DivergenceError(f"objective {f:.6g} diverged from initial {f0:.6g}", epoch)

        test_mae = mae_arrays(_predict(m, test.users, test.items, test_terms), test.ratings)
        rel = relative_change(f, f_prev)
        trace.epochs.append(EpochRecord(epoch, f, test_mae, rel))
        best.offer(epoch, test_mae, m.copy)
        if callback is not None:
            callback(epoch, m)
        _log.debug("%s epoch %d: objective %.6g, test MAE %.5f", version, epoch, f, test_mae)
        if rel < cfg.epsilon:
            trace.converged = True
            break
        f_prev = f

    if best.state is not None:
        m = best.state
        trace.selected_epoch = best.epoch
    else:
        trace.selected_epoch = trace.n_epochs
    _log.info(
        "integrated %s finished after %d epochs (converged=%s), using epoch %d",
        version, trace.n_epochs, trace.converged, trace.selected_epoch,
    )
    return m, trace
