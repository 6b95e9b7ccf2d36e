"""
Seeded synthetic rating data with a known per-user blend of signals.

Each user's ratings mix three signals around a global level:

* bias: ``user_bias[u] + item_bias[i]``
* factor: ``p_u . q_i`` of rank ``k_true``
* neighbourhood: ``affinity[u, cluster(i)]``, a per-user taste for groups
  of items, so items in the same group co-vary across users

The user factor's first coordinate is pinned to 1, so a constant shift of
the ratings (e.g. removing the global mean) keeps the factor signal at rank
``k_true``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, RawRating, build_dataset

MIXTURES = {
    "pure-bias": (1.0, 0.0, 0.0),
    "pure-factor": (0.0, 1.0, 0.0),
    "pure-neighbor": (0.0, 0.0, 1.0),
    "even": (1.0, 1.0, 1.0),
}


@dataclass(frozen=True)
class SyntheticScales:
    """
    Signal magnitudes.

    The additive bias signal dominates by default, as it does in most
    explicit-feedback rating data; the factor and neighbourhood signals sit
    on top of it at a smaller scale.
    """

    global_level: float = 6.0
    bias_sd: float = 1.5
    factor_sd: float = 0.5
    neighbor_sd: float = 0.5
    items_per_cluster: int = 15


def _blend_weights(mixture, m_users: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(mixture, str):
        if mixture == "mixed":
            # each user leans on one signal more than the others; weights average 1
            return 3.0 * rng.dirichlet(np.full(3, 0.7), size=m_users)
        if mixture not in MIXTURES:
            raise ValueError(f"unknown mixture {mixture!r}")
        mixture = MIXTURES[mixture]
    w = np.asarray(mixture, dtype=np.float64)
    if w.shape != (3,):
        raise ValueError("a mixture profile needs three weights (bias, factor, neighbor)")
    return np.tile(w, (m_users, 1))


def generate_synthetic(
    m_users: int,
    n_items: int,
    k_true: int,
    density: float,
    noise_sd: float,
    mixture: str | Sequence[float] = "mixed",
    seed: int = 0,
    *,
    test_fraction: float = 0.1,
    scales: SyntheticScales = SyntheticScales(),
) -> Dataset:
    """
    Sample a rating matrix, reveal a ``density`` fraction of it, and split
    the revealed ratings 90/10 (by default) into train and test.

    ``mixture`` is one of ``"mixed"`` (per-user weights drawn from a
    Dirichlet and scaled to average 1), ``"pure-bias"``, ``"pure-factor"``,
    ``"pure-neighbor"``, ``"even"``, or an explicit ``(bias, factor,
    neighbor)`` weight triple shared by all users.  Ratings are clipped to
    [0, 10].  Identical arguments give identical datasets.
    """
    if m_users < 1 or n_items < 1:
        raise ValueError("need at least one user and one item")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if k_true < 1:
        raise ValueError("k_true must be at least 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    if not 0 <= test_fraction < 1:
        raise ValueError("test_fraction must lie in [0, 1)")
    n_obs = int(round(density * m_users * n_items))
    if n_obs < 2:
        raise ValueError("density too low: fewer than two ratings")

    rng = np.random.default_rng(seed)
    sc = scales

    user_bias = rng.normal(0.0, sc.bias_sd, m_users)
    item_bias = rng.normal(0.0, sc.bias_sd, n_items)

    P = rng.normal(0.0, 1.0, (m_users, k_true))
    P[:, 0] = 1.0
    Q = rng.normal(0.0, sc.factor_sd / np.sqrt(k_true), (n_items, k_true))

    n_clusters = max(2, n_items // sc.items_per_cluster)
    cluster = rng.integers(0, n_clusters, n_items)
    affinity = rng.normal(0.0, sc.neighbor_sd, (m_users, n_clusters))

    blend = _blend_weights(mixture, m_users, rng)

    cells = rng.choice(m_users * n_items, size=n_obs, replace=False)
    users, items = np.divmod(cells, n_items)

    signal = (
        blend[users, 0] * (user_bias[users] + item_bias[items])
        + blend[users, 1] * np.einsum("ij,ij->i", P[users], Q[items])
        + blend[users, 2] * affinity[users, cluster[items]]
    )
    ratings = np.clip(sc.global_level + signal + rng.normal(0.0, noise_sd, n_obs), 0.0, 10.0)

    n_test = int(round(test_fraction * n_obs))
    records = [
        RawRating(f"u{u}", f"i{i}", float(r), t)
        for t, (u, i, r) in enumerate(zip(users.tolist(), items.tolist(), ratings.tolist()))
    ]
    return build_dataset(records[: n_obs - n_test], records[n_obs - n_test :])
