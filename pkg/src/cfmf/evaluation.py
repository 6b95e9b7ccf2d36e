"""
Training and MAE evaluation for every predictor, plus parameter sweeps.

:func:`run_experiment` trains one algorithm on ``dataset.train`` and scores
it on ``dataset.test``; :func:`run_sweep` repeats that over a grid of
neighbour counts ``N`` or latent dimensions ``K`` and produces CSV rows.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Literal, Sequence

import numpy as np

from .als import AlsConfig, FactorModel, fit_als
from .baseline import BiasModel, fit_bias
from .dataset import Dataset
from .errors import ConfigError
from .integrated import IntegratedModel, SgdConfig, fit_integrated
from .metrics import SelectBy, TrainingTrace, mae, mae_arrays
from .neighborhood import CfPredictor
from .similarity import SimilarityParams, build_neighbor_store

_log = logging.getLogger(__name__)

ALGORITHMS = ("baseline", "cf_user", "cf_item", "mf_als", "cf_mf_v1", "cf_mf_v2")
RATING_SCALE = (0.0, 10.0)

#: grids used for the published comparisons
PUBLISHED_N_VALUES = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
PUBLISHED_K_VALUES = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 60, 70, 80, 90, 100)

SWEEP_CSV_HEADER = ("algorithm", "axis", "value", "mae", "wall_time_s")

__all__ = [
    "ALGORITHMS", "ExperimentConfig", "EvalReport", "SweepSpec", "mae",
    "train_model", "predict", "evaluate_model", "run_experiment", "run_sweep",
    "sweep_csv",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Every knob of every algorithm.  SGD lambdas and learning rates left as
    ``None`` take the published per-version defaults.
    """

    k: int = 20
    top_n: int = 10
    shrink: float = 100.0
    als_lambda: float = 10.0
    lambda1: float | None = None
    lambda2: float | None = None
    lambda3: float | None = None
    lambda4: float | None = None
    lr1: float | None = None
    lr2: float | None = None
    lr3: float | None = None
    lr4: float | None = None
    max_iter: int = 100
    epsilon: float = 1e-4
    seed: int | None = None
    init: Literal["constant", "uniform"] = "constant"
    clamp: bool = False
    select_by: SelectBy = "min-test-mae"
    baseline_literal_eq6: bool = False
    als_raw_targets: bool = False
    center_a_reg: bool = False
    literal_v2_updates: bool = False

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)

    def similarity(self, axis: str) -> SimilarityParams:
        return SimilarityParams(self.shrink, self.top_n, axis)

    def als(self) -> AlsConfig:
        return AlsConfig(
            k=self.k, reg=self.als_lambda, max_iter=self.max_iter, epsilon=self.epsilon,
            init=self.init, seed=self.seed, raw_targets=self.als_raw_targets,
            select_by=self.select_by,
        )

    def sgd(self, version: str) -> SgdConfig:
        overrides = {
            name: getattr(self, name)
            for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lr1", "lr2", "lr3", "lr4")
            if getattr(self, name) is not None
        }
        return SgdConfig.published(
            version, k=self.k, top_n=self.top_n, max_iter=self.max_iter, epsilon=self.epsilon,
            seed=self.seed, init=self.init, select_by=self.select_by,
            center_a_reg=self.center_a_reg, blend_scaled_updates=not self.literal_v2_updates,
            **overrides,
        )


@dataclass
class EvalReport:
    algorithm: str
    params: dict[str, Any]
    mae: float
    coverage: float
    wall_time: float
    n_test: int
    per_epoch: list[tuple[int, float, float]] | None = None
    selected_epoch: int | None = None
    converged: bool | None = None

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        d = asdict(self)
        if d["per_epoch"] is not None:
            d["per_epoch"] = [list(row) for row in d["per_epoch"]]
        if not include_timing:
            del d["wall_time"]
        return d


Model = BiasModel | CfPredictor | FactorModel | IntegratedModel


def _check_algorithm(algorithm: str):
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")


def train_model(
    dataset: Dataset, algorithm: str, config: ExperimentConfig = ExperimentConfig()
) -> tuple[Model, TrainingTrace | None]:
    """Fit ``algorithm`` on the training table; iterative fits also return a trace."""
    _check_algorithm(algorithm)
    train = dataset.train
    bias = fit_bias(train, literal=config.baseline_literal_eq6)
    if algorithm == "baseline":
        return bias, None
    if algorithm in ("cf_user", "cf_item"):
        axis = "user" if algorithm == "cf_user" else "item"
        store = build_neighbor_store(train, bias, config.similarity(axis))
        return CfPredictor(store, bias, train, axis), None
    if algorithm == "mf_als":
        return fit_als(dataset, config.als())
    version = "v1" if algorithm == "cf_mf_v1" else "v2"
    store = build_neighbor_store(train, bias, config.similarity("item"))
    return fit_integrated(dataset, store, bias, config.sgd(version), version)


def predict(model: Model, users, items) -> tuple[np.ndarray, np.ndarray]:
    """Predictions and a per-pair "answered without fallback" mask."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    if isinstance(model, CfPredictor):
        preds, fallback = model.predict_many(users, items)
        return preds, ~fallback
    return model.predict_many(users, items), np.ones(len(users), dtype=bool)


def algorithm_of(model: Model) -> str:
    if isinstance(model, BiasModel):
        return "baseline"
    if isinstance(model, CfPredictor):
        return f"cf_{model.axis}"
    if isinstance(model, FactorModel):
        return "mf_als"
    if isinstance(model, IntegratedModel):
        return f"cf_mf_{model.version}"
    raise TypeError(f"not a model: {type(model).__name__}")


def evaluate_model(
    model: Model,
    dataset: Dataset,
    config: ExperimentConfig = ExperimentConfig(),
    trace: TrainingTrace | None = None,
    wall_time: float = 0.0,
) -> EvalReport:
    """Score a fitted model on the test table."""
    test = dataset.test
    if len(test) == 0:
        raise ConfigError("no test ratings to evaluate")
    t0 = time.perf_counter()
    preds, covered = predict(model, test.users, test.items)
    if config.clamp:
        preds = np.clip(preds, *RATING_SCALE)
    wall_time += time.perf_counter() - t0
    algorithm = algorithm_of(model)
    params = config.to_dict()
    if isinstance(model, IntegratedModel):
        resolved = asdict(config.sgd(model.version))
        params.update({k: v for k, v in resolved.items() if k in params and params[k] is None})
    return EvalReport(
        algorithm=algorithm,
        params=params,
        mae=mae_arrays(preds, test.ratings),
        coverage=float(np.mean(covered)),
        wall_time=wall_time,
        n_test=len(test),
        per_epoch=trace.per_epoch() if trace is not None else None,
        selected_epoch=trace.selected_epoch if trace is not None else None,
        converged=trace.converged if trace is not None else None,
    )


def run_experiment(
    dataset: Dataset, algorithm: str, config: ExperimentConfig = ExperimentConfig()
) -> EvalReport:
    """Train ``algorithm`` and report its test MAE and coverage."""
    _check_algorithm(algorithm)
    if len(dataset.test) == 0:
        raise ConfigError("no test ratings to evaluate")
    t0 = time.perf_counter()
    model, trace = train_model(dataset, algorithm, config)
    elapsed = time.perf_counter() - t0
    report = evaluate_model(model, dataset, config, trace, elapsed)
    _log.info("%s: MAE %.5f, coverage %.3f (%.2fs)", algorithm, report.mae, report.coverage, report.wall_time)
    return report


@dataclass(frozen=True)
class SweepSpec:
    axis: Literal["N", "K"]
    values: tuple[int, ...]
    fixed: ExperimentConfig = field(default_factory=ExperimentConfig)

    def __post_init__(self):
        if self.axis not in ("N", "K"):
            raise ValueError(f"sweep axis must be 'N' or 'K', not {self.axis!r}")
        values = tuple(int(v) for v in self.values)
        if not values:
            raise ValueError("sweep needs at least one value")
        if any(v < 1 for v in values):
            raise ValueError("sweep values must be positive")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", values)

    def config_for(self, value: int) -> ExperimentConfig:
        key = "top_n" if self.axis == "N" else "k"
        return self.fixed.with_(**{key: value})


def run_sweep(
    dataset: Dataset, spec: SweepSpec, algorithms: Sequence[str], n_jobs: int = 1
) -> list[dict[str, Any]]:
    """
    One row per (algorithm, value) cell, in algorithm-major order.

    Cells are independent; ``n_jobs > 1`` evaluates them on a thread pool
    without changing any row's MAE.
    """
    algorithms = list(algorithms)
    if not algorithms:
        raise ValueError("no algorithms to sweep")
    for a in algorithms:
        _check_algorithm(a)
    cells = [(a, v) for a in algorithms for v in spec.values]

    def run(cell):
        algo, value = cell
        rep = run_experiment(dataset, algo, spec.config_for(value))
        return {
            "algorithm": algo, "axis": spec.axis, "value": value,
            "mae": rep.mae, "wall_time_s": rep.wall_time,
        }

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            return list(pool.map(run, cells))
    return [run(c) for c in cells]


def sweep_csv(rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, SWEEP_CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({
            **row,
            "mae": f"{row['mae']:.6f}" if math.isfinite(row["mae"]) else "nan",
            "wall_time_s": f"{row['wall_time_s']:.3f}",
        })
    return buf.getvalue()
