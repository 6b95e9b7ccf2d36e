"""
Rating prediction with a bias baseline, neighbourhood collaborative
filtering, ALS matrix factorization, and integrated CF + MF models trained
by SGD (fixed blend ``v1`` and per-user blend ``v2``).
"""

from .als import AlsConfig, FactorModel, fit_als, predict_mf
from .baseline import BiasModel, fit_bias, predict_baseline
from .dataset import Dataset, RatingsTable, RawRating, build_dataset, parse_ratings_file
from .errors import (
    CfmfError, ConfigError, DivergenceError, RatingParseError, RatingRangeError, SolverError,
)
from .evaluation import (
    ALGORITHMS, EvalReport, ExperimentConfig, SweepSpec, run_experiment, run_sweep, sweep_csv,
)
from .integrated import IntegratedModel, SgdConfig, fit_integrated, objective, predict_integrated
from .metrics import TrainingTrace, mae
from .modelio import load_model, save_model
from .neighborhood import CfPredictor, predict_cf
from .similarity import NeighborStore, SimilarityParams, build_neighbor_store, pair_similarity
from .synthetic import generate_synthetic

__version__ = "0.1.0"
