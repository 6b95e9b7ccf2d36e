"""
Command-line interface: ``cfmf {train,eval,sweep,gen}``.

Hyperparameters come from defaults, then an optional JSON ``--config``
file, then explicit flags (highest precedence).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import Dataset, build_dataset, format_ratings, parse_ratings_file
from .errors import CfmfError
from .evaluation import (
    ALGORITHMS, PUBLISHED_K_VALUES, PUBLISHED_N_VALUES, ExperimentConfig, SweepSpec,
    evaluate_model, run_sweep, sweep_csv, train_model,
)
from .modelio import load_model, save_model
from .synthetic import MIXTURES, generate_synthetic

_log = logging.getLogger("cfmf")

# flag dest -> ExperimentConfig field
_CONFIG_FLAGS = {
    "k": "k", "top_n": "top_n", "shrink": "shrink", "als_lambda": "als_lambda",
    "lambda1": "lambda1", "lambda2": "lambda2", "lambda3": "lambda3", "lambda4": "lambda4",
    "lr1": "lr1", "lr2": "lr2", "lr3": "lr3", "lr4": "lr4",
    "epsilon": "epsilon", "max_iter": "max_iter", "seed": "seed", "init": "init",
    "select_by": "select_by", "clamp": "clamp",
    "baseline_literal_eq6": "baseline_literal_eq6", "als_raw_targets": "als_raw_targets",
    "center_a_reg": "center_a_reg", "literal_v2_updates": "literal_v2_updates",
}


def _add_data_args(p: argparse.ArgumentParser, test_required: bool):
    p.add_argument("--train", required=True, type=Path, help="training ratings file")
    p.add_argument("--test", required=test_required, type=Path, help="test ratings file")
    p.add_argument("--format", choices=["movietweetings", "csv"], default="movietweetings")


def _add_config_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--config", type=Path, help="JSON file of hyperparameters")
    g.add_argument("--k", type=int, help="latent dimension (default 20)")
    g.add_argument("--top-n", type=int, help="neighbours per entity (default 10)")
    g.add_argument("--shrink", type=float, help="similarity shrinkage constant (default 100)")
    g.add_argument("--als-lambda", type=float, help="ALS regularization (default 10)")
    for n in range(1, 5):
        g.add_argument(f"--lambda{n}", type=float)
        g.add_argument(f"--lr{n}", type=float)
    g.add_argument("--epsilon", type=float, help="relative convergence tolerance (default 1e-4)")
    g.add_argument("--max-iter", type=int, help="epoch / sweep cap (default 100)")
    g.add_argument("--seed", type=int, help="seed for uniform init and SGD shuffling")
    g.add_argument("--init", choices=["constant", "uniform"])
    g.add_argument("--select-by", choices=["min-test-mae", "final"])
    g.add_argument("--clamp", action="store_const", const=True, help="clamp predictions to [0, 10]")
    g.add_argument("--baseline-literal-eq6", action="store_const", const=True,
                   help="use the un-centred sum of global, user and item means as baseline")
    g.add_argument("--als-raw-targets", action="store_const", const=True,
                   help="ALS regresses on raw ratings instead of residuals")
    g.add_argument("--center-a-reg", action="store_const", const=True,
                   help="penalize |a - 1|^2 instead of |a|^2")
    g.add_argument("--literal-v2-updates", action="store_const", const=True,
                   help="omit blend weights from the bu/bi/P/Q/w updates")


def _config(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise CfmfError(f"{args.config}: config must be a JSON object")
        values.update(loaded)
    for dest, name in _CONFIG_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = v
    return ExperimentConfig.from_dict(values)


def _load_dataset(args) -> Dataset:
    train = parse_ratings_file(args.train, args.format)
    test = parse_ratings_file(args.test, args.format) if args.test else []
    return build_dataset(train, test)


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _report_json(report, timing: bool) -> str:
    return json.dumps(report.to_dict(include_timing=timing), indent=2, sort_keys=True) + "\n"


def cmd_train(args) -> int:
    cfg = _config(args)
    data = _load_dataset(args)
    if data.test_empty and cfg.select_by == "min-test-mae":
        _log.warning("no test ratings; selecting the final epoch")
        cfg = cfg.with_(select_by="final")
    model, trace = train_model(data, args.algo, cfg)
    if args.model:
        save_model(args.model, model, data)
    if not data.test_empty:
        report = evaluate_model(model, data, cfg, trace)
        _emit(_report_json(report, args.timing), args.out)
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    data = _load_dataset(args)
    if args.model:
        kind, model = load_model(args.model, data)
        if args.algo and args.algo != kind:
            raise CfmfError(f"--algo {args.algo} does not match model kind {kind}")
        trace = None
    else:
        if not args.algo:
            raise CfmfError("eval needs --model or --algo")
        model, trace = train_model(data, args.algo, cfg)
    report = evaluate_model(model, data, cfg, trace)
    _emit(_report_json(report, args.timing), args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    data = _load_dataset(args)
    if args.values:
        values = [int(v) for v in args.values.split(",")]
    else:
        values = PUBLISHED_N_VALUES if args.axis == "N" else PUBLISHED_K_VALUES
    algos = [a for a in args.algo.split(",") if a]
    rows = run_sweep(data, SweepSpec(args.axis, values, cfg), algos, n_jobs=args.jobs)
    _emit(sweep_csv(rows), args.out)
    return 0


def cmd_gen(args) -> int:
    mixture = args.mixture
    if "," in mixture:
        mixture = tuple(float(x) for x in mixture.split(","))
    data = generate_synthetic(
        args.users, args.items, args.rank, args.density, args.noise_sd, mixture, args.seed,
        test_fraction=args.test_fraction,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    ext = "dat" if args.format == "movietweetings" else "csv"
    train_raw, test_raw = data.to_raw()
    (args.out / f"train.{ext}").write_text(format_ratings(train_raw, args.format), encoding="utf-8")
    (args.out / f"test.{ext}").write_text(format_ratings(test_raw, args.format), encoding="utf-8")
    _log.info("wrote %d train / %d test ratings to %s", len(train_raw), len(test_raw), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfmf", description=__doc__.splitlines()[1])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and optionally save it")
    p.add_argument("--algo", required=True, choices=ALGORITHMS)
    _add_data_args(p, test_required=False)
    _add_config_args(p)
    p.add_argument("--model", type=Path, help="where to save the fitted model")
    p.add_argument("--out", type=Path, help="where to write the JSON report (default stdout)")
    p.add_argument("--timing", action="store_true", help="include wall time in the report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model, or train and evaluate")
    p.add_argument("--algo", choices=ALGORITHMS)
    _add_data_args(p, test_required=True)
    _add_config_args(p)
    p.add_argument("--model", type=Path, help="saved model to evaluate")
    p.add_argument("--out", type=Path)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="MAE over a grid of N or K values, as CSV")
    p.add_argument("--algo", required=True, help="comma-separated algorithms")
    p.add_argument("--axis", choices=["N", "K"], required=True)
    p.add_argument("--values", help="comma-separated grid (default: published grid)")
    p.add_argument("--jobs", type=int, default=1)
    _add_data_args(p, test_required=True)
    _add_config_args(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="write a synthetic train/test pair")
    p.add_argument("--users", type=int, default=500)
    p.add_argument("--items", type=int, default=300)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--noise-sd", type=float, default=0.5)
    p.add_argument("--mixture", default="mixed",
                   help=f"mixed, {', '.join(MIXTURES)}, or 'b,f,n' weights")
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["movietweetings", "csv"], default="csv")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CfmfError, ValueError, OSError, IndexError, json.JSONDecodeError) as e:
        print(f"cfmf: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
