"""Command line for the spectral survival toolkit.

Commands
--------
fit         fit a model, write model/pi/diag/metrics artifacts
evaluate    score a saved model file against a dataset
simulate    write synthetic survival or journey data
bias-check  closed-form vs Monte-Carlo mini-batch bias table
bench       runtime/memory scaling harness on journey data
rho-sweep   coupling-strength sweep on a shared split

All randomness flows from ``--seed`` through named substreams, so any
command re-run with the same inputs and seed reproduces its primary
CSVs byte for byte. Timing and memory measurements are not reproducible
and go to separate files (``run.log``, ``bench_measurements.csv``).

A config file is flat ``key = value`` lines naming long flags (without
the leading dashes); explicit flags override it. ``SPECSURV_THREADS``
caps worker fan-out where a command parallelizes at all.

Exit codes: 0 success, 1 solver failure, 2 usage or validation,
3 file I/O.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from .data import (
    load_csv,
    load_journeys,
    train_test_split_indices,
    write_csv,
    write_journeys,
    JourneyDataset,
)
from .extensions import (
    aft_fit,
    censor_decay_weights,
    counting_process_fit,
    dhh_fit,
    flatten_journeys,
    heterogeneous_fit,
    weighted_cox_fit,
)
from .generate import CalibrationError, generate_ads, generate_linear_cox, stream
from .likelihood import bias_closed_form, bias_empirical
from .metrics import concordance_index, integrated_auc, rmse_vs_km
from .nonparametric import breslow_baseline
from .predictors import (
    FitConfig,
    LinearExp,
    StepSizeError,
    gd_mle_fit,
    load_predictor,
    save_predictor,
)
from .spectral import SolverError, admm_fit

RHO_GRID = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)

MODELS = ("coxph", "weighted", "hetero", "dhh", "aft", "counting")
METHODS = ("spectral", "gd", "gd-minibatch")


class Usage(Exception):
    """Bad flags or invalid inputs; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Option plumbing: every flag defaults to None in argparse so a config
# file can fill the gaps; hard defaults apply last.


def _choice(*allowed):
    def convert(value):
        if value not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}, got {value!r}")
        return value

    convert.__name__ = "|".join(allowed)
    return convert


def _fraction(value):
    x = float(value)
    if not 0 <= x < 1:
        raise ValueError(f"expected a fraction in [0, 1), got {value}")
    return x


# name -> (converter, hard default, help)
_COMMON_FIT = {
    "rho": (float, 1.0, "coupling strength of the alternating solver"),
    "tol": (float, 1e-6, "primal convergence tolerance"),
    "outer-iters": (int, 300, "cap on alternating rounds"),
    "fit-epochs": (int, 200, "refit epochs per round"),
    "epochs": (int, 5000, "gradient-descent epoch cap"),
    "step-size": (float, 1.0, "gradient-descent initial step"),
    "batch-fraction": (float, 0.2, "mini-batch fraction for gd-minibatch"),
    "seed": (int, None, "random seed (required)"),
    "test-frac": (_fraction, 0.2, "held-out fraction for metrics"),
    "out": (str, None, "output directory (required)"),
}

_SPECS = {
    "fit": {
        "data": (str, None, "survival CSV (time,event,features)"),
        "journeys": (str, None, "journey CSV (counting model)"),
        "items": (str, None, "item feature sidecar CSV (counting model)"),
        "model": (_choice(*MODELS), "coxph", "model family"),
        "method": (_choice(*METHODS), "spectral", "fitting method"),
        "weights": (str, "unit", "unit | censor-decay | file:<csv>"),
        "class-column": (str, None, "integer class label column (hetero/dhh)"),
        "class-features": (str, None, "K x q class covariate CSV (hetero)"),
        "bandwidth": (float, None, "kernel bandwidth (dhh/aft)"),
        "kernel": (str, "epanechnikov", "smoothing kernel (dhh/aft)"),
        "outer-rounds": (int, 10, "alternating baseline rounds (dhh/aft)"),
        **_COMMON_FIT,
    },
    "evaluate": {
        "data": (str, None, "survival CSV to score"),
        "model-file": (str, None, "model.csv written by fit"),
        "seed": (int, 0, "seed label for the metrics row"),
        "out": (str, None, "output directory (required)"),
    },
    "simulate": {
        "kind": (_choice("linear", "ads"), "linear", "generator family"),
        "n": (int, 100, "sample count (linear)"),
        "d": (int, 5, "feature dimension"),
        "censor-frac": (_fraction, 0.3, "target censoring fraction (linear)"),
        "n-journeys": (int, 100, "journey count (ads)"),
        "max-items": (int, 10, "impressions per journey cap (ads)"),
        "n-items": (int, None, "item pool size (ads)"),
        "split": (_choice("train", "val", "test"), "train", "item pool split (ads)"),
        "seed": (int, None, "random seed (required)"),
        "out": (str, None, "output directory (required)"),
    },
    "bias-check": {
        "n": (int, 10, "fixture size"),
        "d": (int, 3, "feature dimension"),
        "censor-frac": (_fraction, 0.3, "target censoring fraction"),
        "batch-sizes": (str, "2,5,8", "comma-separated batch sizes"),
        "draws": (int, 100_000, "Monte-Carlo draws per batch size"),
        "seed": (int, None, "random seed (required)"),
        "out": (str, None, "output directory (required)"),
    },
    "bench": {
        "sizes": (str, "100,1000,10000", "journey counts, comma-separated"),
        "methods": (str, "spectral,gd-full,gd-minibatch", "methods to measure"),
        "d": (int, 50, "item feature dimension"),
        "max-items": (int, 50, "impressions per journey cap"),
        "cell-timeout": (float, 600.0, "seconds before a cell is abandoned"),
        "seed": (int, None, "random seed (required)"),
        "out": (str, None, "output directory (required)"),
    },
    "rho-sweep": {
        "data": (str, None, "survival CSV"),
        "tol": (float, 1e-6, "primal convergence tolerance"),
        "outer-iters": (int, 600, "cap on alternating rounds"),
        "test-frac": (_fraction, 0.2, "held-out fraction, shared across cells"),
        "seed": (int, None, "random seed (required)"),
        "out": (str, None, "output directory (required)"),
    },
}

_REQUIRED = {
    "fit": ("seed", "out"),
    "evaluate": ("data", "model-file", "out"),
    "simulate": ("seed", "out"),
    "bias-check": ("seed", "out"),
    "bench": ("seed", "out"),
    "rho-sweep": ("data", "seed", "out"),
}


def _parser():
    parser = argparse.ArgumentParser(
        prog="specsurv", description="spectral survival analysis toolkit"
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for command, spec in _SPECS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="flat key = value defaults file")
        for name, (conv, _, help_text) in spec.items():
            p.add_argument(f"--{name}", type=conv, default=None, help=help_text)
    return parser


def _parse_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise Usage(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _resolve(args, command):
    spec = _SPECS[command]
    config = _parse_config_file(args.config) if args.config else {}
    unknown = sorted(set(config) - set(spec))
    if unknown:
        raise Usage(f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = {}
    for name, (conv, default, _) in spec.items():
        given = getattr(args, name.replace("-", "_"))
        if given is not None:
            cfg[name] = given
        elif name in config:
            try:
                cfg[name] = conv(config[name])
            except ValueError as exc:
                raise Usage(f"config key {name}: {exc}") from None
        else:
            cfg[name] = default
    for name in _REQUIRED[command]:
        if cfg[name] is None:
            raise Usage(f"--{name} is required for {command}")
    return cfg


# ---------------------------------------------------------------------------
# Deterministic CSV output: repr() is the shortest round-trip form, so
# equal values always serialize identically.


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _csv_header(path):
    with open(path, newline="") as fh:
        try:
            return next(csv.reader(fh))
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None


def _read_int_column(path, column):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if column not in header:
            raise Usage(f"{path}: no column named '{column}'")
        k = header.index(column)
        values = []
        for r, row in enumerate(reader, 1):
            x = float(row[k])
            if x != int(x) or x < 0:
                raise ValueError(f"{path}: row {r}: class label must be a non-negative integer")
            values.append(int(x))
    return np.asarray(values, dtype=np.intp)


def _dataset_label(path):
    base = os.path.basename(path)
    return base[:-4] if base.endswith(".csv") else base


METRICS_HEADER = ("dataset", "model", "method", "ci", "iauc", "rmse", "n", "d", "seed")


def _survival_metrics(train_ds, eval_ds, scores_train, scores_eval):
    """(ci, iauc, rmse) of eval scores against a train-fitted baseline."""
    baseline = breslow_baseline(train_ds, scores_train)
    ci = concordance_index(eval_ds.time, eval_ds.event, scores_eval)
    iauc = integrated_auc(eval_ds, scores_eval)

    def population_curve(grid):
        return np.exp(-np.outer(baseline(grid), scores_eval)).mean(axis=1)

    rmse = rmse_vs_km(eval_ds, population_curve)
    return ci, iauc, rmse


# ---------------------------------------------------------------------------
# fit


def _validate_fit(cfg):
    if cfg["rho"] <= 0:
        raise Usage(f"--rho must be positive, got {cfg['rho']}")
    if cfg["tol"] <= 0:
        raise Usage(f"--tol must be positive, got {cfg['tol']}")
    for name in ("outer-iters", "fit-epochs", "epochs", "outer-rounds"):
        if cfg[name] < 1:
            raise Usage(f"--{name} must be at least 1, got {cfg[name]}")
    if cfg["step-size"] <= 0:
        raise Usage(f"--step-size must be positive, got {cfg['step-size']}")
    if not 0 < cfg["batch-fraction"] <= 1:
        raise Usage(f"--batch-fraction must be in (0, 1], got {cfg['batch-fraction']}")
    if cfg["model"] == "counting":
        if not (cfg["journeys"] and cfg["items"]):
            raise Usage("--model counting needs --journeys and --items")
    elif not cfg["data"]:
        raise Usage(f"--model {cfg['model']} needs --data")
    if cfg["model"] in ("hetero", "dhh") and not cfg["class-column"]:
        raise Usage(f"--model {cfg['model']} needs --class-column")
    if cfg["method"] != "spectral" and cfg["model"] not in ("coxph", "counting"):
        raise Usage(f"--method {cfg['method']} supports only coxph and counting models")


def _resolve_weight_matrix(spec, n):
    if spec == "unit":
        return None
    if spec == "censor-decay":
        return "censor-decay"
    if spec.startswith("file:"):
        W = np.loadtxt(spec[5:], delimiter=",", ndmin=2)
        if W.shape != (n, n):
            raise ValueError(f"weight matrix shape {W.shape} does not match n={n}")
        return W
    raise Usage(f"--weights must be unit, censor-decay, or file:<csv>, got {spec!r}")


def _load_class_features(path, n_classes):
    if path is None:
        return np.ones((n_classes, 1))
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[0] != n_classes:
        raise ValueError(
            f"class feature file has {rows.shape[0]} rows for {n_classes} classes"
        )
    return rows


def _diag_rows(diagnostics):
    return [
        (s.outer_iter, s.nll, s.primal_residual, s.dual_residual, s.power_iters)
        for s in diagnostics
    ]


def _gd_diag_rows(trace):
    return [(epoch, value, "", "", "") for epoch, value in enumerate(trace, 1)]


def _fit_survival(cfg, log):
    ds, classes = _load_fit_dataset(cfg)
    rng = stream(cfg["seed"], "split")
    train_idx, test_idx = train_test_split_indices(ds.n, cfg["test-frac"], rng)
    train = ds.subset(train_idx)
    eval_ds = ds.subset(test_idx) if test_idx.shape[0] else train
    eval_label = "held-out" if test_idx.shape[0] else "train"
    log.append(f"split: train={train.n} eval={eval_ds.n} ({eval_label})")

    model, method = cfg["model"], cfg["method"]
    seed = cfg["seed"]
    extras = {}
    if method in ("gd", "gd-minibatch"):
        trace = []
        predictor = LinearExp(train.d)
        gd_cfg = FitConfig(
            epochs=cfg["epochs"],
            step_size=cfg["step-size"],
            tol=cfg["tol"],
            seed=seed,
            batch_fraction=cfg["batch-fraction"] if method == "gd-minibatch" else None,
        )
        gd_mle_fit(predictor, train, gd_cfg, trace=trace)
        diag = _gd_diag_rows(trace)
        pi_rows = []
        converged = len(trace) < cfg["epochs"]
        scores_train = predictor.scores(train.features)
        scores_eval = predictor.scores(eval_ds.features)
    elif model in ("coxph", "weighted"):
        W = None
        if model == "weighted":
            W = _resolve_weight_matrix(cfg["weights"], ds.n)
            if isinstance(W, str):
                W = censor_decay_weights(train)
            elif W is not None:
                W = W[np.ix_(train_idx, train_idx)]
        predictor = LinearExp(train.d)
        result = admm_fit(
            train,
            W,
            predictor,
            rho=cfg["rho"],
            outer_iters=cfg["outer-iters"],
            fit_epochs=cfg["fit-epochs"],
            tol=cfg["tol"],
            seed=seed,
        )
        diag = _diag_rows(result.diagnostics)
        pi_rows = list(zip(train_idx.tolist(), result.pi.tolist()))
        converged = result.converged
        scores_train = predictor.scores(train.features)
        scores_eval = predictor.scores(eval_ds.features)
    elif model == "hetero":
        classes_train = classes[train_idx]
        classes_eval = classes[test_idx] if test_idx.shape[0] else classes_train
        n_classes = int(classes.max()) + 1
        class_features = _load_class_features(cfg["class-features"], n_classes)
        result = heterogeneous_fit(
            train,
            classes_train,
            class_features,
            rho=cfg["rho"],
            outer_iters=cfg["outer-iters"],
            fit_epochs=cfg["fit-epochs"],
            tol=cfg["tol"],
            seed=seed,
        )
        predictor = LinearExp(train.d)
        predictor.set_weights(result.theta)
        offsets = np.einsum("kq,kq->k", result.eta, class_features)
        diag = _diag_rows(result.diagnostics)
        pi_rows = list(zip(train_idx.tolist(), result.pi.tolist()))
        converged = result.converged
        scores_train = np.exp(train.features @ result.theta + offsets[classes_train])
        scores_eval = np.exp(eval_ds.features @ result.theta + offsets[classes_eval])
        extras["eta"] = [
            (k, q, result.eta[k, q], class_features[k, q])
            for k in range(result.eta.shape[0])
            for q in range(result.eta.shape[1])
        ]
    elif model in ("dhh", "aft"):
        kwargs = dict(
            rho=cfg["rho"],
            bandwidth=cfg["bandwidth"],
            kernel=cfg["kernel"],
            outer_rounds=cfg["outer-rounds"],
            outer_iters=cfg["outer-iters"],
            fit_epochs=cfg["fit-epochs"],
            tol=cfg["tol"],
            seed=seed,
        )
        if model == "dhh":
            result = dhh_fit(train, classes[train_idx], **kwargs)
        else:
            result = aft_fit(train, **kwargs)
        predictor = LinearExp(train.d)
        predictor.set_weights(result.theta)
        diag = _diag_rows(result.diagnostics)
        pi_rows = list(zip(train_idx.tolist(), result.pi.tolist()))
        converged = True
        log.append(f"outer rounds: {result.rounds}")
        scores_train = predictor.scores(train.features)
        scores_eval = predictor.scores(eval_ds.features)
    else:
        raise AssertionError(model)

    log.append(f"converged: {converged}")
    ci, iauc, rmse = _survival_metrics(train, eval_ds, scores_train, scores_eval)
    label = _dataset_label(cfg["data"])
    metrics = (label, model, method, ci, iauc, rmse, ds.n, ds.d, seed)
    return predictor, pi_rows, diag, metrics, extras


def _load_fit_dataset(cfg):
    header = _csv_header(cfg["data"])
    class_column = cfg["class-column"]
    if class_column and class_column not in header:
        raise Usage(f"{cfg['data']}: no column named '{class_column}'")
    feature_columns = [
        c for c in header if c not in ("time", "event") and c != class_column
    ]
    ds = load_csv(cfg["data"], feature_columns=feature_columns)
    classes = _read_int_column(cfg["data"], class_column) if class_column else None
    return ds, classes


def _fit_counting(cfg, log):
    ads, _ = load_journeys(cfg["journeys"], cfg["items"])
    rng = stream(cfg["seed"], "split")
    train_idx, test_idx = train_test_split_indices(ads.n_journeys, cfg["test-frac"], rng)
    train = JourneyDataset([ads.journeys[i] for i in train_idx], ads.item_features)
    eval_ads = (
        JourneyDataset([ads.journeys[i] for i in test_idx], ads.item_features)
        if test_idx.shape[0]
        else train
    )
    log.append(f"split: train={train.n_journeys} eval={eval_ads.n_journeys} journeys")
    seed = cfg["seed"]

    flat_train, _ = flatten_journeys(train)
    flat_eval, _ = flatten_journeys(eval_ads)
    if cfg["method"] == "spectral":
        predictor = LinearExp(ads.item_features.shape[1])
        result = counting_process_fit(
            train,
            predictor=predictor,
            rho=cfg["rho"],
            outer_iters=cfg["outer-iters"],
            fit_epochs=cfg["fit-epochs"],
            tol=cfg["tol"],
            seed=seed,
        )
        diag = _diag_rows(result.diagnostics)
        pi_rows = list(enumerate(result.pi.tolist()))
        log.append(f"converged: {result.converged}")
    else:
        trace = []
        predictor = LinearExp(ads.item_features.shape[1])
        gd_cfg = FitConfig(
            epochs=cfg["epochs"],
            step_size=cfg["step-size"],
            tol=cfg["tol"],
            seed=seed,
            batch_fraction=cfg["batch-fraction"] if cfg["method"] == "gd-minibatch" else None,
        )
        gd_mle_fit(predictor, flat_train, gd_cfg, trace=trace)
        diag = _gd_diag_rows(trace)
        pi_rows = []
        log.append(f"converged: {len(trace) < cfg['epochs']}")

    scores_train = predictor.scores(flat_train.features)
    scores_eval = predictor.scores(flat_eval.features)
    ci, iauc, rmse = _survival_metrics(flat_train, flat_eval, scores_train, scores_eval)
    label = _dataset_label(cfg["journeys"])
    metrics = (
        label,
        "counting",
        cfg["method"],
        ci,
        iauc,
        rmse,
        ads.n_journeys,
        ads.item_features.shape[1],
        seed,
    )
    return predictor, pi_rows, diag, metrics, {}


def cmd_fit(cfg):
    _validate_fit(cfg)
    os.makedirs(cfg["out"], exist_ok=True)
    started = time.perf_counter()
    log = []
    if cfg["model"] == "counting":
        predictor, pi_rows, diag, metrics, extras = _fit_counting(cfg, log)
    else:
        predictor, pi_rows, diag, metrics, extras = _fit_survival(cfg, log)

    out = cfg["out"]
    save_predictor(predictor, os.path.join(out, "model.csv"))
    _write_rows(os.path.join(out, "pi.csv"), ("index", "pi"), pi_rows)
    _write_rows(
        os.path.join(out, "diag.csv"),
        ("outer_iter", "nll", "primal_residual", "dual_residual", "power_iters"),
        diag,
    )
    _write_rows(os.path.join(out, "metrics.csv"), METRICS_HEADER, [metrics])
    if "eta" in extras:
        _write_rows(
            os.path.join(out, "eta.csv"),
            ("class", "component", "eta", "feature"),
            extras["eta"],
        )
    log.append(f"elapsed_s: {time.perf_counter() - started:.3f}")
    _write_log(out, cfg, log)
    return 0


def _write_log(out, cfg, lines):
    with open(os.path.join(out, "run.log"), "w") as fh:
        for key in sorted(cfg):
            fh.write(f"{key} = {cfg[key]}\n")
        for line in lines:
            fh.write(line + "\n")


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(cfg):
    os.makedirs(cfg["out"], exist_ok=True)
    ds = load_csv(cfg["data"])
    predictor = load_predictor(cfg["model-file"])
    scores = predictor.scores(ds.features)
    ci, iauc, rmse = _survival_metrics(ds, ds, scores, scores)
    metrics = (
        _dataset_label(cfg["data"]),
        type(predictor).__name__,
        "evaluate",
        ci,
        iauc,
        rmse,
        ds.n,
        ds.d,
        cfg["seed"],
    )
    _write_rows(os.path.join(cfg["out"], "metrics.csv"), METRICS_HEADER, [metrics])
    _write_rows(
        os.path.join(cfg["out"], "scores.csv"),
        ("index", "score"),
        list(enumerate(scores.tolist())),
    )
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg):
    os.makedirs(cfg["out"], exist_ok=True)
    if cfg["kind"] == "linear":
        ds, theta = generate_linear_cox(
            cfg["n"], cfg["d"], censor_frac=cfg["censor-frac"], seed=cfg["seed"]
        )
        write_csv(ds, os.path.join(cfg["out"], "data.csv"))
    else:
        ads, theta = generate_ads(
            cfg["n-journeys"],
            cfg["max-items"],
            seed=cfg["seed"],
            d=cfg["d"],
            n_items=cfg["n-items"],
            split=cfg["split"],
        )
        write_journeys(
            ads,
            os.path.join(cfg["out"], "journeys.csv"),
            os.path.join(cfg["out"], "items.csv"),
        )
    _write_rows(
        os.path.join(cfg["out"], "truth.csv"),
        ("parameter", "value"),
        [(f"theta_{k}", v) for k, v in enumerate(theta)],
    )
    return 0


# ---------------------------------------------------------------------------
# bias-check


def cmd_bias_check(cfg):
    os.makedirs(cfg["out"], exist_ok=True)
    try:
        batch_sizes = [int(b) for b in cfg["batch-sizes"].split(",") if b.strip()]
    except ValueError:
        raise Usage(f"--batch-sizes must be comma-separated integers, got {cfg['batch-sizes']!r}")
    if not batch_sizes:
        raise Usage("--batch-sizes is empty")
    ds, theta = generate_linear_cox(
        cfg["n"], cfg["d"], censor_frac=cfg["censor-frac"], seed=cfg["seed"]
    )
    rows = []
    for b in batch_sizes:
        closed = bias_closed_form(ds, theta, b, seed=cfg["seed"])
        empirical, se = bias_empirical(ds, theta, b, draws=cfg["draws"], seed=cfg["seed"])
        rows.append((b, closed, empirical, se))
    _write_rows(
        os.path.join(cfg["out"], "bias.csv"),
        ("batch_size", "closed_form", "empirical_mean", "empirical_se"),
        rows,
    )
    return 0


# ---------------------------------------------------------------------------
# bench (heavy lifting lives in bench.py)


def cmd_bench(cfg):
    from . import bench

    try:
        sizes = [int(s) for s in cfg["sizes"].split(",") if s.strip()]
        methods = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    except ValueError:
        raise Usage("--sizes must be comma-separated integers")
    bad = [m for m in methods if m not in bench.METHODS]
    if bad:
        raise Usage(f"unknown bench methods: {', '.join(bad)}")
    os.makedirs(cfg["out"], exist_ok=True)
    bench.run_bench(
        sizes=sizes,
        methods=methods,
        d=cfg["d"],
        max_items=cfg["max-items"],
        seed=cfg["seed"],
        out_dir=cfg["out"],
        cell_timeout=cfg["cell-timeout"],
    )
    return 0


# ---------------------------------------------------------------------------
# rho-sweep


def cmd_rho_sweep(cfg):
    if cfg["tol"] <= 0:
        raise Usage(f"--tol must be positive, got {cfg['tol']}")
    os.makedirs(cfg["out"], exist_ok=True)
    ds = load_csv(cfg["data"])
    rng = stream(cfg["seed"], "split")
    train_idx, test_idx = train_test_split_indices(ds.n, cfg["test-frac"], rng)
    train = ds.subset(train_idx)
    eval_ds = ds.subset(test_idx) if test_idx.shape[0] else train

    rows = []
    for rho in RHO_GRID:
        try:
            predictor = LinearExp(train.d)
            admm_fit(
                train,
                None,
                predictor,
                rho=rho,
                outer_iters=cfg["outer-iters"],
                tol=cfg["tol"],
                seed=cfg["seed"],
            )
            scores_train = predictor.scores(train.features)
            scores_eval = predictor.scores(eval_ds.features)
            ci, iauc, rmse = _survival_metrics(train, eval_ds, scores_train, scores_eval)
        except (SolverError, StepSizeError):
            ci = iauc = rmse = float("nan")
        rows.append((rho, ci, iauc, rmse))
    _write_rows(os.path.join(cfg["out"], "sweep.csv"), ("rho", "ci", "iauc", "rmse"), rows)

    by_rho = {row[0]: row[1] for row in rows}
    finite = [ci for ci in by_rho.values() if np.isfinite(ci)]
    lines = []
    if finite and np.isfinite(by_rho.get(1.0, float("nan"))):
        gap = max(finite) - by_rho[1.0]
        verdict = "yes" if gap <= 0.05 else "no"
        lines.append(
            f"rho=1 within 0.05 of grid best: {verdict} "
            f"(ci at rho=1 {by_rho[1.0]:.4f}, best {max(finite):.4f})"
        )
    else:
        lines.append("rho=1 within 0.05 of grid best: undetermined (solver failures)")
    _write_log(cfg["out"], cfg, lines)
    return 0


# ---------------------------------------------------------------------------


_COMMANDS = {
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "bias-check": cmd_bias_check,
    "bench": cmd_bench,
    "rho-sweep": cmd_rho_sweep,
}


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse errors exit 2, --help exits 0
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = _resolve(args, args.command)
        return _COMMANDS[args.command](cfg)
    except Usage as exc:
        print(f"specsurv: error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, StepSizeError, CalibrationError) as exc:
        print(f"specsurv: solver failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"specsurv: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"specsurv: i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
