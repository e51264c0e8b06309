"""Model extensions built on the spectral solver.

Each extension reduces the richer model to a weighted partial likelihood
whose pairwise weights W_ji are rebuilt from nonparametric baseline
estimates between solver passes:

* weighted: caller-supplied or preset weights, single pass;
* heterogeneous: per-class linear offsets fitted jointly with the shared
  coefficients, alternating parameter blocks;
* class-baseline: per-class baseline hazards, W_ji = hazard of j's class
  at anchor i's time;
* accelerated failure time: one shared baseline on the accelerated
  scale, W_ji = baseline at T_i * exp(theta @ x_j);
* counting process: grouped journeys race their impressions, scores live
  on the shared item table.

Baseline-derived weights are clamped to the baseline's support and
floored at a tiny positive value, keeping the weight matrix strictly
positive as the likelihood requires.
"""

from dataclasses import dataclass

import numpy as np

from .data import SurvivalDataset
from .predictors import LinearExp, max_entropy_fit
from .spectral import admm_fit, journey_contests
from .nonparametric import breslow_aft, breslow_class, default_bandwidth

__all__ = [
    "censor_decay_weights",
    "weighted_cox_fit",
    "HeterogeneousLinearExp",
    "HeterogeneousResult",
    "heterogeneous_fit",
    "ClassBaselineResult",
    "dhh_fit",
    "AftResult",
    "aft_fit",
    "counting_process_fit",
]

_WEIGHT_FLOOR = 1e-12


def censor_decay_weights(ds):
    """Preset weights decaying with the count of earlier censorings.

    Column i is the constant 1 / (1 + number of samples censored strictly
    before T_i). Column-constant weights cancel inside each anchor's
    ratio, so this preset reweights reporting without moving the argmin.
    """
    censored_times = np.sort(ds.time[~ds.event])
    counts = np.searchsorted(censored_times, ds.time, side="left")
    column = 1.0 / (1.0 + counts.astype(np.float64))
    return np.tile(column, (ds.n, 1))


def weighted_cox_fit(ds, W, predictor=None, **admm_kwargs):
    """Weighted proportional-hazards fit (single spectral pass)."""
    predictor = predictor or LinearExp(ds.d)
    return admm_fit(ds, W, predictor, **admm_kwargs)


# ---------------------------------------------------------------------------
# Heterogeneous model: shared coefficients plus per-class offsets.


class HeterogeneousLinearExp:
    """Scores exp(theta @ x_i + eta[class_i] @ z[class_i]).

    ``z`` is a fixed (n_classes, q) table of class covariates; ``eta``
    the matching offset coefficients. ``active_block`` gates which block
    the backward pass updates ("theta", "eta", or "all").
    """

    def __init__(self, d, classes, class_features):
        self.d = d
        self.classes = np.asarray(classes, dtype=np.intp)
        self.class_features = np.asarray(class_features, dtype=np.float64)
        if self.class_features.ndim != 2:
            raise ValueError("class_features must be 2-d (n_classes, q)")
        self.n_classes, self.q = self.class_features.shape
        if self.classes.min(initial=0) < 0 or self.classes.max(initial=-1) >= self.n_classes:
            raise ValueError("class labels must index rows of class_features")
        self.theta = np.zeros(d)
        self.eta = np.zeros((self.n_classes, self.q))
        self.active_block = "all"

    @property
    def n_params(self):
        return self.d + self.eta.size

    def class_offsets(self):
        return np.einsum("kq,kq->k", self.eta, self.class_features)

    def raw(self, X):
        return X @ self.theta + self.class_offsets()[self.classes]

    def scores(self, X):
        return np.exp(self.raw(X))

    def get_weights(self):
        return np.concatenate([self.theta, self.eta.ravel()])

    def set_weights(self, flat):
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape[0]}")
        self.theta = flat[: self.d].copy()
        self.eta = flat[self.d :].reshape(self.eta.shape).copy()

    def backprop(self, X, grad_raw):
        grad_theta = X.T @ grad_raw
        per_class = np.zeros(self.n_classes)
        np.add.at(per_class, self.classes, grad_raw)
        grad_eta = per_class[:, None] * self.class_features
        if self.active_block == "theta":
            grad_eta = np.zeros_like(grad_eta)
        elif self.active_block == "eta":
            grad_theta = np.zeros_like(grad_theta)
        return np.concatenate([grad_theta, grad_eta.ravel()])


@dataclass
class HeterogeneousResult:
    theta: np.ndarray
    eta: np.ndarray
    pi: np.ndarray
    diagnostics: list
    converged: bool


def heterogeneous_fit(
    ds,
    classes,
    class_features,
    rho=1.0,
    outer_iters=300,
    fit_epochs=200,
    tol=1e-6,
    seed=0,
    **admm_kwargs,
):
    """Proportional-hazards fit with per-class linear offsets.

    The predictor refit inside each round alternates the shared block
    and the offset block, one max-entropy pass each. When every class
    has a nonzero covariate row, the offsets contain an exact global
    rescaling direction that the closed-risk-set loss cannot see; left
    free, the coupled iteration slides down it indefinitely (scores and
    pi shrink together, the dual blows up). Each refit therefore
    recenters the offsets to mean zero, which changes nothing the loss
    can measure and pins the scale.
    """
    predictor = HeterogeneousLinearExp(ds.d, classes, class_features)
    cf = np.asarray(class_features, dtype=np.float64)
    row_norms = np.einsum("kq,kq->k", cf, cf)
    gauge_free = bool(cf.size) and bool(np.all(row_norms > 0))

    def block_refit(pred, X, pi, u, rho_vec, cfg, move_cap):
        for block in ("theta", "eta"):
            pred.active_block = block
            max_entropy_fit(pred, X, pi, u, rho_vec, cfg, move_cap=move_cap)
        pred.active_block = "all"
        if gauge_free:
            offsets = np.einsum("kq,kq->k", pred.eta, cf)
            shift = float(offsets.mean())
            pred.eta -= shift * cf / row_norms[:, None]

    result = admm_fit(
        ds,
        None,
        predictor,
        rho=rho,
        outer_iters=outer_iters,
        fit_epochs=fit_epochs,
        tol=tol,
        seed=seed,
        refit=block_refit,
        **admm_kwargs,
    )
    return HeterogeneousResult(
        predictor.theta.copy(),
        predictor.eta.copy(),
        result.pi,
        result.diagnostics,
        result.converged,
    )


# ---------------------------------------------------------------------------
# Class-baseline and accelerated failure time models.


def _clamped_weight_rows(hazard, args, chunk=200_000):
    """Evaluate a smoothed hazard over a matrix of queries, floored."""
    flat = np.asarray(args, dtype=np.float64).ravel()
    out = np.empty_like(flat)
    for start in range(0, flat.shape[0], chunk):
        out[start : start + chunk] = hazard.clamped(flat[start : start + chunk])
    return np.maximum(out.reshape(np.shape(args)), _WEIGHT_FLOOR)


@dataclass
class ClassBaselineResult:
    theta: np.ndarray
    baselines: dict
    pi: np.ndarray
    rounds: int
    diagnostics: list


def dhh_fit(
    ds,
    classes,
    rho=1.0,
    bandwidth=None,
    kernel="epanechnikov",
    outer_rounds=10,
    theta_rtol=1e-4,
    **admm_kwargs,
):
    """Alternating fit of per-class baseline hazards and shared scores.

    Baselines start at per-class smoothed occurrence rates (unit scores),
    each round freezes them into weights W_ji = hazard of j's class at
    T_i, runs the spectral fit, then refreshes the baselines from the
    fitted scores. Stops when theta moves by less than ``theta_rtol``
    relative or after ``outer_rounds`` rounds.
    """
    classes = np.asarray(classes).reshape(-1)
    if bandwidth is None:
        bandwidth = default_bandwidth(ds)
    baselines = breslow_class(ds, classes, None, bandwidth, kernel)
    predictor = LinearExp(ds.d)
    theta = predictor.theta.copy()
    diagnostics = []
    result = None
    rounds = 0
    for rounds in range(1, outer_rounds + 1):
        per_class_at_anchors = {
            label: _clamped_weight_rows(hz, ds.time) for label, hz in baselines.items()
        }
        W = np.stack([per_class_at_anchors[label] for label in classes])
        result = admm_fit(ds, W, predictor, rho=rho, **admm_kwargs)
        diagnostics.extend(result.diagnostics)
        baselines = breslow_class(ds, classes, predictor.scores(ds.features), bandwidth, kernel)
        move = np.linalg.norm(predictor.theta - theta) / max(np.linalg.norm(theta), 1e-12)
        theta = predictor.theta.copy()
        if move <= theta_rtol:
            break
    return ClassBaselineResult(theta, baselines, result.pi, rounds, diagnostics)


@dataclass
class AftResult:
    theta: np.ndarray
    baseline: object
    pi: np.ndarray
    rounds: int
    diagnostics: list


def aft_fit(
    ds,
    rho=1.0,
    bandwidth=None,
    kernel="epanechnikov",
    outer_rounds=10,
    theta_rtol=1e-4,
    **admm_kwargs,
):
    """Accelerated failure time fit via reweighted spectral passes.

    The baseline hazard lives on the accelerated time scale; weights
    query it at T_i * exp(theta @ x_j), clamped to the observed support.
    """
    if bandwidth is None:
        bandwidth = default_bandwidth(ds)
    predictor = LinearExp(ds.d)
    theta = predictor.theta.copy()
    baseline = breslow_aft(ds, theta, bandwidth, kernel)
    diagnostics = []
    result = None
    rounds = 0
    for rounds in range(1, outer_rounds + 1):
        acceleration = np.exp(ds.features @ theta)
        W = _clamped_weight_rows(baseline, np.outer(acceleration, ds.time))
        result = admm_fit(ds, W, predictor, rho=rho, **admm_kwargs)
        diagnostics.extend(result.diagnostics)
        baseline = breslow_aft(ds, predictor.theta, bandwidth, kernel)
        move = np.linalg.norm(predictor.theta - theta) / max(np.linalg.norm(theta), 1e-12)
        theta = predictor.theta.copy()
        if move <= theta_rtol:
            break
    return AftResult(theta, baseline, result.pi, rounds, diagnostics)


def counting_process_fit(ads, predictor=None, **admm_kwargs):
    """Intrinsic item scores from journeys racing their impressions.

    Each converting journey is one contest: the clicked item wins
    against every impression on display. Scores and the coupling run
    over the shared item table, so memory never scales with the summed
    risk-set sizes.
    """
    contests = journey_contests(ads)
    if contests.n_contests == 0:
        raise ValueError("no converting journeys: the grouped likelihood is empty")
    predictor = predictor or LinearExp(ads.item_features.shape[1])
    return admm_fit(
        None,
        None,
        predictor,
        contests=contests,
        features=ads.item_features,
        **admm_kwargs,
    )


def flatten_journeys(ads):
    """Impression-level survival view of the converting journeys.

    Each impression on display when its journey converted becomes one
    row: the clicked impression is an event, the rest are censored at
    the conversion instant (their clocks demonstrably outlived the
    winner's). Durations run from the impression's display time.
    Journeys without a conversion record no horizon and are dropped, as
    are rows whose duration would be nonpositive.

    The journey CSV stores the conversion time in the clicked row's
    display-time field, so after a round trip that row's own span is
    degenerate; it then measures from the journey's first impression.

    Returns (dataset, item_rows) where ``item_rows[s]`` is the item
    behind sample ``s`` in the shared feature table.
    """
    item_rows, durations, events = [], [], []
    for j in ads.journeys:
        if not j.observed:
            continue
        onset = float(np.min(j.impression_times))
        for item, shown_at in zip(j.items, j.impression_times):
            clicked = item == j.event_item
            duration = j.event_time - shown_at
            if clicked and duration <= 0:
                duration = j.event_time - onset
            if duration <= 0:
                continue
            item_rows.append(int(item))
            durations.append(float(duration))
            events.append(clicked)
    if not item_rows:
        raise ValueError("no converting journeys: nothing to flatten")
    item_rows = np.asarray(item_rows, dtype=np.intp)
    ds = SurvivalDataset(
        ads.item_features[item_rows],
        np.asarray(durations, dtype=np.float64),
        np.asarray(events, dtype=np.float64),
    )
    return ds, item_rows
