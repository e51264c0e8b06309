"""Estimator classes with the scikit-learn fit/predict contract.

Constructors store hyperparameters verbatim (so ``get_params`` and
``set_params`` compose with the usual tooling); ``fit`` validates inputs
through the shared helpers, runs the requested solver, and exposes the
learned state through trailing-underscore attributes. ``predict``
returns positive risk scores (higher means earlier expected events) and
``score`` is the concordance index.
"""

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_features, check_survival_y
from .data import SurvivalDataset
from .extensions import (
    aft_fit,
    censor_decay_weights,
    counting_process_fit,
    dhh_fit,
    heterogeneous_fit,
)
from .metrics import concordance_index
from .nonparametric import breslow_baseline
from .predictors import FeedForward, FitConfig, LinearExp, gd_mle_fit
from .spectral import admm_fit

__all__ = [
    "SpectralCoxPH",
    "GradientCoxPH",
    "HeterogeneousCoxPH",
    "ClassBaselineCoxPH",
    "SpectralAFT",
    "CountingProcessRanker",
]


def _build_predictor(kind, d, hidden_widths, bias, seed):
    if kind == "linear":
        return LinearExp(d)
    if kind == "mlp":
        return FeedForward(d, hidden_widths, bias=bias, seed=seed)
    raise ValueError(f"predictor must be 'linear' or 'mlp', got {kind!r}")


class _SurvivalScorerMixin:
    def predict(self, X):
        """Positive risk scores for new samples."""
        X = check_features(X)
        return self.predictor_.scores(X)

    def score(self, X, y):
        time, event = check_survival_y(y)
        return concordance_index(time, event, self.predict(X))

    def predict_survival_function(self, X):
        """Per-sample survival curves from the fitted baseline hazard."""
        scores = self.predict(X)
        baseline = self.baseline_cumulative_

        def curve(s):
            return lambda t: np.exp(-baseline(t) * s)

        return [curve(float(s)) for s in scores]


class SpectralCoxPH(_SurvivalScorerMixin, BaseEstimator):
    """Proportional-hazards regression via the alternating spectral solver.

    Parameters mirror the solver: ``rho`` is the coupling strength,
    ``weights`` is None, "censor-decay", or an (n, n) matrix, and
    ``predictor`` selects the score model. ``censored_anchors`` lets
    censored samples anchor the score subproblem (regularization; the
    reported loss keeps the true indicators).
    """

    def __init__(
        self,
        rho=1.0,
        weights=None,
        predictor="linear",
        hidden_widths=(200,),
        bias=True,
        outer_iters=300,
        power_iters=200,
        fit_epochs=200,
        tol=1e-6,
        isr_rounds=300,
        isr_tol=1e-9,
        censored_anchors=False,
        seed=0,
    ):
        self.rho = rho
        self.weights = weights
        self.predictor = predictor
        self.hidden_widths = hidden_widths
        self.bias = bias
        self.outer_iters = outer_iters
        self.power_iters = power_iters
        self.fit_epochs = fit_epochs
        self.tol = tol
        self.isr_rounds = isr_rounds
        self.isr_tol = isr_tol
        self.censored_anchors = censored_anchors
        self.seed = seed

    def _resolve_weights(self, ds):
        if self.weights is None:
            return None
        if isinstance(self.weights, str):
            if self.weights == "censor-decay":
                return censor_decay_weights(ds)
            raise ValueError(f"unknown weight preset {self.weights!r}")
        return np.asarray(self.weights, dtype=np.float64)

    def fit(self, X, y):
        time, event = check_survival_y(y)
        X = check_features(X, n_rows=time.shape[0])
        ds = SurvivalDataset(X, time, event)
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        model = _build_predictor(self.predictor, ds.d, self.hidden_widths, self.bias, self.seed)
        result = admm_fit(
            ds,
            self._resolve_weights(ds),
            model,
            rho=self.rho,
            outer_iters=self.outer_iters,
            power_iters=self.power_iters,
            fit_epochs=self.fit_epochs,
            tol=self.tol,
            seed=self.seed,
            censored_anchors=self.censored_anchors,
            isr_rounds=self.isr_rounds,
            isr_tol=self.isr_tol,
        )
        self.predictor_ = model
        self.result_ = result
        self.coef_ = model.theta.copy() if isinstance(model, LinearExp) else result.theta
        self.pi_ = result.pi
        self.diagnostics_ = result.diagnostics
        self.baseline_cumulative_ = breslow_baseline(ds, model.scores(X))
        return self


class GradientCoxPH(_SurvivalScorerMixin, BaseEstimator):
    """Direct gradient descent on the partial likelihood.

    ``batch_fraction=None`` is full-batch with a backtracking line
    search, the reference maximum-likelihood path; a fraction in (0, 1)
    descends batch losses whose risk sets are batch-restricted (biased).
    """

    def __init__(
        self,
        predictor="linear",
        hidden_widths=(200,),
        bias=True,
        epochs=5000,
        step_size=1.0,
        tol=1e-8,
        batch_fraction=None,
        seed=0,
    ):
        self.predictor = predictor
        self.hidden_widths = hidden_widths
        self.bias = bias
        self.epochs = epochs
        self.step_size = step_size
        self.tol = tol
        self.batch_fraction = batch_fraction
        self.seed = seed

    def fit(self, X, y):
        time, event = check_survival_y(y)
        X = check_features(X, n_rows=time.shape[0])
        ds = SurvivalDataset(X, time, event)
        model = _build_predictor(self.predictor, ds.d, self.hidden_widths, self.bias, self.seed)
        cfg = FitConfig(
            epochs=self.epochs,
            step_size=self.step_size,
            tol=self.tol,
            seed=self.seed,
            batch_fraction=self.batch_fraction,
        )
        gd_mle_fit(model, ds, cfg)
        self.predictor_ = model
        self.coef_ = model.theta.copy() if isinstance(model, LinearExp) else model.get_weights()
        self.baseline_cumulative_ = breslow_baseline(ds, model.scores(X))
        return self


class HeterogeneousCoxPH(_SurvivalScorerMixin, BaseEstimator):
    """Shared linear coefficients plus per-class offsets.

    ``fit`` takes the per-sample class labels and the (n_classes, q)
    class covariate table as fit parameters.
    """

    def __init__(self, rho=1.0, outer_iters=300, fit_epochs=200, tol=1e-6, seed=0):
        self.rho = rho
        self.outer_iters = outer_iters
        self.fit_epochs = fit_epochs
        self.tol = tol
        self.seed = seed

    def fit(self, X, y, classes=None, class_features=None):
        if classes is None or class_features is None:
            raise ValueError("heterogeneous fit needs classes and class_features")
        time, event = check_survival_y(y)
        X = check_features(X, n_rows=time.shape[0])
        ds = SurvivalDataset(X, time, event)
        result = heterogeneous_fit(
            ds,
            classes,
            class_features,
            rho=self.rho,
            outer_iters=self.outer_iters,
            fit_epochs=self.fit_epochs,
            tol=self.tol,
            seed=self.seed,
        )
        self.coef_ = result.theta
        self.eta_ = result.eta
        self.pi_ = result.pi
        self.diagnostics_ = result.diagnostics
        self.classes_ = np.asarray(classes, dtype=np.intp)
        self.class_features_ = np.asarray(class_features, dtype=np.float64)
        offsets = np.einsum("kq,kq->k", result.eta, self.class_features_)
        scores = np.exp(X @ result.theta + offsets[self.classes_])
        self.baseline_cumulative_ = breslow_baseline(ds, scores)
        return self

    def predict(self, X, classes=None):
        """Risk scores; class offsets are applied when labels are given."""
        X = check_features(X)
        raw = X @ self.coef_
        if classes is not None:
            offsets = np.einsum("kq,kq->k", self.eta_, self.class_features_)
            raw = raw + offsets[np.asarray(classes, dtype=np.intp)]
        return np.exp(raw)


class ClassBaselineCoxPH(_SurvivalScorerMixin, BaseEstimator):
    """Per-class baseline hazards with one shared score model."""

    def __init__(
        self,
        rho=1.0,
        bandwidth=None,
        kernel="epanechnikov",
        outer_rounds=10,
        outer_iters=300,
        fit_epochs=200,
        tol=1e-6,
        seed=0,
    ):
        self.rho = rho
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.outer_rounds = outer_rounds
        self.outer_iters = outer_iters
        self.fit_epochs = fit_epochs
        self.tol = tol
        self.seed = seed

    def fit(self, X, y, classes=None):
        if classes is None:
            raise ValueError("class-baseline fit needs per-sample class labels")
        time, event = check_survival_y(y)
        X = check_features(X, n_rows=time.shape[0])
        ds = SurvivalDataset(X, time, event)
        result = dhh_fit(
            ds,
            classes,
            rho=self.rho,
            bandwidth=self.bandwidth,
            kernel=self.kernel,
            outer_rounds=self.outer_rounds,
            outer_iters=self.outer_iters,
            fit_epochs=self.fit_epochs,
            tol=self.tol,
            seed=self.seed,
        )
        self.coef_ = result.theta
        self.baselines_ = result.baselines
        self.pi_ = result.pi
        self.rounds_ = result.rounds
        self.diagnostics_ = result.diagnostics
        self.predictor_ = LinearExp(ds.d)
        self.predictor_.set_weights(result.theta)
        self.baseline_cumulative_ = breslow_baseline(ds, self.predictor_.scores(X))
        return self


class SpectralAFT(_SurvivalScorerMixin, BaseEstimator):
    """Accelerated failure time model via reweighted spectral passes."""

    def __init__(
        self,
        rho=1.0,
        bandwidth=None,
        kernel="epanechnikov",
        outer_rounds=10,
        outer_iters=300,
        fit_epochs=200,
        tol=1e-6,
        seed=0,
    ):
        self.rho = rho
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.outer_rounds = outer_rounds
        self.outer_iters = outer_iters
        self.fit_epochs = fit_epochs
        self.tol = tol
        self.seed = seed

    def fit(self, X, y):
        time, event = check_survival_y(y)
        X = check_features(X, n_rows=time.shape[0])
        ds = SurvivalDataset(X, time, event)
        result = aft_fit(
            ds,
            rho=self.rho,
            bandwidth=self.bandwidth,
            kernel=self.kernel,
            outer_rounds=self.outer_rounds,
            outer_iters=self.outer_iters,
            fit_epochs=self.fit_epochs,
            tol=self.tol,
            seed=self.seed,
        )
        self.coef_ = result.theta
        self.baseline_ = result.baseline
        self.pi_ = result.pi
        self.rounds_ = result.rounds
        self.diagnostics_ = result.diagnostics
        self.predictor_ = LinearExp(ds.d)
        self.predictor_.set_weights(result.theta)
        self.baseline_cumulative_ = breslow_baseline(ds, self.predictor_.scores(X))
        return self


class CountingProcessRanker(BaseEstimator):
    """Intrinsic item scores from grouped impression journeys."""

    def __init__(
        self,
        rho=1.0,
        predictor="linear",
        hidden_widths=(200,),
        bias=True,
        outer_iters=300,
        fit_epochs=200,
        tol=1e-6,
        seed=0,
    ):
        self.rho = rho
        self.predictor = predictor
        self.hidden_widths = hidden_widths
        self.bias = bias
        self.outer_iters = outer_iters
        self.fit_epochs = fit_epochs
        self.tol = tol
        self.seed = seed

    def fit(self, ads):
        d = ads.item_features.shape[1]
        model = _build_predictor(self.predictor, d, self.hidden_widths, self.bias, self.seed)
        result = counting_process_fit(
            ads,
            predictor=model,
            rho=self.rho,
            outer_iters=self.outer_iters,
            fit_epochs=self.fit_epochs,
            tol=self.tol,
            seed=self.seed,
        )
        self.predictor_ = model
        self.coef_ = model.theta.copy() if isinstance(model, LinearExp) else result.theta
        self.item_scores_ = result.pi
        self.diagnostics_ = result.diagnostics
        self.result_ = result
        return self

    def predict(self, item_features):
        """Scores for a table of item feature rows."""
        return self.predictor_.scores(check_features(item_features))
