"""Score predictors and their fitting routines.

A predictor maps feature rows to real-valued outputs; scores are the
exponential of that output, hence strictly positive. Gradients are
hand-derived (no autodiff): each predictor exposes ``backprop`` taking
the loss gradient in its raw outputs and returning the flat parameter
gradient.

Two fits are provided: ``max_entropy_fit`` solves the score-matching
subproblem used inside the alternating solver, and ``gd_mle_fit``
descends the partial likelihood directly (full-batch with a backtracking
line search, or mini-batch with a constant step).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .likelihood import nll_score_gradient

__all__ = [
    "LinearExp",
    "FeedForward",
    "FitConfig",
    "StepSizeError",
    "predict_scores",
    "max_entropy_fit",
    "gd_mle_fit",
    "save_predictor",
    "load_predictor",
]

_RIDGE = 1e-8


class StepSizeError(RuntimeError):
    """Raised when descent repeatedly increases the objective."""


@dataclass
class FitConfig:
    """Knobs shared by the fitting routines."""

    epochs: int = 500
    step_size: float = 1.0
    tol: float = 1e-8
    seed: int = 0
    batch_fraction: float | None = None


class LinearExp:
    """Log-linear scores: exp(theta @ x), no intercept."""

    def __init__(self, d):
        self.theta = np.zeros(d)

    @property
    def n_params(self):
        return self.theta.shape[0]

    def raw(self, X):
        return X @ self.theta

    def scores(self, X):
        return np.exp(self.raw(X))

    def get_weights(self):
        return self.theta.copy()

    def set_weights(self, flat):
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.shape[0] != self.theta.shape[0]:
            raise ValueError(f"expected {self.theta.shape[0]} parameters, got {flat.shape[0]}")
        self.theta = flat.copy()

    def backprop(self, X, grad_raw):
        return X.T @ grad_raw

    def spawn(self):
        clone = LinearExp(self.theta.shape[0])
        clone.theta = self.theta.copy()
        return clone


class FeedForward:
    """Fully connected scorer with rectifier hidden layers.

    ``widths`` lists the hidden layer sizes; the output is a single
    linear unit whose exponential is the score. With no hidden layers
    and ``bias=False`` the model degenerates to ``LinearExp`` exactly.
    Weights and biases start uniform on ±1/sqrt(fan_in).
    """

    def __init__(self, d, widths=(200,), bias=True, seed=0):
        self.d = d
        self.widths = tuple(int(w) for w in widths)
        if any(w <= 0 for w in self.widths):
            raise ValueError(f"hidden widths must be positive, got {self.widths}")
        self.bias = bool(bias)
        sizes = [d, *self.widths, 1]
        self.weights = []
        self.biases = []
        for k in range(len(sizes) - 1):
            rng = stream(seed, f"predictor-init-layer{k}")
            bound = 1.0 / np.sqrt(sizes[k])
            self.weights.append(rng.uniform(-bound, bound, size=(sizes[k], sizes[k + 1])))
            if self.bias:
                self.biases.append(rng.uniform(-bound, bound, size=sizes[k + 1]))
            else:
                self.biases.append(np.zeros(sizes[k + 1]))

    @property
    def n_params(self):
        total = sum(w.size for w in self.weights)
        if self.bias:
            total += sum(b.size for b in self.biases)
        return total

    def _forward(self, X):
        activations = [X]
        h = X
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
            activations.append(h)
        return activations

    def raw(self, X):
        return self._forward(X)[-1][:, 0]

    def scores(self, X):
        return np.exp(self.raw(X))

    def get_weights(self):
        parts = []
        for k in range(len(self.weights)):
            parts.append(self.weights[k].ravel())
            if self.bias:
                parts.append(self.biases[k].ravel())
        return np.concatenate(parts)

    def set_weights(self, flat):
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape[0]}")
        pos = 0
        for k in range(len(self.weights)):
            size = self.weights[k].size
            self.weights[k] = flat[pos : pos + size].reshape(self.weights[k].shape).copy()
            pos += size
            if self.bias:
                size = self.biases[k].size
                self.biases[k] = flat[pos : pos + size].copy()
                pos += size

    def backprop(self, X, grad_raw):
        """Flat parameter gradient of sum_i grad_raw_i * raw_i."""
        activations = self._forward(X)
        delta = np.asarray(grad_raw, dtype=np.float64).reshape(-1, 1)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = activations[k].T @ delta
            grads_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (activations[k] > 0)
        parts = []
        for k in range(len(self.weights)):
            parts.append(grads_w[k].ravel())
            if self.bias:
                parts.append(grads_b[k].ravel())
        return np.concatenate(parts)

    def spawn(self):
        clone = FeedForward(self.d, self.widths, bias=self.bias)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone


def predict_scores(model, X):
    """Strictly positive scores: the exponential of the model output."""
    return model.scores(np.asarray(X, dtype=np.float64))


# ---------------------------------------------------------------------------
# Descent helpers


def _descend(model, X, objective, cfg, move_cap=None, trace=None):
    """Backtracking gradient descent on ``objective``.

    ``objective(raw)`` returns (value, gradient in raw outputs); the
    ridge term on the flat parameters is added here. Stops when the
    parameter-gradient norm drops below ``cfg.tol``. ``move_cap`` bounds
    the total raw-output drift (L-inf) of the call; objectives that are
    unbounded below in score space (the dual-coupled fit can be, once
    multipliers outgrow rho) then terminate at the region boundary
    instead of sliding off. Non-finite candidate values are rejected.
    ``trace``, when given, collects the objective value accepted at each
    step.
    """
    params = model.get_weights()
    step = cfg.step_size
    raw0 = model.raw(X) if move_cap is not None else None

    def evaluate(p):
        model.set_weights(p)
        raw = model.raw(X)
        with np.errstate(over="ignore", invalid="ignore"):
            value, grad_raw = objective(raw)
            value = value + _RIDGE * float(p @ p)
        if not np.isfinite(value):
            return np.inf, grad_raw, raw
        return value, grad_raw, raw

    value, grad_raw, raw = evaluate(params)
    if not np.isfinite(value) or not np.all(np.isfinite(grad_raw)):
        model.set_weights(params)
        return params
    for _ in range(cfg.epochs):
        grad = model.backprop(X, grad_raw) + 2.0 * _RIDGE * params
        gnorm2 = float(grad @ grad)
        if np.sqrt(gnorm2) <= cfg.tol:
            break
        step = min(step * 2.0, 1e8)
        # Armijo backtracking with c = 1e-4.
        capped = False
        while True:
            candidate = params - step * grad
            cand_value, cand_grad_raw, cand_raw = evaluate(candidate)
            if cand_value <= value - 1e-4 * step * gnorm2:
                if move_cap is not None:
                    drift = float(np.abs(cand_raw - raw0).max())
                    if drift > move_cap:
                        capped = True
                    if drift > 2.0 * move_cap:
                        step *= 0.5
                        if step < 1e-18:
                            model.set_weights(params)
                            return params
                        capped = False
                        continue
                break
            step *= 0.5
            if step < 1e-18:
                # Flat to machine precision along the gradient ray.
                model.set_weights(params)
                return params
        params, value, grad_raw = candidate, cand_value, cand_grad_raw
        if trace is not None:
            trace.append(float(value))
        if capped:
            break
    model.set_weights(params)
    return params


def max_entropy_fit(model, X, pi, u, rho, cfg=None, move_cap=None):
    """Fit the predictor's scores toward subproblem scores ``pi``.

    Minimizes ``sum_i(-u_i h_i - rho pi_i log h_i + rho h_i)`` plus a
    small ridge, where h are the model's scores. At u = 0 the optimum
    mean-matches: a constant-capable model returns scores averaging pi.
    ``move_cap`` limits the log-score drift per call; see ``_descend``.
    """
    X = np.asarray(X, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64).reshape(-1)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    cfg = cfg or FitConfig()

    def objective(raw):
        h = np.exp(raw)
        value = float(np.sum(-u * h - rho * pi * raw + rho * h))
        grad_raw = (rho - u) * h - rho * pi
        return value, grad_raw

    return _descend(model, X, objective, cfg, move_cap=move_cap)


def max_entropy_objective(model, X, pi, u, rho):
    """Value and flat-parameter gradient of the max-entropy fit objective.

    The exact quantity ``max_entropy_fit`` descends, ridge included;
    exposed for gradient audits.
    """
    X = np.asarray(X, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64).reshape(-1)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    raw = model.raw(X)
    h = np.exp(raw)
    params = model.get_weights()
    value = float(np.sum(-u * h - rho * pi * raw + rho * h)) + _RIDGE * float(params @ params)
    grad = model.backprop(X, (rho - u) * h - rho * pi) + 2.0 * _RIDGE * params
    return value, grad


def gd_mle_fit(model, ds, cfg=None, trace=None):
    """Direct descent of the mean negative log partial likelihood.

    Full-batch by default with a backtracking line search; when
    ``cfg.batch_fraction`` is set, runs epoch-wise mini-batch descent at
    a constant step over disjoint shuffled batches (batch risk sets,
    biased in expectation). Raises ``StepSizeError`` if the full loss
    rises ten epochs in a row. ``trace``, when given, collects the full
    loss after each epoch. Returns the fitted model.
    """
    cfg = cfg or FitConfig()
    X = ds.features
    if cfg.batch_fraction is None:

        def objective(raw):
            value, grad_raw, _ = nll_score_gradient(ds, raw)
            return value, grad_raw

        _descend(model, X, objective, cfg, trace=trace)
        return model

    if not 0 < cfg.batch_fraction <= 1:
        raise ValueError(f"batch_fraction must be in (0, 1], got {cfg.batch_fraction}")
    batch_size = max(2, int(round(cfg.batch_fraction * ds.n)))
    rng = stream(cfg.seed, "gd-minibatch")
    params = model.get_weights()
    last_value = np.inf
    rises = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(ds.n)
        for start in range(0, ds.n, batch_size):
            batch = np.sort(order[start : start + batch_size])
            if batch.shape[0] < 2:
                continue
            sub = ds.subset(batch)
            _, grad_raw, _ = nll_score_gradient(sub, model.raw(sub.features))
            grad = model.backprop(sub.features, grad_raw) + 2.0 * _RIDGE * params
            params = params - cfg.step_size * grad
            model.set_weights(params)
        value, _, _ = nll_score_gradient(ds, model.raw(X))
        if trace is not None:
            trace.append(float(value))
        rises = rises + 1 if not np.isfinite(value) or value > last_value else 0
        if rises >= 10:
            raise StepSizeError(
                f"mini-batch descent increased the loss {rises} consecutive epochs "
                f"(step_size={cfg.step_size})"
            )
        if abs(last_value - value) <= cfg.tol * max(1.0, abs(value)):
            break
        last_value = value
    return model


# ---------------------------------------------------------------------------
# Serialization: flat (section, name, value) rows, byte-deterministic.


def save_predictor(model, path):
    rows = [("meta", "kind", type(model).__name__)]
    if isinstance(model, LinearExp):
        rows.append(("meta", "d", str(model.theta.shape[0])))
    elif isinstance(model, FeedForward):
        rows.append(("meta", "d", str(model.d)))
        rows.append(("meta", "widths", ";".join(map(str, model.widths))))
        rows.append(("meta", "bias", str(int(model.bias))))
    else:
        raise TypeError(f"cannot serialize predictor of type {type(model).__name__}")
    for k, v in enumerate(model.get_weights()):
        rows.append(("param", str(k), repr(float(v))))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "name", "value"])
        writer.writerows(rows)


def load_predictor(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["section", "name", "value"]:
            raise ValueError(f"{path}: unexpected header {header}")
        meta, params = {}, []
        for section, name, value in reader:
            if section == "meta":
                meta[name] = value
            else:
                params.append((int(name), float(value)))
    params.sort()
    flat = np.array([v for _, v in params])
    if meta.get("kind") == "LinearExp":
        model = LinearExp(int(meta["d"]))
    elif meta.get("kind") == "FeedForward":
        widths = tuple(int(w) for w in meta["widths"].split(";")) if meta["widths"] else ()
        model = FeedForward(int(meta["d"]), widths, bias=bool(int(meta["bias"])))
    else:
        raise ValueError(f"{path}: unknown predictor kind {meta.get('kind')!r}")
    model.set_weights(flat)
    return model
