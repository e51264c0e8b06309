"""Nonparametric hazard and survival estimators.

Step-function estimators (Kaplan-Meier, Nelson-Aalen, Breslow) place
increments at event times; kernel-smoothed variants spread the same jump
masses over a compact window. Tied event times share one risk set, so a
tie of size d at time t contributes a single grouped increment d / Y(t).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_scores

__all__ = [
    "StepFunction",
    "SmoothedHazard",
    "KERNELS",
    "kernel_function",
    "kaplan_meier",
    "nelson_aalen",
    "smoothed_hazard",
    "breslow_baseline",
    "breslow_class",
    "breslow_aft",
    "default_bandwidth",
]


class StepFunction:
    """Right-continuous step function.

    ``values[k]`` holds on ``[knots[k], knots[k+1])``; queries before the
    first knot return ``left_value``.
    """

    def __init__(self, knots, values, left_value):
        knots = np.asarray(knots, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if knots.shape != values.shape or knots.ndim != 1:
            raise ValueError("knots and values must be 1-d arrays of equal length")
        if knots.shape[0] and np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        self.knots = knots
        self.values = values
        self.left_value = float(left_value)
        self.knots.setflags(write=False)
        self.values.setflags(write=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.knots.shape[0] == 0:
            out = np.full(t.shape, self.left_value)
            return out if out.ndim else float(out)
        idx = np.searchsorted(self.knots, t, side="right") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], self.left_value)
        return out if out.ndim else float(out)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["knot", "value"])
            for k, v in zip(self.knots, self.values):
                writer.writerow([repr(float(k)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, left_value):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["knot", "value"]:
                raise ValueError(f"{path}: expected header ['knot', 'value'], got {header}")
            rows = [(float(k), float(v)) for k, v in reader]
        knots = [r[0] for r in rows]
        values = [r[1] for r in rows]
        return cls(knots, values, left_value)

    def __repr__(self):
        return f"StepFunction(n_knots={self.knots.shape[0]}, left_value={self.left_value})"


# ---------------------------------------------------------------------------
# Kernels, all supported on [-1, 1] and integrating to one.

_GAUSS_NORM = math.erf(1.0 / math.sqrt(2.0))  # mass of N(0,1) on [-1, 1]


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _uniform(u):
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


def _gaussian_truncated(u):
    density = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    return np.where(np.abs(u) <= 1.0, density / _GAUSS_NORM, 0.0)


KERNELS = {
    "epanechnikov": _epanechnikov,
    "uniform": _uniform,
    "gaussian": _gaussian_truncated,
}


def kernel_function(kernel):
    if callable(kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel '{kernel}', expected one of {sorted(KERNELS)}") from None


def default_bandwidth(ds):
    """One tenth of the observed time span."""
    span = float(ds.time.max() - ds.time.min())
    if span <= 0:
        raise ValueError("cannot pick a bandwidth: all observation times are equal")
    return span / 10.0


class SmoothedHazard:
    """Kernel-smoothed hazard built from per-event jump masses.

    Evaluates ``(1/b) * sum_j K((t - t_j) / b) * mass_j`` where the
    support points t_j are event times.
    """

    def __init__(self, support, masses, bandwidth, kernel="epanechnikov"):
        self.support = np.asarray(support, dtype=np.float64)
        self.masses = np.asarray(masses, dtype=np.float64)
        if self.support.shape != self.masses.shape:
            raise ValueError("support and masses must have equal length")
        if bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
        self.bandwidth = float(bandwidth)
        self.kernel_name = kernel if isinstance(kernel, str) else getattr(kernel, "__name__", "custom")
        self._kernel = kernel_function(kernel)
        self.support.setflags(write=False)
        self.masses.setflags(write=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        u = (t[..., None] - self.support) / self.bandwidth
        out = (self._kernel(u) * self.masses).sum(axis=-1) / self.bandwidth
        return out if out.ndim else float(out)

    def clamped(self, t):
        """Evaluate with queries clipped to the support range.

        Out-of-range arguments take the hazard value at the nearest
        support boundary instead of decaying to zero.
        """
        if self.support.shape[0] == 0:
            raise ValueError("smoothed hazard has empty support")
        t = np.clip(np.asarray(t, dtype=np.float64), self.support[0], self.support[-1])
        return self(t)

    @property
    def total_mass(self):
        return float(self.masses.sum())


# ---------------------------------------------------------------------------
# Counting-statistic helpers


def _grouped_event_stats(ds):
    """Unique event times with tie counts and at-risk counts.

    Returns (times, d, Y) where d[t] is the number of tied events and
    Y[t] the number of samples with observation time >= t.
    """
    if ds.n_events == 0:
        raise ValueError("dataset has no events")
    event_times = ds.time[ds.event]
    times, d = np.unique(event_times, return_counts=True)
    # Closed risk sets: Y(t) counts observations at or after t.
    sorted_times = np.sort(ds.time)
    Y = ds.n - np.searchsorted(sorted_times, times, side="left")
    return times, d.astype(np.float64), Y.astype(np.float64)


def kaplan_meier(ds):
    """Kaplan-Meier survival curve as a right-continuous step function.

    The curve starts at one, drops only at event times by the factor
    ``1 - d/Y``, and therefore reaches zero after the last event exactly
    when no censored observation survives it. A dataset with no events
    yields the constant-one curve.
    """
    if ds.n_events == 0:
        return StepFunction(np.empty(0), np.empty(0), left_value=1.0)
    times, d, Y = _grouped_event_stats(ds)
    survival = np.cumprod(1.0 - d / Y)
    return StepFunction(times, survival, left_value=1.0)


def nelson_aalen(ds):
    """Nelson-Aalen cumulative hazard (grouped increments d/Y).

    Constant zero when the dataset has no events.
    """
    if ds.n_events == 0:
        return StepFunction(np.empty(0), np.empty(0), left_value=0.0)
    times, d, Y = _grouped_event_stats(ds)
    return StepFunction(times, np.cumsum(d / Y), left_value=0.0)


def smoothed_hazard(ds, bandwidth=None, kernel="epanechnikov"):
    """Kernel-smoothed hazard rate from Nelson-Aalen increments."""
    times, d, Y = _grouped_event_stats(ds)
    if bandwidth is None:
        bandwidth = default_bandwidth(ds)
    return SmoothedHazard(times, d / Y, bandwidth, kernel)


def breslow_baseline(ds, scores):
    """Cumulative baseline hazard given positive per-sample scores.

    The increment at event time t is ``d(t) / sum of scores at risk``;
    with unit scores this is exactly the Nelson-Aalen estimator.
    """
    scores = check_positive_scores(scores, ds.n)
    times, d, _ = _grouped_event_stats(ds)
    order = np.argsort(ds.time, kind="stable")
    sorted_scores = scores[order]
    # Suffix sums over the sorted times give the at-risk score totals.
    suffix = np.cumsum(sorted_scores[::-1])[::-1]
    first_at_risk = np.searchsorted(ds.time[order], times, side="left")
    denom = suffix[first_at_risk]
    return StepFunction(times, np.cumsum(d / denom), left_value=0.0)


def _breslow_masses(ds, scores):
    """Per-unique-event-time Breslow jump masses d(t) / score-at-risk(t)."""
    times, d, _ = _grouped_event_stats(ds)
    order = np.argsort(ds.time, kind="stable")
    suffix = np.cumsum(scores[order][::-1])[::-1]
    first_at_risk = np.searchsorted(ds.time[order], times, side="left")
    return times, d / suffix[first_at_risk]


def breslow_class(ds, classes, scores=None, bandwidth=None, kernel="epanechnikov"):
    """Per-class smoothed baseline hazards.

    Each class hazard uses only that class's event times and restricts
    the at-risk score sums to same-class members, then smooths the
    resulting jump masses with the shared bandwidth. A class without
    events cannot anchor a baseline and raises ``ValueError``.

    Returns
    -------
    dict mapping class label -> SmoothedHazard
    """
    classes = np.asarray(classes).reshape(-1)
    if classes.shape[0] != ds.n:
        raise ValueError(f"expected {ds.n} class labels, got {classes.shape[0]}")
    if scores is None:
        scores = np.ones(ds.n)
    scores = check_positive_scores(scores, ds.n)
    if bandwidth is None:
        bandwidth = default_bandwidth(ds)
    hazards = {}
    for label in np.unique(classes):
        members = np.flatnonzero(classes == label)
        sub = ds.subset(members)
        if sub.n_events == 0:
            raise ValueError(f"class {label!r} has no events; its baseline is degenerate")
        times, masses = _breslow_masses(sub, scores[members])
        hazards[label] = SmoothedHazard(times, masses, bandwidth, kernel)
    return hazards


def breslow_aft(ds, theta, bandwidth=None, kernel="epanechnikov"):
    """Smoothed baseline hazard for the accelerated failure time model.

    The jump mass carried by event i is
    ``exp(-theta @ x_i) / sum_{j at risk} exp(-2 theta @ x_j)``, placed
    at the observed event time; with theta = 0 this reduces to the
    Nelson-Aalen masses.
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != ds.d:
        raise ValueError(f"theta has length {theta.shape[0]}, expected {ds.d}")
    if bandwidth is None:
        bandwidth = default_bandwidth(ds)
    shrink = np.exp(-ds.features @ theta)
    times, _, _ = _grouped_event_stats(ds)
    order = np.argsort(ds.time, kind="stable")
    suffix = np.cumsum((shrink**2)[order][::-1])[::-1]
    first_at_risk = np.searchsorted(ds.time[order], times, side="left")
    denom = suffix[first_at_risk]
    # Group tied events: each event adds its own numerator over the shared
    # at-risk denominator.
    numer = np.zeros_like(times)
    event_times = ds.time[ds.event]
    slot = np.searchsorted(times, event_times)
    np.add.at(numer, slot, shrink[ds.event])
    return SmoothedHazard(times, numer / denom, bandwidth, kernel)
