"""Cox partial likelihood, gradients, and mini-batch bias analysis.

The negative log partial likelihood of positive per-sample scores s is

    (1/n) * sum_i event_i * [log(sum_{j at risk at T_i} W_ji s_j) - log(W_ii s_i)]

with closed risk sets (the anchor is always a member, so risk sums are
never empty). ``W`` is an optional strictly positive pairwise weight
matrix whose column i weighs every sample's score at anchor i's time;
``None`` stands for unit weights.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._rng import stream
from ._validation import check_positive_scores, check_weight_matrix

__all__ = [
    "LossReport",
    "nll",
    "nll_score_gradient",
    "nll_gradient_linear",
    "nll_minibatch",
    "bias_closed_form",
    "bias_empirical",
]


@dataclass(frozen=True)
class LossReport:
    """Loss value with its gradient and per-sample contributions."""

    value: float
    gradient: np.ndarray
    per_sample_terms: np.ndarray


def _sorted_view(ds):
    order = ds.sorted_order
    return order, ds.time[order]


def nll(ds, W, scores):
    """Weighted negative log partial likelihood (mean over all samples)."""
    scores = check_positive_scores(scores, ds.n)
    W = check_weight_matrix(W, ds.n)
    anchors = np.flatnonzero(ds.event)
    if anchors.shape[0] == 0:
        return 0.0
    if W is None:
        order, sorted_times = _sorted_view(ds)
        log_s = np.log(scores)
        shifted = log_s - log_s.max()
        suffix = np.cumsum(np.exp(shifted[order])[::-1])[::-1]
        first = np.searchsorted(sorted_times, ds.time[anchors], side="left")
        log_denom = np.log(suffix[first]) + log_s.max()
        terms = log_denom - log_s[anchors]
    else:
        at_risk = ds.time[None, :] >= ds.time[anchors, None]
        denom = (at_risk * W[:, anchors].T * scores[None, :]).sum(axis=1)
        assert np.all(denom > 0), "risk sums must be positive under closed risk sets"
        terms = np.log(denom) - np.log(W[anchors, anchors] * scores[anchors])
    return float(terms.sum() / ds.n)


def _risk_coefficients(ds, log_scores):
    """Per-sample softmax mass accumulated over all anchors at risk.

    Returns c with c_j = sum over event anchors i whose risk set contains
    j of exp(log_scores_j) / sum_{t at risk at T_i} exp(log_scores_t).
    The gradient of the unit-weight likelihood in the log scores is then
    (c - event) / n.
    """
    order, sorted_times = _sorted_view(ds)
    shift = log_scores.max()
    # Diverged parameter iterates can push scores past the float range;
    # overflow is left to propagate as inf/nan so descent loops see a
    # non-finite objective and back off rather than crash.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        w_sorted = np.exp(log_scores[order] - shift)
        suffix = np.cumsum(w_sorted[::-1])[::-1]
        first = np.searchsorted(sorted_times, ds.time, side="left")
        denom = suffix[first] * float(np.exp(np.float64(shift)))

        inv = np.where(ds.event, 1.0 / denom, 0.0)
        # Anchor i touches exactly the samples at or after its time, so the
        # per-sample total of 1/denom is a prefix sum over sorted anchors.
        prefix = np.cumsum(inv[order])
        # Sample j collects every anchor with time <= time_j (ties included).
        last = np.searchsorted(sorted_times, ds.time, side="right") - 1
        c = np.exp(log_scores) * prefix[last]
    return c, denom


def nll_score_gradient(ds, log_scores):
    """Unit-weight NLL and its gradient in the per-sample log scores."""
    log_scores = np.asarray(log_scores, dtype=np.float64).reshape(-1)
    c, denom = _risk_coefficients(ds, log_scores)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(ds.event, np.log(denom) - log_scores, 0.0)
        value = float(terms.sum() / ds.n)
    grad = (c - ds.event.astype(np.float64)) / ds.n
    return value, grad, terms


def nll_gradient_linear(ds, theta):
    """NLL of the linear-exponential model with its coefficient gradient."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    value, score_grad, terms = nll_score_gradient(ds, ds.features @ theta)
    return LossReport(value, ds.features.T @ score_grad, terms)


def nll_minibatch(ds, theta, batch_indices):
    """Batch NLL with risk sets restricted to the batch.

    Normalized by the batch size; with the full index set this equals
    the full-data NLL exactly.
    """
    batch_indices = np.asarray(batch_indices, dtype=np.intp)
    if np.unique(batch_indices).shape[0] != batch_indices.shape[0]:
        raise ValueError("batch indices must be distinct")
    sub = ds.subset(np.sort(batch_indices))
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    return nll(sub, None, np.exp(sub.features @ theta))


# ---------------------------------------------------------------------------
# Mini-batch bias
#
# Averaging batch losses over uniform size-b subsets understates the full
# loss: each anchor sees only the batch part of its risk set, and the
# expected gap is
#
#     -(1/n) * sum_i event_i * E[log(batch risk mass_i / full risk mass_i)]
#
# with the expectation over batches conditioned to contain i.


def _conditional_subset_log_ratio(w_at_risk, w_self, total, others, batch_size, cap, rng):
    """E[log(in-batch risk mass / total)] over subsets containing the anchor.

    ``others`` lists candidate companions; ``w_at_risk`` their risk-set
    masses (zero when not at risk). Enumerates exactly when the subset
    count fits under ``cap``, otherwise Monte Carlo with ``cap`` draws.
    """
    k = batch_size - 1
    if k == 0:
        return math.log(w_self / total)
    n_subsets = math.comb(others.shape[0], k)
    if n_subsets <= cap:
        acc = 0.0
        for combo in combinations(range(others.shape[0]), k):
            acc += math.log((w_self + w_at_risk[list(combo)].sum()) / total)
        return acc / n_subsets
    picks = rng.random((cap, others.shape[0])).argsort(axis=1)[:, :k]
    masses = w_self + w_at_risk[picks].sum(axis=1)
    return float(np.mean(np.log(masses / total)))


def bias_closed_form(ds, theta, batch_size, n_enum_or_mc=100_000, seed=0):
    """Expected full-minus-batch NLL gap under uniform batches.

    Exact (exhaustive enumeration) whenever the per-anchor subset count
    is at most ``n_enum_or_mc``, otherwise a Monte Carlo average with
    that many draws. Zero exactly when ``batch_size == n``.
    """
    if not 1 <= batch_size <= ds.n:
        raise ValueError(f"batch_size must be in [1, {ds.n}], got {batch_size}")
    if batch_size == ds.n:
        return 0.0
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    w = np.exp(ds.features @ theta)
    rng = stream(seed, "bias-closed-mc")
    acc = 0.0
    for i in np.flatnonzero(ds.event):
        at_risk = ds.time >= ds.time[i]
        total = float(w[at_risk].sum())
        others = np.delete(np.arange(ds.n), i)
        w_at_risk = np.where(at_risk, w, 0.0)[others]
        acc += _conditional_subset_log_ratio(
            w_at_risk, float(w[i]), total, others, batch_size, n_enum_or_mc, rng
        )
    return -acc / ds.n


def _empirical_chunk(ds, theta, batch_size, n_draws, seed, chunk_id, full_value):
    rng = stream(seed, f"bias-empirical-{chunk_id}")
    gaps = np.empty(n_draws)
    for t in range(n_draws):
        batch = rng.choice(ds.n, size=batch_size, replace=False)
        gaps[t] = full_value - nll_minibatch(ds, theta, batch)
    return gaps

def bias_empirical(ds, theta, batch_size, draws=1000, seed=0):
    """Monte Carlo estimate of the full-minus-batch NLL gap.

    Returns (mean, standard error). Draws are split into fixed chunks
    with independent named streams, so results do not depend on the
    worker count; SPECSURV_THREADS caps the thread fan-out.
    """
    if not 1 <= batch_size <= ds.n:
        raise ValueError(f"batch_size must be in [1, {ds.n}], got {batch_size}")
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    full_value = nll(ds, None, np.exp(ds.features @ theta))
    chunk = 256
    sizes = [chunk] * (draws // chunk) + ([draws % chunk] if draws % chunk else [])
    workers = max(1, int(os.environ.get("SPECSURV_THREADS", "1")))
    if workers == 1 or len(sizes) == 1:
        parts = [
            _empirical_chunk(ds, theta, batch_size, sz, seed, k, full_value)
            for k, sz in enumerate(sizes)
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_empirical_chunk, ds, theta, batch_size, sz, seed, k, full_value)
                for k, sz in enumerate(sizes)
            ]
            parts = [f.result() for f in futures]
    gaps = np.concatenate(parts)
    mean = float(gaps.mean())
    stderr = float(gaps.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
    return mean, stderr
