"""Synthetic data generators with calibrated censoring.

Both generators draw event times from exponential clocks whose rates are
``exp(theta @ x)`` and censor with a uniform window whose width is
calibrated by bisection so the realized censoring fraction lands near the
requested one. All draws come from named substreams of a single seed.
"""

import numpy as np

from ._rng import stream
from .data import Journey, JourneyDataset, SurvivalDataset

__all__ = ["CalibrationError", "generate_linear_cox", "generate_ads"]

_MAX_BISECTION_STEPS = 100


class CalibrationError(RuntimeError):
    """Raised when no censoring window width hits the target fraction."""


def _calibrate_censor_width(event_times, uniform_draws, target, tol):
    """Bisect the window width c so mean(c * U < T) is within tol of target.

    The realized fraction is a nonincreasing step function of c, so the
    achievable values form a grid with spacing 1/n; ``tol`` should be at
    least that coarse.
    """

    def frac(c):
        return float(np.mean(c * uniform_draws < event_times))

    lo = 0.0  # frac -> 1
    hi = float(np.max(event_times / np.maximum(uniform_draws, 1e-12))) * 1.001  # frac -> 0
    best_c, best_err = hi, abs(frac(hi) - target)
    for _ in range(_MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        f = frac(mid)
        if abs(f - target) < best_err:
            best_c, best_err = mid, abs(f - target)
        if best_err <= tol:
            break
        if f > target:
            lo = mid
        else:
            hi = mid
    if best_err > tol:
        raise CalibrationError(
            f"could not reach censoring fraction {target:.3f} within ±{tol:.3f} "
            f"(best {best_err + target:.3f}) after {_MAX_BISECTION_STEPS} bisection steps"
        )
    return best_c


def _censor_tolerance(n):
    # The achievable censoring fractions are multiples of 1/n.
    return max(0.05, 1.0 / n)


def generate_linear_cox(n, d, theta=None, censor_frac=0.3, seed=0):
    """Draw a linear proportional-hazards dataset.

    Features are standard normal, event times exponential with rate
    ``exp(theta @ x)`` (unit baseline hazard), and censoring times uniform
    on a window calibrated to the requested censoring fraction.

    Returns
    -------
    (SurvivalDataset, ndarray)
        The dataset and the generating coefficient vector.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= censor_frac < 1:
        raise ValueError(f"censor_frac must be in [0, 1), got {censor_frac}")
    X = stream(seed, "cox-features").standard_normal((n, d))
    if theta is None:
        theta = stream(seed, "cox-theta").standard_normal(d) / np.sqrt(max(d, 1))
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != d:
        raise ValueError(f"theta has length {theta.shape[0]}, expected {d}")

    rates = np.exp(X @ theta)
    event_times = stream(seed, "cox-event-times").exponential(1.0, size=n) / rates
    if censor_frac == 0.0:
        return SurvivalDataset(X, event_times, np.ones(n, dtype=bool)), theta

    uniforms = stream(seed, "cox-censor-times").uniform(size=n)
    width = _calibrate_censor_width(event_times, uniforms, censor_frac, _censor_tolerance(n))
    censor_times = width * uniforms
    observed = np.minimum(event_times, censor_times)
    event = event_times <= censor_times
    return SurvivalDataset(X, observed, event), theta


def generate_ads(
    n_journeys,
    max_items,
    seed=0,
    d=50,
    n_items=None,
    censor_frac=0.483,
    split="train",
    theta=None,
):
    """Draw journey data where impressions race exponential clocks.

    Each journey shows a uniform number of distinct items (1 to
    ``max_items``) from a feature pool specific to ``split``; every
    impression starts a clock at journey time zero with rate
    ``exp(theta @ x_item)``, the first expiry converts the journey, and a
    calibrated uniform window censors journeys that outlast it. The
    generating coefficients are shared across splits so held-out pools
    score against the same ground truth.

    Returns
    -------
    (JourneyDataset, ndarray)
    """
    if n_journeys < 1:
        raise ValueError("n_journeys must be at least 1")
    if max_items < 1:
        raise ValueError("max_items must be at least 1")
    if n_items is None:
        n_items = max(4 * max_items, 16)
    if n_items < max_items:
        raise ValueError(f"n_items={n_items} cannot be below max_items={max_items}")

    item_features = stream(seed, f"ads-items-{split}").standard_normal((n_items, d))
    if theta is None:
        theta = stream(seed, "ads-theta").standard_normal(d) / np.sqrt(max(d, 1))
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != d:
        raise ValueError(f"theta has length {theta.shape[0]}, expected {d}")
    rates = np.exp(item_features @ theta)

    rng = stream(seed, f"ads-journeys-{split}")
    sizes = rng.integers(1, max_items + 1, size=n_journeys)
    raw_event_times = np.empty(n_journeys)
    winners = np.empty(n_journeys, dtype=np.intp)
    shown = []
    for k in range(n_journeys):
        items = rng.choice(n_items, size=sizes[k], replace=False)
        clocks = rng.exponential(1.0, size=sizes[k]) / rates[items]
        first = int(np.argmin(clocks))
        shown.append(items)
        raw_event_times[k] = clocks[first]
        winners[k] = items[first]

    uniforms = stream(seed, f"ads-censor-{split}").uniform(size=n_journeys)
    width = _calibrate_censor_width(
        raw_event_times, uniforms, censor_frac, _censor_tolerance(n_journeys)
    )
    censor_times = width * uniforms

    journeys = []
    for k in range(n_journeys):
        items = shown[k]
        times = np.zeros(items.shape[0])
        if raw_event_times[k] <= censor_times[k]:
            journeys.append(
                Journey(
                    f"j{k}",
                    items,
                    times,
                    event_item=int(winners[k]),
                    event_time=float(raw_event_times[k]),
                )
            )
        else:
            journeys.append(Journey(f"j{k}", items, times))
    return JourneyDataset(journeys, item_features), theta
