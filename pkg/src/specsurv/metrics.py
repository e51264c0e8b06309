"""Ranking and calibration metrics for survival predictions.

Risk scores order samples by predicted hazard: higher risk should mean
earlier events. Censoring-robust classification metrics reweight cases
by the inverse probability of remaining uncensored, estimated with the
censoring-distribution product-limit curve.
"""

import numpy as np

from .nonparametric import StepFunction, kaplan_meier

__all__ = [
    "concordance_index",
    "censoring_survival",
    "ipcw_weights",
    "auc_at",
    "integrated_auc",
    "rmse_vs_km",
]


def concordance_index(time, event, risk):
    """Fraction of comparable pairs ordered correctly by risk.

    A pair is comparable when the earlier sample's event was observed;
    it counts 1 when that sample's risk is strictly higher, 1/2 on score
    ties. Returns 0.5 when no pair is comparable.
    """
    time = np.asarray(time, dtype=np.float64).reshape(-1)
    event = np.asarray(event, dtype=bool).reshape(-1)
    risk = np.asarray(risk, dtype=np.float64).reshape(-1)
    if not time.shape == event.shape == risk.shape:
        raise ValueError("time, event, and risk must have equal length")
    earlier = (time[:, None] < time[None, :]) & event[:, None]
    concordant = risk[:, None] > risk[None, :]
    tied = risk[:, None] == risk[None, :]
    n_pairs = earlier.sum()
    if n_pairs == 0:
        return 0.5
    return float((earlier * (concordant + 0.5 * tied)).sum() / n_pairs)


def censoring_survival(ds):
    """Product-limit curve of the censoring distribution.

    The roles of events and censorings are swapped: the curve drops at
    censoring times. With no censored samples it is constant one.
    """
    if ds.n == ds.n_events:
        return StepFunction(np.empty(0), np.empty(0), left_value=1.0)
    flipped = SurvivalView(ds.time, ~ds.event)
    return kaplan_meier(flipped)


class SurvivalView:
    """Minimal duck-typed view for reusing the product-limit estimator."""

    def __init__(self, time, event):
        self.time = time
        self.event = np.asarray(event, dtype=bool)

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def n_events(self):
        return int(self.event.sum())


def ipcw_weights(ds):
    """Inverse-probability-of-censoring weights at each observation.

    Weight i is 1 / G(T_i-), the censoring survival just before the
    sample's time; where that probability is zero the weight is zero,
    dropping the sample from weighted counts.
    """
    G = censoring_survival(ds)
    if G.knots.shape[0] == 0:
        return np.full(ds.n, 1.0 / G.left_value)
    # Left limit: the value of the last knot strictly before t.
    idx = np.searchsorted(G.knots, ds.time, side="left") - 1
    g_left = np.where(idx >= 0, G.values[np.maximum(idx, 0)], G.left_value)
    return np.where(g_left > 0, 1.0 / np.where(g_left > 0, g_left, 1.0), 0.0)


def auc_at(ds, risk, t, weights=None):
    """Censoring-weighted dynamic AUC at horizon t.

    Cases are samples with an observed event at or before t, weighted by
    their censoring weights; controls are samples still at risk beyond
    t. Returns NaN when either group is empty (or all case weight is
    zero). Score ties count 1/2.
    """
    risk = np.asarray(risk, dtype=np.float64).reshape(-1)
    if weights is None:
        weights = ipcw_weights(ds)
    cases = (ds.time <= t) & ds.event
    controls = ds.time > t
    case_w = weights[cases]
    if not cases.any() or not controls.any() or case_w.sum() <= 0:
        return float("nan")
    r_case = risk[cases]
    r_ctrl = risk[controls]
    ordered = r_case[:, None] > r_ctrl[None, :]
    tied = r_case[:, None] == r_ctrl[None, :]
    numer = (case_w[:, None] * (ordered + 0.5 * tied)).sum()
    return float(numer / (case_w.sum() * r_ctrl.shape[0]))


def integrated_auc(ds, risk, grid_size=100):
    """Trapezoid average of the dynamic AUC over an even time grid.

    The grid spans the observed time range; horizons where the AUC is
    undefined are dropped before integrating. NaN when no horizon is
    defined.
    """
    grid = np.linspace(ds.time.min(), ds.time.max(), grid_size)
    weights = ipcw_weights(ds)
    values = np.array([auc_at(ds, risk, t, weights) for t in grid])
    defined = ~np.isnan(values)
    if not defined.any():
        return float("nan")
    t_def, v_def = grid[defined], values[defined]
    if t_def.shape[0] == 1:
        return float(v_def[0])
    return float(np.trapz(v_def, t_def) / (t_def[-1] - t_def[0]))


def rmse_vs_km(ds, predicted_survival, grid_size=100):
    """Root mean squared gap to the Kaplan-Meier curve on an even grid.

    ``predicted_survival`` is a callable population survival curve, or a
    sequence of per-sample callables averaged pointwise.
    """
    grid = np.linspace(ds.time.min(), ds.time.max(), grid_size)
    km = kaplan_meier(ds)(grid)
    if callable(predicted_survival):
        predicted = np.asarray(predicted_survival(grid), dtype=np.float64)
    else:
        predicted = np.mean([np.asarray(s(grid)) for s in predicted_survival], axis=0)
    return float(np.sqrt(np.mean((km - predicted) ** 2)))
