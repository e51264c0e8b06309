"""Spectral solver: score estimation via Markov-chain steady states.

The score subproblem inside the alternating fit is

    minimize_{pi > 0}  likelihood(pi) + u @ pi + rho * D(pi || target)

where D is the generalized I-divergence sum(pi log(pi/target) - pi +
target). Its stationary point is the steady state of a Markov chain over
samples whose rates combine two parts:

* comparison rates: every event anchor routes mass from each at-risk
  sample j to the anchor i at rate W_ji / (at-risk weighted score sum),
  the balance form of the likelihood gradient;
* correction rates: the penalty-plus-dual pressure sigma_i = rho *
  log(pi_i / target_i) + u_i is absorbed by routing mass from
  nonnegative-pressure states to nonpositive-pressure ones at rate
  2 pi_i |sigma_i| |sigma_j| / sum_t pi_t |sigma_t|.

Iterating steady states to a fixed point and recovering the scale along
the ray (the steady state is simplex-normalized, the subproblem optimum
is not) solves the subproblem; alternating with a max-entropy predictor
fit and a dual ascent step solves the full model.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_scores, check_weight_matrix
from .likelihood import nll
from .predictors import FitConfig, max_entropy_fit

__all__ = [
    "SolverError",
    "Contests",
    "survival_contests",
    "journey_contests",
    "winner_loser_sets",
    "penalty_gradient",
    "comparison_rates",
    "correction_rates",
    "TransitionRates",
    "transition_rates",
    "steady_state",
    "stationarity_residual",
    "subproblem_value",
    "solve_scores",
    "iterative_spectral_ranking",
    "AdmmState",
    "AdmmResult",
    "admm_fit",
]

_TELEPORT = 1e-12
_PI_FLOOR = 1e-300


class SolverError(RuntimeError):
    """Raised on solver non-convergence or divergence, with diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Contests:
    """Flattened winner-among-members comparisons over ``n_states`` states.

    Slot s says state ``members[s]`` took part, carrying weight
    ``weights[s]``, in contest ``contest_id[s]``; the contest's winner is
    ``winners[contest_id[s]]``. Unit weights are kept compact as None.
    """

    n_states: int
    winners: np.ndarray
    members: np.ndarray
    contest_id: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        for arr in (self.winners, self.members, self.contest_id):
            arr.setflags(write=False)
        if self.weights is not None:
            self.weights.setflags(write=False)

    @property
    def n_contests(self):
        return self.winners.shape[0]

    def slot_weights(self):
        return np.ones(self.members.shape[0]) if self.weights is None else self.weights

    def win_counts(self):
        return np.bincount(self.winners, minlength=self.n_states).astype(np.float64)


def survival_contests(ds, W=None, anchors="events"):
    """One contest per anchor: the anchor wins against its risk set.

    ``anchors`` is "events" for the true event anchors or "all" to treat
    every sample as an anchor (the censored-anchor regularization).
    Weights of contest i are column i of W over its members.
    """
    W = check_weight_matrix(W, ds.n)
    if anchors == "events":
        anchor_idx = np.flatnonzero(ds.event)
    elif anchors == "all":
        anchor_idx = np.arange(ds.n)
    else:
        raise ValueError(f"anchors must be 'events' or 'all', got {anchors!r}")
    members_per = [np.flatnonzero(ds.time >= ds.time[i]) for i in anchor_idx]
    members = (
        np.concatenate(members_per) if members_per else np.empty(0, dtype=np.intp)
    )
    contest_id = np.repeat(np.arange(len(anchor_idx)), [m.shape[0] for m in members_per])
    weights = None if W is None else W[members, anchor_idx[contest_id]]
    return Contests(ds.n, anchor_idx.copy(), members, contest_id, weights)


def journey_contests(ads):
    """One contest per converting journey over the shared item states.

    Members are the items at risk when the journey converted; the
    clicked item wins. Censored journeys contribute no contest.
    """
    winners, members_per = [], []
    for j in ads.journeys:
        if j.observed:
            winners.append(j.event_item)
            members_per.append(np.asarray(j.at_risk_items(), dtype=np.intp))
    members = (
        np.concatenate(members_per) if members_per else np.empty(0, dtype=np.intp)
    )
    contest_id = np.repeat(np.arange(len(winners)), [m.shape[0] for m in members_per])
    return Contests(
        ads.n_items, np.asarray(winners, dtype=np.intp), members, contest_id, None
    )


def winner_loser_sets(ds, anchors="events"):
    """Per-sample winner and loser anchor sets.

    ``wins[i]`` lists the anchors where sample i is the earliest at-risk
    observation (its own anchor, under the closed convention with index
    tie-break); ``losses[i]`` the anchors whose risk set contains i as a
    later member.
    """
    contests = survival_contests(ds, None, anchors)
    wins = [[] for _ in range(ds.n)]
    losses = [[] for _ in range(ds.n)]
    winner_of = contests.winners[contests.contest_id]
    for slot in range(contests.members.shape[0]):
        member = contests.members[slot]
        anchor = winner_of[slot]
        if member == anchor:
            wins[member].append(anchor)
        else:
            losses[member].append(anchor)
    return (
        [np.array(w, dtype=np.intp) for w in wins],
        [np.array(l, dtype=np.intp) for l in losses],
    )


def penalty_gradient(pi, target, u, rho):
    """Pressure sigma = rho * d/dpi D(pi || target) + u, elementwise."""
    pi = np.maximum(np.asarray(pi, dtype=np.float64), _PI_FLOOR)
    target = check_positive_scores(target, pi.shape[0])
    return rho * np.log(pi / target) + np.asarray(u, dtype=np.float64)


def _contest_denominators(contests, pi):
    w = contests.slot_weights()
    denom = np.bincount(
        contests.contest_id, weights=w * pi[contests.members], minlength=contests.n_contests
    )
    assert np.all(denom > 0), "contest risk sums must stay positive"
    return denom


def comparison_rates(contests, pi):
    """Dense rate matrix of losers feeding winners.

    Entry [j, i] accumulates W_ji / (weighted at-risk score sum) over the
    contests i wins with j among the members; diagonal left at zero.
    Rates scale as 1/pi: doubling pi halves every rate.
    """
    pi = np.asarray(pi, dtype=np.float64)
    denom = _contest_denominators(contests, pi)
    mu = np.zeros((contests.n_states, contests.n_states))
    winner_of = contests.winners[contests.contest_id]
    np.add.at(
        mu,
        (contests.members, winner_of),
        contests.slot_weights() / denom[contests.contest_id],
    )
    np.fill_diagonal(mu, 0.0)
    return mu


def correction_rates(pi, sigma):
    """Rates absorbing the penalty pressure into the chain.

    Mass flows from states with sigma >= 0 to states with sigma <= 0 at
    rate 2 pi_i |sigma_i| |sigma_j| / sum_t pi_t |sigma_t|; zero when the
    pressure vanishes identically. At a balance point the weighted
    pressure sums of the two sign classes cancel, which is exactly what
    these rates encode.
    """
    pi = np.asarray(pi, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    total = float(pi @ np.abs(sigma))
    if total <= 0.0:
        return np.zeros((pi.shape[0], pi.shape[0]))
    outflow = np.where(sigma > 0, sigma, 0.0)  # sources: nonnegative pressure
    inflow = np.where(sigma < 0, -sigma, 0.0) * pi  # sinks: nonpositive pressure
    delta = (2.0 / total) * np.outer(outflow, inflow)
    np.fill_diagonal(delta, 0.0)
    return delta


@dataclass(frozen=True)
class TransitionRates:
    """Off-diagonal rate matrices of the solver chain."""

    comparison: np.ndarray
    correction: np.ndarray
    sigma: np.ndarray

    def generator(self):
        """Full generator Q: off-diagonal rates, diagonal minus row sums."""
        Q = self.comparison + self.correction
        np.fill_diagonal(Q, 0.0)
        Q[np.diag_indices_from(Q)] = -Q.sum(axis=1)
        return Q


def transition_rates(contests, pi, sigma):
    return TransitionRates(comparison_rates(contests, pi), correction_rates(pi, sigma), sigma)


def _power_stationary(Q, start, max_iters, step_tol, residual_tol=None):
    """Power-iterate the uniformized chain toward its stationary vector.

    Returns (pi, iterations, balance residual, converged). A teleport
    rate keeps the chain irreducible; the uniformization constant is
    1.05 times the largest exit rate. ``residual_tol=None`` stops on the
    successive-iterate criterion alone.
    """
    n = Q.shape[0]
    if n == 1:
        return np.ones(1), 0, 0.0, True
    Q = Q + _TELEPORT
    np.fill_diagonal(Q, 0.0)
    Q[np.diag_indices_from(Q)] = -Q.sum(axis=1)
    lam = 1.05 * float(np.abs(np.diag(Q)).max())
    if lam <= 0.0:
        pi = start / start.sum()
        return pi, 0, 0.0, True
    P = np.eye(n) + Q / lam
    pi = start / start.sum()
    for it in range(1, max_iters + 1):
        new = pi @ P
        new_sum = new.sum()
        assert new_sum > 0
        new = new / new_sum
        step = float(np.abs(new - pi).max())
        pi = new
        if step <= step_tol:
            if residual_tol is None:
                return pi, it, float(np.abs(pi @ Q).max()), True
            residual = float(np.abs(pi @ Q).max())
            if residual <= residual_tol:
                return pi, it, residual, True
    return pi, max_iters, float(np.abs(pi @ Q).max()), False


def steady_state(rates, max_iters=20_000, tol=1e-10, start=None):
    """Stationary distribution of a rate matrix or ``TransitionRates``.

    Accepts a nonnegative off-diagonal rate matrix (diagonal ignored)
    and returns the probability vector with balance residual
    ``max |pi @ Q| <= tol``. Raises ``SolverError`` on non-convergence,
    carrying the last residual.
    """
    if isinstance(rates, TransitionRates):
        Q = rates.generator()
    else:
        Q = np.array(rates, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"rate matrix must be square, got shape {Q.shape}")
        off = Q.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0):
            raise ValueError("off-diagonal rates must be nonnegative")
        Q = off
        Q[np.diag_indices_from(Q)] = -Q.sum(axis=1)
    n = Q.shape[0]
    start = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=np.float64)
    pi, iters, residual, converged = _power_stationary(
        Q, start, max_iters, step_tol=tol / max(1.0, np.abs(np.diag(Q)).max()), residual_tol=tol
    )
    if not converged:
        raise SolverError(
            f"steady state did not reach balance residual {tol:g} in {iters} iterations "
            f"(last residual {residual:g})",
            diagnostics={"residual": residual, "iterations": iters},
        )
    return pi


def stationarity_residual(contests, pi, sigma):
    """Scaled first-order residual of the score subproblem.

    Component i is pi_i times the subproblem gradient: the weighted
    at-risk shares i carries across contests, minus its win count, plus
    pi_i * sigma_i. All components vanish exactly at the optimum.
    """
    pi = np.asarray(pi, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        denom = _contest_denominators(contests, pi)
        share = np.bincount(
            contests.members,
            weights=contests.slot_weights() / denom[contests.contest_id],
            minlength=contests.n_states,
        )
        return pi * share - contests.win_counts() + pi * sigma


def subproblem_value(contests, pi, target, u, rho):
    """Objective of the score subproblem at pi.

    Contest loss plus the dual coupling and the scaled I-divergence from
    the target scores. ``rho`` may be a scalar or a per-state vector.
    This is the quantity whose stationary points the solver chain
    encodes. Returns +inf for iterates outside the domain (overflowed
    or degenerate risk sums) so callers can reject them.
    """
    pi = np.maximum(np.asarray(pi, dtype=np.float64), _PI_FLOOR)
    w = contests.slot_weights()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        denom = np.bincount(
            contests.contest_id,
            weights=w * pi[contests.members],
            minlength=contests.n_contests,
        )
        if not np.all(np.isfinite(denom)) or np.any(denom <= 0.0):
            return np.inf
        winner_slots = contests.members == contests.winners[contests.contest_id]
        win_w = np.ones(contests.n_contests)
        win_w[contests.contest_id[winner_slots]] = w[winner_slots]
        loss = float(
            np.sum(np.log(denom)) - np.sum(np.log(win_w * pi[contests.winners]))
        )
        div = float(np.sum(rho * (pi * np.log(pi / target) - pi + target)))
        value = loss + float(u @ (pi - target)) + div
    return value if np.isfinite(value) else np.inf


_TRUST_RADIUS = 2.0  # log-space box half-width per surrogate sweep


def _surrogate_sweep(contests, pi, target, u, rho, z_lo, z_hi, radius=_TRUST_RADIUS):
    """Box-constrained minimizer of the tangent surrogate anchored at pi.

    Replacing each contest's log risk sum by its tangent at the current
    scores leaves a sum of independent one-dimensional strictly convex
    problems, one per state: with share rate q_i, win count m_i and
    c_i = q_i + u_i, the update solves

        c_i + rho * log(pi_i / target_i) - m_i / pi_i = 0

    clipped to a log-space box of half-width ``radius`` around the
    current point intersected with [z_lo, z_hi] (the objective is
    nonconvex with flat valleys along collapsing coordinates; bounded
    moves keep the iteration in the basin the caller started it in).
    States that never win have a closed form; winners are solved by
    Newton on the increasing concave form c + rho (z - log target) -
    m e^{-z} in z = log pi, which converges monotonically from the left
    of the root. The sweep never increases the subproblem objective,
    and box-interior fixed points are exactly the stationary points of
    the solver chain.
    """
    denom = _contest_denominators(contests, pi)
    q = np.bincount(
        contests.members,
        weights=contests.slot_weights() / denom[contests.contest_id],
        minlength=contests.n_states,
    )
    m = contests.win_counts()
    c = q + u
    rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), c.shape)
    log_t = np.log(target)
    z = log_t - c / rho
    heavy = m > 0
    z0 = np.clip(np.log(np.maximum(pi, _PI_FLOOR)), -690.0, 690.0)
    if np.any(heavy):
        zh = z0[heavy]
        ch, mh, th, rh = c[heavy], m[heavy], log_t[heavy], rho[heavy]
        scale = rh + np.abs(ch) + mh
        for _ in range(80):
            gap = ch + rh * (zh - th) - mh * np.exp(-zh)
            if np.all(np.abs(gap) <= 1e-13 * scale):
                break
            zh = np.clip(zh - gap / (rh + mh * np.exp(-zh)), -690.0, 690.0)
        z[heavy] = zh
    z = np.clip(z, np.maximum(z0 - radius, z_lo), np.minimum(z0 + radius, z_hi))
    return np.maximum(np.exp(np.clip(z, -690.0, 690.0)), _PI_FLOOR)


# Dense chains above this state count are skipped inside the subproblem
# solver (the surrogate sweep needs no matrix); steady_state still
# accepts any size the caller can afford to materialize.
_SSD_STATE_LIMIT = 4096


def _boxed_residual(resid, z, z_lo, z_hi, slack=1e-9):
    """Projected stationarity residual under log-space box constraints.

    At an active lower bound only moves up are feasible, so a positive
    gradient component is optimal there (and symmetrically at the upper
    bound); the residual keeps only the infeasible-direction part.
    """
    out = np.abs(resid)
    at_lo = z <= z_lo + slack
    at_hi = z >= z_hi - slack
    out[at_lo] = np.maximum(0.0, -resid[at_lo])
    out[at_hi] = np.maximum(0.0, resid[at_hi])
    return float(out.max()) if out.size else 0.0


def solve_scores(
    contests,
    target,
    u,
    rho,
    pi0=None,
    max_outer=300,
    max_power=200,
    power_tol=1e-10,
    tol=1e-9,
    max_log_shift=None,
    max_move=None,
    raise_on_failure=True,
):
    """Steady-state iteration with descent safeguards for the score subproblem.

    Each round rebuilds the chain at the current scores, takes its
    steady state (power method, warm-started) and recovers the scale
    along the ray by the closed-form one-dimensional minimizer; the move
    is kept only if it lowers the subproblem objective. The plain
    steady-state recursion shares its fixed points with the objective's
    stationary points but can spiral away from them, so each round ends
    with a tangent-surrogate sweep, which never increases the objective
    and has the same fixed points. Monotone descent also bars collapse
    onto the boundary, where anchors make the objective blow up.

    ``max_log_shift`` restricts iterates to |log(pi/target)| below the
    given bound; ``max_move`` additionally restricts the whole solve to
    |log(pi/pi0)| below the bound, turning the call into a proximal
    step from the warm start. The alternating solver uses both to keep
    transient dual updates bounded; the restrictions are inactive at
    its fixed point, where pi equals the predictor scores exactly and
    stops moving between rounds. Convergence is declared when the
    projected stationarity residual (the scaled gradient with
    infeasible directions masked at active bounds) falls below ``tol``;
    for interior solutions this is the plain scaled stationarity
    residual.

    Returns (pi, info) where info reports rounds, power iterations per
    round, the final residual and the number of bound-clamped scores.
    """
    target = check_positive_scores(target)
    n = contests.n_states
    u = np.zeros(n) if u is None else np.asarray(u, dtype=np.float64)
    pi = target.copy() if pi0 is None else np.maximum(np.asarray(pi0, np.float64), _PI_FLOOR)
    log_t = np.log(target)
    shift = np.inf if max_log_shift is None else float(max_log_shift)
    z_lo = np.maximum(log_t - shift, -690.0)
    z_hi = np.minimum(log_t + shift, 690.0)
    if max_move is not None:
        z_start = np.clip(np.log(pi), -690.0, 690.0)
        move_lo, move_hi = z_start - max_move, z_start + max_move
        z_lo = np.maximum(z_lo, move_lo)
        z_hi = np.minimum(z_hi, move_hi)
        # Warm starts farther than the shift bound from the target keep
        # the move box, walking toward the target over repeated calls.
        bad = z_lo > z_hi
        z_lo[bad] = move_lo[bad]
        z_hi[bad] = move_hi[bad]
    pi = np.exp(np.clip(np.log(pi), z_lo, z_hi))
    use_chain = n <= _SSD_STATE_LIMIT and max_power > 0
    power_iters = []

    def projected_residual(pi):
        resid = stationarity_residual(contests, pi, penalty_gradient(pi, target, u, rho))
        return _boxed_residual(resid, np.log(pi), z_lo, z_hi)

    value = subproblem_value(contests, pi, target, u, rho)
    residual = projected_residual(pi)
    converged = residual <= tol
    rounds = 0
    while not converged and rounds < max_outer:
        rounds += 1
        if use_chain:
            rates = transition_rates(contests, pi, penalty_gradient(pi, target, u, rho))
            shape, iters, _, _ = _power_stationary(rates.generator(), pi, max_power, power_tol)
            power_iters.append(iters)
            shape = np.maximum(shape, _PI_FLOOR)
            # Likelihood terms are scale-free, so the optimal scale along
            # the ray solves u@p * s + sum(rho (s p log(s p / target) - s p)).
            rho_mass = float(np.sum(rho * shape))
            log_scale = (-float(u @ shape) - float(np.sum(rho * shape * np.log(shape / target)))) / rho_mass
            log_cand = np.clip(np.log(shape) + np.clip(log_scale, -600, 600), z_lo, z_hi)
            cand = np.maximum(np.exp(log_cand), _PI_FLOOR)
            move = float(np.abs(np.log(cand) - np.log(pi)).max())
            cand_value = subproblem_value(contests, cand, target, u, rho)
            if cand_value < value and move <= 3.0 * _TRUST_RADIUS:
                pi, value = cand, cand_value
        pi = _surrogate_sweep(contests, pi, target, u, rho, z_lo, z_hi)
        value = subproblem_value(contests, pi, target, u, rho)
        residual = projected_residual(pi)
        converged = residual <= tol
    z = np.log(pi)
    info = {
        "rounds": rounds,
        "power_iters": power_iters,
        "residual": residual,
        "converged": converged,
        "box_active": int(np.sum((z <= z_lo + 1e-9) | (z >= z_hi - 1e-9))) if np.isfinite(shift) else 0,
    }
    if not converged and raise_on_failure:
        raise SolverError(
            f"score subproblem stalled at stationarity residual {residual:g} "
            f"(target {tol:g}) after {rounds} rounds",
            diagnostics=info,
        )
    return pi, info


def iterative_spectral_ranking(
    ds,
    W,
    target,
    u=None,
    rho=1.0,
    anchors="events",
    **kwargs,
):
    """Survival-facing wrapper around ``solve_scores``."""
    contests = survival_contests(ds, W, anchors)
    return solve_scores(contests, target, u, rho, **kwargs)


# ---------------------------------------------------------------------------
# Alternating solver


@dataclass
class AdmmState:
    """Per-round diagnostics of the alternating solver."""

    outer_iter: int
    nll: float
    primal_residual: float
    dual_residual: float
    power_iters: int


@dataclass
class AdmmResult:
    theta: np.ndarray
    pi: np.ndarray
    diagnostics: list
    converged: bool
    # Chain state of the final score subproblem, for residual audits.
    # rho is the adapted per-sample penalty of that final solve.
    final_u: np.ndarray = None
    final_target: np.ndarray = None
    contests: Contests = None
    rho: np.ndarray = 1.0

    @property
    def final_sigma(self):
        return penalty_gradient(self.pi, self.final_target, self.final_u, self.rho)


def admm_fit(
    ds,
    W,
    predictor,
    rho=1.0,
    outer_iters=300,
    power_iters=200,
    fit_epochs=200,
    tol=1e-6,
    seed=0,
    censored_anchors=False,
    isr_rounds=300,
    isr_tol=1e-10,
    score_box=3.0,
    pi_step=1.0,
    dual_relax=0.5,
    features=None,
    contests=None,
    progress=None,
    refit=None,
):
    """Alternating spectral fit of a score predictor.

    Rounds alternate (1) the chain fixed point for the scores pi against
    the current predictor targets, (2) a relaxed dual ascent step on the
    coupling, u += dual_relax * rho_i * (pi - target) / max(pi, target),
    and (3) a max-entropy refit of the predictor toward pi. Stops when
    the primal residual ``||pi - scores||_2 / sqrt(n)`` falls below
    ``tol``; raises ``SolverError`` if it instead grows tenfold from its
    best value.

    Three stabilizers tame the splitting, which in its plain block-exact
    form oscillates (the dual recursion per coordinate has local slope
    1 - pi_i/rho, unstable wherever scores exceed the penalty):

    * the dual step is measured in the divergence geometry, dividing the
      residual by max(pi, target) so each coordinate's update is a log
      ratio rather than an absolute gap, and uses the residual the score
      subproblem was actually solved against (the predictor refit would
      otherwise re-absorb the gap before the dual could learn it);
    * the penalty is adapted per coordinate, rho_i = max(rho, 2 |u_i|),
      which keeps the predictor refit convex for log-linear models and
      the dual recursion contractive at every score scale; the fixed
      point does not depend on rho, so adaptation changes the path, not
      the answer;
    * score updates are trust-boxed (``score_box`` around the predictor
      targets, ``pi_step`` per round), inactive at the fixed point.

    ``censored_anchors=True`` lets censored samples anchor contests in
    the score subproblem (event-indicator regularization); the reported
    loss always uses the true indicators. ``contests``/``features``
    override the survival construction for grouped data. ``refit``
    replaces the default predictor update with
    ``refit(predictor, X, pi, u, rho, fit_cfg, move_cap)`` for models
    fitted in parameter blocks.

    Returns an ``AdmmResult``; ``theta`` is the predictor's flat
    parameter vector.
    """
    if contests is None:
        contests = survival_contests(ds, W, "all" if censored_anchors else "events")
    X = ds.features if features is None else np.asarray(features, dtype=np.float64)
    n = contests.n_states
    if X.shape[0] != n:
        raise ValueError(f"feature rows ({X.shape[0]}) must match states ({n})")

    report_nll = _make_nll_reporter(ds, W, contests)
    fit_cfg = FitConfig(epochs=fit_epochs, tol=1e-12, seed=seed)
    pi = np.full(n, 1.0 / n)
    u = np.zeros(n)
    rho_vec = np.full(n, float(rho))
    diagnostics = []
    best_primal = np.inf
    converged = False
    final_u = u.copy()
    final_rho = rho_vec.copy()
    target = predictor.scores(X)
    primal = 1.0
    for it in range(1, outer_iters + 1):
        target = predictor.scores(X)
        final_u = u.copy()
        final_rho = rho_vec.copy()
        # Inexact inner solves: early rounds only need the subproblem
        # roughly, the tolerance tightens with the primal residual.
        round_tol = min(1e-4, max(isr_tol, 0.05 * primal))
        pi, isr_info = solve_scores(
            contests,
            target,
            u,
            rho_vec,
            pi0=pi,
            max_outer=isr_rounds,
            max_power=power_iters,
            tol=round_tol,
            max_log_shift=score_box,
            max_move=None if it == 1 else pi_step,
            raise_on_failure=False,
        )
        u = u + dual_relax * rho_vec * (pi - target) / np.maximum(np.maximum(pi, target), _PI_FLOOR)
        if refit is None:
            max_entropy_fit(predictor, X, pi, u, rho_vec, fit_cfg, move_cap=pi_step)
        else:
            refit(predictor, X, pi, u, rho_vec, fit_cfg, pi_step)
        scores = predictor.scores(X)
        primal = float(np.linalg.norm(pi - scores) / np.sqrt(n))
        dual = float(np.linalg.norm(rho_vec * (scores - target)) / np.sqrt(n))
        rho_vec = np.maximum(float(rho), 2.0 * np.abs(u))
        state = AdmmState(it, report_nll(scores), primal, dual, sum(isr_info["power_iters"]))
        diagnostics.append(state)
        if progress is not None:
            progress(state)
        if primal <= tol:
            converged = True
            break
        # Growth below 1000x tol is numerical churn at the convergence
        # floor, not divergence.
        if primal > 10.0 * best_primal and primal > 1e3 * tol and it > 10:
            raise SolverError(
                f"alternating solver diverged: primal residual {primal:g} is more than "
                f"10x its best value {best_primal:g} at round {it}",
                diagnostics=diagnostics,
            )
        best_primal = min(best_primal, primal)
    return AdmmResult(
        theta=predictor.get_weights(),
        pi=pi,
        diagnostics=diagnostics,
        converged=converged,
        final_u=final_u,
        final_target=target,
        contests=contests,
        rho=final_rho,
    )


def _make_nll_reporter(ds, W, contests):
    """True-indicator loss reporter matching the contest structure."""
    if ds is not None and contests.n_states == ds.n:
        return lambda scores: nll(ds, W, scores)

    # Grouped data: mean anchor loss over the contests themselves.
    def report(scores):
        denom = np.bincount(
            contests.contest_id,
            weights=contests.slot_weights() * scores[contests.members],
            minlength=contests.n_contests,
        )
        w = contests.slot_weights()
        winner_slots = contests.members == contests.winners[contests.contest_id]
        winner_w = np.ones(contests.n_contests)
        winner_w[contests.contest_id[winner_slots]] = w[winner_slots]
        terms = np.log(denom) - np.log(winner_w * scores[contests.winners])
        return float(terms.mean()) if terms.shape[0] else 0.0

    return report
