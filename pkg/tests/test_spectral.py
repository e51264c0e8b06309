"""Contest structure, chain rates, steady states, and the alternating solver."""

import numpy as np
import pytest

from specsurv import (
    LinearExp,
    SolverError,
    SurvivalDataset,
    admm_fit,
    comparison_rates,
    correction_rates,
    generate_linear_cox,
    iterative_spectral_ranking,
    penalty_gradient,
    solve_scores,
    stationarity_residual,
    steady_state,
    survival_contests,
    transition_rates,
    winner_loser_sets,
)

from conftest import make_ds


@pytest.fixture(scope="module")
def tight_solve():
    """Small all-event subproblem solved to 1e-11, with its chain state."""
    rng = np.random.default_rng(11)
    X = rng.standard_normal((5, 2))
    ds = SurvivalDataset(X, rng.uniform(0.5, 3.0, 5), np.ones(5, dtype=bool))
    target = rng.uniform(0.5, 2.0, 5)
    u = rng.normal(0.0, 0.3, 5)
    contests = survival_contests(ds, None, "events")
    pi, info = solve_scores(contests, target, u, 1.0, tol=1e-11)
    assert info["converged"]
    return contests, pi, target, u


# ---------------------------------------------------------------------------
# Winner/loser sets


def test_winner_loser_distinct_times():
    ds = make_ds([1.0, 2.0, 3.0], [1, 1, 1])
    wins, losses = winner_loser_sets(ds)
    assert wins[0].tolist() == [0]
    assert losses[0].tolist() == []
    assert wins[2].tolist() == [2]
    assert sorted(losses[2].tolist()) == [0, 1]


def test_winner_loser_censored_never_wins():
    ds = make_ds([1.0, 2.0, 3.0], [1, 0, 1])
    wins, losses = winner_loser_sets(ds)
    assert wins[1].tolist() == []
    assert sorted(losses[1].tolist()) == [0]


def test_winner_loser_single_sample():
    wins, losses = winner_loser_sets(make_ds([1.0], [1]))
    assert wins[0].tolist() == [0]
    assert losses[0].tolist() == []


def test_winner_loser_tie_both_anchor():
    # Tied events under the closed convention: each anchors its own
    # contest and wins it; the other tied sample sits among the losers.
    ds = make_ds([1.0, 1.0], [1, 1])
    wins, losses = winner_loser_sets(ds)
    assert wins[1].tolist() == [1]
    assert losses[1].tolist() == [0]
    assert wins[0].tolist() == [0]
    assert losses[0].tolist() == [1]


def test_contests_censored_anchor_mode():
    ds = make_ds([1.0, 2.0], [1, 0])
    events_only = survival_contests(ds, None, "events")
    everyone = survival_contests(ds, None, "all")
    assert events_only.n_contests == 1
    assert everyone.n_contests == 2
    with pytest.raises(ValueError):
        survival_contests(ds, None, "some")


# ---------------------------------------------------------------------------
# Penalty pressure


def test_penalty_gradient_fixtures():
    target = np.array([0.5, 2.0])
    assert np.allclose(penalty_gradient(target, target, np.zeros(2), 1.0), 0.0)
    v = np.array([0.3, -0.7])
    assert np.allclose(penalty_gradient(target, target, v, 1.0), v)
    assert np.allclose(
        penalty_gradient(np.e * target, target, np.zeros(2), 1.0), 1.0
    )


# ---------------------------------------------------------------------------
# Chain rates


def test_comparison_rates_hand_fixture():
    ds = make_ds([1.0, 2.0], [1, 1])
    contests = survival_contests(ds, None, "events")
    mu = comparison_rates(contests, np.ones(2))
    assert mu[1, 0] == pytest.approx(0.5, rel=1e-12)
    assert mu[0, 1] == 0.0
    assert mu[0, 0] == 0.0 and mu[1, 1] == 0.0


def test_comparison_rates_scale_inverse():
    ds = make_ds([1.0, 2.0, 3.0, 4.0], [1, 1, 0, 1])
    contests = survival_contests(ds, None, "events")
    pi = np.array([0.5, 1.5, 1.0, 2.0])
    assert np.allclose(
        comparison_rates(contests, 2.0 * pi), 0.5 * comparison_rates(contests, pi)
    )


def test_correction_rates_fixtures():
    pi = np.ones(2)
    assert np.all(correction_rates(pi, np.zeros(2)) == 0.0)
    assert np.all(correction_rates(pi, np.array([1.0, 2.0])) == 0.0)
    delta = correction_rates(pi, np.array([1.0, -2.0]))
    assert delta[0, 1] == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert delta[1, 0] == 0.0


def test_correction_rates_sign_structure():
    rng = np.random.default_rng(6)
    pi = rng.uniform(0.2, 2.0, 6)
    sigma = rng.normal(0.0, 1.0, 6)
    delta = correction_rates(pi, sigma)
    for j in range(6):
        for i in range(6):
            if i == j:
                continue
            flows = delta[j, i] > 0
            assert flows == (sigma[j] > 0 and sigma[i] < 0)


def test_generator_rows_sum_to_zero():
    ds = make_ds([1.0, 2.0, 3.0], [1, 1, 1])
    contests = survival_contests(ds, None, "events")
    pi = np.array([0.8, 1.1, 1.3])
    sigma = np.array([0.2, -0.4, 0.1])
    Q = transition_rates(contests, pi, sigma).generator()
    assert np.allclose(Q.sum(axis=1), 0.0, atol=1e-14)
    off = Q - np.diag(np.diag(Q))
    assert np.all(off >= 0)


# ---------------------------------------------------------------------------
# Steady state


def test_steady_state_two_state_hand_value():
    # Rates 0->1 at 1, 1->0 at 2: stationary mass (2/3, 1/3).
    pi = steady_state(np.array([[0.0, 1.0], [2.0, 0.0]]), tol=1e-12)
    assert np.max(np.abs(pi - np.array([2 / 3, 1 / 3]))) <= 1e-8


def test_steady_state_symmetric_chain_is_uniform():
    Q = np.array([[0.0, 0.7, 0.7], [0.7, 0.0, 0.7], [0.7, 0.7, 0.0]])
    pi = steady_state(Q, tol=1e-12)
    assert np.max(np.abs(pi - 1 / 3)) <= 1e-8


def test_steady_state_single_state():
    assert steady_state(np.zeros((1, 1))).tolist() == [1.0]


def test_steady_state_matches_linear_solve():
    worst = 0.0
    for k in range(50):
        rng = np.random.default_rng(100 + k)
        n = int(rng.integers(2, 21))
        Q = rng.uniform(0.05, 1.0, (n, n))
        np.fill_diagonal(Q, 0.0)
        pi = steady_state(Q, tol=1e-12)
        gen = Q.copy()
        gen[np.diag_indices(n)] = -gen.sum(axis=1)
        A = np.vstack([gen.T, np.ones(n)])
        b = np.concatenate([np.zeros(n), [1.0]])
        ref = np.linalg.lstsq(A, b, rcond=None)[0]
        worst = max(worst, float(np.abs(pi - ref).max()))
    assert worst <= 1e-6


def test_steady_state_restart_uniqueness():
    rng = np.random.default_rng(42)
    Q = rng.uniform(0.05, 1.0, (8, 8))
    np.fill_diagonal(Q, 0.0)
    tol = 1e-12
    a = steady_state(Q, tol=tol)
    start = rng.uniform(0.01, 1.0, 8)
    b = steady_state(Q, tol=tol, start=start / start.sum())
    assert np.max(np.abs(a - b)) <= 10 * tol * Q.sum()


def test_steady_state_validates_input():
    with pytest.raises(ValueError, match="square"):
        steady_state(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="nonnegative"):
        steady_state(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_steady_state_nonconvergence_error():
    rng = np.random.default_rng(1)
    Q = rng.uniform(0.05, 1.0, (6, 6))
    with pytest.raises(SolverError) as exc_info:
        steady_state(Q, max_iters=1, tol=1e-14)
    assert "residual" in exc_info.value.diagnostics


def test_steady_state_accepts_transition_rates(tight_solve):
    contests, pi, target, u = tight_solve
    sigma = penalty_gradient(pi, target, u, 1.0)
    rates = transition_rates(contests, pi, sigma)
    out = steady_state(rates, tol=1e-12)
    assert out.shape == (5,)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Score subproblem


def test_solve_scores_singleton_returns_target():
    ds = make_ds([1.0], [1])
    contests = survival_contests(ds, None, "events")
    pi, info = solve_scores(contests, np.array([0.7]), np.zeros(1), 1.0)
    assert pi.tolist() == [0.7]
    assert info["converged"]


def test_solve_scores_chain_is_balanced_at_solution(tight_solve):
    # The fitted scores are the stationary point of their own chain:
    # both the scaled gradient and the global-balance residual vanish.
    contests, pi, target, u = tight_solve
    sigma = penalty_gradient(pi, target, u, 1.0)
    resid = stationarity_residual(contests, pi, sigma)
    assert np.max(np.abs(resid)) <= 1e-9
    Q = transition_rates(contests, pi, sigma).generator()
    assert np.max(np.abs(pi @ Q)) <= 1e-9


def test_solve_scores_matches_derivative_free_reference(tight_solve):
    # Nelder-Mead on the raw subproblem objective from the same start.
    minimize = pytest.importorskip("scipy.optimize").minimize
    from specsurv import subproblem_value

    contests, pi, target, u = tight_solve
    res = minimize(
        lambda z: subproblem_value(contests, np.exp(z), target, u, 1.0),
        np.log(target),
        method="Nelder-Mead",
        options=dict(xatol=1e-12, fatol=1e-15, maxiter=20_000, maxfev=40_000),
    )
    ref = np.exp(res.x)
    assert np.max(np.abs(pi - ref) / ref) <= 1e-3


def test_solve_scores_huge_rho_pins_target():
    ds, _ = generate_linear_cox(40, 3, censor_frac=0.25, seed=5)
    target = np.exp(0.3 * np.random.default_rng(2).standard_normal(40))
    pi, info = iterative_spectral_ranking(ds, None, target, rho=1e4)
    assert info["converged"]
    assert np.max(np.abs(pi - target) / target) <= 1e-3


def test_solve_scores_stall_raises_with_diagnostics():
    ds, _ = generate_linear_cox(30, 3, censor_frac=0.2, seed=5)
    contests = survival_contests(ds, None, "events")
    with pytest.raises(SolverError, match="stalled"):
        solve_scores(contests, np.ones(30), np.zeros(30), 1.0, max_outer=1, tol=1e-14)
    pi, info = solve_scores(
        contests,
        np.ones(30),
        np.zeros(30),
        1.0,
        max_outer=1,
        tol=1e-14,
        raise_on_failure=False,
    )
    assert not info["converged"]
    assert info["rounds"] == 1
    assert np.isfinite(info["residual"])


# ---------------------------------------------------------------------------
# Alternating solver


@pytest.fixture(scope="module")
def admm_ds():
    ds, _ = generate_linear_cox(40, 3, censor_frac=0.25, seed=0)
    return ds


def test_admm_converges_and_reports(admm_ds):
    result = admm_fit(admm_ds, None, LinearExp(3), seed=0)
    assert result.converged
    assert result.diagnostics[-1].primal_residual <= 1e-6
    assert [s.outer_iter for s in result.diagnostics] == list(
        range(1, len(result.diagnostics) + 1)
    )
    assert np.all(result.pi > 0)
    # audit surface recomputes the final pressure from its parts
    sigma = penalty_gradient(
        result.pi, result.final_target, result.final_u, result.rho
    )
    assert np.array_equal(result.final_sigma, sigma)


def test_admm_constant_weights_cancel(admm_ds):
    # Any constant weight matrix drops out of every contest ratio; a
    # power-of-two constant leaves the whole trajectory bit-identical.
    n = admm_ds.n
    r1 = admm_fit(admm_ds, np.ones((n, n)), LinearExp(3), seed=0)
    r2 = admm_fit(admm_ds, 2.0 * np.ones((n, n)), LinearExp(3), seed=0)
    assert np.array_equal(r1.theta, r2.theta)
    assert np.array_equal(r1.pi, r2.pi)
    r3 = admm_fit(admm_ds, 3.0 * np.ones((n, n)), LinearExp(3), seed=0)
    assert np.max(np.abs(r3.theta - r1.theta)) <= 1e-6


def test_admm_rho_independence(admm_ds):
    # rho shapes the path, not the fixed point.
    a = admm_fit(admm_ds, None, LinearExp(3), rho=0.5, outer_iters=600, seed=0)
    b = admm_fit(admm_ds, None, LinearExp(3), rho=5.0, outer_iters=600, seed=0)
    assert np.max(np.abs(a.theta - b.theta)) <= 1e-3


def test_admm_divergence_guard():
    ds, _ = generate_linear_cox(30, 3, censor_frac=0.2, seed=5)

    def runaway_refit(predictor, X, pi, u, rho, cfg, move_cap):
        predictor.theta[:] = predictor.theta + 1.0

    with pytest.raises(SolverError, match="diverged"):
        admm_fit(ds, None, LinearExp(3), outer_iters=100, seed=0, refit=runaway_refit)


def test_admm_warm_start_economy(admm_ds):
    # Soft check: warm-started rounds should not need more power
    # iterations than the cold first round. Logged, not asserted.
    result = admm_fit(admm_ds, None, LinearExp(3), seed=0)
    iters = [s.power_iters for s in result.diagnostics]
    tail = max(iters[1:]) if len(iters) > 1 else 0
    print(f"power iterations: round 1 {iters[0]}, max after warm start {tail}")


def test_admm_feature_row_mismatch(admm_ds):
    with pytest.raises(ValueError, match="feature rows"):
        admm_fit(admm_ds, None, LinearExp(3), features=np.zeros((3, 3)), seed=0)
