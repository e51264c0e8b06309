"""Partial likelihood, its gradient, mini-batches, and the bias analyzer."""

import numpy as np
import pytest

from specsurv import (
    LinearExp,
    bias_closed_form,
    bias_empirical,
    nll,
    nll_gradient_linear,
    nll_minibatch,
)

from conftest import make_ds


def linear_scores(ds, theta):
    return np.exp(ds.features @ theta)


# ---------------------------------------------------------------------------
# Value fixtures


def test_nll_two_sample_hand_value():
    # Only the first sample anchors: log((s0+s1)/s0) with equal scores.
    ds = make_ds([1.0, 2.0], [1, 0])
    value = nll(ds, None, np.ones(2))
    assert value == pytest.approx(np.log(2.0) / 2.0, rel=1e-12)


def test_nll_no_events_is_zero():
    ds = make_ds([1.0, 2.0], [0, 0])
    assert nll(ds, None, np.ones(2)) == 0.0


def test_nll_three_sample_hand_value(ds_three):
    # Anchors at t=1 (three at risk) and t=3 (one at risk).
    value = nll(ds_three, None, np.ones(3))
    assert value == pytest.approx(np.log(3.0) / 3.0, rel=1e-12)
    ds_all = make_ds([1.0, 2.0, 3.0], [1, 1, 1])
    value_all = nll(ds_all, None, np.ones(3))
    assert value_all == pytest.approx((np.log(3.0) + np.log(2.0)) / 3.0, rel=1e-12)


def test_nll_tied_anchor_wins_own_contest():
    # Closed risk sets with index tie-break: each tied anchor still sees
    # both tied samples in its denominator.
    ds = make_ds([1.0, 1.0], [1, 1])
    value = nll(ds, None, np.ones(2))
    assert value == pytest.approx(np.log(2.0), rel=1e-12)


def test_nll_score_scaling_invariance():
    rng = np.random.default_rng(0)
    ds = make_ds(rng.uniform(0.5, 3.0, 12), rng.integers(0, 2, 12))
    scores = rng.uniform(0.5, 2.0, 12)
    base = nll(ds, None, scores)
    scaled = nll(ds, None, np.exp(1.7) * scores)
    assert scaled == pytest.approx(base, abs=1e-10)


def test_nll_weighted_unit_matches_plain():
    rng = np.random.default_rng(1)
    ds = make_ds(rng.uniform(0.5, 3.0, 10), rng.integers(0, 2, 10))
    scores = rng.uniform(0.5, 2.0, 10)
    assert nll(ds, np.ones((10, 10)), scores) == pytest.approx(
        nll(ds, None, scores), abs=1e-12
    )


def test_nll_rejects_nonpositive_scores(ds_three):
    with pytest.raises(ValueError):
        nll(ds_three, None, np.array([1.0, -1.0, 1.0]))


# ---------------------------------------------------------------------------
# Gradient


def test_gradient_hand_value():
    # d=1, x = [1, 0], theta = 0: gradient is (1/2)(1/2 - 1) = -1/4.
    ds = make_ds([1.0, 2.0], [1, 0], X=[[1.0], [0.0]])
    report = nll_gradient_linear(ds, np.zeros(1))
    assert report.gradient[0] == pytest.approx(-0.25, rel=1e-12)
    assert report.value == pytest.approx(np.log(2.0) / 2.0, rel=1e-12)


def test_gradient_identical_features_is_zero():
    ds = make_ds([1.0, 2.0, 3.0], [1, 1, 0], X=[[0.7], [0.7], [0.7]])
    report = nll_gradient_linear(ds, np.array([0.3]))
    assert np.max(np.abs(report.gradient)) <= 1e-14


def test_gradient_value_matches_nll():
    rng = np.random.default_rng(2)
    ds = make_ds(
        rng.uniform(0.5, 3.0, 15),
        rng.integers(0, 2, 15),
        X=rng.standard_normal((15, 3)),
    )
    theta = rng.standard_normal(3) * 0.4
    report = nll_gradient_linear(ds, theta)
    assert report.value == pytest.approx(
        nll(ds, None, linear_scores(ds, theta)), abs=1e-12
    )
    assert report.per_sample_terms.shape == (15,)
    assert report.value == pytest.approx(report.per_sample_terms.mean(), abs=1e-12)


def test_gradient_matches_finite_differences():
    h = 1e-5
    worst = 0.0
    for k in range(20):
        rng = np.random.default_rng(300 + k)
        n = int(rng.integers(5, 21))
        d = int(rng.integers(1, 6))
        ds = make_ds(
            rng.uniform(0.3, 4.0, n),
            rng.integers(0, 2, n),
            X=rng.standard_normal((n, d)),
        )
        theta = 0.5 * rng.standard_normal(d)
        grad = nll_gradient_linear(ds, theta).gradient
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            fd = (
                nll(ds, None, linear_scores(ds, theta + e))
                - nll(ds, None, linear_scores(ds, theta - e))
            ) / (2.0 * h)
            worst = max(worst, abs(fd - grad[j]))
    assert worst <= 1e-6


# ---------------------------------------------------------------------------
# Mini-batch loss


def test_minibatch_full_batch_matches_nll():
    rng = np.random.default_rng(3)
    ds = make_ds(
        rng.uniform(0.5, 3.0, 9),
        rng.integers(0, 2, 9),
        X=rng.standard_normal((9, 2)),
    )
    theta = np.array([0.2, -0.1])
    full = nll_minibatch(ds, theta, np.arange(9))
    assert full == pytest.approx(nll(ds, None, linear_scores(ds, theta)), abs=1e-12)


def test_minibatch_singleton_latest_event_is_zero():
    ds = make_ds([1.0, 2.0, 3.0], [1, 1, 1], X=[[0.1], [0.2], [0.3]])
    assert nll_minibatch(ds, np.array([0.5]), np.array([2])) == 0.0


def test_minibatch_hand_value():
    # Batch {0, 2} with theta = ln 2: anchor 0 sees scores {2, 1}.
    ds = make_ds([1.0, 2.0, 3.0], [1, 1, 1], X=[[1.0], [0.0], [0.0]])
    value = nll_minibatch(ds, np.array([np.log(2.0)]), np.array([0, 2]))
    assert value == pytest.approx(np.log(1.5) / 2.0, rel=1e-12)


def test_minibatch_rejects_duplicate_indices(ds_three):
    with pytest.raises(ValueError):
        nll_minibatch(ds_three, np.zeros(1), np.array([0, 0]))


def test_minibatch_suffix_batches_recover_full_terms():
    # Batches that are suffixes in time order keep every anchor's full
    # risk set, so the batch loss is exactly the mean of the full
    # per-sample terms over the batch.
    rng = np.random.default_rng(4)
    n = 8
    ds = make_ds(
        np.sort(rng.uniform(0.5, 3.0, n)),
        rng.integers(0, 2, n),
        X=rng.standard_normal((n, 2)),
    )
    theta = np.array([0.3, -0.2])
    terms = nll_gradient_linear(ds, theta).per_sample_terms
    for start in range(n - 1):
        batch = np.arange(start, n)
        expected = terms[batch].mean()
        assert nll_minibatch(ds, theta, batch) == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# Mini-batch bias


@pytest.fixture(scope="module")
def bias_fixture():
    from specsurv import generate_linear_cox

    ds, theta = generate_linear_cox(10, 2, censor_frac=0.2, seed=17)
    return ds, theta


def test_bias_full_batch_is_exactly_zero(bias_fixture):
    ds, theta = bias_fixture
    assert bias_closed_form(ds, theta, ds.n) == 0.0
    mean, se = bias_empirical(ds, theta, ds.n, draws=50, seed=0)
    assert mean == 0.0
    assert se == 0.0


def test_bias_single_sample_dataset():
    ds = make_ds([1.0], [1], X=[[0.5]])
    assert bias_closed_form(ds, np.zeros(1), 1) == 0.0


def test_bias_closed_form_matches_enumeration_mc(bias_fixture):
    # Exhaustive enumeration against an independent Monte-Carlo pass.
    ds, theta = bias_fixture
    for b in (2, 5):
        closed = bias_closed_form(ds, theta, b)
        mean, se = bias_empirical(ds, theta, b, draws=20_000, seed=4)
        assert abs(closed - mean) <= 3.0 * se


def test_bias_is_deterministic(bias_fixture):
    ds, theta = bias_fixture
    a = bias_closed_form(ds, theta, 3)
    b = bias_closed_form(ds, theta, 3)
    assert a == b
    m1 = bias_empirical(ds, theta, 3, draws=500, seed=7)
    m2 = bias_empirical(ds, theta, 3, draws=500, seed=7)
    assert m1 == m2


def test_bias_monte_carlo_branch_agrees_with_enumeration(bias_fixture):
    # Small cap forces the sampled branch; same estimand, looser noise.
    ds, theta = bias_fixture
    b = 5
    exact = bias_closed_form(ds, theta, b, n_enum_or_mc=1_000_000)
    sampled = bias_closed_form(ds, theta, b, n_enum_or_mc=50, seed=0)
    assert abs(exact - sampled) <= 0.2
    assert sampled == bias_closed_form(ds, theta, b, n_enum_or_mc=50, seed=0)


def test_bias_rejects_bad_batch_size(bias_fixture):
    ds, theta = bias_fixture
    with pytest.raises(ValueError):
        bias_closed_form(ds, theta, 0)
    with pytest.raises(ValueError):
        bias_closed_form(ds, theta, ds.n + 1)


def test_bias_thread_count_does_not_change_values(bias_fixture, monkeypatch):
    ds, theta = bias_fixture
    monkeypatch.setenv("SPECSURV_THREADS", "1")
    one = bias_empirical(ds, theta, 4, draws=2_000, seed=9)
    monkeypatch.setenv("SPECSURV_THREADS", "2")
    two = bias_empirical(ds, theta, 4, draws=2_000, seed=9)
    assert one == two
