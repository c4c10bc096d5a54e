"""Monte Carlo layer: path simulation, exit times, killed expectations,
reproducibility across worker counts, and the martingale comparison."""

import math

import numpy as np
import pytest

from conefluct import (
    SimplexGrid,
    SimplexVector,
    build_V_evaluator,
    conditional_endpoint_sample,
    conditional_endpoint_samples,
    covariance_decay,
    estimate_V,
    exit_ordering_violations,
    harmonicity_residual,
    martingale_gap,
    mc_sigma2,
    simulate_path,
    simulate_paths,
    solve_poisson,
    stationary_measure,
    survival_probability,
)
from conftest import scalar_law
from oracles import enumerate_walk


@pytest.fixture(scope="module")
def ref_poisson(ref_law):
    grid = SimplexGrid(512)
    return solve_poisson(ref_law, stationary_measure(ref_law, grid))


# ---------------------------------------------------------------------------
# single-path simulation


def test_single_path_is_reproducible(ref_law, barycenter):
    p1 = simulate_path(ref_law, barycenter, 1.0, 64, np.random.default_rng(5))
    p2 = simulate_path(ref_law, barycenter, 1.0, 64, np.random.default_rng(5))
    assert np.array_equal(p1.S, p2.S)
    assert p1.tau == p2.tau
    assert p1.S[0] == 1.0


def test_deterministic_exit_time(barycenter):
    law = scalar_law((0.82, 1.0))
    path = simulate_path(law, barycenter, 1.0, 100, np.random.default_rng(0))
    expected_tau = math.ceil(1.0 / abs(math.log(0.82)))
    assert path.tau == expected_tau == 6
    assert not path.censored
    assert len(path.S) == path.tau + 1
    for n, s in enumerate(path.S):
        assert s == pytest.approx(1.0 + n * math.log(0.82), abs=1e-12)


def test_full_horizon_continues_past_exit(barycenter):
    law = scalar_law((0.82, 1.0))
    path = simulate_path(law, barycenter, 1.0, 10, np.random.default_rng(0), full_horizon=True)
    assert path.tau == 6
    assert len(path.S) == 11


def test_censoring_at_horizon(barycenter):
    law = scalar_law((1.2, 1.0))
    path = simulate_path(law, barycenter, 5.0, 50, np.random.default_rng(0))
    assert path.tau is None and path.censored


def test_batch_paths_match_shapes(ref_law, barycenter, ref_poisson):
    records = simulate_paths(ref_law, barycenter, 1.0, 32, 40, seed=9, poisson=ref_poisson)
    assert len(records) == 40
    for rec in records:
        assert rec.S.shape == (33,)
        assert rec.M.shape == (33,)
        assert rec.M[0] == pytest.approx(rec.S[0], abs=1e-12)
        if rec.tau is not None:
            assert rec.S[rec.tau] <= 0.0
            assert np.all(rec.S[1 : rec.tau] > 0.0)


def test_batch_paths_stop_at_exit(ref_law, barycenter):
    records = simulate_paths(ref_law, barycenter, 0.2, 64, 50, seed=10, stop_at_exit=True)
    exited = [r for r in records if r.tau is not None]
    assert exited, "expected at least one exit at this start level"
    for rec in exited:
        assert len(rec.S) == rec.tau + 1


# ---------------------------------------------------------------------------
# survival and killed expectations against exact enumeration


def test_survival_matches_enumeration(ref_law, barycenter):
    n_values = [1, 2, 3, 4, 5, 6]
    oracle = enumerate_walk(ref_law, barycenter.coords, 1.0, 6)
    curve = survival_probability(ref_law, barycenter, 1.0, n_values, 20000, seed=21)
    assert np.all(np.diff(curve.p_hat) <= 0.0)
    for i, n in enumerate(n_values):
        se = curve.ci_half_width[i] / 1.959963984540054
        assert curve.p_hat[i] == pytest.approx(oracle["survival"][n], abs=max(3.0 * se, 1e-12))
        assert curve.survivors[i] == round(curve.p_hat[i] * curve.paths)


def test_killed_mean_matches_enumeration(ref_law, barycenter):
    oracle = enumerate_walk(ref_law, barycenter.coords, 1.0, 6)
    est = estimate_V(ref_law, barycenter, 1.0, [2, 4, 6], 30000, seed=22)
    for i, n in enumerate([2, 4, 6]):
        assert est.estimates[i] == pytest.approx(
            oracle["killed_mean"][n], abs=3.0 * est.stderrs[i]
        )


def test_conditional_endpoints_match_enumeration(ref_law, barycenter):
    oracle = enumerate_walk(ref_law, barycenter.coords, 1.0, 6)
    samples = conditional_endpoint_samples(ref_law, barycenter, 1.0, [4, 6], 30000, seed=23)
    for n in (4, 6):
        s = samples[n]
        se = s.std(ddof=1) / math.sqrt(s.size)
        assert s.mean() == pytest.approx(oracle["scaled_mean"][n], abs=3.0 * se)
        assert np.all(s > 0.0)


def test_conditional_sample_raises_when_extinct(barycenter):
    law = scalar_law((0.8, 1.0))
    with pytest.raises(RuntimeError, match="no survivors"):
        conditional_endpoint_sample(law, barycenter, 0.5, 8, 500, seed=3)


# ---------------------------------------------------------------------------
# reproducibility across worker counts


def test_worker_count_does_not_change_results(ref_law, barycenter):
    kw = dict(n_values=[8, 16], paths=40000, seed=31)
    c1 = survival_probability(ref_law, barycenter, 1.0, workers=1, **kw)
    c3 = survival_probability(ref_law, barycenter, 1.0, workers=3, **kw)
    assert np.array_equal(c1.p_hat, c3.p_hat)
    assert np.array_equal(c1.survivors, c3.survivors)

    v1 = estimate_V(ref_law, barycenter, 1.0, [8, 16], 40000, seed=32, workers=1)
    v3 = estimate_V(ref_law, barycenter, 1.0, [8, 16], 40000, seed=32, workers=3)
    assert np.array_equal(v1.estimates, v3.estimates)

    s1 = mc_sigma2(ref_law, barycenter, 64, 40000, seed=33, workers=1)
    s3 = mc_sigma2(ref_law, barycenter, 64, 40000, seed=33, workers=3)
    assert s1 == s3

    k1 = conditional_endpoint_samples(ref_law, barycenter, 1.0, [8], 40000, seed=34, workers=1)
    k3 = conditional_endpoint_samples(ref_law, barycenter, 1.0, [8], 40000, seed=34, workers=3)
    assert np.array_equal(k1[8], k3[8])


def test_seed_is_required(ref_law, barycenter):
    with pytest.raises(ValueError, match="seed"):
        survival_probability(ref_law, barycenter, 1.0, [4], 1000, seed=None)


# ---------------------------------------------------------------------------
# variance of the additive functional


def test_mc_sigma2_scalar_closed_form(barycenter, centered_scalar_law):
    s2, se = mc_sigma2(centered_scalar_law, barycenter, 256, 20000, seed=41)
    assert se > 0.0
    assert s2 == pytest.approx(0.25, abs=3.0 * se)


def test_mc_sigma2_agrees_with_manifest(ref_law, barycenter, ref_manifest):
    s2, se = mc_sigma2(ref_law, barycenter, 1024, 20000, seed=42)
    assert s2 == pytest.approx(ref_manifest["sigma2"], abs=max(4.0 * se, 0.05 * ref_manifest["sigma2"]))


# ---------------------------------------------------------------------------
# martingale comparison


def test_martingale_bound_and_ordering(ref_law, barycenter, ref_poisson):
    records = simulate_paths(
        ref_law, barycenter, 1.0, 256, 2000, seed=51, poisson=ref_poisson
    )
    gap, violations = martingale_gap(records, ref_poisson.A, slack=ref_poisson.interp_slack)
    assert violations == 0
    assert 0.0 < gap <= ref_poisson.A + ref_poisson.interp_slack
    assert exit_ordering_violations(records, ref_poisson.A) == 0


def test_martingale_mean_is_conserved(ref_law, barycenter, ref_poisson):
    records = simulate_paths(ref_law, barycenter, 1.0, 64, 20000, seed=52, poisson=ref_poisson)
    finals = np.array([rec.M[-1] for rec in records])
    se = finals.std(ddof=1) / math.sqrt(len(finals))
    assert finals.mean() == pytest.approx(1.0, abs=4.0 * se)


# ---------------------------------------------------------------------------
# harmonic-function estimation


def test_estimate_v_converges_on_fixture(ref_law, barycenter, ref_poisson):
    est = estimate_V(
        ref_law, barycenter, 1.0, [16, 32, 64, 128, 256], 20000, seed=61, poisson=ref_poisson
    )
    assert est.converged and est.plateau_n is not None
    assert 1.0 <= est.V_hat <= 1.4
    assert est.V_stderr > 0.0
    assert "bound" in est.diagnostics


def test_estimate_v_flags_drifting_walk(barycenter):
    law = scalar_law((1.1, 0.5), (1.05, 0.5))
    est = estimate_V(law, barycenter, 1.0, [4, 8, 16, 32], 2000, seed=62)
    assert not est.converged
    assert np.all(np.diff(est.estimates) > 0.0)


def test_v_evaluator_lattice_shape(ref_law):
    evaluator = build_V_evaluator(
        ref_law,
        x_params=[0.2, 0.5, 0.8],
        a_values=[0.5, 1.0, 2.0],
        n_schedule=[8, 16, 32],
        paths=2000,
        seed=63,
    )
    assert evaluator(0.5, -1.0) == 0.0
    top = float(evaluator(0.5, 2.0))
    assert float(evaluator(0.5, 7.0)) == pytest.approx(top + 5.0, abs=1e-12)
    mid = float(evaluator(0.5, 1.0))
    assert 0.0 < mid < top


def test_harmonicity_residual_on_fixture(ref_law, barycenter):
    evaluator = build_V_evaluator(
        ref_law,
        x_params=[0.1, 0.5, 0.9],
        a_values=[0.25, 1.0, 2.5],
        n_schedule=[16, 64, 256],
        paths=8000,
        seed=64,
    )
    residual, se = harmonicity_residual(ref_law, evaluator, barycenter, 1.0, 20000, seed=65)
    assert abs(residual) <= 3.0 * se + 0.08


def test_harmonicity_warns_on_degenerate_increments(barycenter):
    law = scalar_law((0.9, 1.0))
    evaluator = lambda params, levels: np.maximum(np.asarray(levels, dtype=float), 0.0)
    with pytest.warns(RuntimeWarning, match="deterministic"):
        harmonicity_residual(law, evaluator, barycenter, 1.0, 1000, seed=66)


# ---------------------------------------------------------------------------
# covariance decay


def test_covariance_scalar_law_has_no_memory(barycenter, centered_scalar_law):
    table = covariance_decay(centered_scalar_law, barycenter, 20, 4, 100000, seed=71)
    assert table.cov[0] == pytest.approx(0.25, abs=3.0 * table.stderr[0])
    for lag in range(1, 5):
        assert abs(table.cov[lag]) <= 3.0 * table.stderr[lag]
    assert table.kappa_fit is None
    assert "within noise" in table.note


def test_covariance_fixture_decays(ref_law, barycenter):
    table = covariance_decay(ref_law, barycenter, 50, 3, 200000, seed=72)
    assert np.array_equal(table.lags, np.arange(4))
    assert table.cov[0] > 0.0
    assert abs(table.cov[1]) < table.cov[0]
    t1 = covariance_decay(ref_law, barycenter, 50, 3, 200000, seed=72, workers=3)
    assert np.array_equal(table.cov, t1.cov)
