"""Alignment/descent lemma checks and the rate-theorem harness on quadratics
with analytic constants."""

import numpy as np
import pytest

from samlab.convergence import (
    THEOREM_IDS,
    Z99,
    check_alignment,
    check_descent,
    check_stochastic_alignment,
    check_stochastic_descent,
    probe_alignment_tightness,
    probe_descent_tightness,
    verify_rate,
)
from samlab.models import QuadraticObjective
from samlab.rng import stream


def _problem(seed, sigma=0.5):
    return QuadraticObjective.random(d=8, n=16, beta_smooth=1.0, mu=0.1,
                                     sigma=sigma, seed=seed)


def test_z99_matches_scipy():
    from scipy.stats import norm

    assert Z99 == pytest.approx(norm.ppf(0.995), rel=1e-12)


def test_alignment_holds_on_random_probes():
    problem = _problem(0)
    rng = stream(0, "probe")
    for _ in range(100):
        w = problem.w_star + rng.standard_normal(problem.d)
        for regime, rho in (("smooth", 0.3), ("convex", 0.5), ("strongly_convex", 0.5)):
            assert check_alignment(problem, w, rho, regime) >= -1e-10


def test_alignment_regime_ordering():
    # the three lower bounds are nested: smooth <= convex <= strongly convex,
    # so the margins must decrease in that order
    problem = _problem(1)
    w = problem.w_star + stream(1, "probe").standard_normal(problem.d)
    rho = 0.4
    m_smooth = check_alignment(problem, w, rho, "smooth")
    m_convex = check_alignment(problem, w, rho, "convex")
    m_strong = check_alignment(problem, w, rho, "strongly_convex")
    assert m_smooth >= m_convex >= m_strong >= -1e-10


def test_alignment_validation():
    problem = _problem(2)
    with pytest.raises(ValueError):
        check_alignment(problem, np.zeros(8), 0.1, "flat")
    degenerate = QuadraticObjective(A=np.zeros((2, 2)), w_star=np.zeros(2),
                                    zeta=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        check_alignment(degenerate, np.zeros(2), 0.1, "strongly_convex")


def test_descent_holds_inside_validity_region():
    problem = _problem(3)
    rng = stream(3, "probe")
    for _ in range(100):
        w = problem.w_star + rng.standard_normal(problem.d)
        gamma = rng.uniform(0.05, 0.95) / problem.beta_smooth
        rho = rng.uniform(0.0, 0.95) / problem.beta_smooth
        assert check_descent(problem, w, gamma, rho) >= -1e-10


def test_tightness_probes_are_at_equality():
    for seed in range(3):
        assert probe_alignment_tightness(seed=seed) <= 1e-6
        assert probe_descent_tightness(seed=seed) <= 1e-6


def test_stochastic_alignment_both_variants():
    problem = _problem(4)
    w = problem.w_star + stream(4, "probe").standard_normal(problem.d)
    for variant in ("shared", "fresh"):
        out = check_stochastic_alignment(problem, w, rho=0.2, batch_size=4,
                                         variant=variant, n_draws=4000, seed=4)
        assert out["satisfied"], out
        assert out["margin"] > 0


def test_stochastic_descent_both_variants():
    problem = _problem(5)
    w = problem.w_star + stream(5, "probe").standard_normal(problem.d)
    for variant in ("shared", "fresh"):
        out = check_stochastic_descent(problem, w, gamma=0.5, rho=0.2,
                                       batch_size=4, variant=variant,
                                       n_draws=4000, seed=5)
        assert out["satisfied"], out
        assert out["margin"] > 0


def test_stochastic_check_validation():
    problem = _problem(6)
    with pytest.raises(ValueError):
        check_stochastic_alignment(problem, np.zeros(8), 0.1, 2, variant="mixed")
    with pytest.raises(ValueError):
        check_stochastic_descent(problem, np.zeros(8), 0.1, 0.1, 2, variant="mixed")


@pytest.mark.parametrize("theorem_id", THEOREM_IDS)
def test_verify_rate_satisfied(theorem_id):
    problem = _problem(7)
    res = verify_rate(theorem_id, problem, T=2000, b=2, seeds=5, seed0=7)
    assert res.satisfied, res.to_dict()
    assert res.theorem_id == theorem_id
    # margins can dip to machine-precision negatives once iterates hit the
    # floating-point floor while the geometric bound keeps decaying
    assert res.margin >= -1e-12 * (1.0 + res.details["initial_gap"])
    doc = res.to_dict()
    assert doc["satisfied"] is True


def test_verify_rate_noiseless_pl_converges_fast():
    problem = _problem(8, sigma=0.0)
    res = verify_rate("thm2_pl", problem, T=500, b=1, seeds=2, seed0=0)
    assert res.satisfied
    assert float(np.mean(res.lhs_trace)) < 1e-3  # actually converges


def test_verify_rate_validation():
    problem = _problem(9)
    with pytest.raises(ValueError):
        verify_rate("thm3_magic", problem, T=100)
    # all eigenvalues zero: no nonzero curvature, so mu = 0
    degenerate = QuadraticObjective(A=np.zeros((2, 2)), w_star=np.zeros(2),
                                    zeta=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        verify_rate("thm2_pl", degenerate, T=100)
    with pytest.raises(ValueError):
        verify_rate("det_strongly_convex", degenerate, T=100)


def test_verify_rate_deterministic_is_reproducible():
    problem = _problem(10)
    a = verify_rate("det_nonconvex", problem, T=500)
    b = verify_rate("det_nonconvex", problem, T=500)
    assert np.array_equal(a.lhs_trace, b.lhs_trace)
    assert a.rhs_bound == b.rhs_bound
