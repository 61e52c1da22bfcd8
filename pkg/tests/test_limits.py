import io
import math

import numpy as np
import pytest

from mlob.errors import GrowthViolation, InvalidParams
from mlob.limits import (
    DiffusionPair, DiffusionParams, continuous_wealth, convergence_study, discrete_wealth,
    gaussian_expectation, simulate_pair, verify_lln, write_convergence_csv,
)

INV_SQRT_2PI = 1 / math.sqrt(2 * math.pi)


def test_zero_volatility_paths_are_linear():
    prm = DiffusionParams(mu=0.5, sigma=0.0, b=-2.0, l=0.0, p0=10.0, L0=1.0)
    pair = simulate_pair(prm, 100, seed=0)
    assert np.allclose(pair.p, 10.0 + 0.5 * np.linspace(0, 1, 101))
    assert np.allclose(pair.L, 1.0 - 2.0 * np.linspace(0, 1, 101))


def test_perfect_negative_correlation():
    prm = DiffusionParams(sigma=2.0, l=3.0, rho=-1.0)
    pair = simulate_pair(prm, 1000, seed=1)
    assert np.allclose(np.diff(pair.L), -1.5 * np.diff(pair.p))


def test_sample_correlation_within_tolerance():
    prm = DiffusionParams(rho=-0.4)
    n = 20_000
    pair = simulate_pair(prm, n, seed=2)
    rho = np.corrcoef(np.diff(pair.p), np.diff(pair.L))[0, 1]
    assert abs(rho + 0.4) < 3 / math.sqrt(n)


def test_deterministic_under_seed():
    a = simulate_pair(DiffusionParams(), 50, seed=9)
    b = simulate_pair(DiffusionParams(), 50, seed=9)
    assert np.array_equal(a.p, b.p) and np.array_equal(a.L, b.L)


def test_invalid_params():
    with pytest.raises(InvalidParams):
        simulate_pair(DiffusionParams(rho=1.5), 10)
    with pytest.raises(InvalidParams):
        simulate_pair(DiffusionParams(), 1)


def test_one_step_discrete_wealth():
    prm = DiffusionParams(s=2.0, T=1.0)
    pair = DiffusionPair(prm, np.array([100.0, 101.0, 100.5]), np.array([2.0, 5.0, 4.0]))
    dt = 0.5
    s = 2.0 * math.sqrt(dt)
    x = discrete_wealth(pair)
    assert x[0] == 200.0
    assert x[1] - x[0] == pytest.approx(2 * 1.0 + s / 2 * 3 + 1.0 * 3)
    assert x[2] - x[1] == pytest.approx(5 * -0.5 + s / 2 * 1 + 0.5)


def test_constant_wealth_without_volatility():
    pair = simulate_pair(DiffusionParams(sigma=0, l=0, L0=3), 100, seed=0)
    assert np.all(discrete_wealth(pair) == 300.0)


def test_provider_taker_symmetry():
    pair = simulate_pair(DiffusionParams(), 1000, seed=4)
    assert np.allclose(discrete_wealth(pair), discrete_wealth(pair, taker=True, spread=-pair.spread))


def test_continuous_wealth_terms():
    prm = DiffusionParams(rho=-0.5, sigma=1.3, l=0.7, s=1.1, T=2.0)
    pair = simulate_pair(prm, 1000, seed=5)
    ito = float(np.sum(pair.L[:-1] * np.diff(pair.p)))
    drift = (-0.5 * 1.3 + 1.1 * INV_SQRT_2PI) * 0.7 * 2.0
    x0 = pair.L[0] * pair.p[0]
    assert continuous_wealth(pair) - x0 - ito == pytest.approx(drift, abs=1e-12)
    # ρ >= 0 defaults to the taker sign
    taker = DiffusionPair(DiffusionParams(rho=0.0, s=1.0), pair.p, pair.L)
    assert continuous_wealth(taker) - x0 - ito == pytest.approx(-INV_SQRT_2PI * 1.0, abs=1e-12)


def test_continuous_wealth_without_inventory_vol():
    pair = simulate_pair(DiffusionParams(l=0.0, b=1.0), 100, seed=0)
    ito = float(np.sum(pair.L[:-1] * np.diff(pair.p)))
    assert continuous_wealth(pair) == pytest.approx(pair.L[0] * pair.p[0] + ito, abs=1e-12)


def test_lln_quadratic_variation():
    r = verify_lln(lambda y: y**2, 1.0, 100_000, seed=1)
    assert r.limit == pytest.approx(1.0, rel=1e-8)
    assert r.relative_error < 0.02


def test_gaussian_moment_oracle():
    assert gaussian_expectation(lambda y: np.abs(y) / 2, 1.0) == pytest.approx(INV_SQRT_2PI, rel=1e-10)
    assert gaussian_expectation(lambda y: np.abs(y), 2.0) == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-10)


def test_lln_error_decreases():
    errs = [np.median([verify_lln(lambda y: np.abs(y) / 2, 1.0, n, seed=s).error for s in range(30)])
            for n in (100, 1000, 10_000, 100_000)]
    assert errs == sorted(errs, reverse=True)


def test_growth_violation():
    with pytest.raises(GrowthViolation):
        verify_lln(lambda y: np.abs(y) ** 3, 1.0, 100)
    with pytest.raises(GrowthViolation):
        verify_lln(np.exp, 1.0, 100)


def test_spread_term_estimator_converges():
    prm = DiffusionParams(l=1.0, s=1.0)
    n = 100_000
    pair = simulate_pair(prm, n, seed=8)
    est = float(np.sum(pair.spread / 2 * np.abs(np.diff(pair.L))))
    assert est == pytest.approx(prm.s * prm.l * prm.T * INV_SQRT_2PI, rel=0.01)


def test_covariation_negative_when_rho_negative():
    negative = sum(
        float(np.sum(np.diff(p.p) * np.diff(p.L))) < 0
        for p in (simulate_pair(DiffusionParams(rho=-0.5), 10_000, seed=s) for s in range(100))
    )
    assert negative == 100


def test_zero_volatility_convergence_is_exact():
    study = convergence_study(DiffusionParams(sigma=0, l=0), [10, 100], replications=3, refine=2)
    assert all(r.median_error == 0 for r in study.rows)


def test_convergence_study_rejects_bad_grid():
    with pytest.raises(InvalidParams):
        convergence_study(DiffusionParams(), [30, 7], replications=1, refine=1)


def test_convergence_csv():
    study = convergence_study(DiffusionParams(), [10, 100], replications=5, refine=2)
    buf = io.StringIO()
    write_convergence_csv(buf, study)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "N,median_error,q25,q75" and len(lines) == 3
