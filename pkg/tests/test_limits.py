import math

import numpy as np
import pytest
from scipy import special

from perpsim.errors import DomainError
from perpsim.laws import (
    Exponential, Independent, Normal, PointMass,
)
from perpsim.limits import (
    GofResult, clt_normalized_pool, gamma_half_cdf, gamma_limit_pool,
    green_n_max, green_sum, ks_one_sample, ks_two_sample, local_window_empirical,
    local_window_theoretical, log_dn_pool, std_normal_cdf,
    theorem9_diagnostics, walk_dip_probability,
)
from perpsim.streams import RandomStream

CLT_JOINT = Independent(Normal(1.0, 1.0), Exponential(1.0))


# -- theoretical local windows -----------------------------------------------


def test_local_window_peak_value():
    n, s2, d = 400, 1.3, 0.5
    want = d / math.sqrt(2 * math.pi * s2 * n)
    assert local_window_theoretical(1.0, s2, n, float(n), d) == pytest.approx(want, rel=1e-13)


def test_local_window_symmetry():
    a, s2, n, d = 1.0, 1.0, 100, 0.5
    lo = local_window_theoretical(a, s2, n, n * a - 7.0, d)
    hi = local_window_theoretical(a, s2, n, n * a + 7.0, d)
    assert lo == pytest.approx(hi, rel=1e-13)


def test_local_window_normalization():
    a, s2, n, d = 1.0, 1.0, 500, 0.05
    sd = math.sqrt(n * s2)
    grid = np.arange(n * a - 6 * sd, n * a + 6 * sd, d)
    total = sum(local_window_theoretical(a, s2, n, x, d) for x in grid)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_local_window_validation():
    with pytest.raises(DomainError):
        local_window_theoretical(1.0, 1.0, 0, 1.0, 0.5)
    with pytest.raises(DomainError):
        local_window_theoretical(1.0, 1.0, 10, 1.0, 0.0)


# -- empirical windows -------------------------------------------------------


def test_window_additivity_on_shared_pool():
    pool = log_dn_pool(CLT_JOINT, 100, 20_000, RandomStream(0))
    x0, d = 95.0, 2.0
    halves = (local_window_empirical(None, 0, x0, d, 0, None, pool=pool).p_hat
              + local_window_empirical(None, 0, x0 + d, d, 0, None, pool=pool).p_hat)
    covering = local_window_empirical(None, 0, x0, 2 * d, 0, None, pool=pool).p_hat
    assert halves == pytest.approx(covering, abs=1e-15)


def test_window_covering_everything_is_one():
    pool = log_dn_pool(CLT_JOINT, 50, 5000, RandomStream(1))
    lo = float(pool.min()) - 1.0
    width = float(pool.max()) - lo + 1.0
    est = local_window_empirical(None, 0, lo, width, 0, None, pool=pool)
    assert est.p_hat == 1.0


# -- CLT pool ----------------------------------------------------------------


def test_clt_pool_moments_converge():
    gaps = []
    for n in (200, 2000):
        pool = clt_normalized_pool(CLT_JOINT, n, 20_000, RandomStream(2))
        gaps.append(abs(float(np.var(pool)) - 1.0))
    assert gaps[1] < gaps[0] + 0.02
    assert gaps[1] < 0.1


def test_clt_pool_requires_transient_drift():
    with pytest.raises(DomainError):
        clt_normalized_pool(Independent(Normal(-1.0, 1.0), Exponential(1.0)),
                            100, 100, RandomStream(0))


def test_log_dn_pool_rejects_signed_eta():
    with pytest.raises(DomainError):
        log_dn_pool(Independent(Normal(1.0, 1.0), Normal(0.0, 1.0)), 10, 10,
                    RandomStream(0))


def test_log_dn_pool_tilde_differs():
    a = log_dn_pool(CLT_JOINT, 50, 2000, RandomStream(3))
    b = log_dn_pool(CLT_JOINT, 50, 2000, RandomStream(3), tilde=True)
    assert not np.allclose(a, b)


# -- green sum ---------------------------------------------------------------


def test_green_sum_near_h_over_drift():
    got = green_sum(Independent(Normal(1.0, 1.0), PointMass(1.0)),
                    30.0, 1.0, 20_000, RandomStream(4))
    assert got == pytest.approx(1.0, abs=0.1)


def test_green_sum_additivity_in_h():
    stream = RandomStream(5)
    joint = Independent(Normal(1.0, 1.0), PointMass(1.0))
    n_max = green_n_max(1.0, 1.0, 32.0, 2.0)
    one = green_sum(joint, 30.0, 1.0, 20_000, stream, n_max=n_max)
    two = green_sum(joint, 30.0, 2.0, 20_000, stream, n_max=n_max)
    # same stream, same paths: strict superset of window hits
    assert two >= one
    assert two == pytest.approx(2.0 * one, rel=0.15)


def test_green_sum_rejects_lattice_xi():
    with pytest.raises(DomainError):
        green_sum(Independent(PointMass(1.0), PointMass(1.0)), 30.0, 1.0,
                  100, RandomStream(0))


def test_green_sum_rejects_negative_drift():
    with pytest.raises(DomainError):
        green_sum(Independent(Normal(-1.0, 1.0), PointMass(1.0)), 30.0, 1.0,
                  100, RandomStream(0))


def test_green_n_max_scales_with_target():
    assert green_n_max(1.0, 1.0, 100.0, 1.0) > green_n_max(1.0, 1.0, 30.0, 1.0)


# -- gamma limit -------------------------------------------------------------


def test_gamma_pool_nonnegative_and_zero_drift_enforced():
    joint = Independent(Normal(0.0, 1.0), PointMass(1.0))
    pool = gamma_limit_pool(joint, 200, 2000, RandomStream(6))
    assert np.all(pool >= 0)
    with pytest.raises(DomainError):
        gamma_limit_pool(CLT_JOINT, 100, 100, RandomStream(0))


def test_gamma_half_cdf_is_squared_normal_law():
    rng = RandomStream(7).generator()
    z = rng.normal(0.0, 1.3, 200_000)
    res = ks_one_sample(z * z, lambda x: gamma_half_cdf(x, 2 * 1.3 ** 2),
                        reference="gamma")
    assert res.statistic < 0.01


# -- KS statistics -----------------------------------------------------------


def test_ks_one_sample_quantile_pool():
    n = 999
    qs = special.erfinv(2 * (np.arange(1, n + 1) / (n + 1)) - 1) * math.sqrt(2)
    res = ks_one_sample(qs, std_normal_cdf, reference="std-normal")
    assert res.statistic == pytest.approx(1.0 / (n + 1), rel=1e-9)


def test_ks_one_sample_calibration():
    rng = RandomStream(8).generator()
    pvals = []
    for _ in range(20):
        pool = rng.normal(size=5000)
        pvals.append(ks_one_sample(pool, std_normal_cdf).p_value)
    assert np.mean(np.asarray(pvals) > 1e-3) >= 0.95


def test_ks_two_sample_identical_pools():
    pool = np.arange(100.0)
    res = ks_two_sample(pool, pool)
    assert res.statistic == pytest.approx(0.0, abs=1e-14)
    assert res.p_value == pytest.approx(1.0)


def test_ks_two_sample_disjoint_pools():
    res = ks_two_sample(np.arange(100.0), np.arange(100.0) + 1000.0)
    assert res.statistic == pytest.approx(1.0)
    assert res.p_value < 1e-10


def test_ks_two_sample_with_ties():
    a = np.array([0.0, 1.0, 1.0, 2.0])
    b = np.array([1.0, 1.0, 3.0])
    res = ks_two_sample(a, b)
    # manual ECDF scan: max gap at t = 2 (4/4 vs 2/3)
    assert res.statistic == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_ks_empty_pool_rejected():
    with pytest.raises(DomainError):
        ks_one_sample(np.array([]), std_normal_cdf)
    with pytest.raises(DomainError):
        ks_two_sample(np.array([]), np.arange(5.0))


def test_gof_result_validation():
    with pytest.raises(DomainError):
        GofResult(-0.1, 0.5, 10, "x")
    with pytest.raises(DomainError):
        GofResult(0.1, 1.5, 10, "x")


# -- diagnostics -------------------------------------------------------------


def test_theorem9_eta_zero_gaps_vanish():
    joint = Independent(PointMass(0.5), PointMass(0.0))
    rows = theorem9_diagnostics(joint, [5.0, 10.0], n_mc=1000)
    for row in rows:
        assert row.charfn_gap < 1e-12
        assert row.jump_mean == pytest.approx(0.5, abs=1e-12)
        assert row.jump_var == pytest.approx(0.0, abs=1e-12)


def test_theorem9_jump_mean_approaches_drift():
    rows = theorem9_diagnostics(CLT_JOINT, [20.0], n_mc=400_000,
                                stream=RandomStream(9))
    assert rows[0].jump_mean == pytest.approx(1.0, abs=0.01)


def test_theorem9_charfn_gap_decreasing():
    rows = theorem9_diagnostics(CLT_JOINT, [2.0, 5.0, 10.0], n_mc=100_000,
                                stream=RandomStream(10))
    gaps = [r.charfn_gap for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]


def test_walk_dip_probability_decreases_in_start():
    joint = Independent(Normal(1.0, 1.0), PointMass(1.0))
    early = walk_dip_probability(joint, 1, 60, 20_000, RandomStream(11))
    late = walk_dip_probability(joint, 30, 60, 20_000, RandomStream(11))
    assert 0.0 <= late <= early <= 1.0
