import cmath
import math

import numpy as np
import pytest

from flab.averaging import AveragingScheme, LinearPhase
from flab.errors import SearchBudgetExceeded
from flab.hardy import ExactCoefficient, eval_mp, parse
from flab.measures import (EmpiricalMeasureT, build_empirical_measure, concentration_test,
                           density_bound_check, derivative_sequence, find_checkpoint_times,
                           lambda_from_expr, monotone_measure, uniformity_test)

GOLDEN = LinearPhase(ExactCoefficient.of("phi"))


def const(x):
    return lambda n: np.full(np.shape(n), x)


def full(N, **kw):
    return AveragingScheme.full(N, **kw)


def final(source, N, **kw):
    return build_empirical_measure(source, full(N, checkpoints=[N]), **kw)[-1][1]


# -- build_empirical_measure ------------------------------------------------------

def test_constant_quarter():
    m = final(const(0.25), 1000)
    assert np.count_nonzero(m.bins) == 1 and int(m.bins.sum()) == m.total == 999
    assert abs(m.hat(1) - 1j) <= 1e-15
    assert concentration_test(m, 0.25, 0.01) == 1.0


def test_golden_rotation_uniform():
    m = final(GOLDEN, 10**6)
    assert max(abs(m.hat(k)) for k in range(1, 9)) <= 1e-3
    assert uniformity_test(m, 8, 1e-2).passed
    assert abs(concentration_test(m, 0.3, 0.05) - 0.1) <= 0.02
    assert density_bound_check(m, 1.2).passed


def test_measure_invariants():
    m = final(parse("t^(3/2)"), 10**5, B=256, K=8)
    assert int(m.bins.sum()) == m.total
    for k in range(1, 9):
        assert m.hat(-k) == m.hat(k).conjugate() and abs(m.hat(k)) <= 1
    assert m.hat(0) == 1
    assert m.masses().max() <= 1


def test_bins_and_k_validated():
    with pytest.raises(ValueError):
        final(GOLDEN, 1000, B=1000)
    with pytest.raises(ValueError):
        final(GOLDEN, 1000, K=65)


def test_log_ladder_density():
    cps = [round(math.exp(k)) for k in range(10, 17)]
    for n, m in build_empirical_measure(parse("log(t) + 1"), AveragingScheme.subsequence(cps)):
        assert density_bound_check(m, 1.7).passed, n
    assert density_bound_check(m, 2.0).passed


def test_fourier_vs_bins():
    m = final(parse("t^(3/2)"), 10**5, B=256, K=16)
    for k in range(1, 17):
        assert abs(m.hat_from_bins(k) - m.hat(k)) <= math.pi * k / 256 + 1e-12


def test_merge_equals_concatenation():
    a = build_empirical_measure(GOLDEN, AveragingScheme.full(5000, checkpoints=[5000]), B=64, K=4)[0][1]
    whole = build_empirical_measure(GOLDEN, AveragingScheme.full(12000, checkpoints=[12000]), B=64, K=4)[0][1]
    b = build_empirical_measure(GOLDEN, AveragingScheme.full(12000, checkpoints=[12000], n_start=5001),
                                B=64, K=4)[0][1]
    merged = a.merge(b)
    assert merged.total == whole.total
    assert np.array_equal(merged.bins, whole.bins)
    assert np.allclose(merged.fourier, whole.fourier, atol=1e-14)


def test_csv_outputs():
    m = final(GOLDEN, 5000, B=16, K=3)
    assert m.histogram_csv().splitlines()[0].startswith("bin")
    assert len(m.fourier_csv().splitlines()) == 4


# -- lambda_from_expr ---------------------------------------------------------------

def test_lambda_three_halves_uniform():
    m = lambda_from_expr("t^(3/2)", full(10**7, checkpoints=[10**7]))[-1][1]
    assert uniformity_test(m, 5, 0.05).passed


def test_lambda_sqrt2_square_point_mass():
    m = lambda_from_expr("sqrt2*t^2", full(10**5, checkpoints=[10**5]))[-1][1]
    assert concentration_test(m, math.sqrt(2) % 1, 1e-3) >= 0.99
    t = uniformity_test(m, 4, 0.1)
    assert not t.passed and t.value == pytest.approx(1.0, abs=1e-12)


def test_lambda_t_log_t_ladders_differ():
    la = [round(math.exp(k)) for k in range(10, 17)]
    lb = [round(math.exp(k + 0.5)) for k in range(10, 16)]
    ma = lambda_from_expr("t*log(t)", AveragingScheme.subsequence(la))[-1][1]
    mb = lambda_from_expr("t*log(t)", AveragingScheme.subsequence(lb))[-1][1]
    assert abs(ma.hat(1) - mb.hat(1)) >= 0.05


def test_derivative_sequence():
    c, d = derivative_sequence("sqrt2*t^2 + t^(3/2)")
    assert d == 2 and str(c).startswith("sqrt2")
    with pytest.raises(ValueError):
        derivative_sequence("1/2*t^2 + t^(2/3)")


def test_point_mass_fails_density():
    m = final(const(0.7), 2000)
    assert not density_bound_check(m, 1024 / 8 - 1).passed


# -- monotone route ---------------------------------------------------------------------

def test_monotone_matches_samples():
    c = parse("log(t)^(1/2)")
    N = 200000
    a = monotone_measure(c, N, B=128, K=4)
    b = final(c, N, B=128, K=4)
    assert a.total == b.total
    assert np.array_equal(np.array([int(x) for x in a.bins]), b.bins)
    assert np.all(np.abs(a.fourier - b.fourier) <= a.fourier_err + 1e-12)


# -- find_checkpoint_times --------------------------------------------------------------

def test_checkpoints_sqrt_log():
    c = parse("log(t)^(1/2)")
    hits = find_checkpoint_times(c, 0.5, 0.01, 6)
    assert hits == sorted(hits) and len(set(hits)) == 6
    for n in hits:
        f = float(eval_mp(c, n, 256)[0] % 1)
        assert 0.49 <= f < 0.51
        # first entry: one step earlier is still below the window
        g = float(eval_mp(c, n - 1, 256)[0] % 1)
        assert not 0.49 < g < 0.51


def test_checkpoints_log_near_powers_of_e():
    hits = find_checkpoint_times(parse("log(t)"), 0.0, 1e-3, 5)
    for m, n in enumerate(hits, start=7):
        assert abs(n - math.exp(m)) <= 1e-3 * math.exp(m) + 1


def test_checkpoints_constant():
    assert find_checkpoint_times(parse("1/4"), 0.25, 0.01, 3) == [2, 3, 4]
    with pytest.raises(SearchBudgetExceeded):
        find_checkpoint_times(parse("1/4"), 0.6, 0.01, 3)


def test_case_three_slow_variation_and_concentration():
    c = parse("log(t)^(1/2)")
    hits = find_checkpoint_times(c, 0.5, 0.01, 40)
    late = [n for n in hits if math.log(n) >= 50]
    assert late
    for N in late[:3]:
        cN = eval_mp(c, N, 256)[0]
        for frac in (0.5, 0.6, 0.75, 0.9):
            n = int(N * frac)
            assert abs(float(cN - eval_mp(c, n, 256)[0])) <= 0.05
    # mass near the target grows like 1 - O(1/sqrt(log N)): 0.52 at log N = 56
    m = monotone_measure(c, hits[-1], B=256, K=4)
    assert math.log(hits[-1]) > 1000
    assert concentration_test(m, 0.5, 0.05) >= 0.9
