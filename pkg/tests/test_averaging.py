import math
from fractions import Fraction

import numpy as np
import pytest

from flab._parallel import set_threads
from flab.averaging import (AveragingScheme, ComplexSeries, ConstantSource, LinearPhase, PhaseSource,
                            cesaro_average, finite_difference, partial_summation_check, powers_of,
                            weighted_average, weighted_series)
from flab.errors import BadWeight
from flab.hardy import ExactCoefficient, parse

PHI = ExactCoefficient.of("phi")


def full(N, **kw):
    return AveragingScheme.full(N, **kw)


# -- cesaro_average ---------------------------------------------------------------

def test_constant_one_is_exact():
    s = cesaro_average(ConstantSource(1.0), full(1000))
    assert s.final == 1.0


def test_alternating_sign_cancels_exactly():
    # n = 2..1001 is 1000 terms, 500 of each sign
    half = ExactCoefficient(Fraction(1, 2))
    s = cesaro_average(LinearPhase(half), full(1001, checkpoints=[1001]))
    assert s.final == 0.0
    # n = 2..1000 is 999 terms: one +1 left over
    s = cesaro_average(LinearPhase(half), full(1000, checkpoints=[1000]))
    assert s.final == pytest.approx(1 / 999, abs=1e-17)


def test_golden_rotation_mean_small():
    s = cesaro_average(LinearPhase(PHI), full(10**6))
    assert abs(s.final) <= 1e-5


def test_default_checkpoints_powers_of_two():
    s = full(10**5)
    assert s.checkpoints[0] == 1024 and s.checkpoints[-1] == 10**5
    assert all(b > a for a, b in zip(s.checkpoints, s.checkpoints[1:]))
    assert powers_of(2.0, 5000) == [1024, 2048, 4096, 5000]


def test_scheme_validation():
    with pytest.raises(ValueError):
        AveragingScheme.full(1000, checkpoints=[5, 1000])
    with pytest.raises(ValueError):
        AveragingScheme.full(1000, checkpoints=[500, 400])
    with pytest.raises(ValueError):
        AveragingScheme.full(2 * 10**9)


def test_unimodular_bound_and_samples():
    s = cesaro_average(PhaseSource(parse("t^(3/2)")), full(300000))
    assert all(abs(v) <= 1 + 2**-40 for v in s.values)
    assert s.samples == tuple(n - 1 for n in s.N)


def test_thread_count_does_not_change_bits():
    src = PhaseSource(parse("sqrt2*t^2 + t^(3/2)"))
    out = []
    for threads in (1, 3, 8):
        set_threads(threads)
        out.append(cesaro_average(src, full(700001)).to_csv())
    set_threads(0)
    assert out[0] == out[1] == out[2]


def test_csv_round_trip():
    s = cesaro_average(PhaseSource(parse("t^(3/2)")), full(50000))
    text = s.to_csv()
    assert text.splitlines()[0] == "N,re,im,abs,samples"
    back = ComplexSeries.from_csv(text)
    assert back.values == s.values and back.N == s.N and back.samples == s.samples


# -- weighted averages ------------------------------------------------------------

def test_weighted_constant_telescopes():
    w = parse("t^(1/2)")
    v = weighted_average(ConstantSource(1.0), w, 10**5)
    assert v.real == pytest.approx(1 - math.sqrt(2) / math.sqrt(10**5), abs=1e-15)


def test_weight_t_is_cesaro_up_to_offset():
    src = PhaseSource(parse("t^(3/2)"))
    N = 200000
    wv = weighted_average(src, parse("t"), N)
    # E^w sums n = 2..N-1 and divides by N
    cv = cesaro_average(src, full(N - 1, checkpoints=[N - 1])).final * (N - 2) / N
    assert abs(wv - cv) <= 1e-12


def test_weighted_golden_rotation():
    assert abs(weighted_average(LinearPhase(PHI), parse("t^(1/2)"), 10**6)) <= 1e-2


@pytest.mark.parametrize("w", ["-t", "3", "t^(-1)", "log(t)^(-1)"])
def test_bad_weights(w):
    with pytest.raises(BadWeight):
        weighted_average(ConstantSource(1.0), parse(w), 1000)


def test_weighted_series_scheme():
    s = weighted_series(ConstantSource(1.0), parse("t*log(t)"), AveragingScheme.weighted(parse("t*log(t)"), 10**5))
    assert s.final.real == pytest.approx(1 - 2 * math.log(2) / (1e5 * math.log(1e5)), abs=1e-14)


# -- finite differences -------------------------------------------------------------

def test_finite_difference_square_first():
    f = finite_difference(parse("t^2"), 1, 1)
    n = np.arange(2, 100)
    assert np.array_equal(f(n), 2.0 * n + 1)


def test_finite_difference_square_second_constant():
    f = finite_difference(parse("t^2"), 2, 2)
    assert np.all(f(np.arange(2, 10000)) == 8.0)


def test_finite_difference_three_halves():
    f = finite_difference(parse("t^(3/2)"), 1, 1)
    n = 10**6
    assert abs(f(np.array([n]))[0] / (1.5 * math.sqrt(n)) - 1) <= 1e-2


def test_finite_difference_callable_source():
    f = finite_difference(lambda n: np.asarray(n, dtype=float) ** 2, 1, 1)
    assert f(np.array([5]))[0] == 11.0


# -- partial summation ----------------------------------------------------------------

def test_partial_summation_constant():
    r = partial_summation_check(ConstantSource(1.0), "t^(3/2)", 1, 1, 10**5)
    from flab.averaging import DifferenceWeight
    w = DifferenceWeight(parse("t^(3/2)"), 1, 1)
    assert r.deviation <= w.value(2) / w.value(10**5) + 1e-15


def test_partial_summation_weyl():
    r = partial_summation_check(PhaseSource(parse("t^(3/2)")), "t^(3/2)", 1, 1, 10**7)
    assert abs(r.weighted) <= 0.05 and abs(r.cesaro) <= 0.05
    assert r.deviation <= 0.02


def test_partial_summation_rotation():
    r = partial_summation_check(LinearPhase(PHI), "t^(3/2)", 1, 1, 10**7)
    assert r.deviation <= 1e-2


def test_partial_summation_bounded_weight_rejected():
    with pytest.raises(BadWeight):
        partial_summation_check(ConstantSource(1.0), "t^(1/2)", 1, 1, 1000)
