import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from flab.correlation import CorrelationQuery, exhaustive_queries
from flab.errors import FourierOutOfRange
from flab.hardy import ExactCoefficient, classify, parse
from flab.oracle import (MeasureSpec, UnipotentModel, binom, binom_condition, default_lambda,
                         model_reconciliation, power_sum_condition, predict_correlation,
                         prediction_record, unipotent_expected_correlation, unipotent_orbit_phase)

HERM = CorrelationQuery((1, 0), (1, -1))
SECOND_DIFF = CorrelationQuery((2, 1, 1, 0), (1, -1, -1, 1))
IDENT = CorrelationQuery((0, 0), (1, -1))
E2SQ2 = cmath.exp(2j * math.pi * 2 * math.sqrt(2))
CASE_I = classify(parse("t^(3/2)"))
CASE_IV = classify(parse("sqrt2*t^2 + t^(3/2)"))


def e(x):
    return cmath.exp(2j * math.pi * x)


# -- conditions -----------------------------------------------------------------

def test_power_sum_examples():
    assert tuple(power_sum_condition(HERM, 1)) == (True, 1)
    assert tuple(power_sum_condition(SECOND_DIFF, 2)) == (True, 2)
    assert power_sum_condition(CorrelationQuery((0, 1), (1, 1)), 1).vanishes is False


def test_binom_examples():
    assert tuple(binom_condition(HERM, 1)) == (True, 1)
    assert tuple(binom_condition(SECOND_DIFF, 2)) == (True, Fraction(1))
    assert binom_condition(CorrelationQuery((0,), (1,)), 1).vanishes is False
    assert binom(-3, 2) == 6 and binom(5, 0) == 1 and binom(0, 0) == 1


def test_conditions_equivalent_and_scaled():
    for q in exhaustive_queries(3, 4):
        for d in range(4):
            p, b = power_sum_condition(q, d), binom_condition(q, d)
            assert p.vanishes == b.vanishes
            if p.vanishes:
                assert b.value == Fraction(p.value, math.factorial(d))


# -- measures -------------------------------------------------------------------

def test_measure_spec_invariants():
    with pytest.raises(ValueError):
        MeasureSpec.fourier_table({0: 0.5})
    with pytest.raises(ValueError):
        MeasureSpec.fourier_table({1: 1.5})
    m = MeasureSpec.fourier_table({1: 0.5j, -2: 0.25})
    assert m.hat(-1) == -0.5j and m.hat(2) == 0.25 and m.hat(0) == 1
    with pytest.raises(FourierOutOfRange):
        m.hat(3)
    assert MeasureSpec.from_dict(m.as_dict()).table == m.table


def test_point_mass_and_pushforward():
    m = MeasureSpec.point_mass("sqrt2")
    assert abs(m.hat(3) - e(3 * math.sqrt(2))) <= 1e-13
    assert abs(m.pushforward(2).hat(1) - m.hat(2)) <= 1e-15
    assert MeasureSpec.uniform().pushforward(6) == MeasureSpec.uniform()
    assert MeasureSpec.from_dict(m.as_dict()) == m


def test_default_lambda():
    assert default_lambda(CASE_I) == MeasureSpec.uniform()
    assert default_lambda(CASE_IV) == MeasureSpec.point_mass("sqrt2")
    with pytest.raises(ValueError):
        default_lambda(classify(parse("t*log(t)^(1/2)")))


# -- predictions ------------------------------------------------------------------

def test_predict_examples():
    assert predict_correlation(CASE_I, MeasureSpec.uniform(), HERM) == 0
    for cls in (CASE_I, CASE_IV):
        assert predict_correlation(cls, default_lambda(cls), IDENT) == 1
    v = predict_correlation(CASE_IV, default_lambda(CASE_IV), SECOND_DIFF)
    assert abs(v - E2SQ2) <= 1e-13
    assert abs(v - complex(0.4723, -0.8815)) <= 1e-3


def test_predict_refuses_case_v():
    with pytest.raises(ValueError):
        predict_correlation(classify(parse("1/2*t^2 + t^(2/3)")), MeasureSpec.uniform(), HERM)


def test_predict_table_out_of_range():
    with pytest.raises(FourierOutOfRange):
        predict_correlation(CASE_IV, MeasureSpec.fourier_table({1: 0.5}), SECOND_DIFF)


def test_brute_force_constant_phase():
    n = np.arange(2, 10**4)
    ph = lambda m: np.exp(2j * np.pi * (math.sqrt(2) * m.astype(float) ** 2 % 1.0))
    # exact in the rounding sense only for small n; the net phase is 2*sqrt2
    emp = np.mean(ph(n + 2) * np.conj(ph(n + 1)) ** 2 * ph(n))
    assert abs(emp - predict_correlation(CASE_IV, default_lambda(CASE_IV), SECOND_DIFF)) <= 1e-3


def test_dilation_covariance_uniform():
    for q in exhaustive_queries(3, 3):
        base = predict_correlation(CASE_I, MeasureSpec.uniform(), q)
        for r in (2, 3):
            assert predict_correlation(CASE_I, MeasureSpec.uniform(), q.dilate(r)) == base


def test_prediction_record_fields():
    rec = prediction_record(CASE_IV, default_lambda(CASE_IV), SECOND_DIFF)
    assert set(rec) == {"case", "d", "lambda", "query", "value_re", "value_im", "vanishes", "l_d", "c_d"}
    assert rec["l_d"] == 2 and rec["c_d"] == "1"


# -- unipotent model ----------------------------------------------------------------

def test_orbit_phase_examples():
    a = 0.3819660112501051
    m1 = UnipotentModel(1, MeasureSpec.uniform())
    for n in (0, 1, 7, 123456):
        assert abs(unipotent_orbit_phase(m1, (a, 0.0), n) - e((n * a) % 1)) <= 1e-9
    y = (0.1, 0.27, 0.55)
    m2 = UnipotentModel(2, MeasureSpec.uniform())
    assert abs(unipotent_orbit_phase(m2, y, 3) - e(0.55 + 3 * 0.27 + 3 * 0.1)) <= 1e-12
    m4 = UnipotentModel(4, MeasureSpec.uniform())
    assert abs(unipotent_orbit_phase(m4, (0.1, 0.2, 0.3, 0.4, 0.9), 0) - e(0.9)) <= 1e-15


def test_unipotent_expected_examples():
    assert unipotent_expected_correlation(UnipotentModel(1, MeasureSpec.uniform()), HERM) == 0
    beta = MeasureSpec.point_mass(Fraction(1, 7))
    assert abs(unipotent_expected_correlation(UnipotentModel(1, beta), HERM) - e(1 / 7)) <= 1e-15
    assert unipotent_expected_correlation(UnipotentModel(2, MeasureSpec.uniform()), SECOND_DIFF) == 0


def test_c_d_is_always_integral():
    # C(n, d) is integer-valued on Z, so table lookups never see a fractional c_d
    for q in exhaustive_queries(4, 3)[::5]:
        for d in range(4):
            b = binom_condition(q, d)
            assert not b.vanishes or b.value.denominator == 1


def test_orbit_vs_integral_monte_carlo():
    rng = np.random.default_rng(7)
    for d in (1, 2):
        model = UnipotentModel(d, MeasureSpec.uniform())
        for q in [HERM, SECOND_DIFF, IDENT, CorrelationQuery((0, 1, 3), (1, 1, -1))]:
            ys = rng.random((10**4, d + 1))
            vals = []
            for y in ys:
                p = 1 + 0j
                for n, k in zip(q.shifts, q.signs):
                    z = unipotent_orbit_phase(model, tuple(y), n)
                    p *= z if k > 0 else z.conjugate()
                vals.append(p)
            assert abs(np.mean(vals) - unipotent_expected_correlation(model, q)) <= 0.05


# -- reconciliation ------------------------------------------------------------------

def test_reconciliation_examples():
    r = model_reconciliation(CASE_I, MeasureSpec.uniform(), HERM)
    assert r.match and r.power_sum == r.unipotent == 0
    r = model_reconciliation(CASE_IV, MeasureSpec.point_mass("sqrt2"), SECOND_DIFF)
    assert r.match and abs(r.power_sum - E2SQ2) <= 1e-13 and abs(r.unipotent - E2SQ2) <= 1e-13


def test_reconciliation_exhaustive_d2_uniform():
    cls = classify(parse("t^2*log(t)^2"))
    assert cls.d == 2
    for q in exhaustive_queries(4, 5)[::7]:
        assert model_reconciliation(cls, MeasureSpec.uniform(), q).match
