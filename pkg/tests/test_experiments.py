import json
import math

import numpy as np
import pytest

from flab.correlation import CorrelationQuery
from flab.errors import HypothesisUnmet
from flab.experiments import (equidist_along, floor_crosscheck, floor_sequence_correlation,
                              joint_factorization_test, make_source, multi_ergodic_average,
                              oracle_comparison, ortho_test, recurrence_average, sst_invariance,
                              triple_intersection)
from flab.systems import BeattyTime, WeightSpec

HERM = CorrelationQuery((1, 0), (1, -1))
IDENT = CorrelationQuery((0, 0), (1, -1))
SECOND_DIFF = CorrelationQuery((2, 1, 1, 0), (1, -1, -1, 1))
# queries whose case-I limit is 0 (l_1 != 0 or sum k != 0)
SST_QUERIES = [HERM, CorrelationQuery((2, 0), (1, -1)), CorrelationQuery((0, 1, 3), (1, 1, -1)),
               CorrelationQuery((0, 1, 3, 3), (1, -1, -1, 1))]
FOUR = CorrelationQuery((0, 1, 2, 3), (1, -1, -1, 1))


# -- orthogonality --------------------------------------------------------------------

def test_ortho_exp_quadratic():
    _, v = ortho_test("t^(3/2)", WeightSpec.exp_quadratic("sqrt3"), 10**7)
    assert v.passed and abs(v.value) <= 0.05


def test_ortho_constant_weight_is_weyl_mean():
    s, v = ortho_test("t^(3/2)", WeightSpec.one(), 10**6)
    assert v.passed


def test_ortho_bernoulli():
    _, v = ortho_test("t^(3/2)", WeightSpec.bernoulli(0), 10**7, tol=0.02)
    assert v.passed


def test_ortho_case_two_allowed_case_three_refused():
    _, v = ortho_test("t*log(t)", WeightSpec.exp_linear("sqrt2"), 10**5)
    assert v.experiment == "ortho"
    with pytest.raises(HypothesisUnmet):
        ortho_test("t*log(t)^(1/2)", WeightSpec.one(), 10**5)


def test_ortho_floor_variant():
    _, v = ortho_test("t^(3/2)", WeightSpec.one(), 10**6, alpha="sqrt2")
    assert v.passed and v.params["alpha"] == "sqrt2"


def test_verdict_json_fields():
    _, v = ortho_test("t^(3/2)", WeightSpec.one(), 10**4)
    d = v.as_dict()
    assert {"experiment", "params", "value", "reference", "tolerance", "pass"} <= set(d)
    json.dumps(d)


# -- strong stationarity ----------------------------------------------------------------

def test_sst_weyl_source():
    res, v = sst_invariance("t^(3/2)", SST_QUERIES, [1, 2, 3], 10**7, tol=0.02)
    assert v.passed, (res.deviation, str(res.worst))


def test_sst_l1_zero_bias_law():
    # sum k = sum k n = 0, so the limit is 1 for every r, but the phase left over is
    # (3/8) sum k (r n)^2 / sqrt(m) and the mean approaches 1 like 1 - 4 pi i c / sqrt(N)
    c = lambda r: 3 / 8 * sum(k * (r * n) ** 2 for n, k in zip(FOUR.shifts, FOUR.signs))
    for N in (10**6, 10**7):
        res, _ = sst_invariance("t^(3/2)", [FOUR], [1, 3], N)
        law = 4 * math.pi * (c(3) - c(1)) / math.sqrt(N)
        assert abs(res.deviation - law) <= 0.1 * law, (N, res.deviation, law)


def test_sst_rotation_floor_source():
    src = {"system": {"kind": "rotation", "alpha": "sqrt2"}, "time": "t^(3/2)", "freqs": [1]}
    res, v = sst_invariance(src, SST_QUERIES, [1, 2, 3], 10**6, tol=0.05)
    assert v.passed, res.deviation


def test_sst_negative_control_second_difference():
    # the second difference of sqrt2 n^2 at dilation r is the constant 2 sqrt2 r^2
    res, v = sst_invariance("sqrt2*t^2", [SECOND_DIFF], [1, 2], 10**6, tol=0.1, expect_invariant=False)
    expected = abs(np.exp(2j * np.pi * 2 * math.sqrt(2)) - np.exp(2j * np.pi * 8 * math.sqrt(2)))
    assert v.passed and res.deviation >= 0.1
    assert abs(res.deviation - expected) <= 1e-9


def test_sst_first_difference_of_quadratic_phase_tends_to_zero():
    # e(sqrt2((n+r)^2 - n^2)) = e(sqrt2(2rn + r^2)) is a linear phase, so every r averages to ~0
    res, _ = sst_invariance("sqrt2*t^2", [HERM], [1, 2], 10**6, tol=0.1, expect_invariant=False)
    assert res.deviation <= 1e-4


def test_sst_csv():
    res, _ = sst_invariance("t^(3/2)", [HERM], [1, 2], 5000)
    assert res.to_csv().startswith("N,deviation\n")


# -- oracle comparison ------------------------------------------------------------------

def test_oracle_comparison_small():
    qs = [HERM, IDENT, SECOND_DIFF, CorrelationQuery((0, 2), (1, -1))]
    tab = oracle_comparison("t^(3/2)", qs, 10**6)
    assert tab.predicted[1] == 1 and tab.empirical[1] == 1
    assert tab.deviation.max() <= 0.05
    assert tab.to_csv().count("\n") == len(qs) + 1


def test_oracle_comparison_case_iv_exact():
    tab = oracle_comparison("sqrt2*t^2", [SECOND_DIFF], 10**5)
    assert tab.deviation[0] <= 1e-12


# -- multiple averages ------------------------------------------------------------------

def test_multiavg_trivial_characters():
    _, v = multi_ergodic_average("phi", "sqrt2", 0, 0, "t^(3/2)", 10**4)
    assert v.value == 1 and v.reference == 1


def test_multiavg_irrational():
    _, v = multi_ergodic_average("phi", "sqrt2", 1, 1, "t^(3/2)", 10**7)
    assert v.passed and abs(v.value) <= 0.02 and v.reference == 0


def test_multiavg_reduces_to_rotation():
    _, v = multi_ergodic_average("phi", "sqrt2", 1, 0, "t^(3/2)", 10**6)
    assert abs(v.value) <= 1e-5


# -- recurrence ----------------------------------------------------------------------------

def test_triple_intersection():
    x = np.array([0.0, 0.1, 0.5, 0.9])
    assert np.all(triple_intersection(0.0, 1.0, x, x) == 1.0)
    assert triple_intersection(0.0, 0.5, np.array([0.0]), np.array([0.0]))[0] == 0.5
    assert triple_intersection(0.0, 0.5, np.array([0.25]), np.array([0.0]))[0] == pytest.approx(0.25)
    assert triple_intersection(0.0, 0.5, np.array([0.75]), np.array([0.0]))[0] == pytest.approx(0.25)
    rng = np.random.default_rng(3)
    xs, ys = rng.random(200000), rng.random(200000)
    assert abs(triple_intersection(0.0, 1 / 3, xs, ys).mean() - 1 / 27) <= 2e-3


def test_recurrence_full_circle():
    _, v = recurrence_average("phi", "sqrt2", ("0", "1"), "t^(3/2)", 10**4)
    assert v.value == 1 and v.passed


@pytest.mark.parametrize("A,ref", [(("0", "1/3"), 1 / 27), (("0", "1/2"), 1 / 8)])
def test_recurrence_triple(A, ref):
    _, v = recurrence_average("phi", "sqrt2", A, "t^(3/2)", 10**6)
    assert v.passed and abs(v.value - ref) <= 0.01 and v.value >= ref - 0.005


def test_recurrence_double():
    _, v = recurrence_average("phi", "sqrt2", ("0", "1/3"), None, 10**6)
    assert v.passed and abs(v.value - 1 / 9) <= 0.01


# -- equidistribution along Beatty sequences -----------------------------------------------

def test_equidist_identity_matches_weyl():
    rep, v = equidist_along("t^(3/2)", None, "sqrt2", 3, 10**6)
    assert v.passed


def test_equidist_beatty():
    rep, v = equidist_along("t^(3/2)", BeattyTime("phi"), "sqrt2", 3, 10**7)
    assert v.passed and rep.sup <= 0.05
    assert all(abs(f - 0.5) <= 0.01 for f in rep.residues[2])


# -- joint factorization -------------------------------------------------------------------

def test_joint_identity_queries():
    _, v = joint_factorization_test("t^(3/2)", "sqrt2", IDENT, IDENT, 10**4)
    assert v.value == 1 and v.reference == 1 and v.extra["deviation"] == 0


def test_joint_factorization():
    (joint, c1, c2), v = joint_factorization_test("t^(3/2)", "sqrt2", HERM, HERM, 10**7)
    assert abs(joint.final) <= 0.05 and abs(c1.final * c2.final) <= 0.05
    assert v.passed


def test_joint_rational_alpha_refused():
    with pytest.raises(HypothesisUnmet):
        joint_factorization_test("t^(3/2)", "3/2", HERM, HERM, 1000)


# -- floor sequences --------------------------------------------------------------------------

def test_floor_identity_query():
    s, v = floor_sequence_correlation("t^(3/2)", "sqrt2", IDENT, 10**4)
    assert s.final == 1


def test_floor_mean_and_stability():
    s, v = floor_sequence_correlation("t^(3/2)", "sqrt2", CorrelationQuery((0,), (1,)), 10**7)
    assert abs(s.final) <= 0.05 and v.passed
    s, v = floor_sequence_correlation("t^(3/2)", "sqrt2", HERM, 10**7)
    assert v.passed and v.extra["drift"] <= 0.05 and v.extra["crosscheck"] <= 1e-12


def test_floor_crosscheck():
    assert floor_crosscheck("t^(3/2)", "sqrt2", np.arange(2, 10**5, 7)) <= 1e-12


# -- sources -----------------------------------------------------------------------------------

def test_make_source_variants():
    n = np.arange(2, 100)
    a = make_source("t^(3/2)")(n)
    b = make_source({"expr": "t^(3/2)", "scale": "1"})(n)
    assert np.array_equal(a, b)
    w = make_source({"weight": {"kind": "bernoulli", "seed": 3}})(n)
    assert set(np.unique(w.real).tolist()) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        make_source(42)
