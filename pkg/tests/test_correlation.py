import cmath
import math

import numpy as np
import pytest

from flab._parallel import set_threads
from flab.averaging import AveragingScheme, PhaseSource
from flab.correlation import (CorrelationQuery, correlation_series_table, correlation_table,
                              empirical_correlation, exhaustive_queries, joint_correlation, net_key,
                              net_vector_sweep, query_from_net, summary_json, summary_record,
                              translation_class)
from flab.hardy import ExactCoefficient, parse

T32 = PhaseSource(parse("t^(3/2)"))
SQ2 = PhaseSource(parse("sqrt2*t^2"))
E2SQ2 = cmath.exp(2j * math.pi * 2 * math.sqrt(2))
SECOND_DIFF = CorrelationQuery((2, 1, 1, 0), (1, -1, -1, 1))
HERM = CorrelationQuery((1, 0), (1, -1))


def full(N, **kw):
    return AveragingScheme.full(N, **kw)


# -- queries --------------------------------------------------------------------

def test_query_invariants():
    for bad in [((), ()), ((0,) * 9, (1,) * 9), ((65,), (1,)), ((0, 1), (1,)), ((0,), (2,))]:
        with pytest.raises(ValueError):
            CorrelationQuery(*bad)
    with pytest.raises(ValueError):
        CorrelationQuery((0,), (1,), 0)


def test_query_net_and_round_trip():
    assert SECOND_DIFF.net() == {0: 1, 1: -2, 2: 1}
    assert CorrelationQuery((0, 0), (1, -1)).net() == {}
    assert query_from_net(SECOND_DIFF.net()).net() == SECOND_DIFF.net()
    q = CorrelationQuery((3, -1), (1, 1), 2)
    assert CorrelationQuery.from_dict(q.as_dict()) == q
    assert q.folded().shifts == (6, -2)
    assert str(SECOND_DIFF) == "((2,1,1,0),(+,-,-,+))"


def test_translation_class():
    rep, t = translation_class(net_key(CorrelationQuery((3, 5), (1, -1))))
    assert rep == ((0, 1), (2, -1)) and t == 3


# -- empirical_correlation --------------------------------------------------------

def test_identity_query_is_exactly_one():
    for src in (T32, SQ2):
        s = empirical_correlation(src, CorrelationQuery((0, 0), (1, -1)), full(50000))
        assert all(v == 1.0 for v in s.values)


def test_constant_second_difference():
    s = empirical_correlation(SQ2, SECOND_DIFF, full(10**5))
    assert abs(E2SQ2 - complex(0.4723, -0.8815)) < 1e-3
    for v in s.values:
        assert abs(v - E2SQ2) <= 1e-12


def test_weyl_first_difference_small():
    s = empirical_correlation(T32, HERM, full(10**7))
    assert abs(s.final) <= 0.05


def test_brute_force_agreement():
    N = 3000
    q = CorrelationQuery((-2, 0, 3), (1, -1, 1), 2)
    s = empirical_correlation(T32, q, full(N, checkpoints=[N]))
    # the average starts where every index is >= 2
    ms = np.arange(2 + 4, N + 1)
    ref = np.mean(T32(ms - 4) * np.conj(T32(ms)) * T32(ms + 6))
    assert abs(s.final - ref) <= 1e-12


def test_conjugation_symmetry_exact():
    for q in [HERM, SECOND_DIFF, CorrelationQuery((0, 2, 5), (1, 1, -1))]:
        a = empirical_correlation(T32, q, full(200000)).values
        b = empirical_correlation(T32, q.conjugate(), full(200000)).values
        assert all(x == y.conjugate() for x, y in zip(a, b))


def test_shift_invariance():
    N = 10**6
    for q in [HERM, SECOND_DIFF, CorrelationQuery((0, 1, 3), (1, 1, -1))]:
        a = empirical_correlation(T32, q, full(N)).final
        b = empirical_correlation(T32, q.translate(1), full(N)).final
        assert abs(a - b) <= 1e-4
        assert abs(a - b) <= 2 * len(q.shifts) * 1 * q.dilation / N  # boundary terms only


def test_hermitian():
    N = 10**6
    for h in (1, 3, 7):
        a = empirical_correlation(T32, CorrelationQuery((h, 0), (1, -1)), full(N)).final
        b = empirical_correlation(T32, CorrelationQuery((0, h), (1, -1)), full(N)).final
        assert abs(a.conjugate() - b) <= 2 * h / N + 1e-15


def test_thread_independence():
    qs = exhaustive_queries(2, 2)
    out = []
    for th in (1, 4):
        set_threads(th)
        out.append([s.values for s in correlation_series_table(T32, qs, full(300000))])
    set_threads(0)
    assert out[0] == out[1]


# -- correlation_table ------------------------------------------------------------

def test_table_empty_and_singleton():
    assert correlation_table(T32, [], full(1000)) == []
    (q, v), = correlation_table(T32, [HERM], full(10**5))
    assert q == HERM and v == empirical_correlation(T32, HERM, full(10**5)).final


def test_table_matches_individual_calls_bitwise():
    qs = exhaustive_queries(4, 5)
    picked = qs[::97]
    table = dict(correlation_table(T32, qs, full(10**6)))
    for q in picked:
        assert table[q] == empirical_correlation(T32, q, full(10**6)).final


def test_net_vector_sweep_matches_direct():
    qs = exhaustive_queries(3, 3)
    keys = sorted({net_key(q) for q in qs})
    sw = net_vector_sweep(T32, keys, full(50000))
    assert sw.n_classes < len(keys)
    for key in keys[::11]:
        direct = empirical_correlation(T32, query_from_net(dict(key)), full(50000)).final
        assert abs(sw.value(key) - direct) <= 1e-13


def test_summary_json():
    rec = summary_record(HERM, empirical_correlation(T32, HERM, full(1000)))
    assert set(rec) == {"query", "value_re", "value_im", "N"}
    assert '"N": 1000' in summary_json([rec])


# -- joint_correlation ------------------------------------------------------------

def test_joint_single_source_equals_empirical():
    a = joint_correlation([T32], [SECOND_DIFF], full(10**5)).values
    assert a == empirical_correlation(T32, SECOND_DIFF, full(10**5)).values


def test_joint_identity_queries():
    src2 = PhaseSource(parse("t^(3/2)"), ExactCoefficient.of("sqrt2"))
    ident = CorrelationQuery((0, 0), (1, -1))
    assert joint_correlation([T32, src2], [ident, ident], full(10**4)).final == 1.0


def test_joint_mixed_phase_small():
    src2 = PhaseSource(parse("t^(3/2)"), ExactCoefficient.of("sqrt2"))
    v = joint_correlation([T32, src2], [HERM, CorrelationQuery((0,), (1,))], full(10**7)).final
    assert abs(v) <= 0.05


def test_joint_source_count():
    with pytest.raises(ValueError):
        joint_correlation([T32] * 5, [HERM] * 5, full(1000))
    with pytest.raises(ValueError):
        joint_correlation([T32, T32], [HERM], full(1000))
