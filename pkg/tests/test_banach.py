import itertools
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import banach as bn
from artifact import seqcore as sc


def test_norm_examples():
    assert bn.lp_norm((1, -1), 1) == 2
    assert bn.lp_norm((3, 4), 2) == 5
    assert bn.sum_norm([(1, (1, 1)), (2, (3, 4))]) == pytest.approx(math.sqrt(29), abs=1e-15)
    assert bn.lp_norm((1e200, 1e200), 3) == pytest.approx(1e200 * 2 ** (1 / 3))
    with pytest.raises(ValueError):
        bn.lp_norm((1,), 0.5)


def brute_type_ratio(p, q, rows):
    # plain loops over every sign pattern, independent of the vectorized path
    tot = 0.0
    pats = list(itertools.product((1, -1), repeat=len(rows)))
    for eps in pats:
        s = [sum(e * r[k] for e, r in zip(eps, rows)) for k in range(len(rows[0]))]
        tot += sum(abs(v) ** q for v in s) ** (2 / q)
    den = sum(sum(abs(v) ** q for v in r) ** (p / q) for r in rows) ** (1 / p)
    return math.sqrt(tot / len(pats)) / den


def test_type_ratio_examples():
    assert bn.type_ratio_exact(1.5, [bn.LpVector(3, (1, 2, -1))]) == pytest.approx(1, abs=1e-15)
    for n in range(2, 9):
        assert abs(bn.type_ratio_exact(2, bn.unit_basis(1, n)) - math.sqrt(n)) < 1e-12
        assert abs(bn.type_ratio_exact(2, bn.unit_basis(2, n)) - 1) < 1e-12


@pytest.mark.parametrize("q", [1, 1.5])
def test_unit_basis_meets_lower_bound(q):
    for n in range(1, 13):
        want = n ** max(0.0, 1 / q - 1 / 2)
        assert abs(bn.type_ratio_exact(2, bn.unit_basis(q, n)) - want) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_type_ratio_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, q, p = 5, [1.0, 1.5, 2.0, 3.0, 1.2][seed], [1.0, 1.5, 2.0, 1.7, 1.3][seed]
    rows = rng.standard_normal((n, 4)).tolist()
    got = bn.type_ratio_exact(p, [bn.LpVector(q, tuple(r)) for r in rows])
    assert got == pytest.approx(brute_type_ratio(p, q, rows), rel=1e-12)


def test_mc_estimate_is_close_and_search_is_monotone():
    vecs = bn.unit_basis(1.5, 8)
    exact = bn.type_ratio_exact(2, vecs)
    assert bn.type_ratio_mc(2, vecs, 20000, seed=1) == pytest.approx(exact, rel=0.02)
    a = bn.type_constant_search(2, 1.5, 6, 2, seed=3)
    b = bn.type_constant_search(2, 1.5, 6, 8, seed=3)
    assert bn.type_ratio_exact(2, bn.unit_basis(1.5, 6)) <= a <= b


def test_type_bounds_examples():
    assert bn.type_bounds(2, 1, 4) == (2, 2)
    assert bn.type_bounds(1.5, 1.5, 7, c=3) == (1, 3 * math.sqrt(1.5))
    lo, _ = bn.type_bounds(2, 1.5, 9)
    assert lo == pytest.approx(9 ** (1 / 6), rel=1e-15)
    with pytest.raises(ValueError):
        bn.type_bounds(2, 1, 5, k=4)


def test_type_report_is_consistent():
    r = bn.type_report(2, 1, 6)
    assert r.exact and r.consistent() and r.seed is None
    assert r.lower <= r.value * (1 + 1e-12)
    assert r.value <= r.upper * (1 + 1e-12)


def test_bm_examples():
    assert bn.bm_distance_lp(1.7, 1.7, 9) == 1
    assert bn.bm_distance_lp(1, 2, 4) == 2
    w = bn.bm_witness_check(1, 2, 4)
    assert w.passed and w.product == pytest.approx(2, rel=1e-12)
    w = bn.bm_witness_check(1.5, 2, 8)
    assert w.passed and w.expected == pytest.approx(8 ** (1 / 6))


def test_sphere_ascent_never_exceeds_closed_form():
    for src, dst, n in ((2, 1, 5), (1.5, 1, 4), (3, 1.2, 3)):
        got = bn.sphere_ascent(src, dst, n, restarts=16)
        exact = bn.identity_norm_exact(src, dst, n)
        assert got <= exact * (1 + 1e-9)
        assert got == pytest.approx(exact, rel=1e-3)


def test_distortion_bound_examples():
    assert bn.distortion_lower_bound(1.5, 1.5, 10) == pytest.approx(1 / math.sqrt(2))
    want = 2 ** (10 * (1 / 1.2 - 1 / 1.8)) / math.sqrt(2)
    assert bn.distortion_lower_bound(1.2, 1.8, 2 ** 10) == pytest.approx(want, rel=1e-12)
    vals = [bn.distortion_lower_bound(1.1, 1.9, n) for n in (1, 2, 4, 8, 16)]
    assert vals == sorted(vals)


def test_growth_construction_passes_recheck():
    ivs = [(F(11, 10), F(6, 5)), (F(13, 10), F(7, 5)), (F(3, 2), F(8, 5)), (F(17, 10), F(9, 5))]
    e = bn.build_thm41_params(ivs)
    assert bn.check_growth(ivs, e)
    assert all(x >= i for i, x in enumerate(bn.divergence_exponents(ivs, e)))
    with pytest.raises(ValueError):
        bn.check_intervals([(F(3, 2), F(8, 5)), (F(11, 10), F(6, 5))])


def test_dimension_schedule():
    prm = bn.build_thm52(sc.Linear(1, 1))
    assert [prm.log2_n(i) for i in range(3)] == [1, 4, 12]
    assert prm.n(1) == 16
    for i in range(21):
        assert 2 * prm.log2_n(i) <= prm.log2_n(i + 1)
        assert prm.log_ratio(i) == 1
    lo, hi = prm.interval(0)
    assert prm.sigma(0, 0) == lo and prm.sigma(0, 1) == hi
    with pytest.raises(Exception):
        bn.build_thm52(sc.Constant(3))


def test_equal_inputs_give_equal_spaces():
    prm = bn.build_thm52(sc.Linear(1, 1))
    x = sc.Constant(F(1, 2))
    assert prm.space(x).blocks(6) == prm.space(x).blocks(6)
    assert bn.uh_criterion(prm.space(x), prm.space(x)).status == bn.HOLDS


def test_uh_examples():
    inv = sc.Geometric(F(1, 2), F(1, 2))
    r = bn.uh_criterion(inv, inv, sc.identity())
    assert r.status == bn.HOLDS and r.C == 1
    prm = bn.build_thm52(sc.Linear(1, 1))
    r = bn.uh_criterion(prm.space(sc.Constant(0)), prm.space(sc.identity()))
    assert r.status == bn.FAILS and r.witness
    r = bn.uh_criterion(prm.space(sc.Constant(0)), prm.space(sc.Constant(1)))
    assert r.status == bn.HOLDS and r.log2_C == F(1, 4)


inv_exps = st.one_of(
    st.fractions(F(1, 2), 1, max_denominator=16).map(sc.Constant),
    st.tuples(st.fractions(F(1, 8), F(1, 4), max_denominator=8), st.sampled_from([F(1, 2), F(1, 3)])).map(
        lambda ar: sc.Geometric(ar[0], ar[1])),
)


@settings(max_examples=50, deadline=None)
@given(inv_exps, inv_exps, inv_exps, st.sampled_from([sc.identity(), sc.Constant(8), sc.Linear(2, 1)]))
def test_uh_constants_compose(a, b, c, log2_n):
    r1, r2, r3 = (bn.uh_criterion(u, v, log2_n) for u, v in ((a, b), (b, c), (a, c)))
    if r1.status == bn.HOLDS and r2.status == bn.HOLDS:
        assert r3.status == bn.HOLDS
        assert r3.log2_C <= r1.log2_C + r2.log2_C
