import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import classify as cl
from artifact import reductions as rd
from artifact import relations as rl
from artifact import seqcore as sc


def test_clamp_affine_examples():
    b = Fraction(3)
    assert rd.clamp_affine(Fraction(-5), b) == 0
    assert rd.clamp_affine(Fraction(-3), b) == 0
    assert rd.clamp_affine(Fraction(1), b) == 2
    assert rd.clamp_affine(Fraction(7), b) == 3


@settings(max_examples=300, deadline=None)
@given(st.fractions(-20, 20), st.fractions(-20, 20), st.fractions(Fraction(1, 4), 20))
def test_clamp_is_a_contraction(s, t, b):
    assert abs(rd.clamp_affine(s, b) - rd.clamp_affine(t, b)) <= abs(s - t)


def test_clamp_grid_matches_formula():
    x, b = sc.Linear(Fraction(1, 2), -3), sc.Linear(1, 1)
    g = rd.lemma51_map(x, b)
    assert all(g.value(n) == rd.lemma51_formula(x, b, n) for n in range(300))


def test_clamp_grid_rejects_bad_scale():
    with pytest.raises(rl.CarrierError):
        rd.lemma51_map(sc.Constant(0), sc.Constant(1))


def test_splice_family_matches_formula():
    xs = [sc.Constant(1), sc.ResidueInterleave((sc.Constant(0), sc.Constant(1)))]
    fam = rd.lemma21_map(xs)
    for n in range(40):
        assert fam.value(n).prefix(24) == rd.lemma21_formula(xs, n)


def test_splice_partner_agrees_with_brute_search():
    xs = [sc.Constant(1), sc.Constant(0)]
    ys = [sc.TableThenRule((0,), sc.Constant(1)), sc.Constant(0)]
    fx, fy = rd.lemma21_map(xs), rd.lemma21_map(ys)
    assert fx.decide_pair(rl.SetEq(), fy, 200).outcome == rl.EQUIVALENT
    for n in range(12):
        m = fx.partner(n, fy, 0)
        assert fy.value(m).prefix(30) == fx.value(n).prefix(30)
        assert rd.brute_partner(fx, fy, n, m + 1, 30) is not None


def test_path_enumeration_matches_brute_force():
    paths = rd.brute_paths(5)
    assert [rd.path_unrank(i) for i in range(len(paths))] == list(paths)
    assert all(rd.path_rank(p) == i for i, p in enumerate(paths))
    with pytest.raises(ValueError):
        rd.path_rank((0, 2))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30))
def test_dwell_path_realizes_distance(a, b):
    p = rd.dwell_path(a, b)
    assert all(abs(u - v) <= 1 for u, v in zip(p, p[1:]))
    assert abs(rd.path_at(p, a) - rd.path_at(p, b)) == abs(a - b)
    assert rd.path_unrank(rd.path_rank(p)) == p


def test_finite_ladder_g_after_h_is_identity():
    t = sc.ResidueInterleave((sc.Constant(0), sc.Constant(1), sc.Linear(3, 2)))
    c = cl.classify_Et(t)
    maps = rd.thm62_maps(t, c)
    assert maps["case"] == "finite_ladder"
    top = c.certificate["ladder"][-1]
    idx = rd.residual_enumeration(t, top, 20)
    rng = random.Random(5)
    for _ in range(20):
        y = rd.random_binary(rng)
        back = maps["g"](maps["h"](y))
        assert back.prefix(60) == y.prefix(60)
        x = rd.random_binary(rng)
        assert maps["g"](x).prefix(20) == [x.value(i) for i in idx]


def test_residual_outside_residue_classes_is_unsupported():
    t = sc.ResidueInterleave((sc.Constant(0), sc.identity()))
    with pytest.raises(rl.UnsupportedError):
        rd.thm62_maps(t, cl.classify_Et(t))


def test_forged_certificate_is_rejected():
    t = sc.Linear(1, 0)
    forged = cl.Classification(cl.SMOOTH, {"input": sc.to_json(t), "case": "bounded", "bound": 1})
    with pytest.raises(rl.CarrierError):
        rd.thm62_maps(t, forged)


def test_every_family_has_a_reduction():
    names = rd.reduction_names()
    assert len(names) == 15
    for fam in rd.FAMILIES:
        assert any(n == fam or n.startswith(fam + "_") for n in names)


@pytest.mark.parametrize("name", rd.reduction_names())
def test_verify_short_run(name):
    rep = rd.verify_reduction(name, 40, seed=3)
    assert rep.ok, rep.records[:3]


@pytest.mark.parametrize("name", rd.reduction_names())
def test_mutations_are_caught(name):
    assert not rd.verify_reduction(name, 20, seed=3, mutation=("value", 5)).ok
    assert not rd.verify_reduction(name, 20, seed=3, mutation=("shift",)).ok


def test_verify_is_deterministic():
    a = rd.verify_reduction("lemma51", 30, seed=9, keep_records=True).to_json()
    b = rd.verify_reduction("lemma51", 30, seed=9, keep_records=True).to_json()
    assert a == b


def test_fibered_ladder_f_is_a_prefix_bijection():
    t = sc.FiberedByUnpairFirst(sc.identity())
    maps = rd.thm62_maps(t, cl.classify_Et(t))
    rng = random.Random(2)
    for _ in range(10):
        x = rd.random_fibered_binary(rng)
        assert maps["f_inverse"](maps["f"](x)).prefix(1000) == x.prefix(1000)


def test_set_family_cases():
    smooth = rl.TwoPoint(sc.Constant(1))
    assert rd.thm65_maps(smooth, cl.classify_EB(smooth)) == {"case": "bounded"}
    grid = rd.grid_family()
    assert rd.thm65_maps(grid, cl.classify_EB(grid))["case"] == "unbounded_classes"
    two = rl.TwoPoint(sc.Geometric(1, 2))
    maps = rd.thm65_maps(two, cl.classify_EB(two))
    assert maps["case"] == "gap_divergence"
    with pytest.raises(rl.CarrierError):
        rd.thm65_maps(two, cl.classify_EB(grid))
