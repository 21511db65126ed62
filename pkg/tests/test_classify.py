import copy
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import classify as cl
from artifact import relations as rl
from artifact import seqcore as sc

ET_CANON = [
    (sc.Constant(1), cl.SMOOTH),
    (sc.Linear(1, 0), cl.E0_CLASS),
    (sc.ResidueInterleave((sc.Constant(0), sc.identity())), cl.E0_CLASS),
    (sc.FiberedByUnpairFirst(sc.identity()), cl.E1_CLASS),
]

EB_CANON = [
    (rl.TwoPoint(sc.Constant(1)), cl.SMOOTH),
    (rl.TwoPoint(sc.Geometric(1, 2)), cl.E0_CLASS),
    (rl.TwoPoint(sc.FiberedByUnpairFirst(sc.Geometric(1, 2))), cl.E1_CLASS),
    (rl.ArithmeticGrid(sc.Constant(1), sc.identity()), cl.LINF_CLASS),
]

METRIC_CANON = [
    (rl.RealPoints(sc.ResidueInterleave((sc.identity(), sc.Linear(-1, -1)))), cl.LINF_CLASS),
    (rl.RealPoints(sc.Geometric(1, 2)), cl.E1_CLASS),
    (rl.DisjointBlocks(sc.identity(), sc.Constant(2)), cl.LINF_CLASS),
]


@pytest.mark.parametrize("t,want", ET_CANON)
def test_et_canon(t, want):
    c = cl.classify_Et(t)
    assert c.cls == want
    assert cl.check_certificate(t, c)


@pytest.mark.parametrize("B,want", EB_CANON)
def test_eb_canon(B, want):
    c = cl.classify_EB(B)
    assert c.cls == want
    assert cl.check_certificate(B, c)


@pytest.mark.parametrize("X,want", METRIC_CANON)
def test_metric_canon(X, want):
    c = cl.classify_metric(X)
    assert c.cls == want
    assert cl.check_certificate(X, c)


def test_fibered_ladder_is_the_naturals():
    c = cl.classify_Et(sc.FiberedByUnpairFirst(sc.identity()))
    assert c.certificate["ladder_prefix"] == list(range(8))


def test_powers_of_two_component_diameters():
    c = cl.classify_metric(rl.RealPoints(sc.Geometric(1, 2)))
    assert c.certificate["K"] == {"1": 0, "2": 1, "4": 3, "8": 7}


def test_negative_weights_rejected():
    with pytest.raises(rl.CarrierError):
        cl.classify_Et(sc.Linear(-1, 0))


def test_tampered_ladder_fails_check():
    t = sc.ResidueInterleave((sc.Constant(0), sc.identity()))
    c = cl.classify_Et(t)
    cert = copy.deepcopy(c.certificate)
    cert["ladder"] = [1]
    assert not cl.check_certificate(t, cl.Classification(c.cls, cert))
    t = sc.FiberedByUnpairFirst(sc.identity())
    c = cl.classify_Et(t)
    cert = copy.deepcopy(c.certificate)
    cert["ladder_prefix"][3] = 4
    assert not cl.check_certificate(t, cl.Classification(c.cls, cert))


def test_certificate_for_wrong_descriptor_fails():
    c = cl.classify_Et(sc.Linear(1, 0))
    assert not cl.check_certificate(sc.Linear(2, 0), c)
    c = cl.classify_EB(rl.TwoPoint(sc.Geometric(1, 2)))
    assert not cl.check_certificate(rl.TwoPoint(sc.Geometric(1, 3)), c)


def test_wrong_class_label_fails():
    t = sc.Constant(1)
    c = cl.classify_Et(t)
    assert not cl.check_certificate(t, cl.Classification(cl.E0_CLASS, c.certificate))


def test_tampered_component_bound_fails():
    X = rl.RealPoints(sc.Geometric(1, 2))
    c = cl.classify_metric(X)
    cert = copy.deepcopy(c.certificate)
    cert["K"]["4"] = 1
    assert not cl.check_certificate(X, cl.Classification(c.cls, cert))


def test_classification_json_roundtrip():
    c = cl.classify_Et(sc.Linear(1, 0))
    assert cl.classification_from_json(c.to_json()) == c
    with pytest.raises(sc.DescriptorError):
        cl.classification_from_json({"class": "E7"})


table = st.lists(st.integers(0, 50), min_size=1, max_size=6).map(tuple)


@settings(max_examples=40, deadline=None)
@given(table, st.sampled_from(range(len(ET_CANON))))
def test_et_class_ignores_finite_prefix(prefix, k):
    t, want = ET_CANON[k]
    c = cl.classify_Et(sc.TableThenRule(prefix, t))
    assert c.cls == want
    assert cl.check_certificate(sc.TableThenRule(prefix, t), c)


def family(log2_t, log2_n, gap=sc.Geometric(F(1, 16), F(1, 2)), kind="two_choice"):
    return cl.SumFamily(F(5, 8), sc.Geometric(F(1, 4), F(1, 2)), gap, log2_t, log2_n, kind)


def test_banach_family_examples():
    degenerate = family(sc.Constant(0), sc.identity(), gap=sc.Constant(0))
    bounded = family(sc.Constant(1), sc.Geometric(16, 2))
    growing = family(sc.Geometric(1, 2), sc.Geometric(16, 4))
    for F_, want in ((degenerate, cl.SMOOTH), (bounded, cl.SMOOTH), (growing, cl.E0_CLASS)):
        c = cl.classify_banach_family(F_)
        assert c.cls == want
        assert cl.check_certificate(F_, c)


def test_banach_family_constraint_violation():
    bad = cl.SumFamily(F(5, 8), sc.Constant(F(1, 4)), sc.Geometric(F(1, 16), F(1, 2)),
                       sc.Constant(1), sc.Geometric(16, 2))
    assert cl.check_family(bad)
    with pytest.raises(rl.CarrierError):
        cl.classify_banach_family(bad)


LOG2_T = [sc.Constant(0), sc.Constant(1), sc.Constant(3), sc.Geometric(1, 2), sc.Geometric(3, 2)]


def _gap(lt, m):
    # log2_n = 16 m 4^i, so gap = log2_t / log2_n stays a geometric descriptor
    if isinstance(lt, sc.Constant):
        return sc.Geometric(lt.c / (16 * m), F(1, 4)) if lt.c else sc.Constant(0)
    return sc.Geometric(lt.a / (16 * m), lt.r / 4)


@pytest.mark.parametrize("k", range(20))
def test_two_choice_family_matches_weight_class(k):
    lt, m = LOG2_T[k % 5], 2 ** (k // 5 + 1)
    fam = cl.SumFamily(F(5, 8), sc.Geometric(F(1, 4), F(1, 2)), _gap(lt, m), lt, sc.Geometric(16 * m, 4))
    assert cl.check_family(fam) == []
    t, _ = cl.induced_weights(fam)
    assert cl.classify_banach_family(fam).cls == cl.classify_Et(t).cls
