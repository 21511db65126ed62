import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import reductions as rd
from artifact import relations as rl
from artifact import seqcore as sc

EQ, NE = rl.EQUIVALENT, rl.NOT_EQUIVALENT


def test_e0_examples():
    v = rl.decide(rl.E0(), sc.Constant(0), sc.TableThenRule((1, 1), sc.Constant(0)))
    assert v.outcome == EQ and v.constant == 2


def test_linf_examples():
    v = rl.decide(rl.LInf(), sc.Linear(1, 0), sc.Linear(1, 5))
    assert v.outcome == EQ and v.constant == 5
    assert rl.decide(rl.LInf(), sc.Linear(1, 0), sc.Linear(2, 0)).outcome == NE


def test_etbar_example():
    t = sc.Linear(1, 0)
    v = rl.decide(rl.ETbar(t), sc.Constant(0), sc.indicator_of([0]))
    assert v.outcome == EQ and v.constant == 0


def test_seteq_example():
    x = sc.ResidueInterleave((sc.Constant(1), sc.Constant(2)))
    y = sc.TableThenRule((2,), sc.ResidueInterleave((sc.Constant(1), sc.Constant(2))))
    assert rl.decide(rl.SetEq(), x, y).outcome == EQ


def test_product_examples():
    z = sc.Constant(0)
    assert rl.decide_product([z], [sc.TableThenRule((1,), z)]).outcome == EQ
    alt = sc.ResidueInterleave((sc.Constant(0), sc.Constant(1)))
    comp = sc.ResidueInterleave((sc.Constant(1), sc.Constant(0)))
    assert rl.decide_product([alt], [comp]).outcome == NE
    v = rl.decide_product([z, z, alt], [z, z, comp])
    assert v.outcome == NE and "2" in str(v.witness) + v.note
    with pytest.raises(ValueError):
        rl.decide_product([z], [z, z])


def test_witness_bounds():
    assert rl.witness_bound(rl.LInf(), sc.Linear(1, 0), sc.Linear(1, 5)) == 5
    b = sc.Linear(1, 1)
    x = sc.Constant(Fraction(1, 2))
    assert rl.witness_bound(rl.LInfRestricted(b), x, x) == 0
    X = rl.RealPoints(sc.identity())
    assert rl.witness_bound(rl.LInfMetric(X), sc.Constant(0), sc.Constant(3)) == 3
    with pytest.raises(ValueError):
        rl.witness_bound(rl.LInf(), sc.Linear(1, 0), sc.Linear(2, 0))


def test_carrier_violations():
    with pytest.raises(rl.CarrierError):
        rl.decide(rl.E0(), sc.Constant(2), sc.Constant(0))
    B = rl.TwoPoint(sc.Constant(1))
    with pytest.raises(rl.CarrierError):
        rl.decide(rl.EBbar(B), sc.Constant(Fraction(1, 2)), sc.Constant(0))


def test_metric_validation():
    X = rl.RealPoints(sc.Geometric(1, 2))
    rl.validate_metric(X)
    with pytest.raises(Exception):
        rl.metric_from_json({"kind": "FinitePrototype",
                             "params": {"labels": ["a", "b", "c"], "table": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}})


SAMPLERS = {
    "E0": (rl.E0(), rd.random_binary_pair),
    "E1": (rl.E1(), rd.random_fibered_pair),
    "LInf": (rl.LInf(), rd.random_real_pair),
    "ETbar": (rl.ETbar(sc.identity()), rd.random_binary_pair),
    "LInfMetric": (rl.LInfMetric(rl.RealPoints(sc.identity())), rd.random_natural_pair),
    "FMetric": (rl.FMetric(rl.RealPoints(sc.identity())), rd.random_natural_pair),
}


@pytest.mark.parametrize("name", sorted(SAMPLERS))
def test_reflexive_symmetric_and_horizon_stable(name):
    rel, sampler = SAMPLERS[name]
    rng = random.Random(11)
    for _ in range(500 if name != "FMetric" else 100):
        x, y = sampler(rng)
        if x is None or y is None:
            continue
        assert rl.decide(rel, x, x, 500).outcome == EQ
        v = rl.decide(rel, x, y, 500)
        assert rl.decide(rel, y, x, 500).outcome == v.outcome
        if v.definite:
            assert rl.decide(rel, x, y, 1000).outcome == v.outcome


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_linf_constants_compose(seed):
    rng = random.Random(seed)
    x, y = rd.random_real_pair(rng)
    z = sc.add(y, sc.Constant(rng.randint(-3, 3)))
    if z is None:
        return
    vxy, vyz, vxz = (rl.decide(rl.LInf(), a, b) for a, b in ((x, y), (y, z), (x, z)))
    if vxy.equivalent and vyz.equivalent:
        assert vxz.equivalent and vxz.constant <= vxy.constant + vyz.constant


def test_ebbar_agrees_with_linf_on_products():
    B = rl.ArithmeticGrid(sc.Constant(1), sc.identity())
    rng = random.Random(3)
    checked = 0
    for _ in range(400):
        x, y = rd.random_box_pair(rng)
        if x is None or y is None or not (B.contains(x) and B.contains(y)):
            continue
        a, b = rl.decide(rl.EBbar(B), x, y), rl.decide(rl.LInf(), x, y)
        if a.definite and b.definite:
            assert a.outcome == b.outcome
            checked += 1
        if checked >= 200:
            break
    assert checked >= 200
