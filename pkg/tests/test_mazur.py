import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import banach as bn
from artifact import mazur as mz

EXPS = [1, 1.5, 2, 2.5, 3]


def close(a, b, atol):
    # truncated outputs may carry extra trailing coordinates
    k = max(len(a), len(b))
    return np.allclose(mz.pad(a, k), mz.pad(b, k), atol=atol)


def test_mazur_examples():
    for p in EXPS:
        for q in EXPS:
            assert mz.same(mz.mazur(p, q, [1, 0, 0]), [1, 0, 0])
    out = mz.mazur(2, 1, [1 / math.sqrt(2), 1 / math.sqrt(2)])
    assert np.allclose(out, [0.5, 0.5], atol=1e-15)
    assert bn.lp_norm(out, 1) == pytest.approx(1, abs=1e-15)
    assert mz.same(mz.mazur(2, 3, [0, 0]), [0, 0])
    assert mz.same(mz.mazur(1, 2, bn.LpVector(1, (0, -4))), [0, -4])


vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=64)
exps = st.floats(1, 3)


@settings(max_examples=300, deadline=None)
@given(vectors, exps, exps)
def test_mazur_is_norm_preserving(v, p, q):
    assert abs(bn.lp_norm(mz.mazur(p, q, v), q) - bn.lp_norm(v, p)) <= 1e-9 * max(1.0, bn.lp_norm(v, p))


@settings(max_examples=300, deadline=None)
@given(vectors, exps, exps)
def test_mazur_round_trip(v, p, q):
    back = mz.mazur_inverse(p, q, mz.mazur(p, q, v))
    assert np.max(np.abs(back - np.asarray(v))) <= 1e-9 * max(1.0, bn.lp_norm(v, p))


@settings(max_examples=100, deadline=None)
@given(vectors, exps, exps, st.floats(0.01, 100))
def test_mazur_is_homogeneous(v, p, q, lam):
    a = mz.mazur(p, q, lam * np.asarray(v))
    b = lam * mz.mazur(p, q, v)
    assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, lam * bn.lp_norm(v, p))


def test_psi_examples():
    a, b = mz.psi(1.5, 2.5, 2.2, ([0, 1], [1, 0, 0]))
    assert mz.same(a, [0, 1]) and mz.same(b, [1, 0, 0])
    assert mz.sum_norm_q([a, b], 2.2) == pytest.approx(2 ** (1 / 2.2), rel=1e-15)
    z = mz.psi(1.5, 2.5, 2.2, ([0, 0], [0, 0]))
    assert all(mz.same(v, [0]) for v in z)


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, exps, exps, exps, st.floats(0.01, 10))
def test_psi_round_trip_and_ball_scaling(a, b, pa, pb, q, lam):
    pair = mz.psi(pa, pb, q, (a, b))
    back = mz.psi_inverse(pa, pb, q, pair)
    scale = max(1.0, bn.lp_norm(a, pa), bn.lp_norm(b, pb))
    assert np.max(np.abs(back[0] - np.asarray(a))) <= 1e-9 * scale
    assert np.max(np.abs(back[1] - np.asarray(b))) <= 1e-9 * scale
    big = mz.psi(pa, pb, q, (lam * np.asarray(a), lam * np.asarray(b)))
    assert mz.sum_norm_q(big, q) == pytest.approx(lam * mz.sum_norm_q(pair, q), rel=1e-9, abs=1e-9)


def test_reindexing_round_trips():
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(13), rng.standard_normal(7)
    assert mz.same(mz.from_rows(mz.to_rows(u)), u)
    a, b = mz.deinterleave(mz.interleave(u, v))
    assert mz.same(a, u) and mz.same(b, v)
    a, b = mz.from_pair_rows(mz.to_pair_rows(u, v))
    assert mz.same(a, u) and mz.same(b, v)
    assert bn.lp_norm(mz.to_rows(u).ravel(), 2.5) == pytest.approx(bn.lp_norm(u, 2.5), rel=1e-15)


def test_quarter_turn_blocks_are_exact():
    assert mz.cos_sin(0.25) == (0.0, 1.0)
    J = mz.J2
    A = mz.block_A(0.25)
    assert np.array_equal(mz.block_B(0.25), J) and not mz.block_C(0.25).any()
    assert np.array_equal(A[:2, :2], J) and np.array_equal(A[2:, 2:], J)
    assert np.array_equal(mz.block_A(0), np.eye(4))


@pytest.mark.parametrize("tau", [0.1, 0.2, 0.3, 0.45])
def test_blocks_are_orthogonal(tau):
    A = mz.block_A(tau)
    assert np.allclose(A @ A.T, np.eye(4), atol=1e-15)


@pytest.fixture
def triple():
    rng = np.random.default_rng(1)
    return tuple(rng.standard_normal(8) for _ in range(3))


def test_V_endpoints(triple):
    u, v, w = triple
    out = mz.path_V(0, triple)
    assert all(mz.same(a, b) for a, b in zip(out, triple))
    out = mz.path_V(0.5, triple)
    assert all(mz.same(a, b) for a, b in zip(out, (u, w, v)))
    # both branch formulas meet at tau = 1/4
    lo = mz.path_V(0.25, triple)
    hi = mz.path_V(0.25 + 1e-300, triple)
    assert all(close(a, b, 1e-15) for a, b in zip(lo, hi))


def test_V_rejects_bad_lengths():
    with pytest.raises(ValueError):
        mz.path_V(0.1, (np.ones(6), np.ones(6), np.ones(6)))
    with pytest.raises(ValueError):
        mz.path_V(0.1, (np.ones(8), np.ones(4), np.ones(8)))


@pytest.mark.parametrize("tau", [0.07, 0.25, 0.31, 0.5])
def test_V_inverse(triple, tau):
    out = mz.path_V(tau, triple)
    back = mz.path_V(tau, out, inverse=True)
    assert all(close(a, b, 1e-12) for a, b in zip(back, triple))


def test_V_norm_bounds():
    for tau in np.linspace(0, 0.5, 21):
        assert mz.V_norm_exact_l2(tau, 16) == pytest.approx(1, abs=1e-12)
        for q in (1, 1.5, 3):
            s = mz.V_norm_sampled(tau, q, length=16, samples=4)
            assert s.sampled <= s.upper * (1 + 1e-12)
            assert s.upper <= 2 + 1e-12


def test_S_endpoints(triple):
    u, v, w = triple
    a, b = mz.path_S(0, triple)
    assert mz.same(a, mz.interleave(u, v)) and mz.same(b, w)
    a, b = mz.path_S(1, triple)
    assert mz.same(a, v) and mz.same(b, mz.interleave(u, w))


@pytest.mark.parametrize("tau", [0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.8, 1])
def test_S_inverse(triple, tau):
    back = mz.path_S_inverse(tau, mz.path_S(tau, triple))
    assert all(close(a, b, 1e-12) for a, b in zip(back, triple))


@pytest.mark.parametrize("q", [2.1, 2.5, 2.9])
def test_h_preserves_norm_and_inverts(q):
    rng = np.random.default_rng(int(q * 10))
    for _ in range(1000 if q == 2.5 else 200):
        x = tuple(rng.standard_normal((3, 4)) * rng.uniform(0.1, 5))
        tau = rng.uniform()
        y = mz.path_h(tau, q, x)
        assert abs(mz.sum_norm_q(y, q) - mz.sum_norm_q(x, q)) < 1e-9
        back = mz.path_h_inverse(tau, q, y)
        assert all(close(a, b, 1e-9) for a, b in zip(back, x))


def test_h_is_exact_at_isometric_times(triple):
    for tau in (0, 0.25, 0.5, 1):
        assert all(mz.same(a, b) for a, b in zip(mz.path_h(tau, 2.5, triple), mz.path_S(tau, triple, 2.5)))


def test_exponent_picker():
    for j in range(6):
        q = mz.anchor_exponent(j)
        assert 2 < q < 3 and not mz.in_dense_set(q)
        prev = None
        for n in range(12):
            p = mz.block_exponent(j, n)
            assert mz.in_dense_set(p) and 0 <= q - p < 2.0 ** -(n + 2)
            assert prev is None or p >= prev
            prev = p
    assert all(mz.in_dense_set(mz.residual_exponent(i)) for i in range(10))
    idx = {mz.block_index(j, n) for j in range(5) for n in range(5)} | {mz.residual_index(i) for i in range(5)}
    assert len(idx) == 30


def test_levels():
    assert [mz.alpha(n) for n in range(5)] == [0, 1, 3, 7, 15]
    assert [mz.level_of(t) for t in (0, 0.5, 1, 2.9, 3, 14.99)] == [0, 0, 1, 1, 2, 3]


@pytest.mark.parametrize("seed", range(3))
def test_seams_agree(seed):
    rng = np.random.default_rng(seed)
    x = mz.random_element(2, 6, 4, rng)
    for n in range(1, 5):
        assert mz.seam_discrepancy(x, n) < 1e-9


def test_zero_anchor_keeps_block_norms():
    rng = np.random.default_rng(4)
    x = mz.random_element(1, 5, 4, rng)
    x.u = [np.zeros(4)]
    y = mz.g_tilde(mz.alpha(2), x, 2)
    q = float(mz.anchor_exponent(0))
    pa, pb = (float(mz.block_exponent(0, n)) for n in (2, 3))
    before = mz.sum_norm_q([mz.mazur(pa, q, x.x[0][2]), mz.mazur(pb, q, x.x[0][3])], q)
    after = mz.sum_norm_q([mz.mazur(pa, q, y.x[0][2]), mz.mazur(pb, q, y.x[0][3])], q)
    assert after == pytest.approx(before, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0, 6.9), st.floats(0.05, 20))
def test_g_tilde_is_homogeneous(seed, t, lam):
    x = mz.random_element(2, 4, 4, np.random.default_rng(seed))
    a = mz.g_tilde(t, x.scaled(lam))
    b = mz.g_tilde(t, x).scaled(lam)
    assert mz.block_discrepancy(a, b) <= 1e-9 * max(1.0, lam)


def test_g_norm_preserves_norm():
    x = mz.random_element(2, 5, 4, np.random.default_rng(8))
    for t in (0, 0.3, 2, 5.5):
        assert mz.g_norm(t, x).norm() == pytest.approx(x.norm(), rel=1e-12)
    assert mz.phi(x).norm() == pytest.approx(x.norm(), rel=1e-12)


def test_element_json_round_trip():
    x = mz.random_element(1, 3, 4, np.random.default_rng(2))
    back = mz.TruncatedXAElement.from_json(x.to_json())
    assert mz.block_discrepancy(back, x) == 0
    bad = x.to_json()
    bad["u"] = [[1.0, 2.0, 3.0]]
    with pytest.raises(ValueError):
        mz.TruncatedXAElement.from_json(bad)


def test_identity_modulus_is_at_most_eps():
    grid = [2.0 ** -k for k in range(1, 8)]
    c = mz.modulus_estimate(lambda v: v, 1.0, grid, samples=500)
    assert all(w <= e * (1 + 1e-12) for e, w in c.rows())
    assert c.omega == sorted(c.omega)


def test_mazur_modulus_decays():
    grid = [2.0 ** -k for k in range(1, 11)]
    c = mz.modulus_estimate(lambda v: mz.mazur(1, 2, v), 1.0, grid, samples=2000, p_in=1, p_out=2)
    assert c.omega == sorted(c.omega)
    assert c.omega[0] < c.omega[-1] / 10


def test_h_lipschitz_constant_is_finite():
    est = mz.h_lipschitz_estimate(2.5, samples=400)
    assert 0 < est.K < 100
    assert mz.h_lipschitz_estimate(2.5, samples=800).K >= est.K
