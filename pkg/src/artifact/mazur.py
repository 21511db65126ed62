"""Mazur maps and the homeomorphism paths between l_q sums, at finite truncation.

Vectors are plain numpy arrays read as finitely supported elements of l_p; trailing
zeros carry no information, so lengths may change under the reindexing maps.
The reindexing l_q -> l_q(l_q) is the coordinate bijection given by Cantor pairing,
which makes every block map below an exact isometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .banach import LpVector, _exponent, lp_norm
from .seqcore import pair


# ---------------------------------------------------------------------------
# Mazur maps
# ---------------------------------------------------------------------------

def _coords(v) -> np.ndarray:
    if isinstance(v, LpVector):
        return v.array()
    return np.asarray(v, dtype=float)


def mazur(p, q, v) -> np.ndarray:
    """phi_{p,q}(v) = ||v||_p^(1-p/q) * sign(v_i)|v_i|^(p/q); maps 0 to 0."""
    p, q = _exponent(p), _exponent(q)
    a = _coords(v)
    nrm = lp_norm(a, p)
    if nrm == 0:
        return np.zeros_like(a)
    r = p / q
    # normalize first: the map is homogeneous, and unit vectors keep powers tame
    u = a / nrm
    return nrm * np.sign(u) * np.abs(u) ** r


def mazur_inverse(p, q, w) -> np.ndarray:
    return mazur(q, p, w)


def psi(p_a, p_b, q, pair_in):
    a, b = pair_in
    return mazur(p_a, q, a), mazur(p_b, q, b)


def psi_inverse(p_a, p_b, q, pair_in):
    a, b = pair_in
    return mazur(q, p_a, a), mazur(q, p_b, b)


def sum_norm_q(blocks: Sequence, q) -> float:
    """Norm of (x_1, ..., x_k) in the l_q-sum of copies of l_q."""
    q = _exponent(q)
    return lp_norm(np.array([lp_norm(b, q) for b in blocks]), q)


# ---------------------------------------------------------------------------
# Reindexing: D (vector -> rows), T (interleave), E (pair -> interleaved rows)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _pair_grid(rows: int, cols: int) -> np.ndarray:
    k = np.arange(rows)[:, None]
    m = np.arange(cols)[None, :]
    s = k + m
    return s * (s + 1) // 2 + m


@lru_cache(maxsize=None)
def _row_shape(length: int) -> tuple[int, int]:
    rows = 0
    while pair(rows, 0) < length:
        rows += 1
    cols = 0
    while pair(0, cols) < length:
        cols += 1
    return rows, cols


def trim(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    nz = np.flatnonzero(a)
    return a[: nz[-1] + 1] if nz.size else a[:0]


def pad(a, length: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if len(a) >= length:
        return a
    return np.concatenate([a, np.zeros(length - len(a))])


def same(a, b) -> bool:
    """Equality as finitely supported sequences (trailing zeros ignored)."""
    n = max(len(a), len(b))
    return bool(np.array_equal(pad(a, n), pad(b, n)))


def gap(a, b, q) -> float:
    n = max(len(a), len(b))
    return lp_norm(pad(a, n) - pad(b, n), q)


def to_rows(u, cols: Optional[int] = None) -> np.ndarray:
    """D: u -> ((Du)_0, (Du)_1, ...) with (Du)_k[m] = u[pair(k, m)]."""
    u = np.asarray(u, dtype=float)
    rows, c = _row_shape(len(u))
    cols = max(c, cols or 0)
    grid = _pair_grid(rows, cols)
    z = np.zeros((rows, cols))
    mask = grid < len(u)
    z[mask] = u[grid[mask]]
    return z


def from_rows(z: np.ndarray) -> np.ndarray:
    """Inverse of D on finitely supported row arrays."""
    rows, cols = z.shape
    if rows == 0 or cols == 0:
        return np.zeros(0)
    grid = _pair_grid(rows, cols)
    out = np.zeros(int(grid.max()) + 1)
    out[grid.ravel()] = z.ravel()
    return trim(out)


def interleave(a, b) -> np.ndarray:
    """T: (l_q + l_q)_q -> l_q, evens from a and odds from b."""
    n = max(len(a), len(b))
    out = np.zeros(2 * n)
    out[0::2] = pad(a, n)
    out[1::2] = pad(b, n)
    return out


def deinterleave(c):
    c = np.asarray(c, dtype=float)
    return c[0::2].copy(), c[1::2].copy()


def _stack(rows: Sequence[np.ndarray], count: int, cols: int) -> np.ndarray:
    z = np.zeros((count, cols))
    for i, r in enumerate(rows):
        z[i, : len(r)] = r
    return z


def to_pair_rows(a, b) -> np.ndarray:
    """E(a, b) = ((Da)_0, (Db)_0, (Da)_1, (Db)_1, ...)."""
    da, db = to_rows(a), to_rows(b)
    rows = max(da.shape[0], db.shape[0])
    cols = max(da.shape[1], db.shape[1])
    z = np.zeros((2 * rows, cols))
    z[0::2][: da.shape[0], : da.shape[1]] = da
    z[1::2][: db.shape[0], : db.shape[1]] = db
    return z


def from_pair_rows(z: np.ndarray):
    return from_rows(z[0::2]), from_rows(z[1::2])


# ---------------------------------------------------------------------------
# The operator path V_tau
# ---------------------------------------------------------------------------

J2 = np.array([[0.0, 1.0], [1.0, 0.0]])

_QUARTER_TURNS = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


def _quarter(tau) -> Optional[int]:
    x = 4 * tau
    if x == int(x):
        return int(x) % 4
    return None


def cos_sin(tau) -> tuple[float, float]:
    """(cos 2 pi tau, sin 2 pi tau), exact at multiples of a quarter turn."""
    k = _quarter(tau)
    if k is not None:
        return _QUARTER_TURNS[k]
    t = 2 * math.pi * float(tau)
    return math.cos(t), math.sin(t)


def block_B(tau) -> np.ndarray:
    c, s = cos_sin(tau)
    return np.array([[c * c, s * s], [s * s, c * c]])


def block_C(tau) -> np.ndarray:
    c, s = cos_sin(tau)
    cs = c * s
    return np.array([[-cs, cs], [cs, -cs]])


def block_A(tau) -> np.ndarray:
    b, c = block_B(tau), block_C(tau)
    return np.block([[b, c], [-c, b]])


def _check_tau(tau, hi) -> float:
    if not 0 <= tau <= hi:
        raise ValueError(f"tau must lie in [0, {hi}], got {tau}")
    return tau


def apply_V_rows(tau, z: np.ndarray, inverse: bool = False) -> np.ndarray:
    """V_tau on a row array: A+A+... for tau <= 1/4, J+A+A+... for tau in [1/4, 1/2].

    Rows are elements of l_q and the scalar matrix acts on every column alike.
    """
    _check_tau(tau, 0.5)
    a = block_A(tau)
    if inverse:
        a = a.T  # A_tau is orthogonal: B^2 + C^2 = I and BC = CB
    head = 0 if tau <= 0.25 else 2
    rows = z.shape[0]
    body = max(rows - head, 0)
    body = -(-body // 4) * 4
    out = np.zeros((head + body, z.shape[1]))
    out[:rows] = z
    if head:
        out[:2] = J2 @ out[:2]
    if body:
        blocks = out[head:].reshape(body // 4, 4, -1)
        out[head:] = np.einsum("ij,bjm->bim", a, blocks).reshape(body, -1)
    return out


def _triple_rows(u, v, w) -> np.ndarray:
    du = to_rows(u)
    cols = max(len(v), len(w), du.shape[1])
    return _stack([v, w, *du], 2 + du.shape[0], cols)


def _rows_triple(z: np.ndarray):
    return from_rows(z[2:]), trim(z[0]), trim(z[1])


def path_V(tau, triple, q=2.0, inverse: bool = False):
    """V_tau on (l_q + l_q + l_q)_q; the matrix does not depend on q."""
    _exponent(q)
    u, v, w = (np.asarray(x, dtype=float) for x in triple)
    n = len(u)
    if inverse:
        return _rows_triple(apply_V_rows(tau, _triple_rows(u, v, w), inverse))
    if len(v) != n or len(w) != n:
        raise ValueError("path_V expects three vectors of equal length")
    if n % 4:
        raise ValueError(f"truncation length {n} is not a multiple of 4")
    return _rows_triple(apply_V_rows(tau, _triple_rows(u, v, w), inverse))


def V_norm_bound(tau, q) -> float:
    """Riesz-Thorin bound ||M||_1^(1/q) ||M||_inf^(1-1/q) over the blocks of V_tau."""
    q = _exponent(q)
    a = np.abs(block_A(tau))
    col, row = a.sum(axis=0).max(), a.sum(axis=1).max()
    return max(1.0, float(col ** (1 / q) * row ** (1 - 1 / q)))


def V_norm_exact_l2(tau, length: int = 64) -> float:
    """Largest singular value of the truncated V_tau on l_2 (assembled column by column)."""
    n = length
    outs = []
    for k in range(3 * n):
        e = np.zeros(3 * n)
        e[k] = 1.0
        outs.append(path_V(tau, (e[:n], e[n:2 * n], e[2 * n:]), 2.0))
    lens = [max(len(o[i]) for o in outs) for i in range(3)]
    cols = [np.concatenate([pad(o[i], lens[i]) for i in range(3)]) for o in outs]
    return float(np.linalg.svd(np.array(cols).T, compute_uv=False)[0])


@dataclass
class VNormSample:
    tau: float
    q: float
    sampled: float
    upper: float


def V_norm_sampled(tau, q, length: int = 64, samples: int = 8, seed: int = 0) -> VNormSample:
    """Sampled sup of ||V_tau x|| / ||x||; basis vectors are always included."""
    rng = np.random.default_rng(seed)
    n = length
    probes = []
    for k in (0, n, 2 * n):
        e = np.zeros(3 * n)
        e[k] = 1.0
        probes.append(e)
    probes.extend(rng.standard_normal((samples, 3 * n)))
    best = 0.0
    for x in probes:
        trip = (x[:n], x[n:2 * n], x[2 * n:])
        y = path_V(tau, trip, q)
        best = max(best, sum_norm_q(y, q) / sum_norm_q(trip, q))
    return VNormSample(float(tau), float(q), best, V_norm_bound(tau, q))


# ---------------------------------------------------------------------------
# S_tau and the normalized homeomorphisms h_tau
# ---------------------------------------------------------------------------

def _isometric(tau) -> bool:
    """S_tau is a coordinate permutation at tau in {0, 1/4, 1/2, 1}."""
    if tau <= 0.5:
        return _quarter(tau) is not None
    return _quarter((2 * tau - 1) / 4) is not None


def path_S(tau, triple, q=2.0):
    """S_tau: (T(u_tau, v_tau), w_tau) up to 1/2, then U_tau S_{1/2}."""
    _check_tau(tau, 1.0)
    if tau <= 0.5:
        ut, vt, wt = path_V(tau, triple, q)
        return trim(interleave(ut, vt)), wt
    a, b = path_S(0.5, triple, q)
    z = apply_V_rows((2 * tau - 1) / 4, to_pair_rows(a, b))
    return from_pair_rows(z)


def path_S_inverse(tau, pair_in, q=2.0):
    _check_tau(tau, 1.0)
    a, b = (np.asarray(x, dtype=float) for x in pair_in)
    if tau > 0.5:
        z = apply_V_rows((2 * tau - 1) / 4, to_pair_rows(a, b), inverse=True)
        return path_S_inverse(0.5, from_pair_rows(z), q)
    ut, vt = deinterleave(a)
    z = _triple_rows(ut, vt, b)
    return _rows_triple(apply_V_rows(tau, z, inverse=True))


def _normalize(x_norm, y, q, exact: bool):
    if exact:
        return tuple(y)
    y_norm = sum_norm_q(y, q)
    if y_norm == 0:
        return tuple(y)
    return tuple(x_norm * b / y_norm for b in y)


def path_h(tau, q, triple):
    """h_tau(x) = ||x|| S_tau(x) / ||S_tau(x)||; norm preserving and homogeneous."""
    x_norm = sum_norm_q(triple, q)
    if x_norm == 0:
        n = max(len(t) for t in triple)
        return np.zeros(2 * n), np.zeros(n)
    return _normalize(x_norm, path_S(tau, triple, q), q, _isometric(tau))


def path_h_inverse(tau, q, pair_in):
    y_norm = sum_norm_q(pair_in, q)
    if y_norm == 0:
        n = max(len(t) for t in pair_in)
        return np.zeros(n), np.zeros(n), np.zeros(n)
    return _normalize(y_norm, path_S_inverse(tau, pair_in, q), q, _isometric(tau))


# ---------------------------------------------------------------------------
# Exponent data for X_A at truncation
# ---------------------------------------------------------------------------

def in_dense_set(p) -> bool:
    """The fixed dense set D: dyadic rationals strictly inside (2, 3)."""
    p = Fraction(p)
    d = p.denominator
    return 2 < p < 3 and d & (d - 1) == 0


def anchor_exponent(j: int) -> Fraction:
    """q_j = 2 + (j+1)/(2j+3); odd denominator keeps it outside D."""
    q = 2 + Fraction(j + 1, 2 * j + 3)
    assert not in_dense_set(q)
    return q


def block_exponent(j: int, n: int) -> Fraction:
    """p_<j,n>: q_j rounded down to the dyadic grid of step 2^-(n+2)."""
    scale = 1 << (n + 2)
    q = anchor_exponent(j)
    p = Fraction(math.floor(q * scale), scale)
    if not in_dense_set(p):
        raise ValueError(f"picked exponent {p} is not in D")
    return p


def residual_exponent(i: int) -> Fraction:
    return 2 + Fraction(2 * i + 1, 1 << (i + 2))


def block_index(j: int, n: int) -> int:
    """Global position of x_{j,n} among the D-exponents: I_j = {pair(j+1, n)}."""
    return pair(j + 1, n)


def residual_index(i: int) -> int:
    return pair(0, i)


def alpha(n: int) -> int:
    return (1 << n) - 1


def level_of(t) -> int:
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = 0
    while alpha(n + 1) <= t:
        n += 1
    return n


@dataclass
class TruncatedXElement:
    """The D-part: blocks x_{j,n} in l_{p<j,n>} and residual blocks in l_{p_i}."""
    x: list
    res: list = field(default_factory=list)

    @property
    def J(self) -> int:
        return len(self.x)

    @property
    def N(self) -> int:
        return len(self.x[0]) if self.x else 0

    def blocks(self):
        """(tag, exponent, vector) for every block, in a fixed order."""
        for j, row in enumerate(self.x):
            for n, v in enumerate(row):
                yield ("x", j, n), block_exponent(j, n), v
        for i, v in enumerate(self.res):
            yield ("res", i), residual_exponent(i), v

    def norm(self) -> float:
        return max((lp_norm(v, p) for _, p, v in self.blocks()), default=0.0)

    def scaled(self, lam):
        return TruncatedXElement([[lam * v for v in row] for row in self.x],
                                 [lam * v for v in self.res])

    def to_json(self) -> dict:
        return {"x": [[trim(v).tolist() for v in row] for row in self.x],
                "res": [trim(v).tolist() for v in self.res]}


@dataclass
class TruncatedXAElement(TruncatedXElement):
    """Adds the anchor blocks u_j in l_{q_j}; the norm is the max of block norms."""
    u: list = field(default_factory=list)

    def blocks(self):
        for j, v in enumerate(self.u):
            yield ("u", j), anchor_exponent(j), v
        yield from super().blocks()

    def scaled(self, lam):
        base = super().scaled(lam)
        return TruncatedXAElement(base.x, base.res, [lam * v for v in self.u])

    def to_json(self) -> dict:
        out = super().to_json()
        out["u"] = [trim(v).tolist() for v in self.u]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TruncatedXAElement":
        vec = lambda a: np.asarray(a, dtype=float)
        x = [[vec(v) for v in row] for row in data["x"]]
        u = [vec(v) for v in data.get("u", [])]
        if len(u) != len(x):
            raise ValueError("need one anchor block per row of x blocks")
        if len({len(row) for row in x}) > 1:
            raise ValueError("every j needs the same number of x blocks")
        dims = {len(v) for v in u} | {len(v) for row in x for v in row}
        if len(dims) > 1 or any(d % 4 for d in dims):
            raise ValueError("anchor and x blocks need one common length, a multiple of 4")
        return cls(x, [vec(v) for v in data.get("res", [])], u)


def random_element(J: int, N: int, dim: int, rng, radius: float = 1.0,
                   residual: int = 1) -> TruncatedXAElement:
    """Blocks with norms spread in (0, radius]; dim must be a multiple of 4."""
    def block(p):
        v = rng.standard_normal(dim)
        return v * (radius * rng.uniform(0.05, 1.0) / lp_norm(v, p))
    u = [block(anchor_exponent(j)) for j in range(J)]
    x = [[block(block_exponent(j, n)) for n in range(N)] for j in range(J)]
    res = [block(residual_exponent(i)) for i in range(residual)]
    return TruncatedXAElement(x, res, u)


# ---------------------------------------------------------------------------
# g~_t, g_t and phi
# ---------------------------------------------------------------------------

def _level_for(t, x: TruncatedXAElement, level: Optional[int]) -> int:
    n = level_of(t) if level is None else level
    if level is None and n > 0 and n + 1 >= x.N and t == alpha(n):
        n -= 1  # the top seam belongs to the last full level
    if not alpha(n) <= t <= alpha(n + 1):
        raise ValueError(f"t={t} is outside [alpha_{n}, alpha_{n + 1}]")
    if n + 1 >= x.N:
        raise ValueError(f"t={t} needs blocks {n} and {n + 1}, truncation has {x.N}")
    if len(x.u) != x.J:
        raise ValueError("missing anchor blocks")
    return n


def g_tilde(t, x: TruncatedXAElement, level: Optional[int] = None) -> TruncatedXElement:
    """Replace blocks (j,n), (j,n+1) by psi^-1 h_tau (u_j, psi(x_{j,n}, x_{j,n+1})).

    tau = 2^-n (t - alpha_n). At t = alpha_n both levels n-1 and n apply; pass
    level to pick one.
    """
    n = _level_for(t, x, level)
    tau = (t - alpha(n)) / (1 << n)
    rows = []
    for j in range(x.J):
        q = float(anchor_exponent(j))
        pa, pb = float(block_exponent(j, n)), float(block_exponent(j, n + 1))
        row = [np.asarray(v, dtype=float) for v in x.x[j]]
        a, b = psi(pa, pb, q, (row[n], row[n + 1]))
        c, d = path_h(tau, q, (x.u[j], a, b))
        row[n], row[n + 1] = psi_inverse(pa, pb, q, (c, d))
        rows.append(row)
    return TruncatedXElement(rows, [np.asarray(v, dtype=float) for v in x.res])


def g_norm(t, x: TruncatedXAElement, level: Optional[int] = None) -> TruncatedXElement:
    y = g_tilde(t, x, level)
    xn, yn = x.norm(), y.norm()
    return y if yn == 0 else y.scaled(xn / yn)


def phi(x: TruncatedXAElement) -> TruncatedXElement:
    return g_norm(x.norm(), x)


def block_discrepancy(a: TruncatedXElement, b: TruncatedXElement) -> float:
    """Largest block distance, each block measured in its own norm."""
    worst = 0.0
    for (ta, p, va), (tb, _, vb) in zip(a.blocks(), b.blocks()):
        if ta != tb:
            raise ValueError("elements have different block layouts")
        worst = max(worst, gap(va, vb, p))
    return worst


def seam_discrepancy(x: TruncatedXAElement, n: int) -> float:
    """Distance between the level n-1 (h_1) and level n (h_0) values at t = alpha_n."""
    t = alpha(n)
    return block_discrepancy(g_tilde(t, x, n - 1), g_tilde(t, x, n))


# ---------------------------------------------------------------------------
# Empirical moduli of continuity
# ---------------------------------------------------------------------------

@dataclass
class OmegaCurve:
    eps: list
    omega: list
    pairs: int
    seed: int

    def rows(self):
        return list(zip(self.eps, self.omega))


def modulus_estimate(f: Callable, radius: float, eps_grid: Sequence[float],
                     samples: int = 1000, seed: int = 0, dim: int = 8,
                     p_in=2.0, p_out=2.0) -> OmegaCurve:
    """omega(eps) = max ||f(x) - f(y)|| over sampled pairs in the radius-ball with ||x-y|| <= eps.

    Monotone in eps by construction: a larger eps admits a superset of pairs.
    """
    rng = np.random.default_rng(seed)
    eps = sorted(float(e) for e in eps_grid)
    lo, hi = math.log(eps[0] / 4), math.log(eps[-1])
    dists, jumps = [], []
    for _ in range(samples):
        x = rng.standard_normal(dim)
        x *= radius * rng.uniform() / lp_norm(x, p_in)
        d = rng.standard_normal(dim)
        d *= math.exp(rng.uniform(lo, hi)) / lp_norm(d, p_in)
        y = x + d
        ny = lp_norm(y, p_in)
        if ny > radius:
            y *= radius / ny
        dists.append(lp_norm(x - y, p_in))
        jumps.append(lp_norm(np.asarray(f(x)) - np.asarray(f(y)), p_out))
    dists, jumps = np.array(dists), np.array(jumps)
    omega = [float(jumps[dists <= e].max(initial=0.0)) for e in eps]
    return OmegaCurve(eps, omega, samples, seed)


@dataclass
class LipschitzEstimate:
    K: float
    samples: int
    q: float
    seed: int
    worst: dict


def h_lipschitz_estimate(q, samples: int = 1000, seed: int = 0, dim: int = 4,
                         inverse: bool = False) -> LipschitzEstimate:
    """K^ = max ||h_tau(x) - h_eta(y)|| / (||x - y|| + |tau - eta| max(||x||, ||y||)).

    Pairs mix nearby points and times at log-uniform scales with far-apart ones.
    The first k samples of a run do not depend on the total, so K^ only grows.
    """
    q = float(q)
    rng = np.random.default_rng(seed)
    best, worst = 0.0, {}
    parts = 2 if inverse else 3
    for _ in range(samples):
        x = rng.standard_normal((parts, dim))
        x /= sum_norm_q(x, q)
        x *= rng.uniform(0.1, 2.0)
        scale = math.exp(rng.uniform(math.log(1e-4), 0.0))
        y = x + scale * rng.standard_normal((parts, dim)) * rng.integers(0, 2)
        tau = rng.uniform()
        eta = float(np.clip(tau + scale * rng.standard_normal() * rng.integers(0, 2), 0, 1))
        if inverse:
            fx = path_h_inverse(tau, q, tuple(x))
            fy = path_h_inverse(eta, q, tuple(y))
        else:
            fx = path_h(tau, q, tuple(x))
            fy = path_h(eta, q, tuple(y))
        num = sum_norm_q([gap(a, b, q) for a, b in zip(fx, fy)], q)
        den = sum_norm_q(x - y, q) + abs(tau - eta) * max(sum_norm_q(x, q), sum_norm_q(y, q))
        if den <= 1e-12:
            continue
        r = num / den
        if r > best:
            best, worst = r, {"tau": tau, "eta": eta, "dx": float(sum_norm_q(x - y, q))}
    return LipschitzEstimate(best, samples, q, seed, worst)
