"""Finite-dimensional l_p numerics: norms, type constants, Banach-Mazur distances,
the uniform homeomorphism criterion for l_2-sums of l_p^n blocks, and the dimension
sequences behind it.

Huge dimensions n_i are carried as exact base-2 exponents; vector numerics only run
in dimensions small enough to materialize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import seqcore as sc
from .relations import CarrierError
from .seqcore import Seq

DEFAULT_C = 1.0
MAX_EXACT_VECTORS = 22
_CHUNK = 1 << 14


def _exponent(p) -> float:
    p = float(p)
    if not p >= 1 or math.isinf(p):
        raise ValueError(f"exponent must be finite and >= 1, got {p}")
    return p


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LpVector:
    p: float
    coords: tuple

    def __post_init__(self):
        _exponent(self.p)

    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def norm(self) -> float:
        return lp_norm(self.coords, self.p)


def lp_norm(v, p) -> float:
    p = _exponent(p)
    a = np.abs(np.asarray(v, dtype=float))
    if a.size == 0:
        return 0.0
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.dot(a, a)))
    m = a.max()
    if m == 0:
        return 0.0
    # scale first so large coordinates do not overflow the power sum
    return float(m * np.sum((a / m) ** p) ** (1 / p))


def lp_norms_rows(m: np.ndarray, p) -> np.ndarray:
    """l_p norm of every row."""
    p = _exponent(p)
    a = np.abs(m)
    if p == 1:
        return a.sum(axis=1)
    if p == 2:
        return np.sqrt(np.einsum("ij,ij->i", a, a))
    top = a.max(axis=1)
    safe = np.where(top > 0, top, 1.0)
    return top * np.sum((a / safe[:, None]) ** p, axis=1) ** (1 / p)


def sum_norm(blocks: Sequence) -> float:
    """(sum_i ||x_i||_{p_i}^2)^(1/2) for blocks given as LpVector or (p, coords)."""
    total = 0.0
    for b in blocks:
        b = b if isinstance(b, LpVector) else LpVector(b[0], tuple(b[1]))
        total += b.norm() ** 2
    return math.sqrt(total)


@dataclass(frozen=True)
class SumSpace:
    """The l_2-sum of blocks l_{p_i}^{n_i}; dimensions are stored as log2 n_i."""
    blocks: tuple  # of (p_i, log2 n_i)

    def dims(self) -> list[int]:
        return [1 << int(e) for _, e in self.blocks]

    def norm(self, parts: Sequence) -> float:
        if len(parts) > len(self.blocks):
            raise ValueError("more parts than blocks")
        return sum_norm([LpVector(float(p), tuple(x)) for (p, _), x in zip(self.blocks, parts)])

    def to_json(self) -> dict:
        return {"blocks": [{"p": sc.number_to_json(Fraction(p)), "log2_n": int(e)} for p, e in self.blocks]}


# ---------------------------------------------------------------------------
# Type constants
# ---------------------------------------------------------------------------

def _family(vectors) -> tuple[np.ndarray, float]:
    vs = [v if isinstance(v, LpVector) else LpVector(2.0, tuple(v)) for v in vectors]
    if not vs:
        raise ValueError("need at least one vector")
    q = vs[0].p
    if any(v.p != q for v in vs) or len({len(v.coords) for v in vs}) != 1:
        raise ValueError("vectors must share a space")
    return np.array([v.array() for v in vs]), q


def _denominator(mat: np.ndarray, q: float, p: float) -> float:
    norms = lp_norms_rows(mat, q)
    return float(np.sum(norms ** p) ** (1 / p))


def _sign_rows(start: int, stop: int, n: int) -> np.ndarray:
    # rows for patterns start..stop-1 with epsilon_0 fixed to +1 (the norm is even)
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(n - 1, dtype=np.int64)) & 1
    return np.hstack([np.ones((stop - start, 1)), 1.0 - 2.0 * bits])


def type_ratio_exact(p, vectors) -> float:
    """(Ave_eps ||sum eps_i x_i||^2)^(1/2) / (sum ||x_i||^p)^(1/p) over all sign patterns."""
    p = _exponent(p)
    if not 1 <= p <= 2:
        raise ValueError("type exponent must lie in [1, 2]")
    mat, q = _family(vectors)
    n = len(mat)
    if n > MAX_EXACT_VECTORS:
        raise ValueError(f"{n} vectors exceed exhaustive mode; use type_ratio_mc")
    den = _denominator(mat, q, p)
    if den == 0:
        raise ValueError("all vectors are zero")
    total = 0.0
    count = 1 << (n - 1)
    for start in range(0, count, _CHUNK):
        signs = _sign_rows(start, min(count, start + _CHUNK), n)
        total += float(np.sum(lp_norms_rows(signs @ mat, q) ** 2))
    return math.sqrt(total / count) / den


def type_ratio_mc(p, vectors, samples: int, seed: int) -> float:
    """Sampled-sign estimate of the same ratio."""
    p = _exponent(p)
    mat, q = _family(vectors)
    den = _denominator(mat, q, p)
    rng = np.random.default_rng(seed)
    total, done = 0.0, 0
    while done < samples:
        k = min(_CHUNK, samples - done)
        signs = rng.choice([-1.0, 1.0], size=(k, len(mat)))
        total += float(np.sum(lp_norms_rows(signs @ mat, q) ** 2))
        done += k
    return math.sqrt(total / samples) / den


def unit_basis(q, n: int) -> list[LpVector]:
    eye = np.eye(n)
    return [LpVector(float(q), tuple(row)) for row in eye]


def type_bounds(p, q, n: int, k: Optional[int] = None, c: float = DEFAULT_C) -> tuple[float, float]:
    """Lower and upper estimates for the type p constant of l_q^n over n vectors."""
    p, q = float(p), float(q)
    if not 1 <= p <= 2 or not 1 <= q < math.inf or n < 1 or c <= 0:
        raise ValueError("need 1 <= p <= 2, 1 <= q < inf, n >= 1 and c > 0")
    if k is not None and n > k:
        raise ValueError("the estimate over n vectors in l_q^k needs n <= k")
    lower = n ** max(0.0, 1 / q - 1 / p)
    return lower, c * math.sqrt(q) * lower


@dataclass
class TypeConstantReport:
    p: float
    q: float
    n: int
    family: str
    exact: bool
    value: float
    lower: float
    upper: float
    c: float
    samples: int = 0
    seed: Optional[int] = None

    def consistent(self, tol: float = 1e-12) -> bool:
        return not self.exact or self.lower <= self.value * (1 + tol)

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "n": self.n, "family": self.family, "exact": self.exact,
                "value": self.value, "lower": self.lower, "upper": self.upper, "c": self.c,
                "samples": self.samples, "seed": self.seed}


def type_report(p, q, n: int, family: str = "unit", samples: int = 0, seed: int = 0,
                c: float = DEFAULT_C) -> TypeConstantReport:
    """Type ratio of a named family in l_q^n: "unit" basis or "random" Gaussian vectors.

    Exact over all sign patterns when samples == 0, sampled otherwise.
    """
    if family == "unit":
        vecs = unit_basis(q, n)
    elif family == "random":
        rng = np.random.default_rng(seed)
        vecs = [LpVector(float(q), tuple(r)) for r in rng.standard_normal((n, n))]
    else:
        raise ValueError(f"unknown family {family!r}")
    exact = samples == 0
    value = type_ratio_exact(p, vecs) if exact else type_ratio_mc(p, vecs, samples, seed)
    lo, hi = type_bounds(p, q, n, n, c)
    return TypeConstantReport(float(p), float(q), n, family, exact, value, lo, hi, c, samples,
                              None if exact and family == "unit" else seed)


def type_constant_search(p, q, n: int, families: int, seed: int) -> float:
    """Max of exact ratios over the unit basis and random families: a lower bound
    for the type constant that can only grow with more families."""
    best = type_ratio_exact(p, unit_basis(q, n))
    rng = np.random.default_rng(seed)
    for _ in range(families):
        vecs = [LpVector(float(q), tuple(r)) for r in rng.standard_normal((n, n))]
        best = max(best, type_ratio_exact(p, vecs))
    return best


# ---------------------------------------------------------------------------
# Banach-Mazur distances between l_p^n spaces
# ---------------------------------------------------------------------------

def bm_distance_lp(p, q, n: int) -> float:
    p, q = _exponent(p), _exponent(q)
    return n ** abs(1 / p - 1 / q)


def identity_norm_exact(src, dst, n: int) -> float:
    """||id: l_src^n -> l_dst^n|| in closed form."""
    return n ** max(0.0, 1 / _exponent(dst) - 1 / _exponent(src))


def _extreme_points(n: int) -> np.ndarray:
    return np.vstack([np.eye(n), -np.eye(n)])


def _grad_norm(x: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(x)
    nrm = lp_norm(x, p)
    if nrm == 0:
        return np.zeros_like(x)
    if p == 1:
        return np.sign(x)
    return np.sign(x) * (a / nrm) ** (p - 1)


def sphere_ascent(src, dst, n: int, restarts: int = 64, seed: int = 0, steps: int = 400,
                  step_tol: float = 1e-10) -> float:
    """Lower bound for ||id: l_src^n -> l_dst^n|| by projected ascent of
    ||x||_dst on the l_src unit sphere from many starts; every value is attained."""
    src, dst = _exponent(src), _exponent(dst)
    rng = np.random.default_rng(seed)
    starts = [np.ones(n), np.eye(n)[0]] + [rng.standard_normal(n) for _ in range(max(0, restarts - 2))]
    best = 0.0
    for x in starts:
        x = x / lp_norm(x, src)
        val = lp_norm(x, dst)
        lr = 0.5
        for _ in range(steps):
            y = x + lr * _grad_norm(x, dst)
            y = y / lp_norm(y, src)
            new = lp_norm(y, dst)
            if new > val:
                moved = float(np.max(np.abs(y - x)))
                x, val = y, new
                if moved < step_tol:
                    break
            else:
                lr /= 2
                if lr < step_tol:
                    break
        best = max(best, val)
    return best


def _operator_norm(src, dst, n: int, seed: int) -> tuple[float, str]:
    if float(src) == 1:
        # the l_1 ball is the hull of +-e_i, so the norm is a max over those points
        return float(max(lp_norm(v, dst) for v in _extreme_points(n))), "extreme_points"
    return sphere_ascent(src, dst, n, seed=seed), "sphere_ascent"


@dataclass
class BMWitness:
    p: float
    q: float
    n: int
    forward: float
    backward: float
    product: float
    expected: float
    rel_error: float
    tol: float
    methods: tuple
    passed: bool

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "n": self.n, "forward": self.forward, "backward": self.backward,
                "product": self.product, "expected": self.expected, "rel_error": self.rel_error,
                "tol": self.tol, "methods": list(self.methods), "passed": self.passed}


def bm_witness_check(p, q, n: int, tol: float = 0.05, seed: int = 0) -> BMWitness:
    """Check that the identity on unit bases attains ||T|| ||T^-1|| = n^|1/p - 1/q|."""
    f, mf = _operator_norm(p, q, n, seed)
    b, mb = _operator_norm(q, p, n, seed + 1)
    expected = bm_distance_lp(p, q, n)
    prod = f * b
    rel = abs(prod - expected) / expected
    return BMWitness(float(p), float(q), n, f, b, prod, expected, rel, tol, (mf, mb), rel <= tol)


def distortion_lower_bound(p, q, n: int, c: float = DEFAULT_C) -> float:
    """n^(1/p - 1/q) / (sqrt(2) c): no embedding of l_p^n into the q-sum does better."""
    p, q = float(p), float(q)
    if not (1 <= p <= q <= 2) or c <= 0 or n < 1:
        raise ValueError("need 1 <= p <= q <= 2, n >= 1 and c > 0")
    return n ** (1 / p - 1 / q) / (math.sqrt(2) * c)


# ---------------------------------------------------------------------------
# Dimension sequences
# ---------------------------------------------------------------------------

def _interval(iv) -> tuple[Fraction, Fraction]:
    lo, hi = (sc.to_number(v) if not isinstance(v, float) else Fraction(str(v)) for v in iv)
    return lo, hi


def check_intervals(intervals) -> list[tuple[Fraction, Fraction]]:
    ivs = [_interval(iv) for iv in intervals]
    for k, (lo, hi) in enumerate(ivs):
        if not (1 < lo < hi < 2):
            raise ValueError(f"interval {k} must satisfy 1 < l < r < 2")
        if k and lo <= ivs[k - 1][1]:
            raise ValueError(f"interval {k} overlaps interval {k - 1}")
    return ivs


def build_thm41_params(intervals) -> list[int]:
    """Exponents e_i = log2 n_i with n_i^((1/l_i) - (1/r_i)) >= 2^i and
    n_(i+1)^(1/r_(i+1)) >= n_i^(1/l_i)."""
    ivs = check_intervals(intervals)
    out: list[int] = []
    for i, (lo, hi) in enumerate(ivs):
        gap = 1 / lo - 1 / hi
        e = max(1, math.ceil(Fraction(i) / gap))
        if out:
            plo, _ = ivs[i - 1]
            e = max(e, math.ceil(out[-1] * hi / plo))
        out.append(e)
    return out


def check_growth(intervals, log2n: Sequence[int]) -> bool:
    """Exact re-check of the growth condition in log form."""
    ivs = check_intervals(intervals)
    for i in range(len(ivs) - 1):
        # e_(i+1) / r_(i+1) >= e_i / l_i
        if Fraction(log2n[i + 1]) * ivs[i][0] < Fraction(log2n[i]) * ivs[i + 1][1]:
            return False
    return True


def divergence_exponents(intervals, log2n: Sequence[int]) -> list[Fraction]:
    """log2 of n_i^((1/l_i) - (1/r_i)); unbounded along a valid sequence."""
    return [Fraction(e) * (1 / lo - 1 / hi) for e, (lo, hi) in zip(log2n, check_intervals(intervals))]


@dataclass(frozen=True)
class Thm52Params:
    """Dimensions n_i = 2^(b(i) 2^i) and intervals I_i with affine maps [0, b(i)] -> I_i."""
    b: Seq

    def bval(self, i: int) -> int:
        return int(self.b.value(i))

    def delta(self, i: int) -> Fraction:
        return Fraction(1, self.bval(i) * 2 ** i)

    def log2_n(self, i: int) -> int:
        return self.bval(i) * 2 ** i

    def n(self, i: int) -> int:
        return 1 << self.log2_n(i)

    def log_ratio(self, i: int) -> Fraction:
        return Fraction(self.log2_n(i), self.bval(i) * 2 ** i)

    def interval(self, i: int) -> tuple[Fraction, Fraction]:
        # lengths 2^(-i-2) separated by gaps: r_i = 2 - 2^(-i-1) < l_(i+1)
        hi = 2 - Fraction(1, 2 ** (i + 1))
        return hi - Fraction(1, 2 ** (i + 2)), hi

    def sigma(self, i: int, x) -> Fraction:
        lo, hi = self.interval(i)
        x = sc.to_number(x)
        if not 0 <= x <= self.bval(i):
            raise CarrierError(f"x({i}) = {x} leaves [0, b({i})]")
        return lo + x * (hi - lo) / self.bval(i)

    def space(self, x: Seq) -> "Thm52Space":
        return Thm52Space(self, x)


def build_thm52(b: Seq) -> Thm52Params:
    steps = sc.sub(sc.reindex(b, 1, 1), b)
    flat = None if steps is None else steps.level_indices(None, Fraction(0))
    fl = sc.floor_values(b)
    if b.value(0) <= 0 or flat != () or b.is_bounded() or fl is None or sc.equal(fl, b) is not True:
        raise CarrierError("b must be positive, integer-valued, strictly increasing and unbounded")
    return Thm52Params(b)


@dataclass(frozen=True)
class Thm52Space:
    """S_rho(x): block i is l_{sigma_i(x(i))}^{n_i}."""
    params: Thm52Params
    x: Seq

    def p(self, i: int) -> Fraction:
        return self.params.sigma(i, self.x.value(i))

    def blocks(self, k: int) -> SumSpace:
        return SumSpace(tuple((self.p(i), self.params.log2_n(i)) for i in range(k)))

    def exponent(self, other: "Thm52Space", i: int) -> Fraction:
        """log2 of n_i^|1/p_i - 1/q_i|, exact."""
        return self.params.log2_n(i) * abs(1 / self.p(i) - 1 / other.p(i))


# ---------------------------------------------------------------------------
# Uniform homeomorphism criterion
# ---------------------------------------------------------------------------

HOLDS, FAILS, UNKNOWN = "Holds", "Fails", "Unknown"


@dataclass
class UHResult:
    status: str
    log2_C: Optional[Fraction] = None
    witness: list = field(default_factory=list)
    note: str = ""

    @property
    def C(self) -> Optional[float]:
        return None if self.log2_C is None else 2.0 ** float(self.log2_C)

    def to_json(self) -> dict:
        return {"status": self.status, "C": self.C,
                "log2_C": None if self.log2_C is None else sc.number_to_json(self.log2_C),
                "witness": [[i, float(v)] for i, v in self.witness], "note": self.note}


def _growth(value: Callable[[int], Fraction], horizon: int, limit: int = 6) -> list:
    out, level = [], Fraction(1)
    for i in range(horizon):
        v = value(i)
        if v > level:
            out.append((i, v))
            while v > level:
                level *= 2
            if len(out) >= limit:
                break
    return out


def uh_criterion(first, second, log2_n: Optional[Seq] = None, horizon: int = 64) -> UHResult:
    """Is sup_i n_i^|1/p_i - 1/q_i| finite? Decided in log form.

    first, second: descriptors of 1/p_i and 1/q_i with log2_n the descriptor of
    log2 n_i, or two Thm52Space objects over the same parameters.
    """
    if isinstance(first, Thm52Space) and isinstance(second, Thm52Space):
        return _uh_thm52(first, second, horizon)
    if log2_n is None:
        raise ValueError("log2_n is required for descriptor input")
    d = sc.sub(first, second)
    expo = None if d is None else sc.mul(log2_n, sc.absolute(d))
    if expo is None:
        return UHResult(UNKNOWN, note="exponent sequence leaves the closed descriptor kinds")
    sup = expo.sup_abs_from(0)
    if sup is not None:
        return UHResult(HOLDS, sup)
    return UHResult(FAILS, witness=_growth(expo.value, 10 * horizon))


def _uh_thm52(a: Thm52Space, b: Thm52Space, horizon: int) -> UHResult:
    if a.params != b.params:
        raise ValueError("spaces come from different parameters")
    # sigma_i has slope 2^(-i-2)/b(i) and log2 n_i = b(i) 2^i, so the exponent is
    # |x(i) - y(i)| / (4 p_i q_i) with p_i q_i in (1, 4): bounded iff x - y is
    d = sc.sub(a.x, b.x)
    if d is None:
        return UHResult(UNKNOWN, note="coordinate difference leaves the closed descriptor kinds")
    sup = d.sup_abs_from(0)
    if sup is not None:
        # log2 C = sup_i exponent <= sup |x - y| / 4
        return UHResult(HOLDS, sup / 4, note="log2_C is an upper bound")
    return UHResult(FAILS, witness=_growth(lambda i: a.exponent(b, i), 10 * horizon))


def uh_family(family) -> UHResult:
    """Criterion for the two extreme members of a two-choice family: exponent log2 t_i."""
    t = family.log2_t
    sup = t.sup_abs_from(0)
    if sup is not None:
        return UHResult(HOLDS, sup)
    return UHResult(FAILS, witness=_growth(t.value, 640))
