"""Codes of Banach spaces with a monotone basis: r_n is the norm of the s^n-combination
of basis vectors, where s^n is the n-th finite rational tuple.

Also the metric rho on finite-dimensional spaces with a basis and a sound witness
search for local equivalence of small l_2-sums of l_p blocks.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import seqcore as sc
from .banach import identity_norm_exact, lp_norm

TOL = 1e-9
TAGS = ("i", "ii", "iii", "iv")


# ---------------------------------------------------------------------------
# Codes
# ---------------------------------------------------------------------------

@dataclass
class CodePrefix:
    r: list
    tuples: list = field(default_factory=list)

    def __post_init__(self):
        if not self.tuples:
            self.tuples = [sc.rational_tuple(n) for n in range(len(self.r))]

    def __len__(self):
        return len(self.r)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "tuple", "r"])
        for n, (t, v) in enumerate(zip(self.tuples, self.r)):
            w.writerow([n, " ".join(str(a) for a in t), repr(float(v))])
        return buf.getvalue()


@dataclass(frozen=True)
class Violation:
    tag: str
    indices: tuple
    detail: str

    def to_json(self) -> dict:
        return {"tag": self.tag, "indices": list(self.indices), "detail": self.detail}


def _strip(t) -> tuple:
    t = list(t)
    while t and t[-1] == 0:
        t.pop()
    return tuple(t)


def _direction(v: tuple) -> tuple[tuple, Fraction]:
    """v = lead * direction with the first nonzero entry of direction equal to 1."""
    lead = next(a for a in v if a != 0)
    return tuple(a / lead for a in v), lead


def _add(a: tuple, b: tuple) -> tuple:
    k = max(len(a), len(b))
    a = a + (Fraction(0),) * (k - len(a))
    b = b + (Fraction(0),) * (k - len(b))
    return _strip(x + y for x, y in zip(a, b))


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def validate_code(code, tol: float = TOL, limit: Optional[int] = None) -> list[Violation]:
    """All violations of the four code conditions among indices below N."""
    if not isinstance(code, CodePrefix):
        code = CodePrefix(list(code))
    r = [float(v) for v in code.r]
    N = len(r)
    vecs = [_strip(t) for t in code.tuples]
    by_vec = defaultdict(list)
    for n, v in enumerate(vecs):
        by_vec[v].append(n)
    out: list[Violation] = []

    # (i) unit vectors have norm 1
    for n, v in enumerate(vecs):
        if v and v[-1] == 1 and all(a == 0 for a in v[:-1]) and not _close(r[n], 1.0, tol):
            out.append(Violation("i", (n,), f"r_{n} = {r[n]} at a unit vector"))

    # (ii) an initial segment never has larger norm
    index = {tuple(t): n for n, t in enumerate(code.tuples)}
    for n, t in enumerate(code.tuples):
        for k in range(len(t)):
            m = index.get(tuple(t[:k]))
            if m is not None and r[m] > r[n] + tol * max(1.0, r[n]):
                out.append(Violation("ii", (m, n), f"r_{m} = {r[m]} > r_{n} = {r[n]}"))

    # (iii) triangle inequality whenever the sum is enumerated
    for n in range(N):
        for m in range(n, N):
            for l in by_vec.get(_add(vecs[n], vecs[m]), ()):
                if r[l] > r[n] + r[m] + tol * max(1.0, r[l]):
                    out.append(Violation("iii", (n, m, l), f"r_{l} = {r[l]} > r_{n} + r_{m}"))

    # (iv) homogeneity within each line through the origin, including the zero vector
    zero = by_vec.get((), [])
    for z in zero:
        if not _close(r[z], 0.0, tol):
            out.append(Violation("iv", (z,), f"r_{z} = {r[z]} at the zero vector"))
    lines = defaultdict(list)
    for n, v in enumerate(vecs):
        if v:
            d, lead = _direction(v)
            lines[d].append((lead, n))
    for members in lines.values():
        lead0, n0 = members[0]
        for lead, m in members[1:]:
            p = lead / lead0
            if not _close(r[m], float(abs(p)) * r[n0], tol):
                out.append(Violation("iv", (n0, m), f"r_{m} = {r[m]} but |{p}| r_{n0} = {float(abs(p)) * r[n0]}"))
    if limit is not None:
        out = out[:limit]
    return out


def lp_oracle(p) -> Callable:
    return lambda coords: lp_norm([float(a) for a in coords], p)


def sum_oracle(blocks: Sequence) -> Callable:
    """Norm of a truncated l_2-sum; blocks = [(p, dim), ...], the last block extends
    to all remaining coordinates."""
    blocks = [(float(p), int(k)) for p, k in blocks]

    def norm(coords):
        coords = [float(a) for a in coords]
        parts, pos = [], 0
        for j, (p, k) in enumerate(blocks):
            stop = len(coords) if j == len(blocks) - 1 else pos + k
            parts.append(lp_norm(coords[pos:stop], p))
            pos = stop
            if pos >= len(coords):
                break
        return math.sqrt(sum(v * v for v in parts))
    return norm


def generate_code(norm: Callable, N: int, monotone: bool = True) -> CodePrefix:
    """r_n = norm of the s^n-combination of the basis.

    With monotone=True the norm is replaced by the sup over initial projections,
    which makes the basis monotone without changing monotone norms.
    """
    tuples = [sc.rational_tuple(n) for n in range(N)]
    r = []
    for t in tuples:
        try:
            v = norm(t)
            if monotone:
                v = max([v] + [norm(t[:k]) for k in range(1, len(t))])
        except Exception as exc:
            raise RuntimeError(f"norm oracle failed on {t}: {exc}") from exc
        r.append(float(v))
    return CodePrefix(r, tuples)


def mutate_code(code: CodePrefix, tag: str) -> tuple[CodePrefix, int]:
    """A copy that breaks one condition at one index; returns the changed index."""
    r = list(code.r)
    vecs = [_strip(t) for t in code.tuples]
    index = {tuple(t): n for n, t in enumerate(code.tuples)}
    if tag == "i":
        n = next(n for n, v in enumerate(vecs) if v == (Fraction(1),))
        r[n] = 0.9
    elif tag == "ii":
        # a tuple whose initial segment has positive norm: shrink it below that norm
        n, m = next((n, index[tuple(t[:k])]) for n, t in enumerate(code.tuples) for k in range(1, len(t))
                    if tuple(t[:k]) in index and r[index[tuple(t[:k])]] > 0)
        r[n] = r[m] / 2
    elif tag == "iii":
        by_vec = {v: n for n, v in enumerate(vecs)}
        n, m, l = next((a, b, by_vec[_add(vecs[a], vecs[b])]) for a in range(len(r)) for b in range(a, len(r))
                       if vecs[a] and vecs[b] and _add(vecs[a], vecs[b]) in by_vec)
        r[l] = r[n] + r[m] + 0.1
        n = l
    elif tag == "iv":
        n = next(n for n, v in enumerate(vecs) if v == (Fraction(2),))
        r[n] = 2.5 * r[index[(Fraction(1),)]]
    else:
        raise ValueError(f"unknown condition tag {tag!r}")
    return CodePrefix(r, list(code.tuples)), n


# ---------------------------------------------------------------------------
# The metric rho on finite-dimensional spaces with a basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FinDimSpace:
    """span of the rows of basis inside an ambient space with a block norm.

    blocks = ((p, dim), ...) describes an l_2-sum; a single block is plain l_p.
    """
    blocks: tuple
    basis: Optional[tuple] = None  # rows; None means the unit vector basis

    @property
    def ambient(self) -> int:
        return sum(int(k) for _, k in self.blocks)

    @property
    def dim(self) -> int:
        return self.ambient if self.basis is None else len(self.basis)

    def matrix(self) -> np.ndarray:
        return np.eye(self.ambient) if self.basis is None else np.array(self.basis, dtype=float)

    def norm(self, coords) -> float:
        coords = np.asarray(coords, dtype=float)
        total, pos = 0.0, 0
        for p, k in self.blocks:
            total += lp_norm(coords[pos:pos + int(k)], p) ** 2
            pos += int(k)
        return math.sqrt(total)

    def combo_norm(self, a) -> float:
        return self.norm(np.asarray(a, dtype=float) @ self.matrix())

    def __post_init__(self):
        if self.basis is not None:
            m = np.array(self.basis, dtype=float)
            if m.shape[1] != self.ambient or np.linalg.matrix_rank(m) < len(m):
                raise ValueError("basis must be linearly independent rows of the ambient space")


def lp_space(p, k: int) -> FinDimSpace:
    return FinDimSpace(((p, k),))


def _aligned_blocks(X: FinDimSpace, Y: FinDimSpace) -> bool:
    return X.basis is None and Y.basis is None and [int(k) for _, k in X.blocks] == [int(k) for _, k in Y.blocks]


def basis_map_norm(X: FinDimSpace, Y: FinDimSpace, restarts: int = 16, seed: int = 0) -> tuple[float, bool]:
    """||T|| for T: x_i -> y_i, and whether the value is exact."""
    if X.dim != Y.dim:
        raise ValueError("dimension mismatch")
    if _aligned_blocks(X, Y):
        # block-diagonal identity between l_2-sums: the max of the block norms
        return max(identity_norm_exact(p, q, int(k)) for (p, k), (q, _) in zip(X.blocks, Y.blocks)), True
    k = X.dim
    if X.basis is None and len(X.blocks) == 1 and float(X.blocks[0][0]) == 1:
        # the unit ball of l_1 is the hull of +-e_i
        return max(Y.combo_norm(e) for e in np.eye(k)), True
    rng = np.random.default_rng(seed)

    def neg_ratio(a):
        den = X.combo_norm(a)
        return 0.0 if den == 0 else -Y.combo_norm(a) / den

    starts = list(np.eye(k)) + [np.ones(k)] + [rng.standard_normal(k) for _ in range(restarts)]
    best = 0.0
    for a0 in starts:
        res = minimize(neg_ratio, a0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
        best = max(best, -neg_ratio(a0), -float(res.fun))
    return best, False


def rho_metric(X: FinDimSpace, Y: FinDimSpace) -> float:
    """min(1, max(log ||T||, log ||T^-1||)) for the basis-to-basis map; 1 on a dimension mismatch."""
    return rho_report(X, Y)["rho"]


def rho_report(X: FinDimSpace, Y: FinDimSpace) -> dict:
    if X.dim != Y.dim:
        return {"rho": 1.0, "forward": None, "backward": None, "exact": True, "note": "dimension mismatch"}
    f, ef = basis_map_norm(X, Y)
    b, eb = basis_map_norm(Y, X)
    rho = min(1.0, max(math.log(f), math.log(b), 0.0))
    return {"rho": rho, "forward": f, "backward": b, "exact": ef and eb, "note": ""}


# ---------------------------------------------------------------------------
# Local equivalence witnesses
# ---------------------------------------------------------------------------

def _block_of(blocks, coord: int) -> int:
    pos = 0
    for j, (_, k) in enumerate(blocks):
        pos += int(k)
        if coord < pos:
            return j
    raise IndexError(coord)


def _sub_blocks(blocks, coords) -> list[tuple[float, int, int]]:
    """(p, block id, count) for the blocks a coordinate subspace meets, in order."""
    out: dict = {}
    for c in coords:
        j = _block_of(blocks, c)
        out[j] = out.get(j, 0) + 1
    return [(float(blocks[j][0]), j, n) for j, n in out.items()]


def _l2_factors(sub) -> tuple[float, float]:
    # a <= ||x||_Z / ||x||_2 <= b on the coordinate subspace
    lo = min(min(1.0, k ** (1 / p - 0.5)) for p, _, k in sub)
    hi = max(max(1.0, k ** (1 / p - 0.5)) for p, _, k in sub)
    return lo, hi


def coordinate_distance(xblocks, xcoords, yblocks, ycoords) -> tuple[float, bool]:
    """Upper bound on d(E, F) from T: e_(xcoords[i]) -> e_(ycoords[i]); exact when the
    two coordinate lists split into blocks the same way."""
    sx, sy = _sub_blocks(xblocks, xcoords), _sub_blocks(yblocks, ycoords)
    bx = [_block_of(xblocks, c) for c in xcoords]
    by = [_block_of(yblocks, c) for c in ycoords]
    same_split = all((bx[i] == bx[j]) == (by[i] == by[j]) for i in range(len(bx)) for j in range(len(bx)))
    if same_split:
        fwd = bwd = 1.0
        for i0 in sorted({bx.index(b) for b in bx}):
            k = bx.count(bx[i0])
            p, q = float(xblocks[bx[i0]][0]), float(yblocks[by[i0]][0])
            fwd = max(fwd, identity_norm_exact(p, q, k))
            bwd = max(bwd, identity_norm_exact(q, p, k))
        return fwd * bwd, True
    lx, hx = _l2_factors(sx)
    ly, hy = _l2_factors(sy)
    return (hy / lx) * (hx / ly), False


@dataclass
class WitnessReport:
    C: float
    matched: list
    unmatched: list
    examined: int
    budget_exhausted: bool

    def to_json(self) -> dict:
        return {"C": self.C, "matched": self.matched, "unmatched": self.unmatched,
                "examined": self.examined, "budget_exhausted": self.budget_exhausted}


def local_equiv_witness(xblocks, yblocks, C: float, budget: int = 2000, max_dim: int = 6,
                        tol: float = 1e-9) -> WitnessReport:
    """For each coordinate subspace E of X (dims <= max_dim) look for a coordinate
    subspace F of Y with an explicit T certifying d(E, F) <= C.

    Matches are sound upper bounds; an unmatched E is only inconclusive.
    One-dimensional spans are all isometric, so they match with d = 1.
    """
    xblocks = [(float(p), int(k)) for p, k in xblocks]
    yblocks = [(float(p), int(k)) for p, k in yblocks]
    nx, ny = sum(k for _, k in xblocks), sum(k for _, k in yblocks)
    if max(nx, ny) > 12:
        raise ValueError("spaces must be materialized at small total dimension")
    matched, unmatched, examined = [], [], 0
    exhausted = False
    for d in range(1, min(max_dim, nx, ny) + 1):
        for E in combinations(range(nx), d):
            if examined >= budget:
                exhausted = True
                break
            best = None
            for F in combinations(range(ny), d):
                examined += 1
                dist, exact = coordinate_distance(xblocks, E, yblocks, F)
                if best is None or dist < best[0]:
                    best = (dist, exact, F)
                if dist <= C * (1 + tol):
                    break
                if examined >= budget:
                    break
            entry = {"E": list(E), "F": list(best[2]), "distance_bound": best[0], "exact": best[1]}
            (matched if best[0] <= C * (1 + tol) else unmatched).append(entry)
        if exhausted:
            break
    return WitnessReport(C, matched, unmatched, examined, exhausted)
