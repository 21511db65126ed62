"""Explicit reduction maps between the benchmark relations, and a sampling harness.

Each map sends closed descriptors to closed descriptors or to a structured carrier
(grids, families) that decides its own relation from the structure of its inputs.
verify_reduction checks verdict agreement on sampled pairs, re-evaluates every map
pointwise from its defining formula, and runs map-specific quantitative checks.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Optional

from . import classify as cl
from . import relations as rl
from . import seqcore as sc
from .relations import CarrierError, Composite, UnsupportedError
from .seqcore import Seq

PROBE = 64


# ---------------------------------------------------------------------------
# Splice families: E_0^omega into =^+
# ---------------------------------------------------------------------------

def anchor(i: int) -> Seq:
    """z_i(n) = 1 iff the first coordinate of unpair(n) is i; distinct anchors differ on a fiber."""
    return sc.FiberedByUnpairFirst(sc.indicator_of([i]))


@dataclass(frozen=True)
class SpliceFamily(Composite):
    """The family y_<i,j> = z_i shuffled with (s^j overwriting x_i)."""
    xs: tuple

    def coordinate(self, i: int) -> Seq:
        return self.xs[i] if i < len(self.xs) else sc.Constant(0)

    def parts(self, n: int) -> tuple[int, tuple, Seq]:
        i, j = sc.unpair(n)
        s = sc.binary_tuple(j)
        return i, s, sc.overwrite(s, self.coordinate(i))

    def value(self, n: int) -> Seq:
        i, _, w = self.parts(n)
        return sc.shuffle(anchor(i), w)

    def partner(self, n: int, other: "SpliceFamily", last: int) -> int:
        """Index m with other.value(m) == self.value(n), given the i-th coordinates agree
        beyond position last."""
        i, s, w = self.parts(n)
        length = max(len(s), last + 1)
        return sc.pair(i, sc.binary_index(tuple(int(v) for v in w.prefix(length))))

    def decide_pair(self, rel, other, horizon):
        if not isinstance(rel, rl.SetEq) or not isinstance(other, SpliceFamily):
            return rl.unknown(horizon, "splice families only decide =^+ with each other")
        k = max(len(self.xs), len(other.xs))
        last = -1
        for i in range(k):
            d = sc.sub(self.coordinate(i), other.coordinate(i))
            if d is None:
                return rl.unknown(horizon, f"coordinate {i} difference is not closed")
            supp = d.support()
            if supp is None:
                # y_<i,0> = z_i + x_i has no partner: other anchors differ on fiber i,
                # and every overwrite of the other i-th coordinate differs infinitely often
                wit = [w[0] for w in rl._support_witness(d, horizon, 4)]
                return rl.not_equivalent([(sc.pair(i, 0), i, *wit)], note=f"coordinate {i}")
            last = max(last, max(supp, default=-1))
        return rl.equivalent(Fraction(last + 1), note="partner(n) = pair(i, index of the overwritten prefix)")


def lemma21_map(xs) -> SpliceFamily:
    xs = tuple(xs)
    for k, x in enumerate(xs):
        rl._require_binary(x, f"coordinate {k}")
    return SpliceFamily(xs)


def lemma21_formula(xs, n: int, length: int = 24) -> list:
    i, j = sc.unpair(n)
    s = sc.binary_tuple(j)
    x = xs[i] if i < len(xs) else sc.Constant(0)
    out = []
    for m in range(length):
        q, r = divmod(m, 2)
        if r == 0:
            out.append(Fraction(1 if sc.first(q) == i else 0))
        else:
            out.append(Fraction(s[q]) if q < len(s) else x.value(q))
    return out


def brute_partner(fam: SpliceFamily, other: SpliceFamily, n: int, search: int, length: int) -> Optional[int]:
    """Truncated partner search: some m < search whose prefix matches y_n."""
    target = fam.value(n).prefix(length)
    for m in range(search):
        if other.value(m).prefix(length) == target:
            return m
    return None


# ---------------------------------------------------------------------------
# Grids: the clamp grid and the net-distance grid
# ---------------------------------------------------------------------------

def clamp_affine(t: Fraction, b: Fraction) -> Fraction:
    """The increasing affine map [-b, b] -> [0, b], extended by 0 below and b above."""
    if t < -b:
        return Fraction(0)
    if t > b:
        return b
    return (t + b) / 2


KERNELS = {"clamp": clamp_affine, "abs_diff": lambda t, r: abs(t - r)}


@dataclass(frozen=True)
class Grid(Composite):
    """value(<i, j>) = kernel(row(i), col(j))."""
    row: Seq
    col: Seq
    kernel: str

    def value(self, n):
        i, j = sc.unpair(n)
        return KERNELS[self.kernel](self.row.value(i), self.col.value(j))

    def _column_for(self, i: int, other: "Grid") -> int:
        a, b = self.row.value(i), other.row.value(i)
        j = 0
        if self.kernel == "clamp":
            while self.col.value(j) < max(abs(a), abs(b)):
                j += 1
        else:
            while self.col.value(j) > min(a, b):
                j += 1
        return j

    def _rows_dominate_column(self, other: "Grid") -> bool:
        c0 = self.col.value(0)
        for r in (self.row, other.row):
            below = sc.negate(sc.add(r, sc.Constant(-c0))).level_indices(Fraction(0), None)
            if below is None or below:
                return False
        return True

    def decide_pair(self, rel, other, horizon):
        if not isinstance(other, Grid) or other.kernel != self.kernel or sc.equal(other.col, self.col) is not True:
            return rl.unknown(horizon, "grids with different columns or kernels")
        if isinstance(rel, rl.LInfRestricted):
            for g in (self, other):
                if any(not (0 <= g.value(n) <= rel.b.value(n)) for n in range(rl.PREFIX_CHECK)):
                    raise CarrierError("grid leaves prod [0, b(n)]")
        elif not isinstance(rel, rl.LInf):
            return rl.unknown(horizon, "grids decide ell_infinity type relations")
        rows = rl.decide_sup_distance(self.row, other.row, horizon)
        if rows.outcome == rl.UNKNOWN:
            return rows
        if rows.outcome == rl.NOT_EQUIVALENT:
            wit = []
            for i, _ in rows.witness:
                n = sc.pair(i, self._column_for(i, other))
                wit.append((n, abs(self.value(n) - other.value(n))))
            return rl.not_equivalent(wit)
        # clamp is 1/2-Lipschitz and exact at large columns; |t - r| - |s - r| = t - s once r <= t, s
        if self.kernel == "clamp":
            return rl.equivalent(rows.constant / 2)
        exact = self._rows_dominate_column(other)
        return rl.equivalent(rows.constant, note="" if exact else "upper bound")


def lemma51_map(x: Seq, b: Seq) -> Grid:
    check_increasing_unbounded(b)
    return Grid(x, b, "clamp")


def check_increasing_unbounded(b: Seq) -> None:
    steps = sc.sub(sc.reindex(b, 1, 1), b)
    if steps is None or b.is_bounded() or b.value(0) <= 0:
        raise CarrierError("b must be positive, increasing and unbounded")
    flat = steps.level_indices(None, Fraction(0))
    if flat is None or flat:
        raise CarrierError("b must be strictly increasing")


def lemma51_formula(x: Seq, b: Seq, n: int) -> Fraction:
    i, j = sc.unpair(n)
    t, bj = x.value(i), b.value(j)
    if t < -bj:
        return Fraction(0)
    if t > bj:
        return bj
    return (t + bj) / 2


def thm58_net_map(x: Seq, X: rl.RealPoints) -> Grid:
    return Grid(x, X.net(), "abs_diff")


def thm58_net_formula(x: Seq, X: rl.RealPoints, n: int) -> Fraction:
    i, j = sc.unpair(n)
    return X.distance(x.value(i), _greedy_net(X, j + 1)[j])


@lru_cache(maxsize=256)
def _greedy_net(X: rl.RealPoints, k: int) -> list[Fraction]:
    # brute greedy scan over the enumeration; used as an oracle for the closed-form net
    chosen, i = [], 0
    while len(chosen) < k:
        v = X.point(i)
        if all(abs(v - c) > 1 for c in chosen):
            chosen.append(v)
        i += 1
    return chosen


# ---------------------------------------------------------------------------
# F_X into ell_infinity
# ---------------------------------------------------------------------------

def lemma55_map(x: Seq, X: rl.RealPoints) -> Seq:
    """pi(x)(i) = d(r_i, orbit of x) as a closed descriptor."""
    net = X.net()
    if not isinstance(net, sc.Linear):
        raise UnsupportedError("lemma55_map needs an arithmetic 1-net")
    pieces = rl.orbit_pieces(x)
    period = rl.period_of(pieces)
    r = net.value
    if period is None:
        top = max(p.start for p in pieces)
        i0 = 0
        while r(i0) < top:
            i0 += 1
        head = tuple(rl.distance_to_set(r(i), pieces) for i in range(i0))
        tail = sc.Linear(net.a, net.b - top)
        return sc.TableThenRule(head, tail) if head else tail
    stable = max(p.start for p in pieces) + period
    ratio = net.a / period
    w = ratio.denominator
    i0 = 0
    while r(i0) < stable:
        i0 += 1
    i0 = w * (-(-i0 // w))
    rules = tuple(sc.Constant(rl.distance_to_set(r(i0 + c), pieces)) for c in range(w))
    tail = rules[0] if w == 1 else sc.ResidueInterleave(rules)
    head = tuple(rl.distance_to_set(r(i), pieces) for i in range(i0))
    return sc.TableThenRule(head, tail) if head else tail


def lemma55_formula(x: Seq, X: rl.RealPoints, n: int, scan: int = 4000) -> Fraction:
    target = _greedy_net(X, n + 1)[n]
    pts = _sorted_prefix(x, scan)
    k = bisect.bisect_left(pts, target)
    return min(abs(target - pts[c]) for c in (k - 1, k) if 0 <= c < len(pts))


@lru_cache(maxsize=4096)
def _sorted_prefix(x: Seq, scan: int) -> list:
    return sorted(set(x.prefix(scan)))


# ---------------------------------------------------------------------------
# Escape map: E_1 into ell_infinity(X)
# ---------------------------------------------------------------------------

def thm58_escape_map(x: Seq, X: rl.RealPoints) -> Seq:
    """tau(x)(<i, j>) = z_i if x_i(j) = 1 else z_0, with x_i(j) stored at pair(i, j)."""
    rl._require_binary(x, "x")
    z = X.escaping()
    z0 = z.value(0)
    lift = sc.FiberedByUnpairFirst(sc.add(z, sc.Constant(-z0)))
    out = sc.mul(x, lift)
    out = None if out is None else sc.add(out, sc.Constant(z0))
    if out is None:
        raise UnsupportedError("escape map output is not closed for this input")
    return out


def thm58_escape_formula(x: Seq, X: rl.RealPoints, n: int) -> Fraction:
    i, _ = sc.unpair(n)
    z = X.escaping()
    return z.value(i) if x.value(n) == 1 else z.value(0)


# ---------------------------------------------------------------------------
# Level grids: bounded C-components and the gap-ladder case
# ---------------------------------------------------------------------------

class Hierarchy:
    """Nested partitions indexed by levels; fiber k of a level grid holds level
    first_level + k."""
    first_level = 0

    def class_index(self, level: int, i: int, v: Fraction) -> int:
        raise NotImplementedError

    def merge_levels(self, x: Seq, y: Seq) -> Optional[Seq]:
        """mu(i): fibers k < mu(i) separate x(i) and y(i); later fibers agree."""
        raise NotImplementedError


def log2_exact(d: Seq) -> Optional[Seq]:
    """log2 of a descriptor whose values are powers of two."""
    def scalar(v):
        if v <= 0 or v.denominator != 1 or int(v) & (int(v) - 1):
            raise CarrierError("values must be powers of two")
        return Fraction(int(v).bit_length() - 1)

    def leaf(g):
        if isinstance(g, sc.Geometric):
            a, r = g.a, g.r
            if a > 0 and r > 1 and a.denominator == 1 and r.denominator == 1:
                ea, er = scalar(a), scalar(r)
                return sc.Linear(er, ea)
        return None
    return sc.map_values(d, scalar, leaf)


@dataclass(frozen=True)
class PowerComponents(Hierarchy):
    """n-components of {2^k}: an initial cluster {1, ..., 2^c(n)} then singletons."""
    first_level = 1

    @staticmethod
    def cluster_top(n: int) -> int:
        # largest k with 2^(k-1) < n
        k = 0
        while 2 ** k < n:
            k += 1
        return k

    def class_index(self, level, i, v):
        e = int(v).bit_length() - 1
        return max(0, e - self.cluster_top(level))

    def merge_levels(self, x, y):
        ex, ey = log2_exact(x), log2_exact(y)
        if ex is None or ey is None:
            return None
        d = sc.sub(ex, ey)
        top = sc.maximum(ex, ey)
        if d is None or top is None:
            return None
        return sc.mul(sc.indicator_nonzero(d), top)

    def fibers_from_merge(self, m: Fraction) -> int:
        # points 2^e != 2^e' share an n-component iff n > 2^(max(e, e') - 1)
        return 0 if m == 0 else 2 ** (int(m) - 1)


@dataclass(frozen=True)
class TwoPointClasses(Hierarchy):
    """F_n classes of B_i = {0, g(i)}: split into {0}, {g(i)} while g(i) > n."""
    gap: Seq

    def class_index(self, level, i, v):
        return 1 if self.gap.value(i) > level and v != 0 else 0

    def merge_levels(self, x, y):
        d = sc.sub(x, y)
        return None if d is None else sc.mul(self.gap, sc.indicator_nonzero(d))

    def fibers_from_merge(self, m):
        return int(m)


@dataclass(frozen=True)
class LevelGrid(Composite):
    """value(pair(k, m)) = class of x(m) at level first_level + k."""
    hierarchy: Hierarchy
    x: Seq

    def value(self, n):
        k, m = sc.unpair(n)
        return Fraction(self.hierarchy.class_index(self.hierarchy.first_level + k, m, self.x.value(m)))

    def decide_pair(self, rel, other, horizon):
        if not isinstance(rel, rl.E1) or not isinstance(other, LevelGrid) or other.hierarchy != self.hierarchy:
            return rl.unknown(horizon, "level grids decide E_1 with the same hierarchy")
        mu = self.hierarchy.merge_levels(self.x, other.x)
        if mu is None:
            return rl.unknown(horizon, "merge levels are not closed")
        sup = mu.sup_abs_from(0)
        if sup is None:
            wit, best = [], Fraction(0)
            for m in range(horizon):
                v = mu.value(m)
                if v > best and self.hierarchy.fibers_from_merge(v) > 0:
                    k = self.hierarchy.fibers_from_merge(v) - 1
                    wit.append((k, sc.pair(k, m)))
                    best = v
                    if len(wit) >= 6:
                        break
            return rl.not_equivalent(wit)
        return rl.equivalent(Fraction(self.hierarchy.fibers_from_merge(sup)))


def thm58_caseI_map(x: Seq, X: rl.RealPoints, certificate: cl.Classification) -> LevelGrid:
    _require_certificate(X, certificate, cl.E1_CLASS)
    if not (isinstance(X.values, sc.Geometric) and X.values.a == 1 and X.values.r == 2):
        raise UnsupportedError("Case I map is implemented for X = {2^k}")
    if log2_exact(x) is None:
        raise UnsupportedError("point sequence must have closed exponents")
    return LevelGrid(PowerComponents(), x)


def thm58_caseI_formula(x: Seq, n: int, depth: int = 96) -> Fraction:
    k, m = sc.unpair(n)
    index = _power_component_index(k + 1, depth)
    return Fraction(index[x.value(m)])


@lru_cache(maxsize=None)
def _power_component_index(level: int, depth: int) -> dict:
    comps = cl.components([Fraction(2) ** e for e in range(depth)], Fraction(level))
    return {v: idx for idx, c in enumerate(comps) for v in c}


# ---------------------------------------------------------------------------
# Unbounded C-components: C-paths in the integers
# ---------------------------------------------------------------------------
# A C-path with C = 2 in the integers moves by -1, 0 or +1. Paths are listed by
# height len + |start|, then lexicographically; every height holds finitely many.

def _paths_below(h: int) -> int:
    # heights 1..h-1 hold 2 * 3^(h'-1) - 1 paths each
    return sum(2 * 3 ** (k - 1) - 1 for k in range(1, h))


def path_unrank(i: int) -> tuple[int, ...]:
    h = 1
    while i >= 2 * 3 ** (h - 1) - 1:
        i -= 2 * 3 ** (h - 1) - 1
        h += 1
    # choose the start in increasing order; a start s leaves 3^(h - |s| - 1) paths
    for s in range(-(h - 1), h):
        block = 3 ** (h - abs(s) - 1)
        if i < block:
            break
        i -= block
    length = h - abs(s)
    out = [s]
    for pos in range(1, length):
        block = 3 ** (length - pos - 1)
        step, i = divmod(i, block)
        out.append(out[-1] + step - 1)
    return tuple(out)


def path_rank(p) -> int:
    p = tuple(int(v) for v in p)
    if not p or any(abs(b - a) > 1 for a, b in zip(p, p[1:])):
        raise ValueError("not a 2-path in the integers")
    h = len(p) + abs(p[0])
    r = _paths_below(h)
    for s in range(-(h - 1), p[0]):
        r += 3 ** (h - abs(s) - 1)
    for pos in range(1, len(p)):
        r += (p[pos] - p[pos - 1] + 1) * 3 ** (len(p) - pos - 1)
    return r


def path_at(p, t: int) -> int:
    return p[min(t, len(p) - 1)]


def dwell_path(a: int, b: int) -> tuple[int, ...]:
    """A path q with q(min) = 0 and q(max) = |a - b|: dwell at 0, then climb."""
    lo, d = min(a, b), abs(a - b)
    return (0,) * (lo + 1) + tuple(range(1, d + 1))


@dataclass(frozen=True)
class PathGrid(Composite):
    """value(<i, j>) = p_i(x(j)) for the enumerated 2-paths p_i."""
    x: Seq

    def value(self, n):
        i, j = sc.unpair(n)
        return Fraction(path_at(path_unrank(i), int(self.x.value(j))))

    def decide_pair(self, rel, other, horizon):
        if not isinstance(rel, rl.LInfMetric) or not isinstance(other, PathGrid):
            return rl.unknown(horizon, "path grids decide ell_infinity(X)")
        rows = rl.decide_sup_distance(self.x, other.x, horizon)
        if rows.outcome == rl.NOT_EQUIVALENT:
            wit = []
            for j, _ in rows.witness:
                a, b = int(self.x.value(j)), int(other.x.value(j))
                n = sc.pair(path_rank(dwell_path(a, b)), j)
                wit.append((n, abs(self.value(n) - other.value(n))))
            return rl.not_equivalent(wit)
        # paths move at most 1 per step, and the climbing path realizes |x(j) - x'(j)|
        return rows


def thm58_caseII_map(x: Seq, X: rl.RealPoints, certificate: cl.Classification) -> PathGrid:
    _require_certificate(X, certificate, cl.LINF_CLASS)
    if sc.to_number(certificate.certificate.get("C", 0)) != 2 or not _is_integers(X):
        raise UnsupportedError("Case II map is implemented for X = Z with C = 2")
    sc.check_domain(x, "natural")
    return PathGrid(x)


def _is_integers(X: rl.RealPoints) -> bool:
    pts = set(X.values.prefix(41))
    return pts == set(Fraction(v) for v in range(-20, 21))


@lru_cache(maxsize=None)
def brute_paths(max_height: int) -> tuple:
    """All 2-paths up to a height, listed by height then lexicographically (oracle)."""
    out = []
    for h in range(1, max_height + 1):
        level = []
        for length in range(1, h + 1):
            s = h - length
            for start in {s, -s}:
                for steps in product((-1, 0, 1), repeat=length - 1):
                    p = [start]
                    for st in steps:
                        p.append(p[-1] + st)
                    level.append(tuple(p))
        out.extend(sorted(level))
    return tuple(out)


def thm58_caseII_formula(x: Seq, n: int) -> Fraction:
    i, j = sc.unpair(n)
    return Fraction(path_at(brute_paths(6)[i], int(x.value(j))))


# ---------------------------------------------------------------------------
# Weighted E_t maps, chosen by the classifier case
# ---------------------------------------------------------------------------

def _require_certificate(desc, certificate: cl.Classification, cls: Optional[str] = None) -> None:
    if (cls is not None and certificate.cls != cls) or not cl.check_certificate(desc, certificate):
        raise CarrierError("certificate does not match the descriptor")


def _residual_classes(t: Seq, top: int) -> Optional[tuple[int, list[int]]]:
    """For residue-structured t: modulus and the classes whose values all exceed top."""
    rules = t.rules if isinstance(t, sc.ResidueInterleave) else (t,)
    above, m = [], len(rules)
    for c, r in enumerate(rules):
        low = r.level_indices(None, Fraction(top))
        high = r.level_indices(Fraction(top), None)
        if low == ():
            above.append(c)
        elif high != ():
            return None
    return m, above


def thm62_maps(t: Seq, certificate: cl.Classification) -> dict:
    """The case maps: f (E_t to E_1), identity (E_t to E_0), or g and h."""
    _require_certificate(t, certificate)
    case = certificate.certificate["case"]
    if case == "bounded":
        return {"case": case}
    if case == "tends_to_infinity":
        return {"case": case, "identity": lambda x: x}
    if case == "infinite_ladder":
        h = t.inner if isinstance(t, sc.FiberedByUnpairFirst) else None
        if h is None or not isinstance(h, sc.Linear) or h.a < 1 or h.b < 0 or h.a.denominator != 1:
            raise UnsupportedError("f is implemented when each ladder block is one fiber")
        # A_k = fiber k, enumerated by pair(k, i), so f(x)_k(i) = x(pair(k, i))
        return {"case": case, "f": lambda x: x, "f_inverse": lambda y: y}
    if case == "finite_ladder":
        top = certificate.certificate["ladder"][-1]
        res = _residual_classes(t, top)
        if res is None or not res[1]:
            raise UnsupportedError("residual set is not a union of residue classes")
        m, classes = res
        k = len(classes)

        def g(x):
            parts = [sc.reindex(x, m, c) for c in classes]
            if any(p is None for p in parts):
                raise UnsupportedError("g output is not closed")
            return parts[0] if k == 1 else sc.ResidueInterleave(tuple(parts))

        def h(y):
            rules = []
            for c in range(m):
                if c in classes:
                    r = sc.reindex(y, k, classes.index(c))
                    if r is None:
                        raise UnsupportedError("h output is not closed")
                    rules.append(r)
                else:
                    rules.append(sc.Constant(0))
            return rules[0] if m == 1 else sc.ResidueInterleave(tuple(rules))
        return {"case": case, "g": g, "h": h, "modulus": m, "classes": classes}
    raise CarrierError(f"unknown case {case!r}")


def residual_enumeration(t: Seq, top: int, count: int) -> list[int]:
    """The first indices i with t(i) > top, by scanning (oracle for g and h)."""
    out, i = [], 0
    while len(out) < count:
        if t.value(i) > top:
            out.append(i)
        i += 1
    return out


# ---------------------------------------------------------------------------
# Set-family maps, chosen by the classifier case
# ---------------------------------------------------------------------------

def classes_at_level(values, n) -> list[list[Fraction]]:
    """F_n classes: transitive closure of |u - v| <= n on a finite set."""
    pts = sorted(set(values))
    out: list[list[Fraction]] = []
    for v in pts:
        if out and v - out[-1][-1] <= n:
            out[-1].append(v)
        else:
            out.append([v])
    return out


def _normal_gap(B: rl.SetFamily) -> Seq:
    if not isinstance(B, rl.TwoPoint):
        raise UnsupportedError("maps are implemented for two-point families")
    g = B.gap
    f = sc.floor_values(g)
    neg = sc.negate(g).level_indices(Fraction(0), None)
    if f is None or sc.equal(f, g) is not True or neg != ():
        raise UnsupportedError("maps need a natural-valued gap rule")
    return g


def thm65_maps(B: rl.SetFamily, certificate: cl.Classification) -> dict:
    _require_certificate(B, certificate)
    cert = certificate.certificate
    case = cert["case"]
    if case == "bounded":
        return {"case": case}
    if case == "unbounded_classes":
        if not isinstance(B, rl.ArithmeticGrid):
            raise UnsupportedError("pi is implemented for arithmetic grids")
        step = sc.const_value(B.step)
        slack = sc.sub(B.count, sc.identity())
        if slack is None or sc.negate(slack).level_indices(Fraction(0), None) != ():
            raise UnsupportedError("pi needs count(i) >= i so that i_m = m works")
        # i_m = m, l_m = 0: the z(m)-th element of the single class {0, s, ..., count(m) s}
        return {"case": case, "pi": lambda z: sc.scale(z, step), "source_family": grid_family()}
    g = _normal_gap(B)
    hier = TwoPointClasses(g)
    if case == "gap_divergence":
        n = cert["n"]
        mask = sc.indicator_above(g, n)

        def psi(x):
            out = sc.mul(sc.indicator_nonzero(x), mask)
            if out is None:
                raise UnsupportedError("psi output is not closed")
            return out
        return {"case": case, "psi": psi, "n": n}
    if case == "gap_ladder":
        out = {"case": case, "tau": lambda x: LevelGrid(hier, x)}
        h = g.inner if isinstance(g, sc.FiberedByUnpairFirst) else None
        if h is not None and _one_fiber_per_rung(h):
            def phi(y):
                rl._require_binary(y, "y")
                x = sc.mul(g, y)
                if x is None:
                    raise UnsupportedError("phi output is not closed")
                return x
            out["phi"] = phi
        return out
    raise CarrierError(f"unknown case {case!r}")


def _one_fiber_per_rung(h: Seq) -> bool:
    # strictly increasing natural gaps with h(n) > n put exactly fiber n in rung A_n
    if isinstance(h, sc.Geometric):
        ok = h.a >= 1 and h.r >= 2 and h.a.denominator == 1 and h.r.denominator == 1
    elif isinstance(h, sc.Linear):
        ok = h.a >= 1 and h.b >= 1 and h.a.denominator == 1 and h.b.denominator == 1
    else:
        ok = False
    return ok


def grid_family(step=1) -> rl.ArithmeticGrid:
    """C_i = {0, 1, ..., i} (scaled by step)."""
    return rl.ArithmeticGrid(sc.Constant(step), sc.identity())


def thm65_tau_formula(g: Seq, x: Seq, n: int) -> Fraction:
    k, i = sc.unpair(n)
    comps = classes_at_level([Fraction(0), g.value(i)], k)
    return Fraction(next(idx for idx, c in enumerate(comps) if x.value(i) in c))


def thm65_psi_formula(g: Seq, level: int, x: Seq, i: int) -> Fraction:
    comps = classes_at_level([Fraction(0), g.value(i)], level)
    if len(comps) == 1:
        return Fraction(0)
    return Fraction(next(idx for idx, c in enumerate(comps) if x.value(i) in c))


def thm65_phi_formula(g: Seq, ladder: list[int], y: Seq, i: int, scan: int = 4096) -> Fraction:
    """x(i) from the rung blocks A_n = {i : k_n < g(i) <= k_(n+1)} found by scanning."""
    gi = g.value(i)
    rung = next((r for r in range(len(ladder) - 1) if ladder[r] < gi <= ladder[r + 1]), None)
    if rung is None:
        return Fraction(0)
    j = sum(1 for q in range(i) if ladder[rung] < g.value(q) <= ladder[rung + 1])
    comps = classes_at_level([Fraction(0), gi], rung)
    pick = comps[-1] if y.value(sc.pair(rung, j)) == 1 else comps[0]
    return min(pick)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def _bits(rng, k):
    return tuple(rng.randint(0, 1) for _ in range(k))


def random_binary(rng: random.Random) -> Seq:
    kind = rng.randrange(4)
    if kind == 0:
        return sc.Constant(rng.randint(0, 1))
    if kind == 1:
        return sc.TableThenRule(_bits(rng, rng.randint(1, 6)), sc.Constant(rng.randint(0, 1)))
    periodic = sc.ResidueInterleave(tuple(sc.Constant(b) for b in _bits(rng, rng.randint(2, 4))))
    if kind == 2:
        return periodic
    return sc.TableThenRule(_bits(rng, rng.randint(1, 5)), periodic)


def random_binary_pair(rng):
    x = random_binary(rng)
    if rng.random() < 0.5:
        return x, sc.overwrite(_bits(rng, rng.randint(0, 8)), x)
    return x, random_binary(rng)


def random_fibered_binary(rng) -> Seq:
    inner = random_binary(rng)
    out = sc.FiberedByUnpairFirst(inner)
    if rng.random() < 0.3:
        return sc.TableThenRule(_bits(rng, rng.randint(1, 6)), out)
    return out


def random_fibered_pair(rng):
    x = random_fibered_binary(rng)
    r = rng.random()
    if r < 0.4:
        # change finitely many fibers
        inner = x.rule.inner if isinstance(x, sc.TableThenRule) else x.inner
        return x, sc.FiberedByUnpairFirst(sc.overwrite(_bits(rng, rng.randint(0, 5)), inner))
    return x, random_fibered_binary(rng)


def random_real(rng) -> Seq:
    kind = rng.randrange(5)
    q = lambda: Fraction(rng.randint(-6, 6), rng.randint(1, 3))
    if kind == 0:
        return sc.Constant(q())
    if kind == 1:
        return sc.Linear(rng.randint(-2, 2), q())
    if kind == 2:
        return sc.TableThenRule(tuple(q() for _ in range(rng.randint(1, 5))), sc.Linear(rng.randint(-1, 1), q()))
    if kind == 3:
        return sc.ResidueInterleave((sc.Linear(rng.randint(-2, 2), q()), sc.Constant(q())))
    return sc.Geometric(q() or Fraction(1), rng.choice([Fraction(1, 2), Fraction(-1, 2), Fraction(2)]))


def random_real_pair(rng):
    x = random_real(rng)
    r = rng.random()
    if r < 0.4:
        bump = rng.choice([sc.Constant(rng.randint(-5, 5)),
                           sc.ResidueInterleave((sc.Constant(1), sc.Constant(-2))),
                           sc.TableThenRule((7, -3), sc.Constant(0))])
        return x, sc.add(x, bump)
    if r < 0.7:
        return x, sc.add(x, rng.choice([sc.Linear(1, 0), sc.Linear(-2, 1), sc.Geometric(1, 2)]))
    return x, random_real(rng)


def random_natural(rng) -> Seq:
    kind = rng.randrange(4)
    if kind == 0:
        return sc.Constant(rng.randint(0, 6))
    if kind == 1:
        return sc.Linear(rng.randint(0, 3), rng.randint(0, 5))
    if kind == 2:
        return sc.TableThenRule(tuple(rng.randint(0, 9) for _ in range(rng.randint(1, 5))),
                                sc.Linear(rng.randint(0, 2), rng.randint(0, 4)))
    return sc.ResidueInterleave((sc.Linear(rng.randint(0, 3), rng.randint(0, 4)), sc.Constant(rng.randint(0, 6))))


def random_natural_pair(rng):
    x = random_natural(rng)
    r = rng.random()
    if r < 0.4:
        bump = rng.choice([sc.Constant(rng.randint(0, 4)), sc.ResidueInterleave((sc.Constant(1), sc.Constant(3))),
                           sc.TableThenRule((5, 0, 2), sc.Constant(0))])
        return x, sc.add(x, bump)
    if r < 0.7:
        return x, sc.add(x, sc.Linear(rng.randint(1, 2), 0))
    return x, random_natural(rng)


def random_exponents_pair(rng):
    e, f = random_natural_pair(rng)
    return sc.exp2(e), sc.exp2(f)


def random_box(rng) -> Seq:
    """A point of prod {0, ..., i}."""
    k = rng.randint(0, 4)
    rule = rng.choice([sc.Constant(k), sc.Linear(1, -k), sc.identity(),
                       sc.ResidueInterleave((sc.Linear(2, 0), sc.Constant(k))),
                       sc.ResidueInterleave((sc.Constant(0), sc.Linear(2, 1 - k)))])
    head = tuple(min(max(rule.value(i), Fraction(0)), Fraction(i)) for i in range(2 * k + 2))
    return sc.TableThenRule(head, rule)


def random_box_pair(rng):
    x = random_box(rng)
    r = rng.random()
    if r < 0.3 and isinstance(x.rule, sc.Linear):
        # a bounded shift of the rule, clamped into the box on the head
        k = rng.randint(0, 3)
        rule = sc.Linear(x.rule.a, x.rule.b - k)
        head = tuple(min(max(rule.value(i), Fraction(0)), Fraction(i)) for i in range(len(x.table) + 2 * k + 2))
        return x, sc.TableThenRule(head, rule)
    if r < 0.5:
        head = tuple(Fraction(rng.randint(0, i)) for i in range(rng.randint(1, 8)))
        return x, sc.TableThenRule(head, x)
    return x, random_box(rng)


def random_selector_pair(rng, fibered: bool):
    return random_fibered_pair(rng) if fibered else random_binary_pair(rng)


# ---------------------------------------------------------------------------
# Reduction registry and verification harness
# ---------------------------------------------------------------------------

@dataclass
class Reduction:
    name: str
    family: str
    source: object
    target: object
    apply: Callable
    sample: Callable
    formula: Callable
    probe: int = PROBE
    quantitative: Optional[Callable] = None
    prefix_length: int = 24


def output_value(out, n: int, length: int):
    v = out.value(n)
    return v.prefix(length) if isinstance(v, Seq) else v


class Overridden(Composite):
    """A composite output with one value replaced (mutation testing)."""

    def __init__(self, base, n, new):
        self.base, self.n, self.new = base, n, new

    def value(self, n):
        return self.new if n == self.n else self.base.value(n)

    def __getattr__(self, name):
        return getattr(self.__dict__["base"], name)

    def decide_pair(self, rel, other, horizon):
        other = other.base if isinstance(other, (Overridden, Shifted)) else other
        return self.base.decide_pair(rel, other, horizon)


def mutate_output(out, n: int):
    """Change the output at flat index n."""
    if isinstance(out, Seq):
        head = list(out.prefix(n + 1))
        head[n] = 1 - head[n] if head[n] in (0, 1) else head[n] + 1
        return sc.TableThenRule(tuple(head), out)
    v = out.value(n)
    if isinstance(v, Seq):
        return Overridden(out, n, sc.TableThenRule(tuple(1 - b for b in v.prefix(1)), v))
    return Overridden(out, n, v + 1)


class Shifted(Composite):
    """A composite output read one index late (off-by-one mutation)."""

    def __init__(self, base):
        self.base = base

    def value(self, n):
        return self.base.value(n + 1)

    def __getattr__(self, name):
        return getattr(self.__dict__["base"], name)

    def decide_pair(self, rel, other, horizon):
        other = other.base if isinstance(other, (Overridden, Shifted)) else other
        return self.base.decide_pair(rel, other, horizon)


def shift_output(out):
    if isinstance(out, Seq):
        shifted = sc.reindex(out, 1, 1)
        if shifted is not None:
            return shifted
        return sc.TableThenRule(tuple(out.prefix(PROBE + 1)[1:]), out)
    return Shifted(out)


def _lemma21_sample(rng):
    k = rng.randint(1, 3)
    pairs = [random_binary_pair(rng) for _ in range(k)]
    if rng.random() < 0.5:
        pairs = [(x, sc.overwrite(_bits(rng, rng.randint(0, 5)), x)) for x, _ in pairs]
    return tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)


def _lemma21_quant(x, y, vs, vt, fx, fy):
    if vt.outcome == rl.EQUIVALENT:
        last = int(vt.constant) - 1
        for n in range(16):
            m = fx.partner(n, fy, last)
            if fx.value(n).prefix(40) != fy.value(m).prefix(40):
                return f"partner of {n} does not match"
    return None


def _contraction_quant(x, y, vs, vt, fx, fy):
    for n in range(PROBE):
        i, _ = sc.unpair(n)
        if abs(fx.value(n) - fy.value(n)) > abs(x.value(i) - y.value(i)):
            return f"contraction fails at {n}"
    if vs.equivalent and vt.equivalent and vt.constant > vs.constant:
        return "target constant exceeds source constant"
    return _witness_values(vt, fx, fy)


def _witness_values(vt, fx, fy):
    if vt.outcome == rl.NOT_EQUIVALENT:
        for n, d in vt.witness:
            if abs(fx.value(n) - fy.value(n)) != d:
                return f"witness at {n} does not evaluate to {d}"
    return None


def _bound_quant(x, y, vs, vt, fx, fy):
    if vs.equivalent and vt.equivalent and vt.constant > vs.constant:
        return "target constant exceeds source constant"
    return _witness_values(vt, fx, fy)


def _escape_quant(x, y, vs, vt, fx, fy):
    if vs.equivalent:
        k = int(vs.constant)
        allowed = {Fraction(v) for v in range(k)}
        for n in range(4 * PROBE):
            if fx.value(n) != fy.value(n) and not {fx.value(n), fy.value(n)} <= allowed:
                return f"outputs differ at {n} outside z_0..z_{k - 1}"
    return None


def _caseII_quant(x, y, vs, vt, fx, fy):
    for i in range(20):
        p = path_unrank(i)
        if path_rank(p) != i:
            return f"rank/unrank mismatch at {i}"
        for a in range(8):
            for b in range(8):
                if abs(path_at(p, a) - path_at(p, b)) > 2 * abs(a - b):
                    return f"path {i} breaks d(p(a), p(b)) <= C|a - b|"
    return _witness_values(vt, fx, fy)


def _scaled_quant(x, y, vs, vt, fx, fy):
    if vs.equivalent and vt.constant != 2 * vs.constant:
        return "target constant is not step times the source constant"
    return None


def _e0_witness_quant(x, y, vs, vt, fx, fy):
    if vt.outcome == rl.NOT_EQUIVALENT:
        for n, d in vt.witness:
            if fx.value(n) - fy.value(n) != d:
                return f"witness at {n} does not evaluate"
    return None


def _level_grid_quant(x, y, vs, vt, fx, fy):
    if vt.outcome == rl.NOT_EQUIVALENT:
        for k, n in vt.witness:
            if fx.value(n) == fy.value(n):
                return f"fiber {k} witness at {n} does not separate"
    if vt.outcome == rl.EQUIVALENT:
        K = int(vt.constant)
        for n in range(4 * PROBE):
            k, _ = sc.unpair(n)
            if k >= K and fx.value(n) != fy.value(n):
                return f"fiber {k} >= {K} differs at {n}"
    return None


def build_reductions() -> dict[str, Reduction]:
    nat = rl.RealPoints(sc.identity())
    ints = rl.RealPoints(sc.ResidueInterleave((sc.identity(), sc.Linear(-1, -1))))
    powers = rl.RealPoints(sc.Geometric(1, 2))
    b = sc.Linear(1, 1)
    t_fiber = sc.FiberedByUnpairFirst(sc.identity())
    t_lin = sc.identity()
    t_ladder = sc.ResidueInterleave((sc.Constant(0), sc.Linear(2, 1)))
    B_pi = rl.ArithmeticGrid(sc.Constant(2), sc.Linear(1, 1))
    B_psi = rl.TwoPoint(sc.Geometric(1, 2))
    g_tau = sc.FiberedByUnpairFirst(sc.Geometric(1, 2))
    B_tau = rl.TwoPoint(g_tau)

    m62f = thm62_maps(t_fiber, cl.classify_Et(t_fiber))
    m62i = thm62_maps(t_lin, cl.classify_Et(t_lin))
    m62g = thm62_maps(t_ladder, cl.classify_Et(t_ladder))
    m65pi = thm65_maps(B_pi, cl.classify_EB(B_pi))
    psi_cert = cl.classify_EB(B_psi)
    m65psi = thm65_maps(B_psi, psi_cert)
    tau_cert = cl.classify_EB(B_tau)
    m65tau = thm65_maps(B_tau, tau_cert)
    case1 = cl.classify_metric(powers)
    case2 = cl.classify_metric(ints)
    # the oracle needs rungs beyond the certificate prefix to cover the probed fibers
    ladder = cl._gap_ladder(g_tau, 16)
    resid = residual_enumeration(t_ladder, cl.classify_Et(t_ladder).certificate["ladder"][-1], 200)

    def sample_escape(rng):
        return random_fibered_pair(rng)

    def sample_tau(rng):
        s, s2 = random_fibered_pair(rng)
        return B_tau.element(s), B_tau.element(s2)

    def sample_psi(rng):
        s, s2 = random_binary_pair(rng)
        return B_psi.element(s), B_psi.element(s2)

    def sample_box(rng):
        return random_box_pair(rng)

    reds = [
        Reduction("lemma21", "lemma21", rl.E0Omega(), rl.SetEq(), lemma21_map, _lemma21_sample,
                  lambda xs, n: lemma21_formula(xs, n), quantitative=_lemma21_quant),
        Reduction("lemma51", "lemma51", rl.LInf(), rl.LInfRestricted(b), lambda x: lemma51_map(x, b),
                  random_real_pair, lambda x, n: lemma51_formula(x, b, n), quantitative=_contraction_quant),
        Reduction("lemma55", "lemma55", rl.FMetric(nat), rl.LInf(), lambda x: lemma55_map(x, nat),
                  random_natural_pair, lambda x, n: lemma55_formula(x, nat, n), quantitative=_bound_quant),
        Reduction("thm58_net", "thm58_net", rl.LInfMetric(nat), rl.LInf(), lambda x: thm58_net_map(x, nat),
                  random_natural_pair, lambda x, n: thm58_net_formula(x, nat, n), quantitative=_bound_quant),
        Reduction("thm58_escape", "thm58_escape", rl.E1(), rl.LInfMetric(nat),
                  lambda x: thm58_escape_map(x, nat), sample_escape,
                  lambda x, n: thm58_escape_formula(x, nat, n), quantitative=_escape_quant),
        Reduction("thm58_case1", "thm58_case1", rl.LInfMetric(powers), rl.E1(),
                  lambda x: thm58_caseI_map(x, powers, case1), random_exponents_pair,
                  lambda x, n: thm58_caseI_formula(x, n), quantitative=_level_grid_quant),
        Reduction("thm58_case2", "thm58_case2", rl.LInf(), rl.LInfMetric(ints),
                  lambda x: thm58_caseII_map(x, ints, case2), random_natural_pair,
                  lambda x, n: thm58_caseII_formula(x, n), probe=40, quantitative=_caseII_quant),
        Reduction("thm62_f", "thm62", rl.ETbar(t_fiber), rl.E1(), m62f["f"], sample_escape,
                  lambda x, n: x.value(sc.pair(*sc.unpair(n)))),
        Reduction("thm62_identity", "thm62", rl.ETbar(t_lin), rl.E0(), m62i["identity"], random_binary_pair,
                  lambda x, n: x.value(n), quantitative=_e0_witness_quant),
        Reduction("thm62_g", "thm62", rl.ETbar(t_ladder), rl.E0(), m62g["g"], random_binary_pair,
                  lambda x, n: x.value(resid[n]), quantitative=_e0_witness_quant),
        Reduction("thm62_h", "thm62", rl.E0(), rl.ETbar(t_ladder), m62g["h"], random_binary_pair,
                  lambda y, n: y.value(resid.index(n)) if n in resid else Fraction(0)),
        Reduction("thm65_pi", "thm65", rl.EBbar(grid_family()), rl.EBbar(B_pi), m65pi["pi"], sample_box,
                  lambda z, n: 2 * z.value(n), quantitative=_scaled_quant),
        Reduction("thm65_psi", "thm65", rl.EBbar(B_psi), rl.E0(), m65psi["psi"], sample_psi,
                  lambda x, n: thm65_psi_formula(B_psi.gap, m65psi["n"], x, n), quantitative=_e0_witness_quant),
        Reduction("thm65_tau", "thm65", rl.EBbar(B_tau), rl.E1(), m65tau["tau"], sample_tau,
                  lambda x, n: thm65_tau_formula(g_tau, x, n), quantitative=_level_grid_quant),
        Reduction("thm65_phi", "thm65", rl.E1(), rl.EBbar(B_tau), m65tau["phi"], sample_escape,
                  lambda y, n: thm65_phi_formula(g_tau, ladder, y, n)),
    ]
    return {r.name: r for r in reds}


_REGISTRY: dict = {}


def get_reduction(name: str) -> Reduction:
    if not _REGISTRY:
        _REGISTRY.update(build_reductions())
    if name not in _REGISTRY:
        raise KeyError(f"unknown reduction {name!r}; choose from {sorted(_REGISTRY)}")
    return _REGISTRY[name]


def reduction_names() -> list[str]:
    if not _REGISTRY:
        _REGISTRY.update(build_reductions())
    return list(_REGISTRY)


FAMILIES = ("lemma21", "lemma51", "lemma55", "thm58_net", "thm58_escape", "thm58_case1", "thm58_case2",
            "thm62", "thm65")


@dataclass
class Report:
    reduction: str
    seed: int
    requested: int
    agree: int = 0
    disagree: int = 0
    undecidable: int = 0
    formula_failures: int = 0
    quantitative_failures: int = 0
    records: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.agree == self.requested and not (self.disagree or self.formula_failures
                                                     or self.quantitative_failures)

    def to_json(self) -> dict:
        return {"reduction": self.reduction, "seed": self.seed, "requested": self.requested,
                "agree": self.agree, "disagree": self.disagree, "undecidable": self.undecidable,
                "formula_failures": self.formula_failures, "quantitative_failures": self.quantitative_failures,
                "ok": self.ok, "records": self.records}


def verify_reduction(red, n: int = 200, seed: int = 7, horizon: int = rl.DEFAULT_HORIZON,
                     mutation: Optional[tuple] = None, keep_records: bool = False) -> Report:
    """Sample n decidable source pairs and check that the map preserves verdicts.

    mutation = ("value", k) changes every first output at flat index k; ("shift",)
    reads every output one index late. The formula probe must catch either.
    """
    if isinstance(red, str):
        red = get_reduction(red)
    rng = random.Random(seed)
    rep = Report(red.name, seed, n)
    attempts = 0
    while rep.agree + rep.disagree < n and attempts < 30 * n:
        attempts += 1
        x, y = red.sample(rng)
        if x is None or y is None:
            rep.undecidable += 1
            continue
        try:
            vs = rl.decide(red.source, x, y, horizon)
        except (CarrierError, UnsupportedError):
            rep.undecidable += 1
            continue
        if not vs.definite:
            rep.undecidable += 1
            continue
        fx = fy = None
        try:
            fx, fy = red.apply(x), red.apply(y)
            if mutation and mutation[0] == "shift":
                fx, fy = shift_output(fx), shift_output(fy)
            if mutation and mutation[0] == "value":
                fx = mutate_output(fx, mutation[1])
            vt = rl.decide(red.target, fx, fy, horizon)
        except (CarrierError, UnsupportedError) as exc:
            vt = rl.unknown(horizon, str(exc))
        agree = vt.outcome == vs.outcome
        # a map that fails on a decidable input cannot match its formula
        formula_ok = fx is not None and fy is not None and \
            all(output_value(fx, k, red.prefix_length) == red.formula(x, k) for k in range(red.probe)) and \
            all(output_value(fy, k, red.prefix_length) == red.formula(y, k) for k in range(red.probe))
        quant = red.quantitative(x, y, vs, vt, fx, fy) if (red.quantitative and agree and fx is not None) else None
        rep.agree += agree
        rep.disagree += not agree
        rep.formula_failures += not formula_ok
        rep.quantitative_failures += quant is not None
        if keep_records or not agree or not formula_ok or quant:
            rep.records.append({"source": vs.outcome, "target": vt.outcome, "note": vt.note, "formula_ok": formula_ok,
                                "quantitative": quant or "ok"})
    return rep

