"""Decision procedures for the benchmark equivalence relations on descriptors.

Every decision is exact when the pointwise difference of the pair stays inside the
closed descriptor kinds; otherwise the verdict is ``UnknownAtHorizon``. Exact verdicts
never depend on the horizon, which only bounds witness searches and prefix checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import seqcore as sc
from .seqcore import Seq

DEFAULT_HORIZON = 10_000
PREFIX_CHECK = 256


class CarrierError(ValueError):
    """An input lies outside the carrier of the relation."""


class UnsupportedError(ValueError):
    """The descriptor kind does not support the requested exact predicate."""


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

EQUIVALENT = "Equivalent"
NOT_EQUIVALENT = "NotEquivalent"
UNKNOWN = "UnknownAtHorizon"


@dataclass(frozen=True)
class Verdict:
    outcome: str
    constant: Optional[Fraction] = None
    witness: tuple = ()
    horizon: Optional[int] = None
    note: str = ""

    @property
    def equivalent(self) -> bool:
        return self.outcome == EQUIVALENT

    @property
    def definite(self) -> bool:
        return self.outcome != UNKNOWN

    def to_json(self) -> dict:
        out = {"outcome": self.outcome}
        if self.constant is not None:
            out["constant"] = sc.number_to_json(self.constant) if isinstance(self.constant, (int, Fraction)) \
                else float(self.constant)
        if self.witness:
            out["witness"] = [[_jsonable(v) for v in w] if isinstance(w, tuple) else _jsonable(w)
                              for w in self.witness]
        if self.horizon is not None:
            out["horizon"] = self.horizon
        if self.note:
            out["note"] = self.note
        return out


def _jsonable(v):
    if isinstance(v, Fraction):
        return sc.number_to_json(v)
    if isinstance(v, float):
        return v
    return v


def equivalent(c=None, note="") -> Verdict:
    return Verdict(EQUIVALENT, None if c is None else c, note=note)


def not_equivalent(witness=(), note="") -> Verdict:
    return Verdict(NOT_EQUIVALENT, witness=tuple(witness), note=note)


def unknown(horizon: int, note="") -> Verdict:
    return Verdict(UNKNOWN, horizon=horizon, note=note)


# ---------------------------------------------------------------------------
# Finite set families
# ---------------------------------------------------------------------------

class SetFamily:
    """Per-index finite subsets B_i of the reals."""

    def sets(self, i: int) -> tuple[Fraction, ...]:
        raise NotImplementedError

    def element(self, selector: Seq) -> Seq:
        """The point x of prod B_i with x(i) = sorted(B_i)[selector(i)]."""
        raise NotImplementedError

    def contains(self, x: Seq, horizon: int = PREFIX_CHECK) -> bool:
        return all(x.value(i) in self.sets(i) for i in range(horizon))

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class TwoPoint(SetFamily):
    """B_i = {0, gap(i)}."""
    gap: Seq

    def sets(self, i):
        return tuple(sorted({Fraction(0), self.gap.value(i)}))

    def element(self, selector):
        out = sc.mul(selector, self.gap)
        if out is None:
            raise UnsupportedError("selector and gap do not combine")
        return out

    def contains(self, x, horizon=PREFIX_CHECK):
        d = sc.sub(x, self.gap)
        p = None if d is None else sc.mul(x, d)
        if p is not None:
            return p.is_zero()
        return super().contains(x, horizon)

    def to_json(self):
        return {"kind": "TwoPoint", "params": {"gap": sc.to_json(self.gap)}}


@dataclass(frozen=True)
class ArithmeticGrid(SetFamily):
    """B_i = {0, s(i), 2 s(i), ..., m(i) s(i)}."""
    step: Seq
    count: Seq

    def sets(self, i):
        s, m = self.step.value(i), self.count.value(i)
        if m < 0 or m.denominator != 1:
            raise CarrierError(f"grid count at {i} must be a natural number")
        return tuple(sorted({k * s for k in range(int(m) + 1)}))

    def element(self, selector):
        out = sc.mul(selector, self.step)
        if out is None:
            raise UnsupportedError("selector and step do not combine")
        return out

    def contains(self, x, horizon=PREFIX_CHECK):
        for i in range(horizon):
            v, s, m = x.value(i), self.step.value(i), self.count.value(i)
            if v == 0:
                continue
            if s == 0 or (v / s).denominator != 1 or not 0 <= v / s <= m:
                return False
        return True

    def to_json(self):
        return {"kind": "ArithmeticGrid",
                "params": {"step": sc.to_json(self.step), "count": sc.to_json(self.count)}}


@dataclass(frozen=True)
class FamilyTable(SetFamily):
    """Explicit sets for i < len(table), then a rule family (absolute index)."""
    table: tuple
    rule: SetFamily

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(tuple(sorted({sc.to_number(v) for v in b})) for b in self.table))
        if any(len(b) == 0 for b in self.table):
            raise CarrierError("every B_i must be nonempty")

    def sets(self, i):
        return self.table[i] if i < len(self.table) else self.rule.sets(i)

    def element(self, selector):
        n = len(self.table)
        head = tuple(self.table[i][int(selector.value(i))] for i in range(n))
        return sc.TableThenRule(head, self.rule.element(selector))

    def contains(self, x, horizon=PREFIX_CHECK):
        n = len(self.table)
        return all(x.value(i) in self.table[i] for i in range(n)) and self.rule.contains(x, horizon)

    def to_json(self):
        return {"kind": "TableThenRule",
                "params": {"table": [[sc.number_to_json(v) for v in b] for b in self.table],
                           "rule": self.rule.to_json()}}


def family_from_json(obj, where="$") -> SetFamily:
    if not isinstance(obj, dict):
        raise sc.DescriptorError(f"{where}: set family must be an object")
    kind, params = obj.get("kind"), obj.get("params", {})
    if kind == "TwoPoint":
        return TwoPoint(sc.from_json(sc._need(params, "gap", where), where + ".params.gap"))
    if kind == "ArithmeticGrid":
        return ArithmeticGrid(sc.from_json(sc._need(params, "step", where), where + ".params.step"),
                              sc.from_json(sc._need(params, "count", where), where + ".params.count"))
    if kind == "TableThenRule":
        return FamilyTable(tuple(sc._need(params, "table", where)),
                           family_from_json(sc._need(params, "rule", where), where + ".params.rule"))
    raise sc.DescriptorError(f"{where}.kind: unknown set family {kind!r}")


# ---------------------------------------------------------------------------
# Metric spaces
# ---------------------------------------------------------------------------

class MetricSpace:
    def distance(self, u, v) -> Fraction:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class RealPoints(MetricSpace):
    """The points values(k) of the real line with d(u, v) = |u - v|.

    Elements of X^omega are given as descriptors of point values.
    """
    values: Seq

    def distance(self, u, v):
        return abs(sc.to_number(u) - sc.to_number(v))

    def point(self, k: int) -> Fraction:
        return self.values.value(k)

    def contains(self, x: Seq, horizon: int = PREFIX_CHECK) -> bool:
        pts = set(self.values.prefix(4 * horizon + 16))
        return all(v in pts or self._member(v) for v in x.prefix(horizon))

    def _member(self, v: Fraction) -> bool:
        idx = self.values.level_indices(v - 1, v)
        if idx is None:
            return any(self.values.value(i) == v for i in sc.take(sc.iter_level(self.values, v - 1, v), 64))
        return any(self.values.value(i) == v for i in idx)

    def is_unbounded(self) -> bool:
        return not self.values.is_bounded()

    def net(self) -> Seq:
        """Canonical 1-net: greedy in enumeration order, pairwise distances > 1."""
        a = self.values
        if isinstance(a, sc.Linear) and a.a > 0:
            k = math.floor(1 / a.a) + 1
            return sc.Linear(a.a * k, a.b)
        if isinstance(a, sc.Geometric) and a.a > 0 and a.r > 1:
            chosen, i = [], 0
            while True:
                v = a.value(i)
                if not chosen or v - chosen[-1] > 1:
                    if a.value(i + 1) - v > 1:
                        break
                    chosen.append(v)
                i += 1
            # from index i on, consecutive gaps exceed 1 so every point is kept
            tail = sc.reindex(a, 1, i - len(chosen))
            return sc.TableThenRule(tuple(chosen), tail) if chosen else tail
        raise UnsupportedError("closed-form 1-net only for increasing Linear or Geometric points")

    def escaping(self) -> Seq:
        """A sequence z_n of points with d(z_0, z_n) -> infinity."""
        a = self.values
        if isinstance(a, (sc.Linear, sc.Geometric)) and a.tends_to_infinity():
            return a
        if isinstance(a, sc.ResidueInterleave) and all(
                r.tends_to_infinity() or sc.negate(r).tends_to_infinity() for r in a.rules):
            return a
        raise CarrierError("no escaping sequence: the point set is bounded or unsupported")

    def to_json(self):
        return {"kind": "RealPoints", "params": {"values": sc.to_json(self.values)}}


@dataclass(frozen=True)
class DisjointBlocks(MetricSpace):
    """Blocks of unit-spaced points on the line: block b has diameter diam(b) and is
    followed by a gap sep(b) before block b + 1."""
    diam: Seq
    sep: Seq

    def block_start(self, b: int) -> Fraction:
        return sum((self.diam.value(k) + self.sep.value(k) for k in range(b)), Fraction(0))

    def points(self, nblocks: int) -> list[Fraction]:
        out = []
        for b in range(nblocks):
            s = self.block_start(b)
            out.extend(s + k for k in range(int(self.diam.value(b)) + 1))
        return out

    def distance(self, u, v):
        return abs(sc.to_number(u) - sc.to_number(v))

    def to_json(self):
        return {"kind": "DisjointBlocks", "params": {"diam": sc.to_json(self.diam), "sep": sc.to_json(self.sep)}}


@dataclass(frozen=True)
class FinitePrototype(MetricSpace):
    """Finitely many labelled points with an explicit distance table."""
    labels: tuple
    table: tuple

    def __post_init__(self):
        n = len(self.labels)
        tab = tuple(tuple(sc.to_number(v) for v in row) for row in self.table)
        object.__setattr__(self, "table", tab)
        if len(tab) != n or any(len(row) != n for row in tab):
            raise sc.DescriptorError("distance table must be square")
        for i in range(n):
            for j in range(n):
                if tab[i][j] < 0 or tab[i][j] != tab[j][i] or (tab[i][j] == 0) != (i == j):
                    raise sc.DescriptorError("distance table must be a metric")
                for k in range(n):
                    if tab[i][k] > tab[i][j] + tab[j][k]:
                        raise sc.DescriptorError("distance table violates the triangle inequality")

    def distance(self, u, v):
        return self.table[int(u)][int(v)]

    def to_json(self):
        return {"kind": "FinitePrototype",
                "params": {"labels": list(self.labels),
                           "table": [[sc.number_to_json(v) for v in row] for row in self.table]}}


def validate_metric(X: MetricSpace, n: int = 50) -> None:
    """Check the metric axioms on all triples among the first n points."""
    if isinstance(X, RealPoints):
        pts = X.values.prefix(n)
        if len(set(pts)) != len(pts):
            raise sc.DescriptorError("RealPoints values must be distinct")
    elif isinstance(X, DisjointBlocks):
        for b in range(n):
            if X.diam.value(b) < 0 or X.diam.value(b).denominator != 1 or X.sep.value(b) <= 0:
                raise sc.DescriptorError("DisjointBlocks needs natural diameters and positive gaps")


def metric_from_json(obj, where="$") -> MetricSpace:
    if not isinstance(obj, dict):
        raise sc.DescriptorError(f"{where}: metric space must be an object")
    kind, params = obj.get("kind"), obj.get("params", {})
    if kind == "RealPoints":
        X = RealPoints(sc.from_json(sc._need(params, "values", where), where + ".params.values"))
    elif kind == "DisjointBlocks":
        X = DisjointBlocks(sc.from_json(sc._need(params, "diam", where), where + ".params.diam"),
                           sc.from_json(sc._need(params, "sep", where), where + ".params.sep"))
    elif kind == "FinitePrototype":
        X = FinitePrototype(tuple(sc._need(params, "labels", where)), tuple(sc._need(params, "table", where)))
    else:
        raise sc.DescriptorError(f"{where}.kind: unknown metric space {kind!r}")
    validate_metric(X)
    return X


# ---------------------------------------------------------------------------
# Relation identifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class E0:
    name = "E0"


@dataclass(frozen=True)
class E1:
    """Eventual agreement of sequences of sequences; x_i(j) is stored at pair(i, j)."""
    name = "E1"


@dataclass(frozen=True)
class Lp:
    p: Fraction
    name = "Lp"

    def __post_init__(self):
        object.__setattr__(self, "p", sc.to_number(self.p))
        if self.p < 1:
            raise CarrierError("Lp needs p >= 1")


@dataclass(frozen=True)
class LInf:
    name = "LInf"


@dataclass(frozen=True)
class LInfRestricted:
    """ell_infinity restricted to prod [0, b(n)]."""
    b: Seq
    name = "LInfRestricted"


@dataclass(frozen=True)
class ETbar:
    """x ~ y iff sup_i t_i |x(i) - y(i)| < infinity, on binary sequences."""
    t: Seq
    name = "ETbar"


@dataclass(frozen=True)
class EBbar:
    family: SetFamily
    name = "EBbar"


@dataclass(frozen=True)
class E0Omega:
    name = "E0Omega"


@dataclass(frozen=True)
class SetEq:
    name = "SetEq"


@dataclass(frozen=True)
class LInfMetric:
    X: MetricSpace
    name = "LInfMetric"


@dataclass(frozen=True)
class FMetric:
    X: MetricSpace
    name = "FMetric"


RELATION_NAMES = ("E0", "E1", "Lp", "LInf", "LInfRestricted", "ETbar", "EBbar", "E0Omega",
                  "SetEq", "LInfMetric", "FMetric")


def relation_to_json(rel) -> dict:
    out = {"relation": rel.name}
    if isinstance(rel, Lp):
        out["p"] = sc.number_to_json(rel.p)
    elif isinstance(rel, LInfRestricted):
        out["b"] = sc.to_json(rel.b)
    elif isinstance(rel, ETbar):
        out["t"] = sc.to_json(rel.t)
    elif isinstance(rel, EBbar):
        out["family"] = rel.family.to_json()
    elif isinstance(rel, (LInfMetric, FMetric)):
        out["X"] = rel.X.to_json()
    return out


def relation_from_json(obj, where="$"):
    if not isinstance(obj, dict) or "relation" not in obj:
        raise sc.DescriptorError(f"{where}: relation must be an object with a 'relation' field")
    name = obj["relation"]
    simple = {"E0": E0, "E1": E1, "LInf": LInf, "E0Omega": E0Omega, "SetEq": SetEq}
    if name in simple:
        return simple[name]()
    if name == "Lp":
        return Lp(sc.to_number(sc._need(obj, "p", where)))
    if name == "LInfRestricted":
        return LInfRestricted(sc.from_json(sc._need(obj, "b", where), where + ".b"))
    if name == "ETbar":
        return ETbar(sc.from_json(sc._need(obj, "t", where), where + ".t"))
    if name == "EBbar":
        return EBbar(family_from_json(sc._need(obj, "family", where), where + ".family"))
    if name == "LInfMetric":
        return LInfMetric(metric_from_json(sc._need(obj, "X", where), where + ".X"))
    if name == "FMetric":
        return FMetric(metric_from_json(sc._need(obj, "X", where), where + ".X"))
    raise sc.DescriptorError(f"{where}.relation: unknown relation {name!r}")


# ---------------------------------------------------------------------------
# Composite carriers (outputs of reduction maps) decide themselves
# ---------------------------------------------------------------------------

class Composite:
    """A structured element (grid, family) that knows how to decide relations with a
    partner of the same shape."""

    def value(self, n: int):
        raise NotImplementedError

    def decide_pair(self, rel, other, horizon: int) -> Verdict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Deciders
# ---------------------------------------------------------------------------

def _growth_witness(d: Seq, horizon: int, limit: int = 6) -> tuple:
    """Indices i < horizon where |d(i)| first exceeds 1, 2, 4, ... (exact values)."""
    out, level = [], Fraction(1)
    for i in range(horizon):
        v = abs(d.value(i))
        if v > level:
            out.append((i, v))
            while v > level:
                level *= 2
            if len(out) >= limit:
                break
    return tuple(out)


def _support_witness(d: Seq, horizon: int, limit: int = 6) -> tuple:
    return tuple((i, d.value(i)) for i in sc.take((i for i in range(horizon) if d.value(i) != 0), limit))


def _require_binary(x: Seq, name: str) -> None:
    try:
        sc.check_domain(x, "binary")
    except sc.DescriptorError as exc:
        raise CarrierError(f"{name}: {exc}") from exc


def _decide_sup(d: Optional[Seq], horizon: int) -> Verdict:
    if d is None:
        return unknown(horizon, "difference leaves the closed descriptor kinds")
    s = d.sup_abs_from(0)
    if s is None:
        return not_equivalent(_growth_witness(d, horizon))
    return equivalent(s)


def _leaf_growth(d: Seq):
    """(kind, rate, coefficient) of an unbounded leaf; None for bounded leaves."""
    if isinstance(d, sc.Linear) and d.a != 0:
        return ("poly", Fraction(1), d.a)
    if isinstance(d, sc.Geometric) and d.a != 0 and abs(d.r) > 1:
        return ("exp", abs(d.r), d.a)
    return None


def _unbounded_marker(u: Seq, v: Seq) -> Optional[Seq]:
    # u - v for leaves whose difference is not closed: unbounded when growth rates differ
    d = sc.sub(u, v)
    if d is not None:
        return d
    gu, gv = _leaf_growth(u), _leaf_growth(v)
    if gu is None and gv is None:
        return sc.Constant(0)
    rank = lambda g: (0, Fraction(0)) if g is None else ((1, g[1]) if g[0] == "poly" else (2, g[1]))
    if rank(gu) != rank(gv):
        return sc.identity()
    return None


class _Difference:
    def __init__(self, x, y):
        self.x, self.y = x, y

    def value(self, i):
        return self.x.value(i) - self.y.value(i)


def decide_sup_distance(x: Seq, y: Seq, horizon: int) -> Verdict:
    """sup |x - y|, falling back to leafwise growth rates when x - y is not closed."""
    d = sc.sub(x, y)
    if d is not None:
        return _decide_sup(d, horizon)
    marker = sc.combine(x, y, lambda u, v: u - v, _unbounded_marker)
    if marker is not None and marker.sup_abs_from(0) is None:
        return not_equivalent(_growth_witness(_Difference(x, y), horizon), note="leaf growth rates differ")
    return unknown(horizon, "difference leaves the closed descriptor kinds")


def decide_e0(x: Seq, y: Seq, horizon: int = DEFAULT_HORIZON) -> Verdict:
    _require_binary(x, "x")
    _require_binary(y, "y")
    d = sc.sub(x, y)
    if d is None:
        return unknown(horizon, "difference leaves the closed descriptor kinds")
    supp = d.support()
    if supp is None:
        return not_equivalent(_support_witness(d, horizon))
    return equivalent(Fraction(max(supp) + 1 if supp else 0))


def nonzero_fibers(d: Seq) -> Optional[tuple[int, ...]]:
    """Fibers i whose entries d(pair(i, j)) are not all zero; None if infinitely many.

    Raises UnsupportedError when the descriptor kind does not expose fiber structure.
    """
    c = sc.const_value(d)
    if c is not None:
        return () if c == 0 else None
    if isinstance(d, sc.FiberedByUnpairFirst):
        return d.inner.support()
    if isinstance(d, sc.TableThenRule):
        tail = nonzero_fibers(d.rule)
        if tail is None:
            return None
        # tail fibers are computed for the whole rule; prefix entries override finitely many
        touched = {sc.first(n) for n in range(len(d.table))}
        out = set(tail) - touched
        for f in touched:
            if _fiber_nonzero(d, f, len(d.table)):
                out.add(f)
        return tuple(sorted(out))
    if isinstance(d, (sc.Linear, sc.Geometric)):
        # a non-constant leaf vanishes at finitely many indices, so every fiber is nonzero
        return None
    if d.is_zero():
        return ()
    raise UnsupportedError("fiber structure not available for this descriptor kind")


def _fiber_nonzero(d: sc.TableThenRule, f: int, n: int) -> bool:
    # entries of fiber f inside the table, then the tail rule's fiber beyond the table
    j = 0
    while sc.pair(f, j) < n:
        if d.table[sc.pair(f, j)] != 0:
            return True
        j += 1
    rule = d.rule
    if isinstance(rule, sc.FiberedByUnpairFirst):
        return rule.inner.value(f) != 0
    c = sc.const_value(rule)
    if c is not None:
        return c != 0
    tail = nonzero_fibers(rule)
    if tail is None:
        return True
    if f not in tail:
        return False
    # fiber nonzero somewhere in the rule; check it is nonzero beyond the table
    for jj in range(j, j + 4096):
        if rule.value(sc.pair(f, jj)) != 0:
            return True
    raise UnsupportedError("cannot locate fiber support beyond the table")


def decide_e1(x, y, horizon: int = DEFAULT_HORIZON) -> Verdict:
    if isinstance(x, Composite):
        return x.decide_pair(E1(), y, horizon)
    d = sc.sub(x, y)
    if d is None:
        return unknown(horizon, "difference leaves the closed descriptor kinds")
    try:
        fibers = nonzero_fibers(d)
    except UnsupportedError as exc:
        return unknown(horizon, str(exc))
    if fibers is None:
        wit = []
        for n in range(horizon):
            if d.value(n) != 0 and all(sc.first(n) != w[0] for w in wit):
                wit.append((sc.first(n), n))
                if len(wit) >= 6:
                    break
        return not_equivalent(wit)
    return equivalent(Fraction(max(fibers) + 1 if fibers else 0))


def _lp_norm_value(d: Seq, p: Fraction) -> float:
    """||d||_p for a summable descriptor: exact finite part plus geometric tails."""
    if isinstance(d, sc.TableThenRule):
        head = sum(abs(float(v)) ** float(p) for v in d.table)
        tail = d.rule
        n = len(d.table)
        t = sc.reindex(tail, 1, n)
        return (head + (_lp_norm_value(t, p) ** float(p) if t is not None else 0.0)) ** (1 / float(p))
    if isinstance(d, sc.ResidueInterleave):
        return sum(_lp_norm_value(r, p) ** float(p) for r in d.rules) ** (1 / float(p))
    if isinstance(d, sc.Geometric):
        s = d._split()
        if s is not d:
            return _lp_norm_value(s, p)
        a, r = abs(float(d.a)), abs(float(d.r))
        return (a ** float(p) / (1 - r ** float(p))) ** (1 / float(p))
    return 0.0


def decide(rel, x, y, horizon: int = DEFAULT_HORIZON) -> Verdict:
    """Decide x rel y."""
    if isinstance(rel, E0Omega):
        return decide_product(x, y, horizon)
    if isinstance(x, Composite) or isinstance(y, Composite):
        if not (isinstance(x, Composite) and isinstance(y, Composite)):
            return unknown(horizon, "composite element paired with a plain descriptor")
        return x.decide_pair(rel, y, horizon)
    if isinstance(rel, E0):
        return decide_e0(x, y, horizon)
    if isinstance(rel, E1):
        return decide_e1(x, y, horizon)
    if isinstance(rel, Lp):
        d = sc.sub(x, y)
        if d is None:
            return unknown(horizon, "difference leaves the closed descriptor kinds")
        if d.lp_summable(rel.p):
            return equivalent(_lp_norm_value(d, rel.p))
        return not_equivalent(_support_witness(d, horizon))
    if isinstance(rel, LInf):
        return decide_sup_distance(x, y, horizon)
    if isinstance(rel, LInfRestricted):
        _check_box(x, rel.b, "x")
        _check_box(y, rel.b, "y")
        return decide_sup_distance(x, y, horizon)
    if isinstance(rel, ETbar):
        _require_binary(x, "x")
        _require_binary(y, "y")
        d = sc.sub(x, y)
        prod = None if d is None else sc.mul(rel.t, sc.absolute(d))
        return _decide_sup(prod, horizon)
    if isinstance(rel, EBbar):
        for name, z in (("x", x), ("y", y)):
            if not rel.family.contains(z, min(horizon, PREFIX_CHECK)):
                raise CarrierError(f"{name} leaves prod B_i")
        return decide_sup_distance(x, y, horizon)
    if isinstance(rel, SetEq):
        return _decide_seteq(x, y, horizon)
    if isinstance(rel, LInfMetric):
        return _decide_linf_metric(rel.X, x, y, horizon)
    if isinstance(rel, FMetric):
        return decide_fmetric(rel.X, x, y, horizon)
    raise TypeError(f"unknown relation {rel!r}")


def _check_box(x: Seq, b: Seq, name: str) -> None:
    gap = sc.sub(b, x)
    negative = sc.negate(x).level_indices(Fraction(0), None)
    over = None if gap is None else sc.negate(gap).level_indices(Fraction(0), None)
    if negative is None or over is None:
        bad = negative is None or over is None and gap is not None or \
            any(not (0 <= x.value(i) <= b.value(i)) for i in range(PREFIX_CHECK))
    else:
        bad = bool(negative) or bool(over)
    if bad:
        raise CarrierError(f"{name} leaves prod [0, b(n)]")


def _decide_seteq(x: Seq, y: Seq, horizon: int) -> Verdict:
    vx, vy = x.value_set(), y.value_set()
    if vx is None or vy is None:
        return unknown(horizon, "value set is not finite")
    if vx == vy:
        return equivalent(Fraction(0))
    only = sorted((vx - vy) | (vy - vx))
    return not_equivalent(tuple(only[:6]))


def _decide_linf_metric(X: MetricSpace, x, y, horizon: int) -> Verdict:
    if isinstance(X, FinitePrototype):
        n = len(X.labels)
        joint = sc.add(sc.scale(x, n), y)
        vs = None if joint is None else joint.value_set()
        if vs is None:
            return unknown(horizon, "joint value set is not finite")
        return equivalent(max(X.table[int(v) // n][int(v) % n] for v in vs))
    if isinstance(X, RealPoints):
        for name, z in (("x", x), ("y", y)):
            if not X.contains(z, min(horizon, 64)):
                raise CarrierError(f"{name} has values outside X")
        return decide_sup_distance(x, y, horizon)
    return unknown(horizon, "metric space kind without exact distance algebra")


# ---------------------------------------------------------------------------
# Orbits and F_X
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Progression:
    """Values start, start + step, ... (step 0 means the single value start)."""
    start: Fraction
    step: Fraction


def orbit_pieces(d: Seq) -> list[Progression]:
    """The value set of d as a finite union of progressions with nonnegative steps.

    Raises UnsupportedError for leaves without this structure.
    """
    if isinstance(d, sc.Constant):
        return [Progression(d.c, Fraction(0))]
    if isinstance(d, sc.Linear):
        if d.a < 0:
            raise UnsupportedError("decreasing orbit pieces are not supported")
        return [Progression(d.b, d.a)]
    if isinstance(d, sc.Geometric):
        c = sc.const_value(d)
        if c is not None:
            return [Progression(c, Fraction(0))]
        raise UnsupportedError("geometric orbit pieces have no decidable distance-to-set")
    if isinstance(d, sc.TableThenRule):
        tail = sc.reindex(d.rule, 1, len(d.table))
        if tail is None:
            if isinstance(d.rule, sc.FiberedByUnpairFirst):
                tail = d.rule
            else:
                raise UnsupportedError("orbit tail not expressible")
        return [Progression(v, Fraction(0)) for v in d.table] + orbit_pieces(tail)
    if isinstance(d, sc.ResidueInterleave):
        return [p for r in d.rules for p in orbit_pieces(r)]
    if isinstance(d, sc.FiberedByUnpairFirst):
        return orbit_pieces(d.inner)
    raise UnsupportedError(f"unsupported orbit {d!r}")


def _pieces_points(pieces: list[Progression], upto: Fraction) -> list[Fraction]:
    out = set()
    for p in pieces:
        if p.step == 0:
            if p.start <= upto:
                out.add(p.start)
            continue
        v = p.start
        while v <= upto:
            out.add(v)
            v += p.step
    return sorted(out)


def period_of(pieces: list[Progression]) -> Optional[Fraction]:
    steps = [p.step for p in pieces if p.step > 0]
    if not steps:
        return None
    # common period of the progressions: lcm of numerators over gcd of denominators
    num = 1
    den = 0
    for s in steps:
        num = num * s.numerator // math.gcd(num, s.numerator)
        den = math.gcd(den, s.denominator)
    return Fraction(num, den)


def _stable_start(pieces: list[Progression]) -> Fraction:
    return max(p.start for p in pieces)


def distance_to_set(v: Fraction, pieces: list[Progression]) -> Fraction:
    best = None
    for p in pieces:
        if p.step == 0 or v <= p.start:
            cand = abs(v - p.start)
        else:
            k = (v - p.start) // p.step
            lo = p.start + k * p.step
            cand = min(v - lo, lo + p.step - v)
        best = cand if best is None else min(best, cand)
    return best


def hausdorff_one_side(a: list[Progression], b: list[Progression]) -> Optional[Fraction]:
    """sup over s in A of d(s, B); None if infinite."""
    a_up = any(p.step > 0 for p in a)
    b_up = any(p.step > 0 for p in b)
    if a_up and not b_up:
        return None
    if not a_up:
        return max(distance_to_set(p.start, b) for p in a)
    period = period_of(a + b)
    top = max(_stable_start(a), _stable_start(b)) + period
    pts = _pieces_points(a, top + period)
    return max(distance_to_set(v, b) for v in pts)


def decide_fmetric(X: MetricSpace, x: Seq, y: Seq, horizon: int = DEFAULT_HORIZON) -> Verdict:
    """F_X on orbits: the value sets of x and y are at bounded Hausdorff distance."""
    if not isinstance(X, RealPoints):
        return unknown(horizon, "F_X is only decided for point sets on the line")
    try:
        px, py = orbit_pieces(x), orbit_pieces(y)
    except UnsupportedError as exc:
        return unknown(horizon, str(exc))
    hx, hy = hausdorff_one_side(px, py), hausdorff_one_side(py, px)
    if hx is None or hy is None:
        far, near = (px, py) if hx is None else (py, px)
        pts = _pieces_points(far, max(p.start for p in far) + 64 * (period_of(far) or 1))
        wit = []
        level = Fraction(1)
        for v in pts:
            dd = distance_to_set(v, near)
            if dd > level:
                wit.append((v, dd))
                level = dd
            if len(wit) >= 6:
                break
        return not_equivalent(wit)
    return equivalent(max(hx, hy))


# ---------------------------------------------------------------------------
# Products and helpers
# ---------------------------------------------------------------------------

def decide_product(xs: Sequence[Seq], ys: Sequence[Seq], horizon: int = DEFAULT_HORIZON) -> Verdict:
    """E_0 on each of finitely many coordinates (the rest are constant 0 on both sides)."""
    if len(xs) != len(ys):
        raise CarrierError("coordinate lists differ in length")
    worst = Fraction(0)
    for k, (x, y) in enumerate(zip(xs, ys)):
        v = decide_e0(x, y, horizon)
        if v.outcome == NOT_EQUIVALENT:
            return not_equivalent(((k,) + tuple(w for w in v.witness[:3]),), note=f"coordinate {k} fails")
        if v.outcome == UNKNOWN:
            return unknown(horizon, f"coordinate {k}: {v.note}")
        worst = max(worst, v.constant)
    return equivalent(worst)


def witness_bound(rel, x, y, horizon: int = DEFAULT_HORIZON):
    v = decide(rel, x, y, horizon)
    if not v.equivalent:
        raise ValueError(f"witness_bound needs an Equivalent verdict, got {v.outcome}")
    return v.constant
