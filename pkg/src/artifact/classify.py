"""Dichotomy classifiers with re-checkable certificates.

Case predicates are tail properties, so they are answered from descriptor structure
(level sets, recurrence, boundedness) and never from a sampled prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import seqcore as sc
from .relations import (ArithmeticGrid, CarrierError, DisjointBlocks, FamilyTable, FinitePrototype,
                        MetricSpace, RealPoints, SetFamily, TwoPoint, UnsupportedError)
from .seqcore import Seq

SMOOTH = "Smooth"
E0_CLASS = "E0Class"
E1_CLASS = "E1Class"
LINF_CLASS = "LInfClass"
CLASSES = (SMOOTH, E0_CLASS, E1_CLASS, LINF_CLASS)

LADDER_PREFIX = 8
CHECK_HORIZON = 1000


@dataclass(frozen=True)
class Classification:
    cls: str
    certificate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"class": self.cls, "certificate": self.certificate}


def classification_from_json(obj) -> Classification:
    if not isinstance(obj, dict) or obj.get("class") not in CLASSES:
        raise sc.DescriptorError("classification must have a class in " + ", ".join(CLASSES))
    return Classification(obj["class"], obj.get("certificate", {}))


def _num(v):
    return None if v is None else sc.number_to_json(sc.to_number(v))


# ---------------------------------------------------------------------------
# E_t: the level ladder
# ---------------------------------------------------------------------------

def _require_nonnegative(t: Seq) -> None:
    neg = sc.negate(t).level_indices(Fraction(0), None)
    if neg is None or neg:
        raise CarrierError("weights t_i must be nonnegative")


def level_ladder(t: Seq, count: int) -> tuple[list[int], bool]:
    """First rungs n_0 < n_1 < ... of the level ladder and whether it stops there."""
    rungs: list[int] = []
    lo = None
    while len(rungs) < count:
        n = sc.least_recurrent_level(t, lo)
        if n is None:
            return rungs, True
        rungs.append(n)
        lo = n
    return rungs, False


def classify_Et(t: Seq) -> Classification:
    _require_nonnegative(t)
    base = {"input": sc.to_json(t)}
    bound = t.sup_abs_from(0)
    if bound is not None:
        return Classification(SMOOTH, {**base, "case": "bounded", "bound": _num(bound)})
    if t.tends_to_infinity():
        return Classification(E0_CLASS, {**base, "case": "tends_to_infinity"})
    if t.recurrent_unbounded():
        rungs, stopped = level_ladder(t, LADDER_PREFIX)
        assert not stopped
        return Classification(E1_CLASS, {**base, "case": "infinite_ladder", "ladder_prefix": rungs})
    rungs, stopped = level_ladder(t, 10 ** 6)
    return Classification(E0_CLASS, {**base, "case": "finite_ladder", "ladder": rungs})


def _rung_ok(t: Seq, lo: Optional[int], n: int) -> bool:
    lo_f = None if lo is None else Fraction(lo)
    if not t.level_set_infinite(lo_f, n):
        return False
    floor_n = 0 if lo is None else lo + 1
    return n == floor_n or not t.level_set_infinite(lo_f, n - 1)


def _check_ladder(t: Seq, rungs) -> bool:
    lo = None
    for n in rungs:
        if not isinstance(n, int) or (lo is not None and n <= lo) or not _rung_ok(t, lo, n):
            return False
        lo = n
    return True


def _check_Et(t: Seq, cert: dict, cls: str) -> bool:
    if sc.negate(t).level_indices(Fraction(0), None) != ():
        return False
    case = cert.get("case")
    prefix = t.prefix(CHECK_HORIZON)
    if case == "bounded":
        bound = sc.to_number(cert["bound"])
        return cls == SMOOTH and t.sup_abs_from(0) == bound and max(prefix) <= bound
    if t.is_bounded():
        return False
    if case == "tends_to_infinity":
        return cls == E0_CLASS and t.tends_to_infinity()
    if case == "infinite_ladder":
        return cls == E1_CLASS and _check_ladder(t, cert["ladder_prefix"]) and t.recurrent_unbounded()
    if case == "finite_ladder":
        rungs = cert["ladder"]
        if cls != E0_CLASS or not rungs or not _check_ladder(t, rungs):
            return False
        # the ladder stops: no window above the last rung is hit infinitely often
        return not t.recurrent_above(Fraction(rungs[-1]))
    return False


# ---------------------------------------------------------------------------
# E_B: finite set families
# ---------------------------------------------------------------------------

def _integer_valued(d: Seq) -> bool:
    f = sc.floor_values(d)
    return f is not None and sc.equal(f, d) is True


def normalize_family(B: SetFamily) -> SetFamily:
    """Translate each B_i to least element 0 and take floors of the values."""
    if isinstance(B, TwoPoint):
        g = sc.floor_values(sc.absolute(B.gap))
        if g is None:
            raise UnsupportedError("gap rule has no closed floor")
        return TwoPoint(g)
    if isinstance(B, ArithmeticGrid):
        s = sc.absolute(B.step)
        if not _integer_valued(s):
            raise UnsupportedError("ArithmeticGrid classification needs an integer step rule")
        return ArithmeticGrid(s, B.count)
    if isinstance(B, FamilyTable):
        table = tuple(tuple(sorted({math.floor(v - min(b)) for v in b})) for b in B.table)
        return FamilyTable(table, normalize_family(B.rule))
    raise UnsupportedError(f"unsupported set family {B!r}")


def _gap_ladder(g: Seq, count: int) -> list[int]:
    """k_0 = 0 < k_1 < ... with infinitely many i having k_n < g(i) <= k_{n+1}."""
    ks = [0]
    while len(ks) < count + 1:
        nxt = sc.least_recurrent_level(g, ks[-1])
        assert nxt is not None
        ks.append(nxt)
    return ks


def _divergence_level(g: Seq) -> int:
    """Least n such that no bounded window above n is hit infinitely often."""
    hi = 1
    while g.recurrent_above(Fraction(hi)):
        hi *= 2
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if g.recurrent_above(Fraction(mid)):
            lo = mid + 1
        else:
            hi = mid
    return lo


def _classify_gaps(g: Seq, class_size: int, base: dict) -> Classification:
    """Two-class structure: B_i splits into classes {0..} and {g(i)..} once g(i) > n."""
    if g.recurrent_unbounded():
        return Classification(E1_CLASS, {**base, "case": "gap_ladder", "class_size_bound": class_size,
                                          "gap_ladder_prefix": _gap_ladder(g, LADDER_PREFIX)})
    n = _divergence_level(g)
    return Classification(E0_CLASS, {**base, "case": "gap_divergence", "class_size_bound": class_size,
                                     "n": n, "M": 1})


def classify_EB(B: SetFamily) -> Classification:
    base = {"input": B.to_json()}
    N = normalize_family(B)
    while isinstance(N, FamilyTable):
        N = N.rule
    if isinstance(N, TwoPoint):
        bound = N.gap.sup_abs_from(0)
        if bound is not None:
            return Classification(SMOOTH, {**base, "case": "bounded", "bound": _num(bound)})
        return _classify_gaps(N.gap, 2, base)
    if isinstance(N, ArithmeticGrid):
        b = sc.mul(N.step, N.count)
        if b is None:
            raise UnsupportedError("step and count rules do not combine")
        bound = b.sup_abs_from(0)
        if bound is not None:
            return Classification(SMOOTH, {**base, "case": "bounded", "bound": _num(bound)})
        step = sc.const_value(N.step)
        if step is not None and step > 0:
            return Classification(LINF_CLASS, {**base, "case": "unbounded_classes", "n": int(step),
                                               "class_sizes": _growth(N.count, 1)})
        m = sc.const_value(N.count)
        if m is not None:
            return _classify_gaps(N.step, int(m) + 1, base)
        raise UnsupportedError("ArithmeticGrid needs a constant step or a constant count")
    raise UnsupportedError(f"unsupported normalized family {N!r}")


def _growth(d: Seq, shift: int, limit: int = 6) -> list:
    """Indices where d + shift first exceeds 1, 2, 4, ..."""
    out, level = [], 1
    for i in range(CHECK_HORIZON):
        v = d.value(i) + shift
        if v > level:
            out.append([i, _num(v)])
            while v > level:
                level *= 2
            if len(out) >= limit:
                break
    return out


def _check_EB(B: SetFamily, cert: dict, cls: str) -> bool:
    try:
        N = normalize_family(B)
    except UnsupportedError:
        return False
    while isinstance(N, FamilyTable):
        N = N.rule
    case = cert.get("case")
    if isinstance(N, TwoPoint):
        g, size = N.gap, 2
        b = g
    elif isinstance(N, ArithmeticGrid):
        b = sc.mul(N.step, N.count)
        g = N.step
        m = sc.const_value(N.count)
        size = None if m is None else int(m) + 1
    else:
        return False
    if b is None:
        return False
    if case == "bounded":
        return cls == SMOOTH and b.sup_abs_from(0) == sc.to_number(cert["bound"])
    if b.is_bounded():
        return False
    if case == "unbounded_classes":
        n = cert["n"]
        if cls != LINF_CLASS or not isinstance(N, ArithmeticGrid):
            return False
        # steps at most n chain the whole grid into one class whose size m(i)+1 is unbounded
        small = N.step.level_indices(None, Fraction(n))
        return sc.const_value(N.step) is not None and small is None and not N.count.is_bounded() and \
            all(N.count.value(i) + 1 == sc.to_number(v) for i, v in cert["class_sizes"])
    if size is None or cert.get("class_size_bound") != size:
        return False
    if case == "gap_ladder":
        ks = cert["gap_ladder_prefix"]
        if cls != E1_CLASS or ks[0] != 0:
            return False
        for a, c in zip(ks, ks[1:]):
            if not (c > a and g.level_set_infinite(Fraction(a), c) and
                    (c == a + 1 or not g.level_set_infinite(Fraction(a), c - 1))):
                return False
        return g.recurrent_unbounded()
    if case == "gap_divergence":
        n = cert["n"]
        return cls == E0_CLASS and not g.recurrent_above(Fraction(n)) and cert.get("M") == 1
    return False


# ---------------------------------------------------------------------------
# ell_infinity(X): component structure of the metric space
# ---------------------------------------------------------------------------

def _leaves(d: Seq) -> list[Seq]:
    if isinstance(d, sc.TableThenRule):
        return [sc.Constant(v) for v in d.table] + _leaves(d.rule)
    if isinstance(d, sc.ResidueInterleave):
        return [leaf for r in d.rules for leaf in _leaves(r)]
    if isinstance(d, sc.FiberedByUnpairFirst):
        return _leaves(d.inner)
    if isinstance(d, sc.Geometric):
        s = d._split()
        if s is not d:
            return _leaves(s)
    return [d]


def components(points: list[Fraction], C: Fraction) -> list[list[Fraction]]:
    """C-components of a finite set of reals: consecutive sorted gaps < C chain together."""
    pts = sorted(set(points))
    out: list[list[Fraction]] = []
    for v in pts:
        if out and v - out[-1][-1] < C:
            out[-1].append(v)
        else:
            out.append([v])
    return out


def _geometric_cluster(leaf: sc.Geometric, finite: list[Fraction], C: Fraction) -> list[Fraction]:
    """All points that can lie in a non-singleton C-component."""
    top = max((abs(v) for v in finite), default=Fraction(0)) + C
    pts = list(finite)
    k = 0
    while True:
        v = leaf.value(k)
        nxt = leaf.value(k + 1)
        pts.append(v)
        if abs(v) > top and abs(nxt - v) >= C:
            break
        k += 1
    return pts


def component_diameter_bound(X: RealPoints, C: Fraction) -> Fraction:
    """K_C for point sets with a single geometric leaf: the largest C-component diameter."""
    leaves = _leaves(X.values)
    grow = [x for x in leaves if sc.const_value(x) is None]
    finite = [sc.const_value(x) for x in leaves if sc.const_value(x) is not None]
    if len(grow) != 1 or not isinstance(grow[0], sc.Geometric) or abs(grow[0].r) <= 1:
        raise UnsupportedError("component diameters are computed for one geometric leaf")
    comps = components(_geometric_cluster(grow[0], finite, C), C)
    return max(c[-1] - c[0] for c in comps)


def _block_run_diameter(X: DisjointBlocks, C: Fraction) -> Fraction:
    # gaps at least C from block b_C on, so runs beyond b_C are single blocks
    idx = X.sep.level_indices(None, C)
    last = max(idx) + 2 if idx else 1
    best, run_start = Fraction(0), 0
    for b in range(last + 1):
        end = X.block_start(b) + X.diam.value(b)
        if b > 0 and X.sep.value(b - 1) >= C:
            run_start = X.block_start(b)
        best = max(best, end - run_start)
    dmax = X.diam.sup_abs_from(0)
    return max(best, dmax)


def classify_metric(X: MetricSpace, Cs=(1, 2, 4, 8)) -> Classification:
    base = {"input": X.to_json()}
    if isinstance(X, FinitePrototype):
        raise CarrierError("bounded metric: the dichotomy needs d unbounded")
    if isinstance(X, RealPoints):
        if not X.is_unbounded():
            raise CarrierError("bounded metric: the dichotomy needs d unbounded")
        for leaf in _leaves(X.values):
            if isinstance(leaf, sc.Linear) and leaf.a != 0:
                return Classification(LINF_CLASS, {**base, "case": "unbounded_component",
                                                   "C": _num(abs(leaf.a) + 1), "step": _num(abs(leaf.a))})
        table = {str(c): _num(component_diameter_bound(X, Fraction(c))) for c in Cs}
        return Classification(E1_CLASS, {**base, "case": "bounded_components", "K": table})
    if isinstance(X, DisjointBlocks):
        if not X.diam.is_bounded():
            return Classification(LINF_CLASS, {**base, "case": "unbounded_component", "C": 2})
        if X.sep.is_bounded() and sc.const_value(X.sep) is not None:
            return Classification(LINF_CLASS, {**base, "case": "merged_blocks",
                                               "C": _num(sc.const_value(X.sep) + 1)})
        if X.sep.tends_to_infinity():
            table = {str(c): _num(_block_run_diameter(X, Fraction(c))) for c in Cs}
            return Classification(E1_CLASS, {**base, "case": "bounded_components", "K": table})
        raise UnsupportedError("block separations must be constant or tend to infinity")
    raise UnsupportedError(f"unsupported metric space {X!r}")


def _check_metric(X: MetricSpace, cert: dict, cls: str) -> bool:
    case = cert.get("case")
    if isinstance(X, RealPoints):
        if not X.is_unbounded():
            return False
        if case == "unbounded_component":
            step = sc.to_number(cert["step"])
            C = sc.to_number(cert["C"])
            has = any(isinstance(x, sc.Linear) and abs(x.a) == step for x in _leaves(X.values))
            # consecutive points of the progression are step < C apart, so one component is infinite
            return cls == LINF_CLASS and has and step < C
        if case == "bounded_components":
            try:
                return cls == E1_CLASS and all(
                    component_diameter_bound(X, Fraction(c)) == sc.to_number(v) for c, v in cert["K"].items()) \
                    and _prefix_components_ok(X.values.prefix(CHECK_HORIZON // 10), cert["K"])
            except UnsupportedError:
                return False
        return False
    if isinstance(X, DisjointBlocks):
        if case == "unbounded_component":
            return cls == LINF_CLASS and not X.diam.is_bounded()
        if case == "merged_blocks":
            s = sc.const_value(X.sep)
            return cls == LINF_CLASS and s is not None and s < sc.to_number(cert["C"])
        if case == "bounded_components":
            return cls == E1_CLASS and X.diam.is_bounded() and X.sep.tends_to_infinity() and all(
                _block_run_diameter(X, Fraction(c)) == sc.to_number(v) for c, v in cert["K"].items())
    return False


def _prefix_components_ok(points, K: dict) -> bool:
    # components of a subset never exceed components of the whole set
    return all(max(c[-1] - c[0] for c in components(points, Fraction(C))) <= sc.to_number(v)
               for C, v in K.items())


# ---------------------------------------------------------------------------
# Banach space families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SumFamily:
    """Families of sums (sum_i l_{r_i}^{n_i})_2 with r_i in {p_i, q_i}.

    1/p_i = offset + excess(i), 1/q_i = 1/p_i - gap(i) and n_i = 2^{log2_n(i)} with
    log2_t(i) = log2_n(i) * gap(i), so t_i = n_i^{1/p_i - 1/q_i} = 2^{log2_t(i)}.
    kind "two_choice" is the uniform homeomorphism relation on the family; kind
    "finite_set" reads S_i = {p_i, q_i} as a finite exponent set.
    """
    offset: Fraction
    excess: Seq
    gap: Seq
    log2_t: Seq
    log2_n: Optional[Seq] = None
    kind: str = "two_choice"

    def __post_init__(self):
        object.__setattr__(self, "offset", sc.to_number(self.offset))
        if self.kind not in ("two_choice", "finite_set"):
            raise sc.DescriptorError("family kind must be two_choice or finite_set")

    def inv_p(self, i: int) -> Fraction:
        return self.offset + self.excess.value(i)

    def inv_q(self, i: int) -> Fraction:
        return self.inv_p(i) - self.gap.value(i)

    def log2n(self, i: int) -> Fraction:
        if self.log2_n is not None:
            return self.log2_n.value(i)
        g = self.gap.value(i)
        if g == 0:
            raise CarrierError(f"n_{i} is undetermined when p_{i} = q_{i}; give log2_n")
        return self.log2_t.value(i) / g

    def log2t_check(self, i: int) -> bool:
        if self.log2_n is None:
            return True
        return self.log2_n.value(i) * self.gap.value(i) == self.log2_t.value(i)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "offset": _num(self.offset), "excess": sc.to_json(self.excess),
               "gap": sc.to_json(self.gap), "log2_t": sc.to_json(self.log2_t)}
        if self.log2_n is not None:
            out["log2_n"] = sc.to_json(self.log2_n)
        return out


def family_from_json(obj, where="$") -> SumFamily:
    if not isinstance(obj, dict):
        raise sc.DescriptorError(f"{where}: family must be an object")
    get = lambda k: sc.from_json(sc._need(obj, k, where), f"{where}.{k}")
    return SumFamily(sc.to_number(sc._need(obj, "offset", where)), get("excess"), get("gap"), get("log2_t"),
                     get("log2_n") if "log2_n" in obj else None, obj.get("kind", "two_choice"))


def check_family(F: SumFamily, horizon: int = 64) -> list[str]:
    """Violations of the ordering and growth constraints on a prefix (exact rationals).

    The ordering is weak where gap(i) = 0 so that degenerate p = q families pass.
    """
    out = []
    for i in range(horizon):
        ip, iq, g = F.inv_p(i), F.inv_q(i), F.gap.value(i)
        if not (Fraction(1, 2) < iq <= ip < 1) or g < 0:
            out.append(f"index {i}: need 1 < p_i <= q_i < 2")
        if g > 0 and not iq > F.inv_p(i + 1):
            out.append(f"index {i}: need q_i < p_(i+1)")
        if g > 0 and not F.log2t_check(i):
            out.append(f"index {i}: log2_t differs from log2_n * gap")
        ln = F.log2n(i)
        if ln < 0 or ln.denominator != 1:
            out.append(f"index {i}: n_i must be a power of two with natural exponent")
        elif g > 0 and not F.log2n(i + 1) * F.inv_q(i + 1) > ln * ip:
            out.append(f"index {i}: growth n_(i+1)^(1/q_(i+1)) > n_i^(1/p_i) fails")
    return out


def induced_weights(F: SumFamily) -> tuple[Seq, bool]:
    """The weight sequence t_i; falls back to log2 t_i (same class) when 2^x is not closed."""
    t = sc.exp2(F.log2_t)
    if t is not None:
        return t, False
    return F.log2_t, True


def classify_banach_family(F: SumFamily) -> Classification:
    bad = check_family(F)
    if bad:
        raise CarrierError("; ".join(bad[:3]))
    base = {"family": F.to_json()}
    if F.kind == "finite_set":
        # B_i = {log(n_i)/p : p in S_i}, translated and measured in base-2 logs
        inner = classify_EB(TwoPoint(F.log2_t))
        return Classification(inner.cls, {**base, "via": "EB", "inner": inner.certificate})
    t, log_scale = induced_weights(F)
    inner = classify_Et(t)
    return Classification(inner.cls, {**base, "via": "Et", "log_scale": log_scale, "inner": inner.certificate})


# ---------------------------------------------------------------------------
# Certificate checking
# ---------------------------------------------------------------------------

def check_certificate(descriptor, c: Classification) -> bool:
    """Re-verify every claim of a classification against the descriptor."""
    cert = c.certificate or {}
    try:
        if isinstance(descriptor, SumFamily):
            if cert.get("family") != descriptor.to_json() or check_family(descriptor):
                return False
            if cert.get("via") == "EB":
                if descriptor.kind != "finite_set":
                    return False
                return check_certificate(TwoPoint(descriptor.log2_t), Classification(c.cls, cert["inner"]))
            t, log_scale = induced_weights(descriptor)
            return cert.get("via") == "Et" and cert.get("log_scale") == log_scale and \
                check_certificate(t, Classification(c.cls, cert["inner"]))
        if cert.get("input") != (sc.to_json(descriptor) if isinstance(descriptor, Seq) else descriptor.to_json()):
            return False
        if isinstance(descriptor, Seq):
            return _check_Et(descriptor, cert, c.cls)
        if isinstance(descriptor, SetFamily):
            return _check_EB(descriptor, cert, c.cls)
        if isinstance(descriptor, MetricSpace):
            return _check_metric(descriptor, cert, c.cls)
    except (KeyError, TypeError, ValueError, AssertionError):
        return False
    return False
