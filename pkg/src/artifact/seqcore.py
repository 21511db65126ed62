"""Pairing, finite-sequence splicing, rational tuple enumeration and sequence descriptors.

A descriptor is a finite description of an infinite sequence of rationals. The set of
kinds is closed on purpose: every kind answers boundedness, divergence and level-set
questions exactly, and the pointwise algebra below either returns another descriptor
or ``None`` when the result would leave the closed set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import islice
from typing import Callable, Iterator, Optional, Sequence

Number = Fraction


class DescriptorError(ValueError):
    """Malformed descriptor or descriptor JSON."""


# ---------------------------------------------------------------------------
# Pairing
# ---------------------------------------------------------------------------

def pair(i: int, j: int) -> int:
    """Cantor pairing: (i + j)(i + j + 1)/2 + j."""
    if i < 0 or j < 0:
        raise ValueError("pair expects natural numbers")
    s = i + j
    return s * (s + 1) // 2 + j


def unpair(n: int) -> tuple[int, int]:
    if n < 0:
        raise ValueError("unpair expects a natural number")
    s = (math.isqrt(8 * n + 1) - 1) // 2
    j = n - s * (s + 1) // 2
    return s - j, j


def first(n: int) -> int:
    return unpair(n)[0]


# ---------------------------------------------------------------------------
# Number handling
# ---------------------------------------------------------------------------

def to_number(x) -> Fraction:
    """Exact rational from int, Fraction, "p/q" string or float (exact binary value)."""
    if isinstance(x, bool):
        raise DescriptorError("booleans are not numbers")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise DescriptorError(f"non-finite number {x!r}")
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise DescriptorError(f"cannot parse number {x!r}") from exc
    raise DescriptorError(f"not a number: {x!r}")


def number_to_json(x: Fraction):
    x = Fraction(x)
    if x.denominator == 1:
        return int(x)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# Descriptor kinds
# ---------------------------------------------------------------------------

class Seq:
    """Base class of sequence descriptors.

    Level sets use the half-open convention lo < value <= hi; ``None`` stands for an
    infinite bound.
    """

    def value(self, i: int) -> Fraction:
        raise NotImplementedError

    def prefix(self, k: int) -> list[Fraction]:
        if k < 0:
            raise ValueError("prefix length must be nonnegative")
        return [self.value(i) for i in range(k)]

    def level_indices(self, lo: Optional[Fraction], hi: Optional[Fraction]) -> Optional[tuple[int, ...]]:
        """Sorted indices with lo < value <= hi, or None if there are infinitely many."""
        raise NotImplementedError

    def level_set_infinite(self, lo=None, hi=None) -> bool:
        lo = None if lo is None else to_number(lo)
        hi = None if hi is None else to_number(hi)
        return self.level_indices(lo, hi) is None

    def sup_abs_from(self, start: int) -> Optional[Fraction]:
        """Exact sup of |value(i)| over i >= start, or None if unbounded."""
        raise NotImplementedError

    def is_bounded(self) -> bool:
        return self.sup_abs_from(0) is not None

    def tends_to_infinity(self) -> bool:
        raise NotImplementedError

    def bounded_above(self) -> bool:
        raise NotImplementedError

    def value_set(self) -> Optional[frozenset]:
        """Exact finite set of values, or None if infinite."""
        raise NotImplementedError

    def is_zero(self) -> bool:
        vs = self.value_set()
        return vs is not None and vs <= {0}

    def lp_summable(self, p: Fraction) -> bool:
        raise NotImplementedError

    def recurrent_above(self, lo: Fraction) -> bool:
        """Is there a finite D with infinitely many i such that lo < value(i) <= D?"""
        raise NotImplementedError

    def recurrent_unbounded(self) -> bool:
        """For every M, is there a finite window above M hit infinitely often?"""
        raise NotImplementedError

    def support(self) -> Optional[tuple[int, ...]]:
        """Indices where the value is nonzero, or None if infinite."""
        pos = self.level_indices(Fraction(0), None)
        neg = negate(self).level_indices(Fraction(0), None)
        if pos is None or neg is None:
            return None
        return tuple(sorted(set(pos) | set(neg)))

    def hits(self, lo, hi) -> bool:
        idx = self.level_indices(lo, hi)
        return idx is None or len(idx) > 0


def _in_window(v: Fraction, lo, hi) -> bool:
    return (lo is None or v > lo) and (hi is None or v <= hi)


@dataclass(frozen=True)
class Constant(Seq):
    c: Fraction

    def __post_init__(self):
        object.__setattr__(self, "c", to_number(self.c))

    def value(self, i):
        return self.c

    def level_indices(self, lo, hi):
        return None if _in_window(self.c, lo, hi) else ()

    def sup_abs_from(self, start):
        return abs(self.c)

    def tends_to_infinity(self):
        return False

    def bounded_above(self):
        return True

    def value_set(self):
        return frozenset({self.c})

    def lp_summable(self, p):
        return self.c == 0

    def recurrent_above(self, lo):
        return self.c > lo

    def recurrent_unbounded(self):
        return False


@dataclass(frozen=True)
class Linear(Seq):
    """value(i) = a*i + b."""
    a: Fraction
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", to_number(self.a))
        object.__setattr__(self, "b", to_number(self.b))

    def value(self, i):
        return self.a * i + self.b

    def level_indices(self, lo, hi):
        a, b = self.a, self.b
        if a == 0:
            return None if _in_window(b, lo, hi) else ()
        if a > 0:
            if hi is None:
                return None
            start = 0 if lo is None else max(0, math.floor((lo - b) / a) + 1)
            stop = math.floor((hi - b) / a)
        else:
            if lo is None:
                return None
            # lo < a i + b  <=>  i < (lo - b) / a
            bound = (lo - b) / a
            stop = math.ceil(bound) - 1
            start = 0 if hi is None else max(0, math.ceil((hi - b) / a))
        if stop < start:
            return ()
        return tuple(range(start, stop + 1))

    def sup_abs_from(self, start):
        return abs(self.b) if self.a == 0 else None

    def tends_to_infinity(self):
        return self.a > 0

    def bounded_above(self):
        return self.a <= 0

    def value_set(self):
        return frozenset({self.b}) if self.a == 0 else None

    def lp_summable(self, p):
        return self.a == 0 and self.b == 0

    def recurrent_above(self, lo):
        return self.a == 0 and self.b > lo

    def recurrent_unbounded(self):
        return False


@dataclass(frozen=True)
class Geometric(Seq):
    """value(i) = a * r**i (with 0**0 = 1)."""
    a: Fraction
    r: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", to_number(self.a))
        object.__setattr__(self, "r", to_number(self.r))

    def value(self, i):
        return self.a * self.r ** i

    def _split(self) -> Seq:
        # equivalent descriptor whose pieces have r >= 0 and no 0**0 corner
        a, r = self.a, self.r
        if a == 0 or r == 1:
            return Constant(a)
        if r == 0:
            return TableThenRule((a,), Constant(0))
        if r < 0:
            return ResidueInterleave((Geometric(a, r * r), Geometric(a * r, r * r)))
        return self

    def level_indices(self, lo, hi):
        s = self._split()
        if s is not self:
            return s.level_indices(lo, hi)
        a, r = self.a, self.r
        if r > 1:
            # |value| increases to infinity with the sign of a
            if a > 0 and hi is None or a < 0 and lo is None:
                return None
            out, i = [], 0
            while True:
                v = a * r ** i
                if a > 0 and v > hi or a < 0 and v <= lo:
                    break
                if _in_window(v, lo, hi):
                    out.append(i)
                i += 1
            return tuple(out)
        # 0 < r < 1: monotone towards 0 from the side of a
        if a > 0:
            eventually = (lo is None or lo <= 0) and (hi is None or hi > 0)
        else:
            eventually = (lo is None or lo < 0) and (hi is None or hi >= 0)
        if eventually:
            return None
        out, i = [], 0
        while True:
            v = a * r ** i
            if _in_window(v, lo, hi):
                out.append(i)
            # once past the window on the limit side nothing further can enter
            if a > 0 and lo is not None and v <= lo:
                break
            if a < 0 and hi is not None and v > hi:
                break
            if a > 0 and hi is not None and hi <= 0:
                break
            if a < 0 and lo is not None and lo >= 0:
                break
            i += 1
        return tuple(out)

    def sup_abs_from(self, start):
        s = self._split()
        if s is not self:
            return s.sup_abs_from(start)
        if self.r > 1:
            return None
        return abs(self.a) * self.r ** start

    def tends_to_infinity(self):
        return self.a > 0 and self.r > 1

    def bounded_above(self):
        s = self._split()
        if s is not self:
            return s.bounded_above()
        return self.r < 1 or self.a < 0

    def value_set(self):
        s = self._split()
        if s is not self:
            return s.value_set()
        return None

    def lp_summable(self, p):
        s = self._split()
        if s is not self:
            return s.lp_summable(p)
        return self.r < 1

    def recurrent_above(self, lo):
        s = self._split()
        if s is not self:
            return s.recurrent_above(lo)
        if self.r > 1:
            return False
        return lo < 0 or (lo == 0 and self.a > 0)

    def recurrent_unbounded(self):
        return False


@dataclass(frozen=True)
class TableThenRule(Seq):
    """Explicit values for i < len(table); rule.value(i) afterwards (absolute index)."""
    table: tuple
    rule: Seq

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(to_number(v) for v in self.table))
        if not isinstance(self.rule, Seq):
            raise DescriptorError("TableThenRule needs a descriptor rule")

    def value(self, i):
        if i < len(self.table):
            return self.table[i]
        return self.rule.value(i)

    def level_indices(self, lo, hi):
        tail = self.rule.level_indices(lo, hi)
        if tail is None:
            return None
        n = len(self.table)
        head = [i for i, v in enumerate(self.table) if _in_window(v, lo, hi)]
        return tuple(head + [i for i in tail if i >= n])

    def sup_abs_from(self, start):
        n = len(self.table)
        tail = self.rule.sup_abs_from(max(start, n))
        if tail is None:
            return None
        head = [abs(v) for v in self.table[start:]]
        return max(head + [tail])

    def tends_to_infinity(self):
        return self.rule.tends_to_infinity()

    def bounded_above(self):
        return self.rule.bounded_above()

    def value_set(self):
        tail = _value_set_from(self.rule, len(self.table))
        if tail is None:
            return None
        return frozenset(self.table) | tail

    def lp_summable(self, p):
        return self.rule.lp_summable(p)

    def recurrent_above(self, lo):
        return self.rule.recurrent_above(lo)

    def recurrent_unbounded(self):
        return self.rule.recurrent_unbounded()


@dataclass(frozen=True)
class ResidueInterleave(Seq):
    """value(m*q + r) = rules[r].value(q), modulus m = len(rules)."""
    rules: tuple

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise DescriptorError("ResidueInterleave needs at least one rule")
        if not all(isinstance(r, Seq) for r in self.rules):
            raise DescriptorError("ResidueInterleave rules must be descriptors")

    @property
    def modulus(self) -> int:
        return len(self.rules)

    def value(self, i):
        q, r = divmod(i, self.modulus)
        return self.rules[r].value(q)

    def level_indices(self, lo, hi):
        m = self.modulus
        out = []
        for r, rule in enumerate(self.rules):
            idx = rule.level_indices(lo, hi)
            if idx is None:
                return None
            out.extend(m * q + r for q in idx)
        return tuple(sorted(out))

    def sup_abs_from(self, start):
        m = self.modulus
        best = Fraction(0)
        for r, rule in enumerate(self.rules):
            q0 = max(0, -(-(start - r) // m))
            s = rule.sup_abs_from(q0)
            if s is None:
                return None
            best = max(best, s)
        return best

    def tends_to_infinity(self):
        return all(r.tends_to_infinity() for r in self.rules)

    def bounded_above(self):
        return all(r.bounded_above() for r in self.rules)

    def value_set(self):
        out = frozenset()
        for rule in self.rules:
            vs = rule.value_set()
            if vs is None:
                return None
            out |= vs
        return out

    def lp_summable(self, p):
        return all(r.lp_summable(p) for r in self.rules)

    def recurrent_above(self, lo):
        return any(r.recurrent_above(lo) for r in self.rules)

    def recurrent_unbounded(self):
        return any(r.recurrent_unbounded() for r in self.rules)


@dataclass(frozen=True)
class FiberedByUnpairFirst(Seq):
    """value(n) = inner.value(first coordinate of unpair(n)); every fiber is infinite."""
    inner: Seq

    def __post_init__(self):
        if not isinstance(self.inner, Seq):
            raise DescriptorError("FiberedByUnpairFirst needs a descriptor")

    def value(self, n):
        return self.inner.value(first(n))

    def level_indices(self, lo, hi):
        return None if self.inner.hits(lo, hi) else ()

    def sup_abs_from(self, start):
        return self.inner.sup_abs_from(0)

    def tends_to_infinity(self):
        return False

    def bounded_above(self):
        return self.inner.bounded_above()

    def value_set(self):
        return self.inner.value_set()

    def lp_summable(self, p):
        return self.inner.is_zero()

    def recurrent_above(self, lo):
        return self.inner.hits(lo, None)

    def recurrent_unbounded(self):
        return not self.inner.bounded_above()


def _value_set_from(d: Seq, start: int) -> Optional[frozenset]:
    """Value set of d restricted to indices >= start (absolute)."""
    if start == 0:
        return d.value_set()
    if isinstance(d, FiberedByUnpairFirst):
        return d.value_set()
    r = reindex(d, 1, start)
    if r is None:
        return None
    return r.value_set()


# ---------------------------------------------------------------------------
# Finite sequences: overwrite and shuffle
# ---------------------------------------------------------------------------

def overwrite(s: Sequence, t):
    """s * t: s followed by the entries of t beyond len(s)."""
    s = tuple(s)
    if isinstance(t, Seq):
        if isinstance(t, TableThenRule) and len(t.table) > len(s):
            return TableThenRule(s + t.table[len(s):], t.rule)
        if isinstance(t, TableThenRule):
            t = t.rule
        return TableThenRule(s, t) if s else t
    t = tuple(t)
    return s + t[len(s):]


def shuffle(s, t):
    """s ⊕ t = (s1, t1, s2, t2, ...); leftover entries of the longer list follow."""
    if isinstance(s, Seq) and isinstance(t, Seq):
        return ResidueInterleave((s, t))
    if isinstance(s, Seq) or isinstance(t, Seq):
        raise TypeError("shuffle needs two finite sequences or two descriptors")
    s, t = tuple(s), tuple(t)
    out = []
    for k in range(max(len(s), len(t))):
        if k < len(s):
            out.append(s[k])
        if k < len(t):
            out.append(t[k])
    return tuple(out)


# ---------------------------------------------------------------------------
# Enumeration of finite rational tuples
# ---------------------------------------------------------------------------
# The height of p/q in lowest terms is |p| + q; a tuple costs its length plus the
# heights of its entries. Tuples are listed by cost, then lexicographically with
# entries compared by (height, value). The empty tuple is number 0.

@lru_cache(maxsize=None)
def rationals_of_height(h: int) -> tuple[Fraction, ...]:
    if h < 1:
        return ()
    out = set()
    for q in range(1, h + 1):
        p = h - q
        for sp in ((p, -p) if p else (0,)):
            if math.gcd(abs(sp), q) == 1:
                out.add(Fraction(sp, q))
    return tuple(sorted(out))


def rational_height(x: Fraction) -> int:
    x = Fraction(x)
    return abs(x.numerator) + x.denominator


@lru_cache(maxsize=None)
def _tuples_of_cost(c: int) -> int:
    if c == 0:
        return 1
    return sum(len(rationals_of_height(e - 1)) * _tuples_of_cost(c - e) for e in range(2, c + 1))


def _rank_in_cost(tup: Sequence[Fraction], entry_options: Callable[[int], Sequence[Fraction]],
                  count: Callable[[int], int], cost_of: Callable[[Fraction], int]) -> int:
    rank = 0
    rem = sum(cost_of(e) for e in tup)
    for e in tup:
        ce = cost_of(e)
        for c in range(2, rem + 1):
            opts = entry_options(c)
            if c < ce:
                rank += len(opts) * count(rem - c)
            elif c == ce:
                rank += sum(1 for o in opts if o < e) * count(rem - c)
                break
        rem -= ce
    return rank


def _unrank_in_cost(rank: int, total: int, entry_options, count) -> tuple:
    out = []
    rem = total
    while rem > 0:
        for c in range(2, rem + 1):
            opts = entry_options(c)
            block = count(rem - c)
            if rank < len(opts) * block:
                out.append(opts[rank // block])
                rank %= block
                rem -= c
                break
            rank -= len(opts) * block
        else:
            raise AssertionError("rank out of range")
    return tuple(out)


def _rat_options(c: int):
    return rationals_of_height(c - 1)


def _rat_cost(e) -> int:
    return 1 + rational_height(e)


def rational_tuple(n: int) -> tuple[Fraction, ...]:
    """The n-th finite rational tuple of the frozen enumeration."""
    if n < 0:
        raise ValueError("index must be nonnegative")
    c = 0
    while n >= _tuples_of_cost(c):
        n -= _tuples_of_cost(c)
        c += 1
    return _unrank_in_cost(n, c, _rat_options, _tuples_of_cost)


def index_of(tup: Sequence) -> int:
    tup = tuple(Fraction(x) for x in tup)
    c = sum(_rat_cost(e) for e in tup)
    base = sum(_tuples_of_cost(k) for k in range(c))
    return base + _rank_in_cost(tup, _rat_options, _tuples_of_cost, _rat_cost)


# Binary tuples in the order induced from the rational enumeration: 0 costs 2, 1 costs 3.

def _bin_options(c: int):
    return {2: (Fraction(0),), 3: (Fraction(1),)}.get(c, ())


def _bin_cost(e) -> int:
    return 2 if e == 0 else 3


@lru_cache(maxsize=None)
def _binary_of_cost(c: int) -> int:
    if c == 0:
        return 1
    if c < 0:
        return 0
    return (_binary_of_cost(c - 2) if c >= 2 else 0) + (_binary_of_cost(c - 3) if c >= 3 else 0)


def binary_tuple(n: int) -> tuple[int, ...]:
    """The n-th tuple with entries in {0, 1}, in the order inherited from rational_tuple."""
    if n < 0:
        raise ValueError("index must be nonnegative")
    c = 0
    while n >= _binary_of_cost(c):
        n -= _binary_of_cost(c)
        c += 1
    return tuple(int(x) for x in _unrank_in_cost(n, c, _bin_options, _binary_of_cost))


def binary_index(tup: Sequence[int]) -> int:
    tup = tuple(Fraction(int(x)) for x in tup)
    if any(x not in (0, 1) for x in tup):
        raise ValueError("binary_index expects entries in {0, 1}")
    c = sum(_bin_cost(e) for e in tup)
    base = sum(_binary_of_cost(k) for k in range(c))
    return base + _rank_in_cost(tup, _bin_options, _binary_of_cost, _bin_cost)


# ---------------------------------------------------------------------------
# Pointwise algebra (returns None when the result leaves the closed kinds)
# ---------------------------------------------------------------------------

def const_value(d: Seq) -> Optional[Fraction]:
    """The constant value of a leaf that is constant everywhere, else None."""
    if isinstance(d, Constant):
        return d.c
    if isinstance(d, Linear) and d.a == 0:
        return d.b
    if isinstance(d, Geometric) and (d.a == 0 or d.r == 1):
        return d.a
    if isinstance(d, FiberedByUnpairFirst):
        return const_value(d.inner)
    return None


def reindex(d: Seq, k: int, off: int) -> Optional[Seq]:
    """Descriptor of q -> d.value(k*q + off); k >= 1, off may be negative when the
    caller only evaluates at q with k*q + off >= 0."""
    if k < 1:
        raise ValueError("reindex stride must be positive")
    if k == 1 and off == 0:
        return d
    if isinstance(d, Constant):
        return d
    if isinstance(d, Linear):
        return Linear(d.a * k, d.a * off + d.b)
    if isinstance(d, Geometric):
        if d.r == 0:
            return reindex(d._split(), k, off)
        return Geometric(d.a * d.r ** off, d.r ** k)
    if isinstance(d, TableThenRule):
        n = len(d.table)
        head = []
        q = 0
        while k * q + off < n:
            pos = k * q + off
            head.append(d.table[pos] if pos >= 0 else d.rule.value(pos))
            q += 1
        tail = reindex(d.rule, k, off)
        if tail is None:
            return None
        return TableThenRule(tuple(head), tail) if head else tail
    if isinstance(d, ResidueInterleave):
        m = d.modulus
        period = m // math.gcd(k, m)
        big = k * period // m
        rules = []
        for c in range(period):
            pos = k * c + off
            r, base = pos % m, pos // m
            sub = reindex(d.rules[r], big, base)
            if sub is None:
                return None
            rules.append(sub)
        return rules[0] if period == 1 else ResidueInterleave(tuple(rules))
    if isinstance(d, FiberedByUnpairFirst):
        vs = d.inner.value_set()
        return Constant(next(iter(vs))) if vs is not None and len(vs) == 1 else None
    raise DescriptorError(f"unknown descriptor {d!r}")


def map_values(d: Seq, scalar: Callable[[Fraction], Fraction],
               leaf: Callable[[Seq], Optional[Seq]]) -> Optional[Seq]:
    """Apply a pointwise function: ``scalar`` on explicit values, ``leaf`` on
    Constant/Linear/Geometric rules."""
    if isinstance(d, Constant):
        return Constant(scalar(d.c))
    if isinstance(d, (Linear, Geometric)):
        c = const_value(d)
        if c is not None:
            return Constant(scalar(c))
        if isinstance(d, Geometric):
            s = d._split()
            if s is not d:
                return map_values(s, scalar, leaf)
        return leaf(d)
    if isinstance(d, TableThenRule):
        tail = map_values(d.rule, scalar, leaf)
        if tail is None:
            return None
        return TableThenRule(tuple(scalar(v) for v in d.table), tail)
    if isinstance(d, ResidueInterleave):
        rules = [map_values(r, scalar, leaf) for r in d.rules]
        if any(r is None for r in rules):
            return None
        return ResidueInterleave(tuple(rules))
    if isinstance(d, FiberedByUnpairFirst):
        inner = map_values(d.inner, scalar, leaf)
        return None if inner is None else FiberedByUnpairFirst(inner)
    raise DescriptorError(f"unknown descriptor {d!r}")


def negate(d: Seq) -> Seq:
    def leaf(x):
        if isinstance(x, Linear):
            return Linear(-x.a, -x.b)
        return Geometric(-x.a, x.r)
    return map_values(d, lambda v: -v, leaf)


def scale(d: Seq, c) -> Seq:
    c = to_number(c)

    def leaf(x):
        if isinstance(x, Linear):
            return Linear(c * x.a, c * x.b)
        return Geometric(c * x.a, x.r)
    return map_values(d, lambda v: c * v, leaf)


def _sign_change_table(x: Seq, scalar, tail_leaf: Callable[[Seq], Seq]) -> Optional[Seq]:
    """Linear leaf x: tabulate indices before the sign of x settles, then apply tail_leaf."""
    if not isinstance(x, Linear):
        return None
    # index from which the sign of a*i + b equals the sign of a
    settle = 0
    if x.a > 0 and x.b <= 0:
        settle = math.floor(-x.b / x.a) + 1
    elif x.a < 0 and x.b >= 0:
        settle = math.floor(x.b / -x.a) + 1
    head = tuple(scalar(x.value(i)) for i in range(settle))
    tail = tail_leaf(x)
    return TableThenRule(head, tail) if head else tail


def absolute(d: Seq) -> Seq:
    def leaf(x):
        if isinstance(x, Geometric):
            return Geometric(abs(x.a), abs(x.r))
        return _sign_change_table(x, abs, lambda y: Linear(abs(y.a), y.b if y.a > 0 else -y.b))
    return map_values(d, abs, leaf)


def indicator_above(d: Seq, n) -> Seq:
    """Binary descriptor of [d(i) > n]."""
    n = to_number(n)

    def scalar(v):
        return Fraction(1 if v > n else 0)

    def leaf(x):
        idx = x.level_indices(n, None)
        if idx is None:
            # cofinitely many above n for a monotone leaf
            below = x.level_indices(None, n)
            if below is None:
                return None
            k = max(below) + 1 if below else 0
            return TableThenRule(tuple(scalar(x.value(i)) for i in range(k)), Constant(1)) if k else Constant(1)
        k = max(idx) + 1 if idx else 0
        return TableThenRule(tuple(scalar(x.value(i)) for i in range(k)), Constant(0)) if k else Constant(0)
    return map_values(d, scalar, leaf)


def indicator_nonzero(d: Seq) -> Seq:
    def scalar(v):
        return Fraction(1 if v != 0 else 0)

    def leaf(x):
        zeros = [i for i in _zero_indices(x)]
        if not zeros:
            return Constant(1)
        k = max(zeros) + 1
        return TableThenRule(tuple(scalar(x.value(i)) for i in range(k)), Constant(1))
    return map_values(d, scalar, leaf)


def _zero_indices(x: Seq) -> tuple[int, ...]:
    # a non-constant Linear or Geometric leaf vanishes at finitely many indices
    if isinstance(x, Linear):
        if (-x.b / x.a).denominator == 1 and -x.b / x.a >= 0:
            return (int(-x.b / x.a),)
        return ()
    return ()


def floor_values(d: Seq) -> Optional[Seq]:
    def leaf(x):
        if isinstance(x, Linear) and x.a.denominator == 1:
            return Linear(x.a, math.floor(x.b))
        if isinstance(x, Geometric) and x.a.denominator == 1 and x.r.denominator == 1 and x.r > 0:
            return x
        return None
    return map_values(d, lambda v: Fraction(math.floor(v)), leaf)


def exp2(d: Seq) -> Optional[Seq]:
    """2 ** d(i) for integer-valued d."""
    def scalar(v):
        if v.denominator != 1:
            raise DescriptorError("exp2 needs integer values")
        return Fraction(2) ** int(v)

    def leaf(x):
        if isinstance(x, Linear) and x.a.denominator == 1 and x.b.denominator == 1:
            return Geometric(Fraction(2) ** int(x.b), Fraction(2) ** int(x.a))
        return None
    try:
        return map_values(d, scalar, leaf)
    except DescriptorError:
        return None


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _lift(d: Seq, m: int) -> Optional[list[Seq]]:
    """Residue-class rules of d for modulus m (m a multiple of d's own modulus)."""
    own = d.modulus if isinstance(d, ResidueInterleave) else 1
    if isinstance(d, ResidueInterleave):
        k = m // own
        out = []
        for c in range(m):
            sub = reindex(d.rules[c % own], k, c // own)
            if sub is None:
                return None
            out.append(sub)
        return out
    out = []
    for c in range(m):
        sub = reindex(d, m, c)
        if sub is None:
            return None
        out.append(sub)
    return out


def combine(a: Seq, b: Seq, scalar: Callable, leaf: Callable) -> Optional[Seq]:
    """Pointwise binary operation on aligned structure."""
    if isinstance(a, TableThenRule) or isinstance(b, TableThenRule):
        n = max(len(a.table) if isinstance(a, TableThenRule) else 0,
                len(b.table) if isinstance(b, TableThenRule) else 0)
        ta = a.rule if isinstance(a, TableThenRule) else a
        tb = b.rule if isinstance(b, TableThenRule) else b
        tail = combine(ta, tb, scalar, leaf)
        if tail is None:
            return None
        return TableThenRule(tuple(scalar(a.value(i), b.value(i)) for i in range(n)), tail)
    ca, cb = const_value(a), const_value(b)
    if isinstance(a, FiberedByUnpairFirst) or isinstance(b, FiberedByUnpairFirst):
        ia = a.inner if isinstance(a, FiberedByUnpairFirst) else (Constant(ca) if ca is not None else None)
        ib = b.inner if isinstance(b, FiberedByUnpairFirst) else (Constant(cb) if cb is not None else None)
        if ia is None or ib is None:
            return None
        inner = combine(ia, ib, scalar, leaf)
        return None if inner is None else FiberedByUnpairFirst(inner)
    if ca is not None and cb is not None:
        return Constant(scalar(ca, cb))
    if isinstance(a, ResidueInterleave) or isinstance(b, ResidueInterleave):
        m = _lcm(a.modulus if isinstance(a, ResidueInterleave) else 1,
                 b.modulus if isinstance(b, ResidueInterleave) else 1)
        la, lb = _lift(a, m), _lift(b, m)
        if la is None or lb is None:
            return None
        rules = [combine(x, y, scalar, leaf) for x, y in zip(la, lb)]
        if any(r is None for r in rules):
            return None
        return ResidueInterleave(tuple(rules))
    if isinstance(a, Geometric) and a._split() is not a:
        return combine(a._split(), b, scalar, leaf)
    if isinstance(b, Geometric) and b._split() is not b:
        return combine(a, b._split(), scalar, leaf)
    return leaf(a, b)


def _as_linear(x: Seq) -> Optional[Linear]:
    if isinstance(x, Linear):
        return x
    c = const_value(x)
    return Linear(0, c) if c is not None else None


def add(a: Seq, b: Seq) -> Optional[Seq]:
    def leaf(x, y):
        lx, ly = _as_linear(x), _as_linear(y)
        if lx is not None and ly is not None:
            return Linear(lx.a + ly.a, lx.b + ly.b)
        if isinstance(x, Geometric) and isinstance(y, Geometric) and x.r == y.r:
            return Geometric(x.a + y.a, x.r)
        if isinstance(x, Geometric) and const_value(y) == 0:
            return x
        if isinstance(y, Geometric) and const_value(x) == 0:
            return y
        return None
    return combine(a, b, lambda u, v: u + v, leaf)


def sub(a: Seq, b: Seq) -> Optional[Seq]:
    return add(a, negate(b))


def mul(a: Seq, b: Seq) -> Optional[Seq]:
    def leaf(x, y):
        cx, cy = const_value(x), const_value(y)
        if cx is not None:
            return scale(y, cx)
        if cy is not None:
            return scale(x, cy)
        if isinstance(x, Geometric) and isinstance(y, Geometric):
            return Geometric(x.a * y.a, x.r * y.r)
        return None
    return combine(a, b, lambda u, v: u * v, leaf)


def maximum(a: Seq, b: Seq) -> Optional[Seq]:
    """max(a, b) = (a + b + |a - b|) / 2."""
    d = sub(a, b)
    s = add(a, b)
    if d is None or s is None:
        return None
    t = add(s, absolute(d))
    return None if t is None else scale(t, Fraction(1, 2))


def equal(a: Seq, b: Seq) -> Optional[bool]:
    """Exact equality of two descriptors, None if the difference is not closed."""
    d = sub(a, b)
    if d is None:
        return None
    return d.support() == ()


def least_recurrent_level(d: Seq, lo: Optional[int]) -> Optional[int]:
    """Least integer n > lo (n >= 0 when lo is None) such that infinitely many i have
    lo < d(i) <= n; None if no such n exists."""
    if lo is None:
        if d.tends_to_infinity():
            return None
        lo_f, start = None, 0
    else:
        lo_f, start = Fraction(lo), lo + 1
        if not d.recurrent_above(lo_f):
            return None
    hi, step = start, 1
    while not d.level_set_infinite(lo_f, hi):
        hi = start + step
        step *= 2
    left, right = start, hi
    while left < right:
        mid = (left + right) // 2
        if d.level_set_infinite(lo_f, mid):
            right = mid
        else:
            left = mid + 1
    return left


# ---------------------------------------------------------------------------
# Convenience
# ---------------------------------------------------------------------------

def eval_prefix(d: Seq, k: int) -> list[Fraction]:
    if not isinstance(d, Seq):
        raise DescriptorError("eval_prefix expects a descriptor")
    return d.prefix(k)


def identity() -> Seq:
    return Linear(1, 0)


def indicator_of(points: Sequence[int], default=0) -> Seq:
    """Binary descriptor equal to 1 exactly at the given indices."""
    pts = sorted(set(points))
    if not pts:
        return Constant(default)
    table = [Fraction(default)] * (pts[-1] + 1)
    for p in pts:
        table[p] = Fraction(1 - default)
    return TableThenRule(tuple(table), Constant(default))


def iter_level(d: Seq, lo, hi, limit: Optional[int] = None) -> Iterator[int]:
    """Enumerate {i : lo < d(i) <= hi} in increasing order by scanning."""
    idx = d.level_indices(lo, hi)
    if idx is not None:
        yield from idx[:limit] if limit is not None else idx
        return
    i, count = 0, 0
    while limit is None or count < limit:
        if _in_window(d.value(i), lo, hi):
            yield i
            count += 1
        i += 1


def take(it, n):
    return list(islice(it, n))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

DOMAINS = ("real", "natural", "binary")


def to_json(d: Seq, domain: Optional[str] = None) -> dict:
    if isinstance(d, Constant):
        out = {"kind": "Constant", "params": {"c": number_to_json(d.c)}}
    elif isinstance(d, Linear):
        out = {"kind": "Linear", "params": {"a": number_to_json(d.a), "b": number_to_json(d.b)}}
    elif isinstance(d, Geometric):
        out = {"kind": "Geometric", "params": {"a": number_to_json(d.a), "r": number_to_json(d.r)}}
    elif isinstance(d, TableThenRule):
        out = {"kind": "TableThenRule",
               "params": {"table": [number_to_json(v) for v in d.table], "rule": to_json(d.rule)}}
    elif isinstance(d, ResidueInterleave):
        out = {"kind": "ResidueInterleave",
               "params": {"modulus": d.modulus, "rules": [to_json(r) for r in d.rules]}}
    elif isinstance(d, FiberedByUnpairFirst):
        out = {"kind": "FiberedByUnpairFirst", "params": {"inner": to_json(d.inner)}}
    else:
        raise DescriptorError(f"unknown descriptor {d!r}")
    if domain is not None:
        out["domain"] = domain
    return out


def _need(params: dict, key: str, where: str):
    if key not in params:
        raise DescriptorError(f"{where}: missing parameter {key!r}")
    return params[key]


def from_json(obj, where: str = "$") -> Seq:
    """Parse a descriptor; the optional domain tag is validated against exact values."""
    if not isinstance(obj, dict):
        raise DescriptorError(f"{where}: descriptor must be an object")
    kind = obj.get("kind")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise DescriptorError(f"{where}.params: must be an object")
    try:
        if kind == "Constant":
            d = Constant(to_number(_need(params, "c", where)))
        elif kind == "Linear":
            d = Linear(to_number(_need(params, "a", where)), to_number(_need(params, "b", where)))
        elif kind == "Geometric":
            d = Geometric(to_number(_need(params, "a", where)), to_number(_need(params, "r", where)))
        elif kind == "TableThenRule":
            table = _need(params, "table", where)
            if not isinstance(table, list):
                raise DescriptorError(f"{where}.params.table: must be a list")
            d = TableThenRule(tuple(to_number(v) for v in table),
                              from_json(_need(params, "rule", where), where + ".params.rule"))
        elif kind == "ResidueInterleave":
            rules = _need(params, "rules", where)
            if not isinstance(rules, list) or not rules:
                raise DescriptorError(f"{where}.params.rules: must be a nonempty list")
            m = params.get("modulus", len(rules))
            if m != len(rules):
                raise DescriptorError(f"{where}.params.modulus: must equal the number of rules")
            d = ResidueInterleave(tuple(from_json(r, f"{where}.params.rules[{k}]") for k, r in enumerate(rules)))
        elif kind == "FiberedByUnpairFirst":
            d = FiberedByUnpairFirst(from_json(_need(params, "inner", where), where + ".params.inner"))
        else:
            raise DescriptorError(f"{where}.kind: unknown kind {kind!r}")
    except DescriptorError:
        raise
    except (TypeError, ValueError) as exc:
        raise DescriptorError(f"{where}: {exc}") from exc
    domain = obj.get("domain")
    if domain is not None:
        check_domain(d, domain, where)
    return d


def check_domain(d: Seq, domain: str, where: str = "$") -> None:
    if domain not in DOMAINS:
        raise DescriptorError(f"{where}.domain: must be one of {DOMAINS}")
    if domain == "real":
        return
    neg = negate(d).level_indices(Fraction(0), None)
    if neg is None or neg:
        raise DescriptorError(f"{where}: negative values in a {domain} descriptor")
    if domain == "binary":
        vs = d.value_set()
        if vs is None or not vs <= {0, 1}:
            raise DescriptorError(f"{where}: values outside {{0, 1}} in a binary descriptor")
    elif not _integer_leaves(d):
        raise DescriptorError(f"{where}: cannot certify integer values in a natural descriptor")


def _integer_leaves(d: Seq) -> bool:
    if isinstance(d, Constant):
        return d.c.denominator == 1
    if isinstance(d, Linear):
        return d.a.denominator == 1 and d.b.denominator == 1
    if isinstance(d, Geometric):
        return d.a.denominator == 1 and d.r.denominator == 1
    if isinstance(d, TableThenRule):
        return all(v.denominator == 1 for v in d.table) and _integer_leaves(d.rule)
    if isinstance(d, ResidueInterleave):
        return all(_integer_leaves(r) for r in d.rules)
    if isinstance(d, FiberedByUnpairFirst):
        return _integer_leaves(d.inner)
    return False
