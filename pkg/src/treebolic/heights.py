"""Exact logarithmic heights and the merged event line of two isotropic trees.

A height is a rational linear combination of logarithms of primes,

    h = sum(e_p * log(p))    with e_p rational,

which is closed under addition and rational scaling and, because the
logarithms of the primes are linearly independent over Q, has a canonical
form: two heights are equal exactly when their exponent vectors agree.
Every such value can also be written as ``coeff * log(base)`` with rational
``coeff`` and rational ``base``, and that is how heights are rendered.

Ordering is decided by a floating point filter with a conservative error
bound; near-ties fall back to comparing big integers exactly, so no
comparison ever depends on rounding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Generic, Iterator, Sequence, TypeVar, Union

from sympy import factorint

Rational = Union[int, Fraction]
T = TypeVar("T")

# Relative slack of the float filter. libm's log is accurate to about one ulp,
# so this leaves several orders of magnitude of headroom.
_REL_SLACK = 1e-12


class Order(enum.Enum):
    LT = "LT"
    EQ = "EQ"
    GT = "GT"
    UNDECIDED = "Undecided"

    @classmethod
    def of(cls, sign: int) -> "Order":
        return cls.LT if sign < 0 else cls.GT if sign > 0 else cls.EQ

    def flip(self) -> "Order":
        return {Order.LT: Order.GT, Order.GT: Order.LT}.get(self, self)


@lru_cache(maxsize=4096)
def _factor(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(sorted(factorint(n).items()))


@lru_cache(maxsize=None)
def _log_prime(p: int) -> float:
    return math.log(p)


def _as_fraction(x: Rational | str) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class LogHeight:
    """Exact value ``sum(e_p log p)``; construct as ``LogHeight(coeff, base)``.

    ``LogHeight(3, 2)`` is ``3*log(2)``, ``LogHeight(Fraction(1, 2), 9)`` equals
    ``LogHeight(1, 3)``. Differences of heights may be negative; the
    constructor itself accepts any rational ``coeff`` and positive ``base``.
    """

    __slots__ = ("_terms", "_hash", "_float")

    def __init__(self, coeff: Rational | str = 0, base: Rational | str = 1):
        coeff = _as_fraction(coeff)
        base = _as_fraction(base)
        if base <= 0:
            raise ValueError(f"log base must be positive, got {base}")
        terms: dict[int, Fraction] = {}
        if coeff:
            for prime, e in _factor(base.numerator):
                terms[prime] = terms.get(prime, 0) + coeff * e
            for prime, e in _factor(base.denominator):
                terms[prime] = terms.get(prime, 0) - coeff * e
        self._set(terms)

    def _set(self, terms: dict[int, Fraction]) -> None:
        self._terms = tuple(sorted((p, Fraction(e)) for p, e in terms.items() if e))
        self._hash = hash(self._terms)
        self._float = math.fsum(float(e) * _log_prime(p) for p, e in self._terms)

    @classmethod
    def _from_terms(cls, terms: dict[int, Fraction]) -> "LogHeight":
        obj = cls.__new__(cls)
        obj._set(terms)
        return obj

    @classmethod
    def of_rational(cls, x: Rational | str) -> "LogHeight":
        """``log(x)`` for a positive rational ``x``."""
        return cls(1, x)

    ZERO: "LogHeight"

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other: "LogHeight") -> "LogHeight":
        if not isinstance(other, LogHeight):
            return NotImplemented
        if not other._terms:
            return self
        if not self._terms:
            return other
        terms = dict(self._terms)
        for p, e in other._terms:
            terms[p] = terms.get(p, 0) + e
        return LogHeight._from_terms(terms)

    def __neg__(self) -> "LogHeight":
        return LogHeight._from_terms({p: -e for p, e in self._terms})

    def __sub__(self, other: "LogHeight") -> "LogHeight":
        if not isinstance(other, LogHeight):
            return NotImplemented
        return self + (-other)

    def __mul__(self, k: Rational) -> "LogHeight":
        if isinstance(k, LogHeight):
            return NotImplemented
        k = _as_fraction(k)
        return LogHeight._from_terms({p: e * k for p, e in self._terms})

    __rmul__ = __mul__

    def __truediv__(self, k: Rational) -> "LogHeight":
        return self * (1 / _as_fraction(k))

    def __abs__(self) -> "LogHeight":
        return -self if self.sign() < 0 else self

    # -- comparison -------------------------------------------------------
    def sign(self) -> int:
        if not self._terms:
            return 0
        slack = _REL_SLACK * math.fsum(abs(float(e)) * _log_prime(p) for p, e in self._terms)
        if self._float > slack:
            return 1
        if self._float < -slack:
            return -1
        return _exact_sign(self._terms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LogHeight) and self._terms == other._terms

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "LogHeight") -> bool:
        return (self - other).sign() < 0

    def __le__(self, other: "LogHeight") -> bool:
        return (self - other).sign() <= 0

    def __gt__(self, other: "LogHeight") -> bool:
        return (self - other).sign() > 0

    def __ge__(self, other: "LogHeight") -> bool:
        return (self - other).sign() >= 0

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __float__(self) -> float:
        return self._float

    # -- structure --------------------------------------------------------
    @property
    def terms(self) -> tuple[tuple[int, Fraction], ...]:
        return self._terms

    def ratio(self, other: "LogHeight") -> Fraction | None:
        """Return ``c`` with ``self == c * other`` if it exists, else None."""
        if not other._terms:
            raise ZeroDivisionError("ratio to a zero height")
        if not self._terms:
            return Fraction(0)
        mine = dict(self._terms)
        if set(mine) != {p for p, _ in other._terms}:
            return None
        c = None
        for p, e in other._terms:
            r = mine[p] / e
            if c is None:
                c = r
            elif r != c:
                return None
        return c

    def _primitive(self) -> tuple[Fraction, Fraction]:
        # self == coeff * log(base) with base > 1 not a perfect power
        den = math.lcm(*(e.denominator for _, e in self._terms))
        ints = [(p, int(e * den)) for p, e in self._terms]
        g = math.gcd(*(e for _, e in ints))
        if self.sign() < 0:
            g = -g
        base = Fraction(1)
        for p, e in ints:
            base *= Fraction(p) ** (e // g)
        return Fraction(g, den), base

    @property
    def coeff(self) -> Fraction:
        return self._primitive()[0] if self._terms else Fraction(0)

    @property
    def base(self) -> Fraction:
        return self._primitive()[1] if self._terms else Fraction(1)

    def exp_rational(self) -> Fraction | None:
        """``exp(self)`` when it is rational (all exponents integral)."""
        if any(e.denominator != 1 for _, e in self._terms):
            return None
        out = Fraction(1)
        for p, e in self._terms:
            out *= Fraction(p) ** int(e)
        return out

    def __repr__(self) -> str:
        return f"LogHeight({self.coeff}, {self.base})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        return f"{self.coeff}*log({self.base})"

    def as_power_string(self) -> str:
        """Render as ``base^coeff``, the exact form used in trace output."""
        if not self._terms:
            return "1^0"
        return f"{self.base}^{self.coeff}"


LogHeight.ZERO = LogHeight()


def _exact_sign(terms: Sequence[tuple[int, Fraction]]) -> int:
    den = math.lcm(*(e.denominator for _, e in terms))
    pos = neg = 1
    pos_bits = neg_bits = 0.0
    for p, e in terms:
        k = int(e * den)
        if k > 0:
            pos_bits += k * math.log2(p)
        else:
            neg_bits -= k * math.log2(p)
    # bit-length pruning before materialising the powers
    if pos_bits - neg_bits > 2:
        return 1
    if neg_bits - pos_bits > 2:
        return -1
    for p, e in terms:
        k = int(e * den)
        if k > 0:
            pos *= p**k
        else:
            neg *= p ** (-k)
    return (pos > neg) - (pos < neg)


def cmp_heights(h1: LogHeight, h2: LogHeight) -> Order:
    """Exact order of two heights."""
    return Order.of((h1 - h2).sign())


def log_height_max(values) -> LogHeight:
    best = None
    for v in values:
        if best is None or v > best:
            best = v
    return LogHeight.ZERO if best is None else best


# ---------------------------------------------------------------------------
# Sequences with a periodic tail


@dataclass(frozen=True)
class PeriodicSequence(Generic[T]):
    """A finite prefix followed by a repeating period (1-based in the maths,
    0-based here: ``seq[0]`` is the first term)."""

    prefix: tuple
    period: tuple

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must contain at least one term")

    @classmethod
    def constant(cls, value) -> "PeriodicSequence":
        return cls((), (value,))

    def __getitem__(self, i: int):
        if i < 0:
            raise IndexError(i)
        n = len(self.prefix)
        if i < n:
            return self.prefix[i]
        return self.period[(i - n) % len(self.period)]

    def terms(self):
        return self.prefix + self.period

    def map(self, fn) -> "PeriodicSequence":
        return PeriodicSequence(tuple(map(fn, self.prefix)), tuple(map(fn, self.period)))

    @property
    def is_constant(self) -> bool:
        return len(set(self.prefix + self.period)) == 1

    def __str__(self) -> str:
        period = ",".join(str(x) for x in self.period)
        if not self.prefix:
            return period
        return ",".join(str(x) for x in self.prefix) + ";" + period


def parse_sequence(text: str | int | Fraction, kind=Fraction) -> PeriodicSequence:
    """Parse ``prefix;period`` where each part is a comma list of ``num/den``
    or integers. A single value is a constant sequence."""
    if not isinstance(text, str):
        return PeriodicSequence.constant(kind(text))

    def items(part: str) -> tuple:
        part = part.strip()
        if not part:
            return ()
        out = []
        for tok in part.split(","):
            value = Fraction(tok.strip())
            if kind is int:
                if value.denominator != 1:
                    raise ValueError(f"expected an integer, got {tok!r}")
                value = int(value)
            out.append(value)
        return tuple(out)

    if ";" in text:
        head, _, tail = text.partition(";")
        seq = PeriodicSequence(items(head), items(tail))
    else:
        seq = PeriodicSequence((), items(text))
    return seq


def branching_sequence(spec) -> PeriodicSequence:
    seq = spec if isinstance(spec, PeriodicSequence) else parse_sequence(spec, int)
    for p in seq.terms():
        if not isinstance(p, int) or p < 2:
            raise ValueError(f"branching numbers must be integers >= 2, got {p!r}")
    return seq


def length_sequence(spec) -> PeriodicSequence:
    """Edge lengths ``log(q_i)`` from a sequence string of rationals ``q_i > 1`` (or
    already a sequence of positive LogHeights)."""
    seq = spec if isinstance(spec, PeriodicSequence) else parse_sequence(spec, Fraction)
    terms = seq.terms()
    if all(isinstance(x, LogHeight) for x in terms):
        if any(x.sign() <= 0 for x in terms):
            raise ValueError("edge lengths must be positive")
        return seq
    for q in terms:
        if Fraction(q) <= 1:
            raise ValueError(f"edge parameters q must exceed 1, got {q}")
    return seq.map(lambda q: LogHeight.of_rational(q))


class Cumulative:
    """Prefix sums ``S_a = sum_{i<a} len_i`` of a periodic length sequence,
    exact and in floating point, in closed form."""

    def __init__(self, lengths: PeriodicSequence):
        self.lengths = lengths
        self._pre = [LogHeight.ZERO]
        for x in lengths.prefix:
            self._pre.append(self._pre[-1] + x)
        self._per = [LogHeight.ZERO]
        for x in lengths.period:
            self._per.append(self._per[-1] + x)
        self._pre_f = [float(x) for x in self._pre]
        self._per_f = [float(x) for x in self._per]
        self._cache: dict[int, LogHeight] = {}

    def exact(self, a: int) -> LogHeight:
        h = self._cache.get(a)
        if h is None:
            n = len(self.lengths.prefix)
            if a <= n:
                h = self._pre[a]
            else:
                k, r = divmod(a - n, len(self.lengths.period))
                h = self._pre[n] + self._per[-1] * k + self._per[r]
            if len(self._cache) < 1 << 16:
                self._cache[a] = h
        return h

    def approx(self, a: int) -> float:
        n = len(self.lengths.prefix)
        if a <= n:
            return self._pre_f[a]
        k, r = divmod(a - n, len(self.lengths.period))
        return self._pre_f[n] + self._per_f[-1] * k + self._per_f[r]

    def scale(self, a: int) -> float:
        # magnitude used for the float filter's error bound
        return abs(self.approx(a)) + 1.0


# ---------------------------------------------------------------------------
# Event line


class EventTag(enum.Enum):
    BLUE = "BlueOnly"
    RED = "RedOnly"
    BOTH = "Both"

    @property
    def blue(self) -> bool:
        return self is not EventTag.RED

    @property
    def red(self) -> bool:
        return self is not EventTag.BLUE


@dataclass(frozen=True)
class Event:
    height: LogHeight
    tag: EventTag
    blue_index: int | None
    red_index: int | None


def iter_events(blue_lengths, red_lengths) -> Iterator[tuple[EventTag, int, int]]:
    """Yield ``(tag, a, b)`` for the merged heights in increasing order.

    ``a`` is the blue vertex index of the event (or the number of blue heights
    already passed, for red-only events) and likewise ``b`` for red.
    """
    blue = Cumulative(length_sequence(blue_lengths))
    red = Cumulative(length_sequence(red_lengths))
    a = b = 0
    while True:
        hb, hr = blue.approx(a), red.approx(b)
        diff = hb - hr
        slack = _REL_SLACK * (blue.scale(a) + red.scale(b)) * 4
        if diff < -slack:
            order = -1
        elif diff > slack:
            order = 1
        else:
            order = (blue.exact(a) - red.exact(b)).sign()
        if order == 0:
            yield EventTag.BOTH, a, b
            a += 1
            b += 1
        elif order < 0:
            yield EventTag.BLUE, a, b
            a += 1
        else:
            yield EventTag.RED, a, b
            b += 1


@dataclass(frozen=True)
class EventLine:
    """The first events ``h_0 < h_1 < ...`` of the merged height set."""

    tags: tuple[EventTag, ...]
    blue_index: tuple[int | None, ...]
    red_index: tuple[int | None, ...]
    blue_lengths: PeriodicSequence = field(repr=False)
    red_lengths: PeriodicSequence = field(repr=False)

    def __len__(self) -> int:
        return len(self.tags)

    def height(self, n: int) -> LogHeight:
        if self.tags[n].blue:
            return Cumulative(self.blue_lengths).exact(self.blue_index[n])
        return Cumulative(self.red_lengths).exact(self.red_index[n])

    @property
    def heights(self) -> list[LogHeight]:
        blue = Cumulative(self.blue_lengths)
        red = Cumulative(self.red_lengths)
        return [
            blue.exact(a) if t.blue else red.exact(b)
            for t, a, b in zip(self.tags, self.blue_index, self.red_index)
        ]

    def __getitem__(self, n: int) -> Event:
        return Event(self.height(n), self.tags[n], self.blue_index[n], self.red_index[n])

    def __iter__(self) -> Iterator[Event]:
        for n, h in enumerate(self.heights):
            yield Event(h, self.tags[n], self.blue_index[n], self.red_index[n])


def merged_events(q_seq, q_prime_seq, count: int) -> EventLine:
    """First ``count`` events of ``H(R) u H(R')`` with exact tags."""
    if count < 1:
        raise ValueError("count must be >= 1")
    blue_lengths = length_sequence(q_seq)
    red_lengths = length_sequence(q_prime_seq)
    tags, blues, reds = [], [], []
    for tag, a, b in iter_events(blue_lengths, red_lengths):
        tags.append(tag)
        blues.append(a if tag.blue else None)
        reds.append(b if tag.red else None)
        if len(tags) == count:
            break
    return EventLine(tuple(tags), tuple(blues), tuple(reds), blue_lengths, red_lengths)
