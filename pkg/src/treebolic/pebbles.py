"""The pebble sequence X, its real lower bound Y, and the gap search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .heights import (
    EventLine,
    EventTag,
    LogHeight,
    PeriodicSequence,
    branching_sequence,
    iter_events,
    length_sequence,
    merged_events,
    parse_sequence,
)


@dataclass(frozen=True)
class PebbleParams:
    p_seq: PeriodicSequence
    q_seq: PeriodicSequence
    p_prime_seq: PeriodicSequence
    q_prime_seq: PeriodicSequence
    initial: int = 1

    def __post_init__(self):
        branching_sequence(self.p_seq)
        branching_sequence(self.p_prime_seq)
        for seq in (self.q_seq, self.q_prime_seq):
            if any(Fraction(q) <= 1 for q in seq.terms()):
                raise ValueError("edge parameters q must exceed 1")
        if not isinstance(self.initial, int) or self.initial < 1:
            raise ValueError("initial value must be a positive integer")

    @classmethod
    def parse(cls, p, q, p_prime, q_prime, initial: int = 1) -> "PebbleParams":
        """Build from sequence strings such as ``"6;3"`` or plain numbers."""
        return cls(
            branching_sequence(p if isinstance(p, PeriodicSequence) else parse_sequence(str(p), int)),
            q if isinstance(q, PeriodicSequence) else parse_sequence(str(q), Fraction),
            branching_sequence(
                p_prime if isinstance(p_prime, PeriodicSequence) else parse_sequence(str(p_prime), int)
            ),
            q_prime if isinstance(q_prime, PeriodicSequence) else parse_sequence(str(q_prime), Fraction),
            initial,
        )

    constant = parse

    @property
    def is_constant(self) -> bool:
        return all(
            s.is_constant for s in (self.p_seq, self.q_seq, self.p_prime_seq, self.q_prime_seq)
        )


@dataclass(frozen=True)
class PebbleTrace:
    events: EventLine
    values: tuple[int, ...]
    max_so_far: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def maximum(self) -> int:
        return self.max_so_far[-1]


def _step(x: int, tag: EventTag, a: int, b: int, params: PebbleParams) -> int:
    if tag is EventTag.BLUE:
        return params.p_seq[a] * x
    if tag is EventTag.RED:
        return -(-x // params.p_prime_seq[b])
    return -(-(params.p_seq[a] * x) // params.p_prime_seq[b])


def iter_pebbles(params: PebbleParams) -> Iterator[tuple[EventTag, int, int, int]]:
    """Yield ``(tag_n, a, b, X_n)`` forever; the tag is that of ``h_n``."""
    x = params.initial
    for tag, a, b in iter_events(params.q_seq, params.q_prime_seq):
        yield tag, a, b, x
        x = _step(x, tag, a, b, params)


def pebble_sequence(params: PebbleParams, n_events: int) -> PebbleTrace:
    """``X_0 .. X_{n_events}`` together with the events ``h_0 .. h_{n_events}``."""
    if n_events < 0:
        raise ValueError("n_events must be non-negative")
    events = merged_events(params.q_seq, params.q_prime_seq, n_events + 1)
    values = [params.initial]
    for n in range(n_events):
        tag = events.tags[n]
        values.append(_step(values[-1], tag, events.blue_index[n] or 0, events.red_index[n] or 0, params))
    best, maxima = 0, []
    for v in values:
        best = max(best, v)
        maxima.append(best)
    return PebbleTrace(events, tuple(values), tuple(maxima))


def real_lower_bound(params: PebbleParams, n_events: int) -> list[Fraction]:
    """Exact ``Y_0 .. Y_{n_events}``: the recurrence for X without ceilings."""
    if not params.is_constant:
        raise ValueError("the real lower bound is defined for constant parameters only")
    p, p_prime = params.p_seq[0], params.p_prime_seq[0]
    y = Fraction(params.initial)
    out = [y]
    for (tag, _, _), _ in zip(iter_events(params.q_seq, params.q_prime_seq), range(n_events)):
        if tag.blue:
            y *= p
        if tag.red:
            y /= p_prime
        out.append(y)
    return out


def _constant_scan(params: PebbleParams, n_events: int, threshold: int | None):
    """Tight loop for constant parameters: ``(max X_0..X_n, first n with
    X_n >= threshold)``. Event order uses a float filter with an exact
    tie check, like :func:`iter_events`."""
    p, pp = params.p_seq[0], params.p_prime_seq[0]
    q, qp = Fraction(params.q_seq[0]), Fraction(params.q_prime_seq[0])
    lq, lqp = math.log(q), math.log(qp)
    exact_q, exact_qp = LogHeight.of_rational(q), LogHeight.of_rational(qp)
    a = b = 0
    x = params.initial
    best = x
    for n in range(n_events + 1):
        if threshold is not None and x >= threshold:
            return best, n
        if n == n_events:
            break
        hb, hr = a * lq, b * lqp
        if abs(hb - hr) <= 1e-9 * (hb + hr + 1.0):
            order = (exact_q * a - exact_qp * b).sign()
        else:
            order = -1 if hb < hr else 1
        if order == 0:
            x = -(-(p * x) // pp)
            a += 1
            b += 1
        elif order < 0:
            x = p * x
            a += 1
        else:
            x = -(-x // pp)
            b += 1
        if x > best:
            best = x
    return best, None


def unboundedness_witness(params: PebbleParams, threshold: int, max_events: int) -> int | None:
    """Least ``n <= max_events`` with ``X_n >= threshold``, or None."""
    if threshold < 2:
        raise ValueError("threshold must be at least 2")
    if params.is_constant:
        return _constant_scan(params, max_events, threshold)[1]
    for n, (_, _, _, x) in enumerate(iter_pebbles(params)):
        if x >= threshold:
            return n
        if n >= max_events:
            return None
    return None  # pragma: no cover


def max_pebbles(params: PebbleParams, n_events: int) -> int:
    """``max(X_0 .. X_{n_events})`` without storing the trace."""
    if params.is_constant:
        return _constant_scan(params, n_events, None)[0]
    best = 0
    for n, (_, _, _, x) in enumerate(iter_pebbles(params)):
        best = max(best, x)
        if n >= n_events:
            return best
    return best  # pragma: no cover


def c1_pebble_bound(p: int, q, p_prime: int, q_prime) -> Fraction:
    """A rigorous upper bound on every ``X_n`` when log p/log q < log p'/log q'.

    Between reds the pebble count is multiplied by ``p`` per blue; each red
    divides by ``p'`` and adds less than one. Summing the geometric series of
    these rounding errors along the walk gives the bound returned here. The
    margin ``eps`` is rounded down so the bound stays valid.
    """
    lp, lq = math.log(p), math.log(Fraction(q))
    lpp, lqp = math.log(p_prime), math.log(Fraction(q_prime))
    eps = lpp / lqp - lp / lq
    if eps <= 1e-9:
        raise ValueError("parameters do not satisfy the strict ratio inequality")
    eps = Fraction(eps * (1 - 1e-9)).limit_denominator(10**9)
    if eps <= 0:
        raise ValueError("ratio gap too small to bound")
    decay = Fraction(q_prime) ** float(-eps)
    decay = Fraction(decay * (1 + 1e-12)).limit_denominator(10**12)
    if decay >= 1:
        raise ValueError("ratio gap too small to bound")
    head = Fraction(p * p_prime)
    return head + Fraction(p_prime - 1, p_prime) * head / (1 - decay)


# ---------------------------------------------------------------------------
# Gap search


def _prime_vector(x: Fraction) -> dict[int, int]:
    return dict(LogHeight.of_rational(x).terms)


def multiplicatively_dependent(q, q_prime) -> bool:
    """True iff ``q^i == q'^j`` for some integers ``i, j >= 1``, i.e. iff
    log q'/log q is rational. Decided exactly from prime exponent vectors."""
    return LogHeight.of_rational(Fraction(q_prime)).ratio(LogHeight.of_rational(Fraction(q))) is not None


def _least_multiple_above(h: LogHeight, step: LogHeight) -> int:
    """Least ``b`` with ``b * step > h``."""
    b = max(0, math.floor(float(h) / float(step)) - 1)
    while step * b <= h:
        b += 1
    while b > 0 and step * (b - 1) > h:
        b -= 1
    return b


@dataclass(frozen=True)
class GapStep:
    a: int
    b: int
    gap: LogHeight


def gap_search(q, q_prime, a: int, search_cap: int = 10**6) -> tuple[int, int]:
    """Smallest ``a' > a`` whose gap to the next multiple of log q' is
    strictly smaller than the gap at ``a``. Returns ``(a', b')``."""
    q, q_prime = Fraction(q), Fraction(q_prime)
    if q <= 1 or q_prime <= 1:
        raise ValueError("q and q' must exceed 1")
    if a < 1:
        raise ValueError("a must be at least 1")
    if multiplicatively_dependent(q, q_prime):
        raise ValueError(f"{q} and {q_prime} are multiplicatively dependent; log ratio is rational")
    lq, lqp = LogHeight.of_rational(q), LogHeight.of_rational(q_prime)
    b = _least_multiple_above(lq * a, lqp)
    gap = lqp * b - lq * a
    fq, fqp, fgap = float(lq), float(lqp), float(gap)
    for a2 in range(a + 1, a + 1 + search_cap):
        # float prefilter on the fractional position, exact confirmation
        x = a2 * fq / fqp
        approx_gap = (math.floor(x) + 1 - x) * fqp
        if approx_gap > fgap * (1 + 1e-9) + 1e-12:
            continue
        b2 = _least_multiple_above(lq * a2, lqp)
        if lqp * b2 - lq * a2 < gap:
            return a2, b2
    raise RuntimeError(f"no smaller gap found for a in ({a}, {a + search_cap}]")


def gap_chain(q, q_prime, a: int, steps: int) -> list[GapStep]:
    """Iterate :func:`gap_search`, recording strictly decreasing gaps."""
    lq, lqp = LogHeight.of_rational(Fraction(q)), LogHeight.of_rational(Fraction(q_prime))
    b = _least_multiple_above(lq * a, lqp)
    chain = [GapStep(a, b, lqp * b - lq * a)]
    for _ in range(steps):
        a, b = gap_search(q, q_prime, a)
        chain.append(GapStep(a, b, lqp * b - lq * a))
    return chain
