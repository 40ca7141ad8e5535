"""Decision procedures for the two arithmetic embedding conditions.

Condition C1 is the strict inequality log p/log q < log p'/log q'.
Condition C2 is equality of the two ratios together with p and p' being
powers of a common integer. Equality is only ever reported with an exact
certificate; interval arithmetic is used solely to separate unequal ratios.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import iv

from .heights import LogHeight, Order

DEFAULT_PRECISION_CAP = 4096


@dataclass(frozen=True)
class PerfectPower:
    base: int
    exponent: int


def perfect_power_decomposition(n: int) -> PerfectPower:
    """Write ``n = base**exponent`` with the exponent as large as possible."""
    if not isinstance(n, int) or n < 2:
        raise ValueError("n must be an integer >= 2")
    terms = LogHeight.of_rational(n).terms
    g = math.gcd(*(int(e) for _, e in terms))
    base = math.prod(prime ** (int(e) // g) for prime, e in terms)
    return PerfectPower(base, g)


def common_power_base(p: int, p_prime: int) -> tuple[int, int, int] | None:
    """``(r, s, t)`` with ``p = r**s``, ``p' = r**t`` and r not a perfect power."""
    a, b = perfect_power_decomposition(p), perfect_power_decomposition(p_prime)
    if a.base != b.base:
        return None
    return a.base, a.exponent, b.exponent


def _logs(p, q, p_prime, q_prime):
    for name, v in (("p", p), ("p'", p_prime)):
        if not isinstance(v, int) or v < 2:
            raise ValueError(f"{name} must be an integer >= 2, got {v!r}")
    q, q_prime = Fraction(q), Fraction(q_prime)
    if q <= 1 or q_prime <= 1:
        raise ValueError("q and q' must exceed 1")
    return (LogHeight.of_rational(x) for x in (p, q, p_prime, q_prime))


def _sym(u: LogHeight, v: LogHeight) -> dict[tuple[int, int], Fraction]:
    # symmetric tensor u (x) v + v (x) u on prime coordinates
    out: dict[tuple[int, int], Fraction] = {}
    for p1, e1 in u.terms:
        for p2, e2 in v.terms:
            key = (min(p1, p2), max(p1, p2))
            out[key] = out.get(key, 0) + e1 * e2
    return {k: v for k, v in out.items() if v}


def _structurally_equal(lp, lq, lpp, lqp) -> bool:
    """Exact test of ``log p * log q' == log p' * log q``.

    Both sides are products of two linear forms in prime logarithms. The
    identity holds formally iff the symmetric tensors agree; it is the only
    route by which equality is certified."""
    return _sym(lp, lqp) == _sym(lpp, lq)


def ratio_compare(p, q, p_prime, q_prime, precision_cap: int = DEFAULT_PRECISION_CAP):
    """Order of log p/log q against log p'/log q'.

    Returns ``(Order, precision_bits)`` where ``precision_bits`` is 0 when the
    answer came from exact arithmetic alone."""
    lp, lq, lpp, lqp = _logs(p, q, p_prime, q_prime)
    if _structurally_equal(lp, lq, lpp, lqp):
        return Order.EQ, 0
    left, right = lp.ratio(lq), lpp.ratio(lqp)
    if left is not None and right is not None:
        return Order.of((left > right) - (left < right)), 0
    # If p and p' (or q and q') are proportional the comparison collapses to
    # one between heights: log p/log q vs c log p/log q' means log q' vs c log q.
    c = lpp.ratio(lp)
    if c is not None:
        return Order.of((lqp - lq * c).sign()), 0
    c = lqp.ratio(lq)
    if c is not None:
        return Order.of((lp * c - lpp).sign()), 0
    prec = 64
    saved = iv.prec
    try:
        while prec <= precision_cap:
            iv.prec = prec
            diff = _interval_diff(p, q, p_prime, q_prime)
            if diff.a > 0:
                return Order.GT, prec
            if diff.b < 0:
                return Order.LT, prec
            prec *= 2
    finally:
        iv.prec = saved
    return Order.UNDECIDED, precision_cap


def _interval_diff(p, q, p_prime, q_prime):
    """Interval for ``log p * log q' - log p' * log q`` at the current precision.
    Its sign is the sign of the ratio difference since log q, log q' > 0."""
    def log_rat(x):
        x = Fraction(x)
        return iv.log(iv.mpf(x.numerator)) - iv.log(iv.mpf(x.denominator))

    return log_rat(p) * log_rat(q_prime) - log_rat(p_prime) * log_rat(q)


class Verdict(enum.Enum):
    C1 = "EmbeddableC1"
    C2 = "EmbeddableC2"
    NO = "NotEmbeddable"
    UNDECIDED = "Undecided"

    @property
    def embeddable(self) -> bool:
        return self in (Verdict.C1, Verdict.C2)


@dataclass(frozen=True)
class EmbedDecision:
    verdict: Verdict
    certificate: tuple[int, int, int] | None
    ratio: Order
    precision_bits: int
    params: tuple = field(default=())

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "certificate": None
            if self.certificate is None
            else dict(zip(("r", "s", "t"), self.certificate)),
            "ratio_comparison": self.ratio.value,
            "precision_bits": self.precision_bits,
        }


def _c2_certificate(p, q, p_prime, q_prime):
    cert = common_power_base(p, p_prime)
    if cert is None:
        return None
    _, s, t = cert
    q, q_prime = Fraction(q), Fraction(q_prime)
    return cert if q_prime**s == q**t else None


def decide_embedding_existence(p, q, p_prime, q_prime, precision_cap: int = DEFAULT_PRECISION_CAP) -> EmbedDecision:
    order, bits = ratio_compare(p, q, p_prime, q_prime, precision_cap)
    params = (p, Fraction(q), p_prime, Fraction(q_prime))
    if order is Order.LT:
        return EmbedDecision(Verdict.C1, None, order, bits, params)
    if order is Order.EQ:
        cert = _c2_certificate(p, q, p_prime, q_prime)
        verdict = Verdict.C2 if cert else Verdict.NO
        return EmbedDecision(verdict, cert, order, bits, params)
    if order is Order.GT:
        return EmbedDecision(Verdict.NO, None, order, bits, params)
    return EmbedDecision(Verdict.UNDECIDED, None, order, bits, params)


class QIVerdict(enum.Enum):
    QI = "QI"
    NOT_QI = "NotQI"
    UNDECIDED = "Undecided"


def decide_quasiisometry(p, q, p_prime, q_prime, precision_cap: int = DEFAULT_PRECISION_CAP) -> QIVerdict:
    decision = decide_embedding_existence(p, q, p_prime, q_prime, precision_cap)
    if decision.verdict is Verdict.UNDECIDED:
        return QIVerdict.UNDECIDED
    return QIVerdict.QI if decision.verdict is Verdict.C2 else QIVerdict.NOT_QI


def decide_bs_embedding(m: int, n: int) -> bool:
    """Whether BS(1,m) quasiisometrically embeds in BS(1,n)."""
    return common_power_base(m, n) is not None
