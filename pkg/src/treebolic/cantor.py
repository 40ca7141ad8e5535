"""Symbolic Cantor sets at finite precision and the boundary/tree functors."""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .heights import LogHeight
from .trees import (
    IsotropicTree,
    TreeMap,
    TreePoint,
    Word,
    common_prefix,
    distortion_report,
    lcp_len,
    meet_height,
    parse_word,
    render_word,
    tree_distance,
)


@dataclass(frozen=True)
class FiniteWord:
    """The first ``len(digits)`` letters of a point of ``Z(p, q)``."""

    digits: tuple[int, ...]
    p: int
    q: Fraction

    def __post_init__(self):
        if not self.digits:
            raise ValueError("a finite word needs at least one digit")
        if any(not 0 <= d < self.p for d in self.digits):
            raise ValueError(f"digits must lie in 0..{self.p - 1}")

    def __len__(self) -> int:
        return len(self.digits)


@dataclass(frozen=True)
class Rho:
    value: Fraction
    below_resolution: bool


def cantor_distance(w1: FiniteWord, w2: FiniteWord) -> Rho:
    """``q^-N`` with N the common prefix length. Words that agree to the
    available precision only bound the distance from above."""
    if (w1.p, w1.q) != (w2.p, w2.q):
        raise ValueError("words from different Cantor sets")
    n = lcp_len(w1.digits, w2.digits)
    below = n == min(len(w1), len(w2))
    return Rho(Fraction(w1.q) ** -n, below)


def rho(q, u: Sequence[int], v: Sequence[int]) -> Fraction:
    return Fraction(q) ** -lcp_len(u, v)


@dataclass(frozen=True)
class QWindow:
    """A point of ``Q(p, q)``: bi-infinite, zero before ``offset``.

    ``digits[i]`` is the letter at index ``offset + i``; letters after the
    window are unknown (finite precision)."""

    offset: int
    digits: tuple[int, ...]
    p: int
    q: Fraction

    def letter(self, n: int) -> int:
        if n < self.offset:
            return 0
        return self.digits[n - self.offset]

    @property
    def end(self) -> int:
        return self.offset + len(self.digits)

    def distance(self, other: "QWindow") -> Rho:
        """``q^-N`` where the letters agree up to index N and differ at N+1."""
        lo = min(self.offset, other.offset)
        hi = min(self.end, other.end)
        for n in range(lo, hi):
            if self.letter(n) != other.letter(n):
                return Rho(Fraction(self.q) ** -(n - 1), False)
        return Rho(Fraction(self.q) ** -(hi - 1), True)


@dataclass(frozen=True)
class Clone:
    prefix: tuple[int, ...]
    q: Fraction

    @property
    def diameter(self) -> Fraction:
        return Fraction(self.q) ** -len(self.prefix)

    def __contains__(self, word: Sequence[int]) -> bool:
        return tuple(word[: len(self.prefix)]) == self.prefix


def minimal_clone(words: Iterable[Sequence[int]], q=1) -> Clone:
    return Clone(common_prefix(words), Fraction(q))


@dataclass
class WordMap:
    """A total map from words of length ``source_length`` over ``p`` letters
    to words of length ``target_length`` over ``p_prime`` letters."""

    p: int
    q: Fraction
    p_prime: int
    q_prime: Fraction
    source_length: int
    target_length: int
    table: dict[Word, Word]

    def __post_init__(self):
        expected = self.p**self.source_length
        if len(self.table) != expected:
            raise ValueError(f"word map covers {len(self.table)} of {expected} words")
        for w, v in self.table.items():
            if len(w) != self.source_length or len(v) != self.target_length:
                raise ValueError("word lengths do not match the declared precision")

    def __call__(self, w: Sequence[int]) -> Word:
        return self.table[tuple(w)]

    def words(self) -> Iterable[Word]:
        return itertools.product(range(self.p), repeat=self.source_length)

    def serialize(self) -> str:
        return "".join(f"{render_word(w)} -> {render_word(v)}\n" for w, v in sorted(self.table.items()))

    @classmethod
    def deserialize(cls, text: str, p, q, p_prime, q_prime) -> "WordMap":
        table = {}
        for line in text.splitlines():
            if line.strip():
                a, _, b = line.partition("->")
                table[parse_word(a)] = parse_word(b)
        (w, v) = next(iter(table.items()))
        return cls(p, Fraction(q), p_prime, Fraction(q_prime), len(w), len(v), table)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, WordMap) and self.table == other.table


def _regular_params(tree: IsotropicTree) -> tuple[int, Fraction]:
    if not (tree.branching.is_constant and tree.lengths.is_constant):
        raise ValueError("Cantor sets are attached to regular trees")
    q = tree.lengths[0].exp_rational()
    if q is None:
        raise ValueError("edge length is not the logarithm of a rational")
    return tree.branching[0], q


def stability_margin(additive_constant: LogHeight, q_prime) -> int:
    """Levels by which source truncation must exceed the word length."""
    return 4 + math.ceil(float(additive_constant) / math.log(Fraction(q_prime)) - 1e-12)


def boundary_functor(
    f: TreeMap,
    word_length: int,
    target_length: int | None = None,
    additive_constant: LogHeight | None = None,
) -> WordMap:
    """The boundary map of ``f`` on words of length ``word_length``.

    For an order-preserving ``f`` the image ray of a word passes through
    ``f`` of its last vertex, so that vertex's word is returned. Otherwise the
    image is the longest prefix shared by the images of every descendant of
    the word down to the truncation depth, which requires a margin of
    :func:`stability_margin` levels below ``word_length``.
    """
    p, q = _regular_params(f.source)
    p_prime, q_prime = _regular_params(f.target)
    if word_length < 1 or word_length > f.source.depth:
        raise ValueError("word length must lie within the source truncation")
    table: dict[Word, Word] = {}
    if f.is_order_preserving():
        for w in itertools.product(range(p), repeat=word_length):
            table[w] = f.images[w].word
    else:
        if additive_constant is None:
            additive_constant = distortion_report(f, surjectivity=False).additive_constant
        margin = f.source.depth - word_length
        need = stability_margin(additive_constant, q_prime)
        if margin < need:
            raise ValueError(
                f"stabilisation margin {margin} is below the required {need} levels; "
                f"build the tree map to depth >= {word_length + need}"
            )
        for w in itertools.product(range(p), repeat=word_length):
            stack = [w]
            words = []
            while stack:
                u = stack.pop()
                words.append(f.images[u].word)
                if len(u) < f.source.depth:
                    stack.extend(f.source.children(u))
            table[w] = common_prefix(words)
    achieved = min(len(v) for v in table.values())
    if target_length is None:
        target_length = achieved
    elif achieved < target_length:
        raise ValueError(f"only {achieved} stable target letters, {target_length} requested")
    table = {w: v[:target_length] for w, v in table.items()}
    return WordMap(p, q, p_prime, q_prime, word_length, target_length, table)


def tree_functor(g: WordMap) -> TreeMap:
    """Vertex ``v`` goes to the vertex of the minimal clone containing the
    images of all words through ``v``."""
    src = IsotropicTree.regular(g.p, g.q, g.source_length)
    tgt = IsotropicTree.regular(g.p_prime, g.q_prime, g.target_length)
    prefixes: dict[Word, Word] = {w: v for w, v in g.table.items()}
    for k in range(g.source_length - 1, -1, -1):
        for w in itertools.product(range(g.p), repeat=k):
            prefixes[w] = common_prefix(prefixes[w + (c,)] for c in range(g.p))
    images = {w: tgt.point(v) for w, v in prefixes.items()}
    return TreeMap(src, tgt, images, label="tree-functor")


@dataclass(frozen=True)
class BilipschitzReport:
    lambda_upper: Fraction | None
    lambda_lower: Fraction | None
    collisions: int
    pairs: int

    @property
    def bilipschitz(self) -> bool:
        return self.collisions == 0 and self.lambda_lower is not None and self.lambda_lower > 0

    @property
    def constant(self) -> Fraction | None:
        if not self.bilipschitz:
            return None
        return max(self.lambda_upper, 1 / self.lambda_lower)

    def to_json(self) -> dict:
        def r(x):
            return None if x is None else str(x)

        return {
            "lambda_upper": r(self.lambda_upper),
            "lambda_lower": r(self.lambda_lower),
            "collisions": self.collisions,
            "pairs": self.pairs,
            "bilipschitz": self.bilipschitz,
        }


def bilipschitz_report(g: WordMap) -> BilipschitzReport:
    """Extreme values of ``rho'(g x, g y) / rho(x, y)`` over distinct words.

    Pairs whose images agree to the available precision have an image
    distance that is only bounded above; they are counted as collisions,
    and a map with collisions is reported as not bilipschitz with lower
    ratio 0."""
    words = sorted(g.table)
    # the ratio depends only on the two common-prefix lengths
    keys = set()
    collisions = 0
    n = len(words)
    for i in range(n):
        wi, vi = words[i], g.table[words[i]]
        for j in range(i + 1, n):
            m = lcp_len(vi, g.table[words[j]])
            if m == g.target_length:
                collisions += 1
            else:
                keys.add((lcp_len(wi, words[j]), m))
    ratios = [Fraction(g.q) ** k / Fraction(g.q_prime) ** m for k, m in keys]
    upper = max(ratios) if ratios else None
    lower = Fraction(0) if collisions else (min(ratios) if ratios else None)
    return BilipschitzReport(upper, lower, collisions, n * (n - 1) // 2)


def ray_tracking_constant(f: TreeMap, g: WordMap) -> LogHeight:
    """Max distance from ``f`` of a vertex on a word's chain to the target
    segment spelled by that word's image under ``g``."""
    tgt = f.target
    best = LogHeight.ZERO
    seen = set()
    for w, v in g.table.items():
        for k in range(len(w) + 1):
            p = f.images[w[:k]]
            key = (p, v)
            if key in seen:
                continue
            seen.add(key)
            # nearest point of the segment from the root to vertex v
            end = tgt.point(v)
            m = meet_height(tgt, p, end)
            d = p.height - m
            if d > best:
                best = d
    return best


def random_order_preserving_map(p: int, q, p_prime: int, q_prime, depth: int, rng: random.Random, max_skip: int = 2) -> TreeMap:
    """A random order-preserving vertex map used for testing the functors."""
    src = IsotropicTree.regular(p, q, depth)
    tgt = IsotropicTree.regular(p_prime, q_prime, depth * (max_skip + 1))
    images = {(): tgt.point(())}
    for w in src.vertices():
        if len(w) == depth:
            continue
        base = images[w].word
        for c in src.children(w):
            extra = rng.randint(1, max_skip + 1) if len(base) + max_skip + 1 <= tgt.depth else 1
            images[c] = tgt.point(base + tuple(rng.randrange(p_prime) for _ in range(extra)))
    return TreeMap(src, tgt, images, label="random-order-preserving")


def random_word_map(p: int, q, p_prime: int, q_prime, length: int, target_length: int, rng: random.Random) -> WordMap:
    table = {
        w: tuple(rng.randrange(p_prime) for _ in range(target_length))
        for w in itertools.product(range(p), repeat=length)
    }
    return WordMap(p, Fraction(q), p_prime, Fraction(q_prime), length, target_length, table)


def round_trip_bound_check(f: TreeMap, word_length: int, g: WordMap | None = None) -> dict:
    """Compare ``Δ(∂f)`` with ``f`` vertexwise against ``2B + |h(v) - h(w)|``.

    ``f`` must be height-preserving; ``B`` is the ray tracking constant."""
    if not f.is_height_preserving():
        raise ValueError("the round-trip bound applies to height-preserving maps")
    g = g if g is not None else boundary_functor(f, word_length)
    back = tree_functor(g)
    B = ray_tracking_constant(f, g)
    worst_slack = None
    violations = []
    for v, w in back.images.items():
        d = tree_distance(f.target, f.images[v], w)
        bound = B * 2 + abs(f.source.height(len(v)) - w.height)
        slack = bound - d
        if worst_slack is None or slack < worst_slack:
            worst_slack = slack
        if slack.sign() < 0:
            violations.append(v)
    return {"B": B, "worst_slack": worst_slack, "violations": violations, "vertices": len(back.images)}
