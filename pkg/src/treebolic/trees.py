"""Truncated isotropic trees and maps between them.

Vertices are words: the root is ``()`` and the children of ``w`` at level
``k`` are ``w + (c,)`` for ``c < p_{k+1}``. A general point is a
:class:`TreePoint`, a word together with an exact height; the word names the
deeper endpoint of the edge the point lies on (so the point is a vertex iff
its height is the height of that word's level).
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

from .criteria import Verdict, decide_embedding_existence
from .heights import (
    Cumulative,
    EventTag,
    LogHeight,
    PeriodicSequence,
    branching_sequence,
    iter_events,
    length_sequence,
    parse_sequence,
)

Word = tuple
DEFAULT_VERTEX_BUDGET = 200_000


class BudgetExceeded(RuntimeError):
    pass


def lcp_len(u: Sequence, v: Sequence) -> int:
    n = min(len(u), len(v))
    i = 0
    while i < n and u[i] == v[i]:
        i += 1
    return i


def common_prefix(words: Iterable[Sequence]) -> tuple:
    it = iter(words)
    try:
        first = tuple(next(it))
    except StopIteration:
        raise ValueError("common prefix of an empty family") from None
    n = len(first)
    for w in it:
        n = min(n, lcp_len(first, w))
        if n == 0:
            break
    return first[:n]


class IsotropicTree:
    """``R((p_n), (q_n))`` truncated at ``depth`` levels below the root."""

    def __init__(self, branching, lengths, depth: int, budget: int = DEFAULT_VERTEX_BUDGET):
        if depth < 0:
            raise ValueError("depth must be non-negative")
        self.branching: PeriodicSequence = branching_sequence(branching)
        self.lengths: PeriodicSequence = length_sequence(lengths)
        self.depth = depth
        self.budget = budget
        self._cum = Cumulative(self.lengths)
        self._level_by_height: dict[LogHeight, int] = {}

    @classmethod
    def regular(cls, p: int, q, depth: int, budget: int = DEFAULT_VERTEX_BUDGET) -> "IsotropicTree":
        return cls(PeriodicSequence.constant(p), PeriodicSequence.constant(Fraction(q)), depth, budget)

    @classmethod
    def parse(cls, p_spec, q_spec, depth: int, budget: int = DEFAULT_VERTEX_BUDGET) -> "IsotropicTree":
        return cls(parse_sequence(str(p_spec), int), parse_sequence(str(q_spec), Fraction), depth, budget)

    def with_depth(self, depth: int) -> "IsotropicTree":
        return IsotropicTree(self.branching, self.lengths, depth, self.budget)

    def __repr__(self) -> str:
        lengths = ",".join(str(x) for x in self.lengths.period)
        return f"IsotropicTree(p={self.branching}, lengths=[{lengths}], depth={self.depth})"

    def same_shape(self, other: "IsotropicTree") -> bool:
        n = max(len(self.branching.terms()), len(other.branching.terms())) + max(
            len(self.lengths.terms()), len(other.lengths.terms())
        )
        n = max(n * 2, 8)
        return all(self.branching[i] == other.branching[i] for i in range(n)) and all(
            self.lengths[i] == other.lengths[i] for i in range(n)
        )

    # -- heights ------------------------------------------------------------
    def height(self, level: int) -> LogHeight:
        return self._cum.exact(level)

    def level_at_or_above(self, h: LogHeight) -> int:
        """Least level whose height is ``>= h``."""
        if h.sign() <= 0:
            return 0
        approx = self._cum
        lo, hi = 0, 1
        while approx.approx(hi) < float(h):
            lo, hi = hi, hi * 2
        # exact binary search on [lo, hi]
        lo = max(0, lo - 1)
        while self.height(hi) < h:
            hi += 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.height(mid) >= h:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def is_vertex_height(self, h: LogHeight) -> bool:
        return self.height(self.level_at_or_above(h)) == h

    # -- vertices -----------------------------------------------------------
    def count(self, level: int) -> int:
        return math.prod(self.branching[i] for i in range(level))

    def num_vertices(self, depth: int | None = None) -> int:
        depth = self.depth if depth is None else depth
        return sum(self.count(k) for k in range(depth + 1))

    def check_budget(self, depth: int | None = None) -> None:
        n = self.num_vertices(depth)
        if n > self.budget:
            raise BudgetExceeded(f"{n} vertices exceed the budget of {self.budget}")

    def level(self, k: int) -> Iterator[Word]:
        return itertools.product(*(range(self.branching[i]) for i in range(k)))

    def vertices(self, depth: int | None = None) -> list[Word]:
        depth = self.depth if depth is None else depth
        self.check_budget(depth)
        return [w for k in range(depth + 1) for w in self.level(k)]

    def children(self, w: Word) -> list[Word]:
        return [w + (c,) for c in range(self.branching[len(w)])]

    def contains(self, w: Word) -> bool:
        return len(w) <= self.depth and all(0 <= c < self.branching[i] for i, c in enumerate(w))

    def point(self, w: Word, h: LogHeight | None = None) -> "TreePoint":
        if h is None:
            return TreePoint(tuple(w), self.height(len(w)))
        return TreePoint(tuple(w), h)


@dataclass(frozen=True, order=False)
class TreePoint:
    word: Word
    height: LogHeight

    def is_vertex_of(self, tree: IsotropicTree) -> bool:
        return tree.height(len(self.word)) == self.height

    def render(self, tree: IsotropicTree) -> str:
        text = render_word(self.word, tree)
        return text if self.is_vertex_of(tree) else f"{text}@{self.height}"


def render_word(w: Word, tree: IsotropicTree | None = None) -> str:
    if not w:
        return "ε"
    wide = tree is not None and any(tree.branching[i] > 10 for i in range(len(w)))
    return ".".join(map(str, w)) if wide or any(c > 9 for c in w) else "".join(map(str, w))


def parse_word(text: str) -> Word:
    text = text.strip()
    if text in ("ε", ""):
        return ()
    if "." in text:
        return tuple(int(t) for t in text.split("."))
    return tuple(int(c) for c in text)


def meet_height(tree: IsotropicTree, x: TreePoint, y: TreePoint) -> LogHeight:
    """Height of ``x ∧ y``."""
    hv = tree.height(lcp_len(x.word, y.word))
    return min(x.height, y.height, hv)


def tree_distance(tree: IsotropicTree, x, y) -> LogHeight:
    """Exact distance ``h(x) + h(y) - 2 h(x ∧ y)``; words are taken as vertices."""
    if not isinstance(x, TreePoint):
        x = tree.point(x)
    if not isinstance(y, TreePoint):
        y = tree.point(y)
    return x.height + y.height - meet_height(tree, x, y) * 2


def descends(tree: IsotropicTree, x: TreePoint, y: TreePoint) -> bool:
    """Whether ``y`` lies in the tree of descendants of ``x``."""
    return meet_height(tree, x, y) == x.height


# ---------------------------------------------------------------------------
# Maps


@dataclass
class TreeMap:
    """A map defined on every vertex of ``source`` (and, for waterfall maps,
    on every point at every event height)."""

    source: IsotropicTree
    target: IsotropicTree
    images: dict[Word, TreePoint]
    layers: list[tuple[LogHeight, dict[Word, Word]]] | None = None
    label: str = ""

    def __call__(self, w: Word) -> TreePoint:
        return self.images[tuple(w)]

    def serialize(self) -> str:
        lines = []
        for w in sorted(self.images, key=lambda w: (len(w), w)):
            lines.append(f"{render_word(w, self.source)} -> {self.images[w].render(self.target)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str, source: IsotropicTree, target: IsotropicTree, label: str = "") -> "TreeMap":
        images = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            src, _, dst = line.partition("->")
            dst = dst.strip()
            word_text, _, h_text = dst.partition("@")
            word = parse_word(word_text)
            if h_text:
                coeff, _, base = h_text.strip().partition("*log(")
                h = LogHeight(Fraction(coeff), Fraction(base.rstrip(")")))
            else:
                h = target.height(len(word))
            images[parse_word(src)] = TreePoint(word, h)
        return cls(source, target, images, label=label)

    def restrict(self, depth: int) -> "TreeMap":
        images = {w: p for w, p in self.images.items() if len(w) <= depth}
        return TreeMap(self.source.with_depth(depth), self.target, images, label=self.label)

    def is_height_preserving(self) -> bool:
        return all(p.height == self.source.height(len(w)) for w, p in self.images.items())

    def is_order_preserving(self) -> bool:
        for w, p in self.images.items():
            if len(w) < self.source.depth:
                for c in self.source.children(w):
                    if not descends(self.target, p, self.images[c]):
                        return False
        return True

    def is_injective_on_levels(self) -> bool:
        by_level: dict[int, set] = defaultdict(set)
        for w, p in self.images.items():
            bucket = by_level[len(w)]
            if p in bucket:
                return False
            bucket.add(p)
        return True


def identity_map(tree: IsotropicTree) -> TreeMap:
    return TreeMap(tree, tree, {w: tree.point(w) for w in tree.vertices()}, label="identity")


def compose(f: TreeMap, g: TreeMap) -> TreeMap:
    """``g ∘ f`` where every image of ``f`` is a vertex in the domain of ``g``."""
    images = {}
    for w, p in f.images.items():
        if not p.is_vertex_of(f.target):
            raise ValueError("composition needs vertex-valued inner maps")
        images[w] = g.images[p.word]
    return TreeMap(f.source, g.target, images, label=f"{g.label}∘{f.label}")


# ---------------------------------------------------------------------------
# Waterfall maps


def distributive_waterfall(src: IsotropicTree, dst: IsotropicTree) -> TreeMap:
    """The canonical distributive waterfall map ``src -> dst``.

    Works upward through the merged event heights up to the height of the
    deepest source level. At each event the arms leaving the preimage of a
    target point, listed in digit order, are dealt round-robin onto the arms
    leaving that target point.
    """
    src.check_budget()
    top = src.height(src.depth)
    if dst.height(dst.depth) < top:
        raise ValueError("target truncation does not reach the source truncation height")
    layers: list[tuple[LogHeight, dict[Word, Word]]] = []
    current: dict[Word, Word] = {(): ()}
    images: dict[Word, TreePoint] = {}
    for tag, a, b in iter_events(src.lengths, dst.lengths):
        h = src.height(a) if tag.blue else dst.height(b)
        layers.append((h, current))
        if tag.blue:
            for w, v in current.items():
                images[w] = TreePoint(v, h)
            if a == src.depth:
                break
        groups: dict[Word, list[Word]] = defaultdict(list)
        for w, v in current.items():
            groups[v].append(w)
        nxt: dict[Word, Word] = {}
        for v, pre in groups.items():
            arms = sorted(c for w in pre for c in (src.children(w) if tag.blue else [w]))
            slots = dst.children(v) if tag.red else [v]
            for i, arm in enumerate(arms):
                nxt[arm] = slots[i % len(slots)]
        current = nxt
    return TreeMap(src, dst, images, layers, label="distributive-waterfall")


def preimage_profile(f: TreeMap) -> list[int]:
    """Max preimage cardinality at each event height (waterfall maps), or at
    each source level for plain vertex maps."""
    if f.layers is not None:
        out = []
        for _, layer in f.layers:
            counts: dict[Word, int] = defaultdict(int)
            for v in layer.values():
                counts[v] += 1
            out.append(max(counts.values()))
        return out
    by_level: dict[int, dict[TreePoint, int]] = defaultdict(lambda: defaultdict(int))
    for w, p in f.images.items():
        by_level[len(w)][p] += 1
    return [max(by_level[k].values()) for k in sorted(by_level)]


def check_distributive(f: TreeMap) -> bool:
    """Verify the ⌈P/p'⌉ arm bound at every event of a layered waterfall map."""
    assert f.layers is not None
    for (h, layer), (_, nxt) in zip(f.layers, f.layers[1:]):
        groups: dict[Word, list[Word]] = defaultdict(list)
        for w, v in layer.items():
            groups[v].append(w)
        for v, pre in groups.items():
            src_vertex = f.source.is_vertex_height(h)
            dst_vertex = f.target.is_vertex_height(h)
            p_arm = f.source.branching[len(pre[0])] if src_vertex else 1
            P = len(pre) * p_arm
            slots = len(f.target.children(v)) if dst_vertex else 1
            counts: dict[Word, int] = defaultdict(int)
            for w in pre:
                for c in (f.source.children(w) if src_vertex else [w]):
                    counts[nxt[c]] += 1
            if max(counts.values()) > -(-P // slots):
                return False
    return True


def blue_yellow_probe(f: TreeMap) -> LogHeight:
    """Max distance between same-height source points with the same image."""
    if f.layers is None:
        raise ValueError("probe needs a layered waterfall map")
    best = LogHeight.ZERO
    for h, layer in f.layers:
        groups: dict[Word, list[Word]] = defaultdict(list)
        for w, v in layer.items():
            groups[v].append(w)
        for pre in groups.values():
            if len(pre) > 1:
                d = (h - f.source.height(len(common_prefix(pre)))) * 2
                if d > best:
                    best = d
    return best


# ---------------------------------------------------------------------------
# height correction


def heightify(f: TreeMap, target_depth: int | None = None) -> TreeMap:
    """Height-preserving map at distance ``max |h(f x) - h(x)|`` from ``f``.

    Images that are too high move to their ancestor at the right height;
    images that are too low descend along the smallest digit. Pass
    ``target_depth`` to let descending images use a deeper target truncation."""
    tgt = f.target if target_depth is None else f.target.with_depth(max(target_depth, f.target.depth))
    images = {}
    for w, p in f.images.items():
        h = f.source.height(len(w))
        if p.height == h:
            images[w] = p
            continue
        level = tgt.level_at_or_above(h)
        if p.height > h:
            images[w] = TreePoint(p.word[:level], h)
        else:
            if level > tgt.depth:
                raise ValueError(
                    f"heightify needs target level {level} beyond truncation depth {tgt.depth}"
                )
            images[w] = TreePoint(p.word + (0,) * (level - len(p.word)), h)
    return TreeMap(f.source, tgt, images, label=f"heightify({f.label})")


# ---------------------------------------------------------------------------
# Regular tree constructions


def _regular(tree: IsotropicTree) -> tuple[int, LogHeight]:
    if not (tree.branching.is_constant and tree.lengths.is_constant):
        raise ValueError("expected a regular tree")
    return tree.branching[0], tree.lengths[0]


def _digits(value: int, base: int, width: int) -> tuple[int, ...]:
    out = []
    for _ in range(width):
        value, r = divmod(value, base)
        out.append(r)
    return tuple(reversed(out))


def _undigits(ds: Sequence[int], base: int) -> int:
    v = 0
    for d in ds:
        v = v * base + d
    return v


def _block_map(src: IsotropicTree, s: int) -> TreeMap:
    """``R(p, L) -> R(p^s, sL)``: recode ``s``-blocks, project to ancestors."""
    p, length = _regular(src)
    tgt = IsotropicTree(
        PeriodicSequence.constant(p**s), PeriodicSequence.constant(length * s), src.depth // s, src.budget
    )
    images = {}
    for w in src.vertices():
        m = len(w) // s
        images[w] = tgt.point(tuple(_undigits(w[i * s : (i + 1) * s], p) for i in range(m)))
    return TreeMap(src, tgt, images, label=f"block{s}")


def _expand_map(src: IsotropicTree, r: int, s: int) -> TreeMap:
    """``R(r^s, L) -> R(r, L/s)``: spell each digit in base ``r``; isometric."""
    p, length = _regular(src)
    if p != r**s:
        raise ValueError(f"branching {p} is not {r}^{s}")
    tgt = IsotropicTree(
        PeriodicSequence.constant(r), PeriodicSequence.constant(length / s), src.depth * s, src.budget
    )
    images = {}
    for w in src.vertices():
        images[w] = tgt.point(tuple(d for c in w for d in _digits(c, r, s)))
    return TreeMap(src, tgt, images, label=f"expand{s}")


def power_rough_isometry(p: int, q, s: int, depth: int) -> TreeMap:
    """``R(p, q) -> R(p^s, q^s)``; additive constant at most ``s log q``."""
    if s < 1:
        raise ValueError("s must be >= 1")
    f = _block_map(IsotropicTree.regular(p, q, depth), s)
    f.label = f"power(p={p},q={q},s={s})"
    return f


def c2_rough_isometry(p: int, q, p_prime: int, q_prime, depth: int) -> TreeMap:
    """Rough isometry ``R(p,q) -> R(p',q')`` through ``R(r, q^(1/s))``."""
    decision = decide_embedding_existence(p, q, p_prime, q_prime)
    if decision.verdict is not Verdict.C2:
        raise ValueError(f"no C2 certificate for {(p, q, p_prime, q_prime)}: {decision.verdict.value}")
    r, s, t = decision.certificate
    src = IsotropicTree.regular(p, q, depth)
    expand = _expand_map(src, r, s)
    block = _block_map(expand.target, t)
    f = compose(expand, block)
    # same metric tree, stated with the caller's q'
    f.target = IsotropicTree.regular(p_prime, q_prime, block.target.depth)
    assert f.target.same_shape(block.target)
    f.label = f"c2({p},{q},{p_prime},{q_prime})"
    return f


def c1_exponents(p: int, q, p_prime: int, q_prime, cap: int = 10_000) -> tuple[int, int]:
    """Smallest ``a`` (then smallest ``b``) with ``p^a <= p'^b`` and ``q'^b < q^a``."""
    q, q_prime = Fraction(q), Fraction(q_prime)
    for a in range(1, cap + 1):
        b = 1
        while p_prime**b < p**a:
            b += 1
        if q_prime**b < q**a:
            return a, b
    raise RuntimeError(f"no exponents (a, b) with a <= {cap}")


def c1_embedding(p: int, q, p_prime: int, q_prime, depth: int) -> TreeMap:
    """Rough isometric embedding ``R(p,q) -> R(p',q')`` under the strict
    ratio inequality, as a composite of four stages:

    1. regroup ``a``-blocks: ``R(p,q) -> R(p^a, q^a)``;
    2. read base ``p^a`` digits in the larger alphabet ``p'^b``;
    3. stretch ``R(p'^b, q^a) -> R(p'^b, q'^b)``: a child digit is written at
       the first target level whose height is at least the source height,
       with zeros on the levels skipped in between;
    4. spell each base ``p'^b`` digit as ``b`` base ``p'`` digits.
    """
    decision = decide_embedding_existence(p, q, p_prime, q_prime)
    if decision.verdict is not Verdict.C1:
        raise ValueError(f"no C1 certificate for {(p, q, p_prime, q_prime)}: {decision.verdict.value}")
    a, b = c1_exponents(p, q, p_prime, q_prime)
    src = IsotropicTree.regular(p, q, depth)
    big = p_prime**b
    wide = IsotropicTree.regular(big, Fraction(q) ** a, depth // a)
    narrow = IsotropicTree.regular(big, Fraction(q_prime) ** b, 0)
    stretch = [narrow.level_at_or_above(wide.height(i)) for i in range(wide.depth + 1)]
    tgt = IsotropicTree.regular(p_prime, q_prime, stretch[-1] * b, src.budget)
    images = {}
    for w in src.vertices():
        k = len(w) // a
        blocks = [_undigits(w[i * a : (i + 1) * a], p) for i in range(k)]
        long_word: list[int] = []
        for i, c in enumerate(blocks, start=1):
            long_word.append(c)
            long_word.extend([0] * (stretch[i] - stretch[i - 1] - 1))
        images[w] = tgt.point(tuple(d for c in long_word for d in _digits(c, p_prime, b)))
    return TreeMap(src, tgt, images, label=f"c1({p},{q},{p_prime},{q_prime};a={a},b={b})")


# ---------------------------------------------------------------------------
# Distortion


@dataclass(frozen=True)
class DistortionReport:
    additive_constant: LogHeight
    height_deviation: LogHeight
    coarse_order_constant: LogHeight
    preimage_profile: tuple[int, ...]
    coarse_surjectivity: LogHeight | None
    pairs_checked: int = 0

    def to_json(self) -> dict:
        def r(h):
            return None if h is None else str(h)

        return {
            "additive_constant": r(self.additive_constant),
            "height_deviation": r(self.height_deviation),
            "coarse_order_constant": r(self.coarse_order_constant),
            "max_preimage_profile": list(self.preimage_profile),
            "coarse_surjectivity": r(self.coarse_surjectivity),
            "pairs_checked": self.pairs_checked,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)


def _max_abs(values: Iterable[LogHeight]) -> LogHeight:
    best = LogHeight.ZERO
    for v in values:
        v = abs(v)
        if v > best:
            best = v
    return best


def distortion_report(f: TreeMap, surjectivity: bool | None = None) -> DistortionReport:
    """Exact brute-force constants of ``f`` over all pairs of source vertices.

    Pairs are first reduced to the levels and target heights that determine
    their distortion, so each distinct exact difference is evaluated once.
    Coarse surjectivity is computed when the target truncation (up to the
    highest image) fits the vertex budget, or when ``surjectivity`` is True.
    """
    src, tgt = f.source, f.target
    words = sorted(f.images, key=lambda w: (len(w), w))
    pts = [f.images[w] for w in words]
    top_level = max(len(p.word) for p in pts)
    # index every relevant target height in exact order
    heights = {p.height for p in pts} | {tgt.height(k) for k in range(top_level + 1)}
    order = sorted(heights, key=lambda h: float(h))
    order = _exact_sort(order)
    idx = {h: i for i, h in enumerate(order)}
    level_idx = [idx[tgt.height(k)] for k in range(top_level + 1)]
    hidx = [idx[p.height] for p in pts]

    keys = set()
    n = len(words)
    for i in range(n):
        wi, pi, hi = words[i], pts[i].word, hidx[i]
        li = len(wi)
        for j in range(i + 1, n):
            wj = words[j]
            c = lcp_len(wi, wj)
            hj = hidx[j]
            m = level_idx[lcp_len(pi, pts[j].word)]
            if hi < m:
                m = hi
            if hj < m:
                m = hj
            keys.add((li, len(wj), c, hi, hj, m))
    H = src.height
    diffs = (
        (order[a] + order[b] - order[m] * 2) - (H(la) + H(lb) - H(c) * 2)
        for la, lb, c, a, b, m in keys
    )
    A = _max_abs(diffs)
    B = _max_abs(p.height - H(len(w)) for w, p in zip(words, pts))

    order_keys = set()
    for w, p in zip(words, pts):
        for y in _descendants(w, f.images, src):
            order_keys.add((idx[p.height], idx[meet_height(tgt, p, f.images[y])]))
    C = _max_abs(order[a] - order[m] for a, m in order_keys)

    surj = None
    want = surjectivity if surjectivity is not None else tgt.num_vertices(top_level) <= tgt.budget
    if want:
        surj = coarse_surjectivity(f)
    return DistortionReport(A, B, C, tuple(preimage_profile(f)), surj, n * (n - 1) // 2)


def _exact_sort(values: list[LogHeight]) -> list[LogHeight]:
    # values are pre-sorted by float; fix any near-tie inversions exactly
    import functools

    return sorted(values, key=functools.cmp_to_key(lambda x, y: (x - y).sign()))


def _descendants(w: Word, images: dict, tree: IsotropicTree) -> Iterator[Word]:
    stack = [w]
    while stack:
        u = stack.pop()
        if len(u) < tree.depth:
            for c in tree.children(u):
                if c in images:
                    yield c
                    stack.append(c)


def coarse_surjectivity(f: TreeMap) -> LogHeight:
    """Max over target vertices no higher than the highest image of the
    distance to the image set."""
    tgt = f.target
    pts = list(f.images.values())
    top = max(p.height for p in pts)
    top_level = tgt.level_at_or_above(top)
    if tgt.height(top_level) > top:
        top_level -= 1
    tgt.check_budget(top_level)
    # lowest image height inside each subtree, and deepest image on each edge
    sub_min: dict[Word, LogHeight] = {}
    edge_max: dict[Word, LogHeight] = {}
    for p in pts:
        w = p.word
        if p.is_vertex_of(tgt):
            anchors = [w[:k] for k in range(len(w) + 1)]
        else:
            prev = edge_max.get(w)
            if prev is None or p.height > prev:
                edge_max[w] = p.height
            anchors = [w[:k] for k in range(len(w))]
        for a in anchors:
            cur = sub_min.get(a)
            if cur is None or p.height < cur:
                sub_min[a] = p.height
    # d(u, image) = h(u) + min over ancestors a of g(a), with
    # g(a) = min(sub_min(a) - 2 h(a), -edge_max(a)); the sub_min term may
    # overestimate for images below a child of a, but the true meet attains it.
    g: dict[Word, LogHeight] = {}
    for a, m in sub_min.items():
        g[a] = m - tgt.height(len(a)) * 2
    for a, e in edge_max.items():
        if a not in g or -e < g[a]:
            g[a] = -e
    values = _exact_sort(sorted(set(g.values()), key=float))
    rank = {v: i for i, v in enumerate(values)}
    g_rank = {a: rank[v] for a, v in g.items()}
    none = len(values)
    best_rank: dict[Word, int] = {(): g_rank.get((), none)}
    pairs = set()
    for k in range(top_level + 1):
        for u in tgt.level(k):
            r = best_rank[u] if k == 0 else min(best_rank[u[:-1]], g_rank.get(u, none))
            best_rank[u] = r
            pairs.add((k, r))
    worst = LogHeight.ZERO
    for k, r in pairs:
        if r < none:
            d = tgt.height(k) + values[r]
            if d > worst:
                worst = d
    return worst
