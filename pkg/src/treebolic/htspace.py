"""The bi-rooted tree T(p,q), Busemann heights, and treebolic space HT(p,q).

``T(p,q)`` is stored as two copies ``R1``, ``R2`` of ``R(p,q)`` whose roots
``b1``, ``b2`` are joined by a segment ``L`` of length ``log q``. Positions are
kept in edge units (exact fractions of ``log q``), so tree distances and
heights are exact; only the hyperbolic quantities are evaluated in binary64.

A point of ``HT(p,q)`` is a tree point together with a depth; the fibre over
a tree point at height ``h`` is a horocycle which, inside any hyperbolic
plane through it, sits at ``y = e^h`` with the depth as the ``x`` coordinate.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .heights import LogHeight
from .trees import IsotropicTree, TreeMap, TreePoint, lcp_len

R1, R2, LINE = "R1", "R2", "L"
_TOL = 1e-9


class AmbiguousRay(ValueError):
    """Raised when a height depends on the unknown continuation of a ray."""


@dataclass(frozen=True)
class TreePointT:
    """A point of ``T(p,q)``.

    In ``R1``/``R2`` the point lies on the edge into ``word`` at fraction ``t``
    of the way down (``t == 1`` is the vertex ``word``; the root is ``()``).
    On ``L`` the word is empty and ``t`` in (0, 1) is measured from ``b1``.
    """

    half: str
    word: tuple = ()
    t: Fraction = Fraction(1)

    def __post_init__(self):
        t = Fraction(self.t)
        object.__setattr__(self, "t", t)
        if self.half == LINE:
            if not 0 < t < 1 or self.word:
                raise ValueError("line points need 0 < t < 1 and no word")
        elif self.half in (R1, R2):
            if not self.word:
                object.__setattr__(self, "t", Fraction(1))
            elif not 0 < t <= 1:
                raise ValueError("edge parameter must lie in (0, 1]")
        else:
            raise ValueError(f"unknown half {self.half!r}")

    @property
    def depth(self) -> Fraction:
        """Distance to the root of its half, in edge units."""
        if self.half == LINE:
            raise ValueError("line points have no half-depth")
        return Fraction(0) if not self.word else len(self.word) - 1 + self.t

    @property
    def is_vertex(self) -> bool:
        return self.half != LINE and self.t == 1


def vertex(half: str, word=()) -> TreePointT:
    return TreePointT(half, tuple(word))


def _same_half_distance(x: TreePointT, y: TreePointT) -> Fraction:
    dx, dy = x.depth, y.depth
    if x.word == y.word:
        return abs(dx - dy)
    meet = min(dx, dy, Fraction(lcp_len(x.word, y.word)))
    return dx + dy - 2 * meet


def t_distance_units(x: TreePointT, y: TreePointT) -> Fraction:
    """Exact distance in ``T`` in units of the edge length."""
    if x.half == LINE and y.half == LINE:
        return abs(x.t - y.t)
    if x.half == LINE:
        x, y = y, x
    if y.half == LINE:
        return (y.t if x.half == R1 else 1 - y.t) + x.depth
    if x.half == y.half:
        return _same_half_distance(x, y)
    return x.depth + 1 + y.depth


@dataclass(frozen=True)
class BaseRay:
    """A geodesic ray inside one half, starting at that half's root.

    The ray spells ``word`` and then, if ``zeros_after``, continues along
    digit 0 forever; otherwise only the segment spelled by ``word`` is known.
    ``base`` is the vertex where the height function vanishes (by default the
    half's root)."""

    half: str = R1
    word: tuple = ()
    zeros_after: bool = True
    base: TreePointT | None = None

    def _overlap(self, x: TreePointT) -> Fraction:
        # length shared by the geodesic from the half root to x and the ray
        if x.half != self.half or not x.word:
            return Fraction(0)
        n = lcp_len(x.word, self.word)
        if n == len(self.word):
            if not self.zeros_after:
                if len(x.word) > n:
                    raise AmbiguousRay(f"point {x} passes the known end of the ray")
                return x.depth
            rest = x.word[n:]
            k = 0
            while k < len(rest) and rest[k] == 0:
                k += 1
            if k == len(rest):
                return x.depth
            return Fraction(n + k)
        if n == len(x.word):
            return x.depth  # x lies on the ray
        return Fraction(n)

    def busemann_units(self, x: TreePointT) -> Fraction:
        """Height of ``x`` relative to the half root, in edge units."""
        root = TreePointT(self.half)
        return t_distance_units(root, x) - 2 * self._overlap(x)

    def height_units(self, x: TreePointT) -> Fraction:
        shift = Fraction(0) if self.base is None else self.busemann_units(self.base)
        return self.busemann_units(x) - shift


@dataclass(frozen=True)
class TSpace:
    """``T(p, q)`` with a chosen height function."""

    p: int
    q: Fraction
    ray: BaseRay = field(default_factory=BaseRay)

    @property
    def edge(self) -> LogHeight:
        return LogHeight.of_rational(self.q)

    def distance(self, x: TreePointT, y: TreePointT) -> LogHeight:
        return self.edge * t_distance_units(x, y)

    def height(self, x: TreePointT) -> LogHeight:
        return self.edge * self.ray.height_units(x)

    def domain(self, depth: int, midpoints: bool = True) -> list[TreePointT]:
        """Vertices of both halves to ``depth`` and, optionally, edge midpoints."""
        tree = IsotropicTree.regular(self.p, self.q, depth)
        pts = []
        for half in (R1, R2):
            for w in tree.vertices():
                pts.append(TreePointT(half, w))
                if midpoints and w:
                    pts.append(TreePointT(half, w, Fraction(1, 2)))
        if midpoints:
            pts.append(TreePointT(LINE, (), Fraction(1, 2)))
        return pts


def busemann_height(x: TreePointT, ray: BaseRay, q) -> LogHeight:
    """``d(b, x) - 2 length(γ_x ∩ γ)`` as an exact height."""
    return LogHeight.of_rational(Fraction(q)) * ray.height_units(x)


# ---------------------------------------------------------------------------
# Hyperbolic quantities


def h2_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Distance in the upper half-plane."""
    (x1, y1), (x2, y2) = a, b
    if y1 <= 0 or y2 <= 0:
        raise ValueError("upper half-plane points need y > 0")
    # 2 asinh(r / (2 sqrt(y1 y2))) equals the arccosh formula and is stable
    r = math.hypot(x1 - x2, y1 - y2)
    return 2.0 * math.asinh(r / (2.0 * math.sqrt(y1 * y2)))


def fiber_distance(delta_depth: float, h: float) -> float:
    """Distance between two points of one horocycle at height ``h``."""
    return 2.0 * math.asinh(abs(delta_depth) / (2.0 * math.exp(h)))


@dataclass(frozen=True)
class HTPoint:
    tree_point: TreePointT
    depth: float


@dataclass(frozen=True)
class DistanceBounds:
    lower: float
    upper: float


def d_function(space: TSpace, x: HTPoint, y: HTPoint) -> float:
    """``min(d(x, y'), d(y, x'))`` with ``y'`` over ``πx`` at depth ``ζy``."""
    dz = x.depth - y.depth
    hx = float(space.height(x.tree_point))
    hy = float(space.height(y.tree_point))
    return min(fiber_distance(dz, hx), fiber_distance(dz, hy))


def ht_distance_bounds(space: TSpace, x: HTPoint, y: HTPoint) -> DistanceBounds:
    d_t = float(space.distance(x.tree_point, y.tree_point))
    D = d_function(space, x, y)
    return DistanceBounds(max(d_t, D), d_t + D)


# ---------------------------------------------------------------------------
# Maps of T and their horocyclic extensions


@dataclass
class TMap:
    source: TSpace
    target: TSpace
    fn: Callable[[TreePointT], TreePointT]
    label: str = ""

    def __call__(self, x: TreePointT) -> TreePointT:
        return self.fn(x)


def _to_t(point: TreePoint, half: str, q_prime: Fraction) -> TreePointT:
    units = point.height.ratio(LogHeight.of_rational(q_prime)) if point.height else Fraction(0)
    if units is None:
        raise ValueError(f"height {point.height} is not a rational number of target edges")
    if not point.word:
        return TreePointT(half)
    return TreePointT(half, point.word, units - (len(point.word) - 1))


def _on_half_path(x: TreePointT, d: Fraction) -> TreePointT:
    # the point at depth d on the geodesic from the half root to x
    if d == 0:
        return TreePointT(x.half)
    k = math.ceil(d)
    return TreePointT(x.half, x.word[:k], d - (k - 1))


def point_on_geodesic(a: TreePointT, b: TreePointT, frac: Fraction) -> TreePointT:
    """The point at fraction ``frac`` of the way along the geodesic from a to b."""
    s = frac * t_distance_units(a, b)
    # walk the path as a list of (kind, length) legs
    if a.half == LINE or b.half == LINE or a.half != b.half:
        # route through L: leg up a's half, leg along L, leg down b's half
        def line_pos(x):
            return x.t if x.half == LINE else (Fraction(0) if x.half == R1 else Fraction(1))

        up = Fraction(0) if a.half == LINE else a.depth
        if s <= up:
            return _on_half_path(a, up - s)
        la, lb = line_pos(a), line_pos(b)
        along = abs(lb - la)
        if s - up < along:
            t = la + (s - up) * (1 if lb > la else -1)
            return TreePointT(LINE, (), t) if 0 < t < 1 else TreePointT(R1 if t == 0 else R2)
        return _on_half_path(b, s - up - along)
    if a.word == b.word:
        m = min(a.depth, b.depth)
    else:
        m = min(a.depth, b.depth, Fraction(lcp_len(a.word, b.word)))
    up = a.depth - m
    if s <= up:
        return _on_half_path(a, a.depth - s)
    return _on_half_path(b, m + s - up)


def extend_to_T(f: TreeMap) -> TMap:
    """Run ``f`` on the vertices of both halves and extend along edges by
    moving at constant speed along the geodesic between the endpoint images
    (the join line goes to the geodesic from ``F(b1)`` to ``F(b2)``)."""
    src_tree, tgt_tree = f.source, f.target
    p, q = src_tree.branching[0], src_tree.lengths[0].exp_rational()
    p2, q2 = tgt_tree.branching[0], tgt_tree.lengths[0].exp_rational()
    if q is None or q2 is None:
        raise ValueError("extension needs regular trees with rational q")

    def on_vertex(half, w):
        return _to_t(f.images[w], half, q2)

    def fn(x: TreePointT) -> TreePointT:
        if x.half == LINE:
            return point_on_geodesic(on_vertex(R1, ()), on_vertex(R2, ()), x.t)
        image = on_vertex(x.half, x.word)
        if x.t == 1:
            return image
        return point_on_geodesic(on_vertex(x.half, x.word[:-1]), image, x.t)

    return TMap(TSpace(p, q), TSpace(p2, q2), fn, label=f"T({f.label})")


def extension_bound(f: TreeMap, additive_constant: LogHeight) -> LogHeight:
    """``2κ + 2A + |log q' - log q|`` with ``κ = d(b', f(b))``: the additive
    constant of the extension on vertices."""
    kappa = f.images[()].height
    return kappa * 2 + additive_constant * 2 + abs(f.target.lengths[0] - f.source.lengths[0])


def coarse_heightify_T(F: TMap, ray_depth: int) -> TMap:
    """Re-measure target heights along the ray tracked by ``F(γ)``.

    The source height function comes from ``γ`` (the ray along digit 0 in
    ``R1``). The tracked ray starts at the vertex nearest ``F(b1)`` and heads
    for the image of the deepest vertex ``0^ray_depth``. Composing ``F`` with
    an isometry of the target carrying that ray to the target's base ray only
    relabels points, so the result keeps the images of ``F`` and changes the
    target height function to the one defined by the tracked ray.
    """
    src_ray = F.source.ray
    if src_ray != BaseRay():
        raise ValueError("source heights must come from the standard ray")
    start = F(TreePointT(R1))
    end = F(TreePointT(R1, (0,) * ray_depth))
    if end.half == LINE or end.word == start.word and end.half == start.half:
        raise AmbiguousRay("image ray does not leave its starting vertex; deepen ray_depth")
    # nearest vertex to F(b1)
    if start.half == LINE:
        base = TreePointT(R1) if start.t <= Fraction(1, 2) else TreePointT(R2)
    elif start.t > Fraction(1, 2) or not start.word:
        base = TreePointT(start.half, start.word)
    else:
        base = TreePointT(start.half, start.word[:-1])
    ray = BaseRay(end.half, end.word, zeros_after=False, base=base)
    target = TSpace(F.target.p, F.target.q, ray)
    return TMap(F.source, target, F.fn, label=f"heightified({F.label})")


@dataclass
class HTMap:
    """Horocyclic extension: same depth, tree part moved by ``base``."""

    base: TMap

    def __call__(self, x: HTPoint) -> HTPoint:
        return HTPoint(self.base(x.tree_point), x.depth)


def horocyclic_extension(f: TMap) -> HTMap:
    return HTMap(f)


@dataclass(frozen=True)
class TMapConstants:
    additive: LogHeight
    height_deviation: LogHeight
    points: int


def measure_constants(f: TMap, domain: list[TreePointT]) -> TMapConstants:
    """Exact rough-isometry constant and height deviation of ``f`` on ``domain``."""
    images = [f(x) for x in domain]
    qs, qt = f.source.edge, f.target.edge
    keys = set()
    n = len(domain)
    for i in range(n):
        for j in range(i + 1, n):
            keys.add((t_distance_units(domain[i], domain[j]), t_distance_units(images[i], images[j])))
    A = LogHeight.ZERO
    for ks, kt in keys:
        d = abs(qt * kt - qs * ks)
        if d > A:
            A = d
    hkeys = {(f.source.ray.height_units(x), f.target.ray.height_units(y)) for x, y in zip(domain, images)}
    B = LogHeight.ZERO
    for hs, ht in hkeys:
        d = abs(qt * ht - qs * hs)
        if d > B:
            B = d
    return TMapConstants(A, B, n)


@dataclass
class QICertificate:
    pairs_checked: int
    additive: float
    height_deviation: float
    max_D_deviation: float
    worst_slack_i: float
    worst_slack_ii: float
    worst_slack_D: float
    witnesses: list = field(default_factory=list)
    seed: int = 0

    @property
    def ok(self) -> bool:
        return not self.witnesses

    def to_json(self) -> dict:
        return {
            "pairs_checked": self.pairs_checked,
            "A": self.additive,
            "B": self.height_deviation,
            "max_D_deviation": self.max_D_deviation,
            "worst_slack_i": self.worst_slack_i,
            "worst_slack_ii": self.worst_slack_ii,
            "witnesses": self.witnesses,
            "seed": self.seed,
        }


def _describe(x: HTPoint) -> str:
    tp = x.tree_point
    word = "".join(map(str, tp.word)) or "ε"
    return f"{tp.half}:{word}@{tp.t}|ζ={x.depth!r}"


def qi_certificate(
    fhat: HTMap,
    sample_count: int = 1000,
    domain_depth: int = 4,
    seed: int = 0,
    constants: TMapConstants | None = None,
) -> QICertificate:
    """Check the bound-level quasiisometry inequalities on seeded samples.

    With ``A``, ``B`` the rough-isometry and height constants of the tree map
    (measured exactly on the whole sampling domain), each sampled pair must
    satisfy ``|D - D'| <= 2B``, ``upper(f̂x, f̂y) <= 2 lower(x, y) + A + 2B`` and
    ``lower(x, y) <= 2 upper(f̂x, f̂y) + A + 2B``."""
    f = fhat.base
    domain = f.source.domain(domain_depth)
    if constants is None:
        constants = measure_constants(f, domain)
    A, B = float(constants.additive), float(constants.height_deviation)
    rng = random.Random(seed)
    worst_i = worst_ii = worst_d = math.inf
    max_dev = 0.0
    witnesses = []
    for _ in range(sample_count):
        x = HTPoint(rng.choice(domain), rng.uniform(-5.0, 5.0))
        y = HTPoint(rng.choice(domain), rng.uniform(-5.0, 5.0))
        fx, fy = fhat(x), fhat(y)
        D, D2 = d_function(f.source, x, y), d_function(f.target, fx, fy)
        src_b, tgt_b = ht_distance_bounds(f.source, x, y), ht_distance_bounds(f.target, fx, fy)
        dev = abs(D - D2)
        max_dev = max(max_dev, dev)
        slack_d = 2 * B - dev
        slack_i = 2 * src_b.lower + A + 2 * B - tgt_b.upper
        slack_ii = 2 * tgt_b.upper + A + 2 * B - src_b.lower
        worst_d, worst_i, worst_ii = min(worst_d, slack_d), min(worst_i, slack_i), min(worst_ii, slack_ii)
        if slack_d < -_TOL or slack_i < -_TOL or slack_ii < -_TOL:
            witnesses.append(
                {"x": _describe(x), "y": _describe(y), "slack_D": slack_d, "slack_i": slack_i, "slack_ii": slack_ii}
            )
    return QICertificate(sample_count, A, B, max_dev, worst_i, worst_ii, worst_d, witnesses, seed)


def swap_halves(x: TreePointT) -> TreePointT:
    """The isometry of ``T`` exchanging ``R1`` and ``R2``."""
    if x.half == LINE:
        return TreePointT(LINE, (), 1 - x.t)
    return TreePointT(R2 if x.half == R1 else R1, x.word, x.t)
