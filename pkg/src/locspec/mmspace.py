"""Weighted one-dimensional metric measure spaces and their metric balls.

A space is a topology (interval, half-line, line or circle) equipped with the
Euclidean/arc distance and a measure ``w(t) dt``.  Balls are realized as
coordinate intervals whose endpoints carry a tag describing why they are
there:

``space_boundary_covered``
    the space ends inside the ball, the ball covers a one-sided neighbourhood
    of that boundary point;
``ball_boundary``
    the endpoint is at distance exactly ``radius`` from the center;
``wrap_cut``
    a circle ball of radius exactly half the circumference, cut at the
    antipode.

Circle coordinates are unwrapped in a chart centred at the ball center, so a
region is always a single interval ``(center - r, center + r)`` clipped to the
space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError

SPACE_BOUNDARY_COVERED = "space_boundary_covered"
BALL_BOUNDARY = "ball_boundary"
WRAP_CUT = "wrap_cut"

GEOM_RTOL = 1e-12


# --------------------------------------------------------------------------
# topologies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.b <= self.a:
            raise DomainError(f"interval requires finite b > a, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class HalfLine:
    a: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise DomainError("half-line endpoint must be finite")


@dataclass(frozen=True)
class Line:
    pass


@dataclass(frozen=True)
class Circle:
    circumference: float

    def __post_init__(self):
        if not (math.isfinite(self.circumference) and self.circumference > 0):
            raise DomainError(f"circle requires circumference > 0, got {self.circumference}")


Topology = Union[Interval, HalfLine, Line, Circle]


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantWeight:
    c: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"constant weight must be a positive density, got {self.c}")

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.c)

    def integral(self, lo, hi):
        return self.c * (hi - lo)

    def moment(self, lo, hi, m):
        """``int_lo^hi w(t) (t - lo)^m dt``."""
        return self.c * (hi - lo) ** (m + 1) / (m + 1)

    def scaled(self, factor):
        return ConstantWeight(self.c * factor)


@dataclass(frozen=True)
class PowerWeight:
    """``w(t) = coefficient * |t - origin| ** exponent`` with ``0**0 = 1``."""

    exponent: float
    origin: float = 0.0
    coefficient: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.exponent) and self.exponent >= 0):
            raise DomainError(
                f"power weight exponent must be >= 0 to be locally integrable, got {self.exponent}"
            )
        if not (math.isfinite(self.coefficient) and self.coefficient > 0):
            raise DomainError("power weight coefficient must be positive")

    def __call__(self, t):
        r = np.abs(np.asarray(t, dtype=float) - self.origin)
        if self.exponent == 0:
            return np.full_like(r, self.coefficient)
        return self.coefficient * r**self.exponent

    def _primitive(self, t):
        # signed antiderivative of |t - o|^p
        s = t - self.origin
        p1 = self.exponent + 1.0
        return math.copysign(abs(s) ** p1 / p1, s)

    def integral(self, lo, hi):
        return self.coefficient * (self._primitive(hi) - self._primitive(lo))

    def moment(self, lo, hi, m):
        """``int_lo^hi w(t) (t - lo)^m dt`` for ``m`` in {0, 1, 2}.

        Exact when the origin is not interior to ``(lo, hi)``; the element
        assembly inserts the origin as a node so this always holds there.
        """
        o, p = self.origin, self.exponent
        if lo < o < hi:
            return self.moment(lo, o, m) + sum(
                math.comb(m, j) * (o - lo) ** (m - j) * self.moment(o, hi, j) for j in range(m + 1)
            )
        # substitute s = |t - o|, t - lo = +-(s - s_lo)
        if lo >= o:
            s0, s1, sign = lo - o, hi - o, 1.0
        else:
            s0, s1, sign = o - lo, o - hi, -1.0
        # int (t-lo)^m |t-o|^p dt = sum_j C(m,j) (sign)^m (-s0)^(m-j) int s^(p+j) ds (oriented)
        total = 0.0
        for j in range(m + 1):
            q = p + j + 1.0
            total += math.comb(m, j) * (-s0) ** (m - j) * (s1**q - s0**q) / q
        return self.coefficient * (sign ** (m + 1)) * total

    def scaled(self, factor):
        return PowerWeight(self.exponent, self.origin, self.coefficient * factor)


Weight = Union[ConstantWeight, PowerWeight]


# --------------------------------------------------------------------------
# spaces and balls
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceDescriptor:
    topology: Topology
    weight: Weight = field(default_factory=ConstantWeight)
    label: str = ""

    def __post_init__(self):
        if isinstance(self.topology, Circle) and isinstance(self.weight, PowerWeight):
            if self.weight.exponent != 0:
                raise DomainError("power weights are not defined on a circle")

    # convenience constructors ------------------------------------------------
    @classmethod
    def interval(cls, a, b, weight=None, label=""):
        return cls(Interval(float(a), float(b)), weight or ConstantWeight(), label)

    @classmethod
    def half_line(cls, a=0.0, weight=None, label=""):
        return cls(HalfLine(float(a)), weight or ConstantWeight(), label)

    @classmethod
    def line(cls, weight=None, label=""):
        return cls(Line(), weight or ConstantWeight(), label)

    @classmethod
    def circle(cls, circumference, weight=None, label=""):
        return cls(Circle(float(circumference)), weight or ConstantWeight(), label)

    @classmethod
    def cone(cls, N, two_sided=True, label=""):
        """Radial model of a metric cone of dimension ``N`` with pole at 0."""
        w = PowerWeight(exponent=N - 1.0, origin=0.0)
        topo = Line() if two_sided else HalfLine(0.0)
        return cls(topo, w, label or f"cone-N{N:g}")

    # geometry ------------------------------------------------------------------
    @property
    def is_circle(self):
        return isinstance(self.topology, Circle)

    @property
    def bounds(self):
        """Coordinate range ``(lo, hi)``; infinite ends for unbounded spaces."""
        t = self.topology
        if isinstance(t, Interval):
            return t.a, t.b
        if isinstance(t, HalfLine):
            return t.a, math.inf
        if isinstance(t, Line):
            return -math.inf, math.inf
        return -math.inf, math.inf  # circle: any real, taken modulo L

    @property
    def pole(self):
        if isinstance(self.weight, PowerWeight):
            return self.weight.origin
        return None

    def check(self, p):
        p = float(p)
        if not math.isfinite(p):
            raise DomainError(f"coordinate {p} is not finite")
        lo, hi = self.bounds
        if p < lo or p > hi:
            raise DomainError(f"coordinate {p} outside the domain [{lo}, {hi}]")
        return p

    def distance(self, p, q):
        return distance(self, p, q)

    def scaled_weight(self, factor):
        return SpaceDescriptor(self.topology, self.weight.scaled(factor), self.label)


@dataclass(frozen=True)
class BallSpec:
    center: float
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"ball radius must be finite and positive, got {self.radius}")
        if not math.isfinite(self.center):
            raise DomainError("ball center must be finite")

    def with_radius(self, radius):
        return BallSpec(self.center, radius)


@dataclass(frozen=True)
class Region:
    pieces: tuple
    endpoint_tags: tuple
    full: bool = False

    @property
    def lo(self):
        return self.pieces[0][0]

    @property
    def hi(self):
        return self.pieces[-1][1]

    @property
    def length(self):
        return sum(b - a for a, b in self.pieces)


def geom_tol(space, ball):
    """Absolute tolerance used to classify endpoints and nodes."""
    scale = max(ball.radius, abs(ball.center), 1.0)
    lo, hi = space.bounds
    for v in (lo, hi):
        if math.isfinite(v):
            scale = max(scale, abs(v))
    if space.is_circle:
        scale = max(scale, space.topology.circumference)
    return GEOM_RTOL * scale


def distance(space, p, q):
    """Metric distance between coordinates ``p`` and ``q``.

    >>> distance(SpaceDescriptor.half_line(0.0), 1.0, 4.0)
    3.0
    """
    p, q = space.check(p), space.check(q)
    if space.is_circle:
        L = space.topology.circumference
        d = abs(p - q) % L
        return min(d, L - d)
    return abs(p - q)


def distances(space, center, points):
    """Vectorized distance from ``center`` to an array of coordinates."""
    pts = np.asarray(points, dtype=float)
    d = np.abs(pts - center)
    if space.is_circle:
        L = space.topology.circumference
        d = np.mod(d, L)
        d = np.minimum(d, L - d)
    return d


def ball_region(space, ball):
    """Realize the open ball ``B_r(c)`` as a tagged coordinate interval."""
    c = space.check(ball.center)
    r = ball.radius
    tol = geom_tol(space, ball)
    if space.is_circle:
        L = space.topology.circumference
        half = 0.5 * L
        if abs(r - half) <= tol:
            return Region(((c - half, c + half),), ((WRAP_CUT, WRAP_CUT),))
        if r > half:
            return Region(((c - half, c + half),), (), full=True)
        return Region(((c - r, c + r),), ((BALL_BOUNDARY, BALL_BOUNDARY),))

    lo_space, hi_space = space.bounds
    lo, hi = c - r, c + r
    left = right = BALL_BOUNDARY
    if math.isfinite(lo_space):
        if lo < lo_space - tol:
            lo, left = lo_space, SPACE_BOUNDARY_COVERED
        elif abs(lo - lo_space) <= tol:
            lo = lo_space
    if math.isfinite(hi_space):
        if hi > hi_space + tol:
            hi, right = hi_space, SPACE_BOUNDARY_COVERED
        elif abs(hi - hi_space) <= tol:
            hi = hi_space
    return Region(((lo, hi),), ((left, right),))


def region_measure(space, region):
    return float(sum(space.weight.integral(a, b) for a, b in region.pieces))


def ball_measure(space, ball):
    """``m(B_r(c))`` from the exact antiderivative of the weight."""
    return region_measure(space, ball_region(space, ball))


def annulus_ratio(space, ball, delta):
    """``m(B_r \\ B_{(1-delta) r}) / m(B_r)``."""
    if not 0 < delta < 1:
        raise DomainError(f"annulus width fraction must lie in (0, 1), got {delta}")
    outer = ball_measure(space, ball)
    if outer <= 0:
        raise DomainError("ball has zero measure")
    inner = ball_measure(space, ball.with_radius((1.0 - delta) * ball.radius))
    return (outer - inner) / outer


def weight_max(space, region):
    w = space.weight
    if isinstance(w, ConstantWeight):
        return w.c
    # |t - o|^p is monotone in |t - o|, so the sup sits at an endpoint
    return float(max(w(np.array([a, b])).max() for a, b in region.pieces))


def weight_min(space, region):
    w = space.weight
    if isinstance(w, ConstantWeight):
        return w.c
    vals = [float(w(np.array([a, b])).min()) for a, b in region.pieces]
    if any(a <= w.origin <= b for a, b in region.pieces):
        vals.append(float(w(np.array([w.origin]))[0]))
    return min(vals)


def annulus_constant(space, ball):
    """A constant ``C`` with ``annulus_ratio(delta) <= C * delta``.

    In one dimension the annulus has length at most ``2 delta r``, so its
    mass is at most ``2 delta r max(w)``.
    """
    region = ball_region(space, ball)
    return 2.0 * ball.radius * weight_max(space, region) / region_measure(space, region)


# --------------------------------------------------------------------------
# key=value serialization
# --------------------------------------------------------------------------


def _num(x):
    return repr(float(x))


def format_space(space):
    t, w = space.topology, space.weight
    if isinstance(t, Interval):
        topo = f"topology=interval a={_num(t.a)} b={_num(t.b)}"
    elif isinstance(t, HalfLine):
        topo = f"topology=half_line a={_num(t.a)}"
    elif isinstance(t, Line):
        topo = "topology=line"
    else:
        topo = f"topology=circle circumference={_num(t.circumference)}"
    if isinstance(w, ConstantWeight):
        wt = f"weight=constant c={_num(w.c)}"
    else:
        wt = f"weight=power exponent={_num(w.exponent)} origin={_num(w.origin)}"
        if w.coefficient != 1.0:
            wt += f" coefficient={_num(w.coefficient)}"
    lines = [topo, wt]
    if space.label:
        lines.append(f"label={space.label}")
    return "\n".join(lines) + "\n"


def _kv(tokens):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ValueError(f"malformed key=value token {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_space(text):
    """Inverse of :func:`format_space`; lines may appear in any order."""
    topo = weight = None
    label = ""
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("label="):
            label = line[len("label="):].strip()
            continue
        kv = _kv(line.split())
        if "topology" in kv:
            kind = kv["topology"]
            if kind == "interval":
                topo = Interval(float(kv["a"]), float(kv["b"]))
            elif kind == "half_line":
                topo = HalfLine(float(kv.get("a", 0.0)))
            elif kind == "line":
                topo = Line()
            elif kind == "circle":
                topo = Circle(float(kv["circumference"]))
            else:
                raise ValueError(f"unknown topology {kind!r}")
        elif "weight" in kv:
            kind = kv["weight"]
            if kind in ("constant", "const"):
                weight = ConstantWeight(float(kv.get("c", 1.0)))
            elif kind == "power":
                weight = PowerWeight(
                    float(kv["exponent"]),
                    float(kv.get("origin", 0.0)),
                    float(kv.get("coefficient", 1.0)),
                )
            else:
                raise ValueError(f"unknown weight {kind!r}")
        else:
            raise ValueError(f"unrecognised line {line!r}")
    if topo is None:
        raise ValueError("space description has no topology line")
    return SpaceDescriptor(topo, weight or ConstantWeight(), label)
