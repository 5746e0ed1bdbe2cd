"""Domain descriptors: disks, ellipses and squares centered at the origin.

Each descriptor answers the geometric queries the masked-grid machinery
needs: membership, boundary crossings along stencil arms, signed distance
to the boundary, and exact area.  All queries are vectorized over numpy
arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Disk:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError("disk radius must be positive")

    kind = "disk"

    @property
    def bounding_radius(self) -> float:
        return self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def inside(self, x, y):
        return np.asarray(x) ** 2 + np.asarray(y) ** 2 < self.radius ** 2

    def crossing_fraction(self, px, py, sx, sy):
        """Fraction t in (0, 1] where p + t*(sx, sy) meets the boundary.

        Assumes p strictly inside and p + (sx, sy) outside; (sx, sy) is the
        full stencil arm, not a unit vector.
        """
        a = sx * sx + sy * sy
        b = 2.0 * (px * sx + py * sy)
        c = px * px + py * py - self.radius ** 2
        disc = np.maximum(b * b - 4.0 * a * c, 0.0)
        return (-b + np.sqrt(disc)) / (2.0 * a)

    def boundary_distance(self, x, y):
        return self.radius - np.sqrt(np.asarray(x) ** 2 + np.asarray(y) ** 2)

    def scaled(self, t: float) -> "Disk":
        return Disk(t * self.radius)

    def to_dict(self):
        return {"kind": "disk", "radius": self.radius}

    def __str__(self):
        return f"disk({self.radius:g})"


@dataclass(frozen=True)
class Ellipse:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ParameterError("ellipse semi-axes must be positive")

    kind = "ellipse"

    @property
    def bounding_radius(self) -> float:
        return max(self.a, self.b)

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def inside(self, x, y):
        return (np.asarray(x) / self.a) ** 2 + (np.asarray(y) / self.b) ** 2 < 1.0

    def crossing_fraction(self, px, py, sx, sy):
        qx, qy = px / self.a, py / self.b
        tx, ty = sx / self.a, sy / self.b
        a = tx * tx + ty * ty
        b = 2.0 * (qx * tx + qy * ty)
        c = qx * qx + qy * qy - 1.0
        disc = np.maximum(b * b - 4.0 * a * c, 0.0)
        return (-b + np.sqrt(disc)) / (2.0 * a)

    def boundary_distance(self, x, y):
        # first-order estimate (1 - g)/|grad g| with g the normalized level
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        g = np.sqrt((x / self.a) ** 2 + (y / self.b) ** 2)
        gx = x / (self.a ** 2)
        gy = y / (self.b ** 2)
        norm = np.sqrt(gx * gx + gy * gy)
        out = np.where(g > 1e-12, (1.0 - g) * g / np.maximum(norm, 1e-300),
                       min(self.a, self.b))
        return out

    def scaled(self, t: float) -> "Ellipse":
        return Ellipse(t * self.a, t * self.b)

    def to_dict(self):
        return {"kind": "ellipse", "a": self.a, "b": self.b}

    def __str__(self):
        return f"ellipse({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class Square:
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise ParameterError("square side must be positive")

    kind = "square"

    @property
    def bounding_radius(self) -> float:
        return self.side / 2.0

    @property
    def area(self) -> float:
        return self.side ** 2

    def inside(self, x, y):
        half = self.side / 2.0
        return (np.abs(np.asarray(x)) < half) & (np.abs(np.asarray(y)) < half)

    def crossing_fraction(self, px, py, sx, sy):
        half = self.side / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = np.where(sx > 0, (half - px) / np.where(sx != 0, sx, 1.0),
                          np.where(sx < 0, (-half - px) / np.where(sx != 0, sx, 1.0),
                                   np.inf))
            ty = np.where(sy > 0, (half - py) / np.where(sy != 0, sy, 1.0),
                          np.where(sy < 0, (-half - py) / np.where(sy != 0, sy, 1.0),
                                   np.inf))
        return np.minimum(tx, ty)

    def boundary_distance(self, x, y):
        half = self.side / 2.0
        return half - np.maximum(np.abs(np.asarray(x)), np.abs(np.asarray(y)))

    def scaled(self, t: float) -> "Square":
        return Square(t * self.side)

    def to_dict(self):
        return {"kind": "square", "side": self.side}

    def __str__(self):
        return f"square({self.side:g})"


Domain = Disk | Ellipse | Square

_DOMAIN_RE = re.compile(r"^\s*(disk|ellipse|square)\s*\(\s*([^)]*)\)\s*$")


def parse_domain(text: str) -> Domain:
    """Parse 'disk(R)', 'ellipse(a,b)' or 'square(L)'."""
    m = _DOMAIN_RE.match(text)
    if not m:
        raise ParameterError(
            f"domain {text!r} not of the form disk(R) | ellipse(a,b) | square(L)")
    kind, args = m.group(1), m.group(2)
    try:
        vals = [float(v) for v in args.split(",") if v.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad numeric arguments in domain {text!r}") from exc
    if kind == "disk" and len(vals) == 1:
        return Disk(vals[0])
    if kind == "ellipse" and len(vals) == 2:
        return Ellipse(vals[0], vals[1])
    if kind == "square" and len(vals) == 1:
        return Square(vals[0])
    raise ParameterError(f"wrong number of arguments in domain {text!r}")
