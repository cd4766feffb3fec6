"""Finite hypercubic lattice geometry with the l1 metric.

Sites are integer d-tuples inside an axis-aligned box.  All regions are
enumerated exactly; the continuum volume constant Lambda_d = 2^d/d! only
enters analytic bound evaluation, never the geometry itself.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

Site = tuple[int, ...]


class LatticeError(ValueError):
    """Domain error for lattice geometry operations."""


@dataclass(frozen=True)
class LatticeSpec:
    """Finite hypercubic box of sites with open boundaries.

    Coordinates along axis i run from origin[i] to origin[i] + extent[i] - 1.
    """

    d: int
    extent: tuple[int, ...]
    origin: tuple[int, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.d < 1:
            raise LatticeError(f"dimension must be >= 1, got {self.d}")
        object.__setattr__(self, "extent", tuple(int(e) for e in self.extent))
        if len(self.extent) != self.d:
            raise LatticeError("extent must list one length per axis")
        if any(e < 1 for e in self.extent):
            raise LatticeError("every extent must be >= 1")
        origin = (0,) * self.d if self.origin is None else tuple(int(o) for o in self.origin)
        if len(origin) != self.d:
            raise LatticeError("origin must have one coordinate per axis")
        object.__setattr__(self, "origin", origin)

    @property
    def n_sites(self) -> int:
        return math.prod(self.extent)

    def contains(self, site: Site) -> bool:
        return len(site) == self.d and all(
            self.origin[i] <= site[i] < self.origin[i] + self.extent[i] for i in range(self.d)
        )

    def sites(self) -> list[Site]:
        """All sites in lexicographic order."""
        ranges = [range(self.origin[i], self.origin[i] + self.extent[i]) for i in range(self.d)]
        return [tuple(s) for s in itertools.product(*ranges)]


@dataclass(frozen=True)
class Region:
    """Duplicate-free set of lattice sites, kept in lexicographic order."""

    sites: tuple[Site, ...]

    def __post_init__(self):
        ordered = tuple(sorted(set(tuple(int(c) for c in s) for s in self.sites)))
        if len(ordered) != len(self.sites):
            raise LatticeError("region contains duplicate sites")
        object.__setattr__(self, "sites", ordered)

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, site: Site) -> bool:
        return tuple(site) in self.sites

    def issubset(self, other: "Region") -> bool:
        return set(self.sites) <= set(other.sites)

    def intersects(self, other: "Region") -> bool:
        return not set(self.sites).isdisjoint(other.sites)

    def union(self, other: "Region") -> "Region":
        merged = set(self.sites) | set(other.sites)
        return Region(tuple(merged)) if merged != set(self.sites) else self


@dataclass(frozen=True)
class LocalityConstants:
    """Lattice-only constants entering every analytic bound.

    Lambda_d = 2^d/d! is the continuum l1-ball volume constant; the
    Lieb-Robinson pair is v = e * Lambda_d * R^(d+1), mu = 1/R.
    """

    d: int
    R: float
    R_O: float = 0.0
    lambda_d: float = field(init=False)
    v: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        if self.d < 1 or self.R <= 0 or self.R_O < 0:
            raise LatticeError("need d >= 1, R > 0, R_O >= 0")
        lam = 2.0**self.d / math.factorial(self.d)
        object.__setattr__(self, "lambda_d", lam)
        object.__setattr__(self, "v", math.e * lam * self.R ** (self.d + 1))
        object.__setattr__(self, "mu", 1.0 / self.R)


def l1_distance(a: Site, b: Site) -> int:
    return sum(abs(x - y) for x, y in zip(a, b))


def distance_to_region(site: Site, region: Region) -> int:
    return min(l1_distance(site, s) for s in region.sites)


def ball(center: Site, radius: int, lattice: LatticeSpec) -> Region:
    """All lattice sites within l1 distance `radius` of `center`.

    Exact discrete enumeration, clipped to the lattice box.
    """
    center = tuple(int(c) for c in center)
    if not lattice.contains(center):
        raise LatticeError(f"center {center} outside lattice")
    if radius < 0:
        raise LatticeError("radius must be >= 0")
    ranges = []
    for i in range(lattice.d):
        lo = max(center[i] - radius, lattice.origin[i])
        hi = min(center[i] + radius, lattice.origin[i] + lattice.extent[i] - 1)
        ranges.append(range(lo, hi + 1))
    sites = [s for s in itertools.product(*ranges) if l1_distance(s, center) <= radius]
    return Region(tuple(sites))


def omega_region(observable_support: Region, l: int, lattice: LatticeSpec) -> Region:
    """Sites within l1 distance l of at least one support site (Omega_l).

    The distance is taken to the support set as a whole.
    """
    if len(observable_support) == 0:
        raise LatticeError("observable support must be nonempty")
    if l < 0:
        raise LatticeError("truncation length must be >= 0")
    acc: set[Site] = set()
    for s in observable_support.sites:
        acc.update(ball(s, l, lattice).sites)
    return Region(tuple(acc))


def theta_count_bound(l: float, constants: LocalityConstants) -> dict[str, float]:
    """Analytic upper bounds on |Theta_l| and |supp H_l|.

    Returns the general forms Lambda_d*(R_O+l+R)^d and Lambda_d*(2R+l+R_O)^d,
    plus the simplified 2^d*Lambda_d*l^d form when l >= 2R + R_O.
    """
    if l < 0:
        raise LatticeError("truncation length must be >= 0")
    c = constants
    out = {
        "count_bound": c.lambda_d * (c.R_O + l + c.R) ** c.d,
        "support_bound": c.lambda_d * (2 * c.R + l + c.R_O) ** c.d,
    }
    if l >= 2 * c.R + c.R_O:
        simplified = 2.0**c.d * c.lambda_d * l**c.d
        out["count_bound_simplified"] = simplified
        out["support_bound_simplified"] = simplified
    return out
