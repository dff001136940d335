"""Analytic initial distributions evaluable off-grid.

The closed-form and implicit solutions compose ``u0`` with characteristic
maps, so ``u0`` has to be a function rather than a table.  A truncated sum of
axis-aligned Gaussians covers every shipped scenario; ``TabulatedDistribution``
wraps gridded data for anything else.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import Field, PhaseGrid, integrate


@dataclass(frozen=True)
class GaussianComponent:
    center: tuple[float, ...]
    sigma: tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
        if len(self.center) != len(self.sigma):
            raise ValueError("center and sigma must have the same length")
        if any(s <= 0 for s in self.sigma):
            raise ValueError(f"sigmas must be positive, got {self.sigma}")
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")

    @property
    def peak(self) -> float:
        """Density at the center (ignoring truncation)."""
        d = len(self.sigma)
        return self.weight / ((2 * np.pi) ** (d / 2) * float(np.prod(self.sigma)))


@dataclass(frozen=True)
class InitialDistribution:
    """Sum of weighted Gaussians, hard-truncated to a box.

    ``support`` holds one ``(lo, hi)`` pair per axis; the default box is the
    nonnegative orthant.  An empty ``components`` tuple is the zero density.
    """

    components: tuple[GaussianComponent, ...]
    ndim: int = 0
    support: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        ndim = self.ndim or (len(comps[0].center) if comps else 0)
        if ndim < 1:
            raise ValueError("cannot infer dimensionality of an empty distribution; pass ndim")
        if any(len(c.center) != ndim for c in comps):
            raise ValueError("all components must share the distribution's dimensionality")
        object.__setattr__(self, "ndim", ndim)
        support = self.support
        if support is None:
            support = ((0.0, np.inf),) * ndim
        support = tuple((float(lo), float(hi)) for lo, hi in support)
        if len(support) != ndim or any(not hi > lo for lo, hi in support):
            raise ValueError(f"support must be {ndim} increasing (lo, hi) pairs, got {support}")
        object.__setattr__(self, "support", support)

    def __call__(self, *coords) -> np.ndarray | float:
        """Evaluate at broadcastable coordinate arrays, one per axis."""
        if len(coords) != self.ndim:
            raise ValueError(f"expected {self.ndim} coordinates, got {len(coords)}")
        coords = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in coords))
        out = np.zeros(coords[0].shape)
        for comp in self.components:
            q = np.zeros(coords[0].shape)
            for x, c, s in zip(coords, comp.center, comp.sigma):
                q += ((x - c) / s) ** 2
            out += comp.peak * np.exp(-0.5 * q)
        inside = np.ones(coords[0].shape, dtype=bool)
        for x, (lo, hi) in zip(coords, self.support):
            inside &= (x >= lo) & (x <= hi)
        out = np.where(inside, out, 0.0)
        return out if out.ndim else float(out)

    def scaled(self, factor: float) -> "InitialDistribution":
        if factor == 1.0:
            return self
        comps = tuple(replace(c, weight=c.weight * factor) for c in self.components)
        return replace(self, components=comps)


@dataclass(frozen=True, eq=False)
class TabulatedDistribution:
    """Gridded ``u0`` with multilinear interpolation, zero outside the table."""

    field: Field
    ndim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ndim", self.field.grid.ndim)
        interp = RegularGridInterpolator(
            tuple(a.nodes for a in self.field.grid.axes), self.field.values,
            method="linear", bounds_error=False, fill_value=0.0,
        )
        object.__setattr__(self, "_interp", interp)

    def __call__(self, *coords):
        if len(coords) != self.ndim:
            raise ValueError(f"expected {self.ndim} coordinates, got {len(coords)}")
        coords = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in coords))
        pts = np.stack([c.ravel() for c in coords], axis=-1)
        out = np.maximum(self._interp(pts).reshape(coords[0].shape), 0.0)
        return out if out.ndim else float(out)

    def scaled(self, factor: float) -> "TabulatedDistribution":
        return TabulatedDistribution(Field(self.field.grid, self.field.values * factor))


def eval_u0(dist, point) -> float:
    """Evaluate ``dist`` at a single phase point."""
    point = tuple(point)
    if len(point) != dist.ndim:
        raise ValueError(f"point has {len(point)} coordinates, distribution has {dist.ndim}")
    return float(dist(*point))


def sample(dist, grid: PhaseGrid) -> Field:
    if grid.ndim != dist.ndim:
        raise ValueError(f"grid has {grid.ndim} axes, distribution has {dist.ndim}")
    return Field(grid, dist(*grid.mesh()))


def normalize_to_count(dist, P: float, grid: PhaseGrid):
    """Rescale so the sampled integral over ``grid`` equals ``P``."""
    if not P > 0:
        raise ValueError(f"target count must be positive, got {P}")
    mass = integrate(sample(dist, grid))
    if mass <= 0:
        raise ValueError("cannot normalize a distribution with zero mass on this grid")
    return dist.scaled(P / mass)
