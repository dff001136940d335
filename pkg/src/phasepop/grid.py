"""Uniform rectangular phase-space grids, sampled fields and their quadrature.

Every solver in the package samples a distribution ``u`` on a ``PhaseGrid``
whose first axis is the population size ``n``.  Integrals use the composite
trapezoid rule, applied axis by axis, so that the full integral and the
integral of the parameter marginal agree to round-off.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

AXIS_NAMES = ("n", "alpha", "beta", "gamma", "k")

# Boundary samples above this fraction of the field maximum mean mass is
# leaving the truncated window.
BOUNDARY_WARN_FRACTION = 1e-6


class GridError(ValueError):
    """Raised for malformed axes, grids or mismatched fields."""


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise GridError(f"unknown axis name {self.name!r}; expected one of {AXIS_NAMES}")
        if int(self.count) != self.count or self.count < 2:
            raise GridError(f"axis {self.name}: count must be an integer >= 2, got {self.count}")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise GridError(f"axis {self.name}: bounds must be finite")
        if self.lo < 0:
            raise GridError(f"axis {self.name}: lo must be >= 0, got {self.lo}")
        if not self.hi > self.lo:
            raise GridError(f"axis {self.name}: hi must exceed lo ({self.lo} >= {self.hi})")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "count", int(self.count))

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights for this axis."""
        w = np.full(self.count, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def refined(self, factor: int = 2) -> "Axis":
        """Same interval with ``factor`` times as many cells."""
        return Axis(self.name, self.lo, self.hi, (self.count - 1) * factor + 1)


@dataclass(frozen=True)
class PhaseGrid:
    axes: tuple[Axis, ...]

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        if not 1 <= len(axes) <= 3:
            raise GridError(f"a phase grid has 1 to 3 axes, got {len(axes)}")
        names = [a.name for a in axes]
        if names[0] != "n":
            raise GridError(f"first axis must be n, got {names[0]!r}")
        if len(set(names)) != len(names):
            raise GridError(f"duplicate axis names in {names}")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def axis(self, name: str) -> Axis:
        return self.axes[self.index(name)]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise GridError(f"grid has no axis {name!r} (axes: {self.names})") from None

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Node coordinates broadcast to the grid shape (``ij`` indexing)."""
        return tuple(np.meshgrid(*(a.nodes for a in self.axes), indexing="ij"))

    def refined(self, factor: int = 2) -> "PhaseGrid":
        return PhaseGrid(tuple(a.refined(factor) for a in self.axes))

    @property
    def n_axis(self) -> Axis:
        return self.axes[0]


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a count density on every node of ``grid``.

    ``values`` has shape ``grid.shape``; index 0 runs along ``n``.
    """

    grid: PhaseGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("field contains non-finite samples")
        if np.any(values < 0):
            raise GridError(f"field has negative samples (min {values.min():g})")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @cached_property
    def max(self) -> float:
        return float(self.values.max())


def _contract(values: np.ndarray, axes: tuple[Axis, ...]) -> np.ndarray:
    """Trapezoid-integrate the trailing ``len(axes)`` dimensions, last first."""
    out = values
    for ax in reversed(axes):
        out = out @ ax.weights
    return out


def integrate(f: Field) -> float:
    """Total population count represented by ``f``."""
    return float(_contract(f.values, f.grid.axes))


def marginal_over_params(f: Field) -> Field:
    """Integrate out every axis except ``n``; returns the size marginal."""
    if f.grid.ndim < 2:
        raise GridError("marginal_over_params needs a field with at least one parameter axis")
    rho = _contract(f.values, f.grid.axes[1:])
    # round-off can leave -0.0 or tiny negatives from the matmul
    return Field(PhaseGrid((f.grid.n_axis,)), np.maximum(rho, 0.0))


def first_moment_n(f: Field) -> float:
    """Total size ``N``: integral of ``n * u`` over the whole grid."""
    n = f.grid.n_axis.nodes.reshape((-1,) + (1,) * (f.grid.ndim - 1))
    return float(_contract(n * f.values, f.grid.axes))


def first_moment_param(f: Field, axis: str) -> float:
    """Integral of ``coordinate(axis) * u`` over the whole grid."""
    i = f.grid.index(axis)
    shape = [1] * f.grid.ndim
    shape[i] = -1
    x = f.grid.axes[i].nodes.reshape(shape)
    return float(_contract(x * f.values, f.grid.axes))


def sup_norm_diff(a: Field, b: Field) -> float:
    if a.grid != b.grid:
        raise GridError("sup_norm_diff on fields with different grids")
    return float(np.max(np.abs(a.values - b.values)))


def boundary_fraction(f: Field) -> float:
    """Largest boundary sample relative to the field maximum (0 for a zero field)."""
    if f.max == 0:
        return 0.0
    v = f.values
    edge = 0.0
    for i in range(v.ndim):
        edge = max(edge, float(np.take(v, 0, axis=i).max()), float(np.take(v, -1, axis=i).max()))
    return edge / f.max


def warn_if_truncated(f: Field, label: str = "") -> bool:
    frac = boundary_fraction(f)
    if frac > BOUNDARY_WARN_FRACTION:
        logger.warning("%sboundary samples reach %.3g of the field maximum; mass may be leaving the grid",
                       f"{label}: " if label else "", frac)
        return True
    return False


def weighted_correlation(f: Field, x_axis: str = "n", y_axis: str = "alpha") -> float:
    """Pearson correlation of two coordinates under the weight ``u``."""
    mesh = f.grid.mesh()
    x = mesh[f.grid.index(x_axis)]
    y = mesh[f.grid.index(y_axis)]
    w = f.values
    mass = _contract(w, f.grid.axes)
    if mass <= 0:
        raise GridError("correlation of a zero field is undefined")

    def mean(a):
        return _contract(a * w, f.grid.axes) / mass

    mx, my = mean(x), mean(y)
    cov = mean((x - mx) * (y - my))
    return float(cov / np.sqrt(mean((x - mx) ** 2) * mean((y - my) ** 2)))


def interpolate(f: Field, *coords) -> np.ndarray:
    """Multilinear interpolation of ``f`` at scattered points; zero outside the grid."""
    if len(coords) != f.grid.ndim:
        raise GridError(f"expected {f.grid.ndim} coordinate arrays, got {len(coords)}")
    coords = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in coords))
    shape = coords[0].shape
    inside = np.ones(shape, dtype=bool)
    lower, frac = [], []
    for x, ax in zip(coords, f.grid.axes):
        s = (x - ax.lo) / ax.spacing
        inside &= (s >= 0) & (s <= ax.count - 1)
        i = np.clip(np.floor(s), 0, ax.count - 2).astype(np.intp)
        lower.append(i)
        frac.append(np.clip(s - i, 0.0, 1.0))
    out = np.zeros(shape)
    for corner in np.ndindex(*(2,) * f.grid.ndim):
        w = np.ones(shape)
        idx = []
        for bit, i, r in zip(corner, lower, frac):
            w = w * (r if bit else 1.0 - r)
            idx.append(i + bit)
        out += w * f.values[tuple(idx)]
    return np.where(inside, out, 0.0)


def cumulative_n(values: np.ndarray, axis: Axis, x) -> np.ndarray:
    """Integral from ``axis.lo`` to ``x`` of the piecewise-linear interpolant of ``values``.

    ``values`` holds one number per node of ``axis``; ``x`` is clipped to the axis.
    """
    v = np.asarray(values, dtype=float)
    h = axis.spacing
    at_nodes = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))])
    s = np.clip((np.asarray(x, dtype=float) - axis.lo) / h, 0.0, axis.count - 1)
    i = np.minimum(np.floor(s).astype(np.intp), axis.count - 2)
    r = s - i
    return at_nodes[i] + h * (v[i] * r + 0.5 * (v[i + 1] - v[i]) * r**2)


def slice_at(f: Field, alpha: float) -> np.ndarray:
    """Values along ``n`` of a 2D field, linearly interpolated at a second-axis coordinate."""
    if f.grid.ndim != 2:
        raise GridError("slice_at needs a 2D field")
    ax = f.grid.axes[1]
    s = (alpha - ax.lo) / ax.spacing
    if not 0 <= s <= ax.count - 1:
        return np.zeros(f.grid.shape[0])
    j = min(int(np.floor(s)), ax.count - 2)
    r = s - j
    return (1 - r) * f.values[:, j] + r * f.values[:, j + 1]
