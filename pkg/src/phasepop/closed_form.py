"""Exact evolution of the uncoupled models along their characteristics.

Each kernel maps a phase point back to where its characteristic started and
scales ``u0`` there by the Jacobian of the flow:

* exponential growth ``dn/dt = alpha n``;
* logistic growth ``dn/dt = gamma n (k - n)`` on the strip ``0 <= n <= k``;
* randomized migration ``dn/dt = beta (nbar - n)``.

Kernels accept numpy arrays and broadcast.  ``u0`` is any callable taking
one coordinate array per axis (see :mod:`phasepop.initial`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, GridError, PhaseGrid, first_moment_n, integrate
from .initial import sample


def _ret(x):
    x = np.asarray(x, dtype=float)
    return x if x.ndim else float(x)


def exp_u(u0, n, alpha, t):
    """``exp(-alpha t) * u0(n exp(-alpha t), alpha)``."""
    n, alpha = np.asarray(n, dtype=float), np.asarray(alpha, dtype=float)
    g = np.exp(-alpha * t)
    return _ret(g * u0(n * g, alpha))


def logistic_preimage(n, gamma, k, t):
    """Initial size of the logistic characteristic that sits at ``n`` at time ``t``."""
    n = np.asarray(n, dtype=float)
    g = np.exp(-np.asarray(gamma, dtype=float) * k * t)
    return k * n * g / (n * g + k - n)


def logistic_u(u0, n, gamma, k, t):
    """Logistic solution on the strip ``0 <= n <= k``.

    ``u0`` takes ``(n, gamma)`` when it is two-dimensional (fixed carrying
    capacity) and ``(n, gamma, k)`` otherwise.  At ``n == k`` the value is
    ``u0(k, ...)`` for all times.
    """
    n = np.asarray(n, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(n > k):
        raise ValueError("logistic solution is only defined for n <= k")
    if np.any(k <= 0):
        raise ValueError("carrying capacity k must be positive")
    extra = (k,) if u0.ndim == 3 else ()
    if t == 0:
        return _ret(u0(n, gamma, *extra))
    g = np.exp(-gamma * k * t)
    at_k = n == k
    # keep the strip formula finite on the boundary; the branch is replaced below
    denom = np.where(at_k, 1.0, n * g + k - n)
    jac = k**2 * g / denom**2
    arg = np.where(at_k, k, k * n * g / denom)
    vals = u0(arg, gamma, *extra)
    return _ret(np.where(at_k, vals, jac * vals))


def random_migration_u(u0, n, t, model: "RandomMigrationModel"):
    """Three-branch solution of the randomized-migration continuity equation."""
    n = np.asarray(n, dtype=float)
    if t == 0:
        return _ret(u0(n))
    nbar, growth = model.nbar, np.exp(model.beta * t)
    arg = np.where(n < nbar, nbar - (nbar - n) * growth,
                   np.where(n > nbar, nbar + (n - nbar) * growth, nbar))
    return _ret(growth * u0(arg))


def random_migration_support(lo: float, hi: float, t: float, model: "RandomMigrationModel"):
    """Image at time ``t`` of an initial support ``[lo, hi]`` under the migration flow."""
    shrink = np.exp(-model.beta * t)
    return (model.nbar - (model.nbar - lo) * shrink, model.nbar + (hi - model.nbar) * shrink)


def compute_nbar(u0, grid: PhaseGrid) -> float:
    """Mean population size ``N / P`` of the sampled initial distribution."""
    f = sample(u0, grid)
    mass = integrate(f)
    if mass <= 0:
        raise ValueError("nbar is undefined for a zero-mass distribution")
    return first_moment_n(f) / mass


@dataclass(frozen=True)
class ExponentialModel:
    axes = ("n", "alpha")

    def field(self, u0, grid: PhaseGrid, t: float) -> np.ndarray:
        n, alpha = grid.mesh()
        return exp_u(u0, n, alpha, t)


@dataclass(frozen=True)
class LogisticModel:
    """``k`` set: fixed-capacity mode on an ``(n, gamma)`` grid; ``None``: full ``(n, gamma, k)`` grid."""

    k: float | None = None

    def __post_init__(self):
        if self.k is not None and not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")

    @property
    def axes(self):
        return ("n", "gamma") if self.k is not None else ("n", "gamma", "k")

    def field(self, u0, grid: PhaseGrid, t: float) -> np.ndarray:
        if self.k is not None:
            if grid.n_axis.hi > self.k:
                raise GridError(f"n axis extends to {grid.n_axis.hi} beyond k = {self.k}")
            n, gamma = grid.mesh()
            return logistic_u(u0, n, gamma, self.k, t)
        n, gamma, k = grid.mesh()
        if np.any(n > k):
            raise GridError("n axis extends beyond the smallest k on the grid")
        return logistic_u(u0, n, gamma, k, t)

    def mass_fraction_above(self, u0, gamma_axis, t: float, threshold: float, samples: int = 4001) -> float:
        """Share of populations with size >= ``threshold`` at time ``t`` (fixed-k mode).

        Populations are counted at their starting point: the size band
        ``[threshold, k]`` at time ``t`` is the image of ``[n*, k]`` at time 0,
        so the count is an integral of ``u0`` alone and stays accurate long
        after the evolved peak is narrower than any grid spacing.
        """
        if self.k is None:
            raise ValueError("mass_fraction_above is implemented for fixed-k mode")
        k = self.k
        gammas = gamma_axis.nodes
        wg = gamma_axis.weights
        s = np.linspace(0.0, 1.0, samples)
        ws = np.full(samples, 1.0 / (samples - 1))
        ws[0] = ws[-1] = 0.5 / (samples - 1)
        start = logistic_preimage(threshold, gammas, k, t)
        total = above = 0.0
        for g, w, lo in zip(gammas, wg, start):
            full = s * k
            part = lo + s * (k - lo)
            total += w * k * float(ws @ u0(full, np.full_like(full, g)))
            above += w * (k - lo) * float(ws @ u0(part, np.full_like(part, g)))
        if total <= 0:
            raise ValueError("zero-mass distribution")
        return above / total


@dataclass(frozen=True)
class RandomMigrationModel:
    beta: float
    nbar: float
    axes = ("n",)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.nbar > 0:
            raise ValueError(f"nbar must be positive, got {self.nbar}")

    def field(self, u0, grid: PhaseGrid, t: float) -> np.ndarray:
        (n,) = grid.mesh()
        return random_migration_u(u0, n, t, self)


def snapshot(model, u0, grid: PhaseGrid, t: float) -> Field:
    """Evaluate ``model``'s exact solution at every node of ``grid``."""
    if grid.names != tuple(model.axes):
        raise GridError(f"{type(model).__name__} needs axes {tuple(model.axes)}, grid has {grid.names}")
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return Field(grid, model.field(u0, grid, t))
