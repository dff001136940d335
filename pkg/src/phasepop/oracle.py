"""Brute-force check of the phase-space solutions.

A deterministic ensemble of discrete populations is carved out of ``u0`` by
cell-mass quotas, every member's ODE is integrated with classical fixed-step
RK4, and the resulting size histogram is compared with the predicted
marginal ``rho(n, t)`` in relative L1.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .grid import Field, PhaseGrid, cumulative_n, interpolate

MODELS = ("exponential", "logistic", "competition", "random_migration", "biased_migration", "self_interaction")


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Discrete populations; ``points[:, 0]`` are sizes, other columns parameters.

    Each member stands for ``weight`` populations of the continuum
    distribution.  ``resource`` carries ``c`` for the competition model.
    """

    points: np.ndarray = field(repr=False)
    names: tuple[str, ...]
    weight: float
    t: float = 0.0
    resource: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != len(self.names):
            raise ValueError(f"points must have shape (M, {len(self.names)}), got {pts.shape}")
        if len(pts) < 1:
            raise ValueError("an ensemble needs at least one member")
        if not self.weight > 0:
            raise ValueError("member weight must be positive")
        if np.any(pts[:, 0] < 0):
            raise ValueError("population sizes must be nonnegative")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> np.ndarray:
        return self.points[:, 0]

    def param(self, name: str) -> np.ndarray:
        return self.points[:, self.names.index(name)]

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    densities: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def masses(self) -> np.ndarray:
        return self.densities * self.widths


def _quota(expected: np.ndarray, total: int) -> np.ndarray:
    """Integer member counts by rounding the running total of ``expected``.

    Each cell gets the floor or the ceiling of its expected count and the
    rounding remainder is carried to the next cell, so sparse tails are not
    systematically emptied and every run of consecutive cells is within one
    member of its expected total.
    """
    running = np.cumsum(expected) * (total / expected.sum())
    marks = np.floor(running + 0.5).astype(np.int64)
    return np.diff(marks, prepend=0)


def sample_ensemble(u0, grid: PhaseGrid, P: int) -> Ensemble:
    """Place ``P`` members at cell centroids in proportion to the cell masses of ``u0``.

    Cells are visited with the last axis fastest, so the carried remainder
    stays within one ``n`` column and the size histogram inherits the
    one-member accuracy.
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    mids = [0.5 * (a.nodes[1:] + a.nodes[:-1]) for a in grid.axes]
    vol = float(np.prod([a.spacing for a in grid.axes]))
    centers = np.meshgrid(*mids, indexing="ij")
    cell_mass = np.asarray(u0(*centers)).ravel() * vol
    total = cell_mass.sum()
    if total <= 0:
        raise ValueError("cannot sample an ensemble from a zero-mass distribution")
    counts = _quota(P * cell_mass / total, P)
    pts = np.stack([c.ravel() for c in centers], axis=1)
    pts = np.repeat(pts, counts, axis=0)
    return Ensemble(pts, grid.names, float(total) / len(pts))


def _rk4(rhs, y, t, t_end, dt):
    steps = int(round((t_end - t) / dt))
    if steps < 0 or abs(t + steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"integration span {t}..{t_end} is not a whole number of steps of {dt}")
    t0 = t
    for i in range(steps):
        t = t0 + i * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"non-finite ensemble state at t={t + dt}")
    return y


def _rhs(model: str, ens: Ensemble, params: dict):
    """Right-hand side acting on the member sizes (plus ``c`` for competition, stored last)."""
    if model == "exponential":
        alpha = ens.param("alpha")
        return lambda t, n: alpha * n
    if model == "logistic":
        gamma = ens.param("gamma")
        k = ens.param("k") if "k" in ens.names else params["k"]
        return lambda t, n: gamma * n * (k - n)
    if model == "competition":
        beta = ens.param("beta")
        g, w = params["gamma"], ens.weight

        def rhs(t, y):
            n, c = y[:-1], y[-1]
            dc = -g * w * n.sum() if c > 0 else 0.0
            return np.append(beta * n * max(c, 0.0), dc)
        return rhs
    if model == "random_migration":
        beta = params["beta"]
        nbar = params["nbar"]
        return lambda t, n: beta * (nbar - n)
    if model == "biased_migration":
        alpha = ens.param("alpha")
        beta = params["beta"]
        sum_alpha = alpha.sum()
        return lambda t, n: (alpha - beta) * n + alpha * beta * n.sum() / sum_alpha
    if model == "self_interaction":
        alpha = ens.param("alpha")
        delta, density = params["delta"], params["density"]
        return lambda t, n: alpha * n * delta * density(n, alpha, t)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def integrate_ensemble(model: str, ens: Ensemble, t_end: float, dt: float, **params) -> Ensemble:
    """Advance every member from ``ens.t`` to ``t_end`` with fixed-step RK4.

    Model parameters by ``model``: logistic ``k`` (unless a k column exists),
    competition ``gamma`` and ``c0`` (used when the ensemble carries no
    resource yet), random migration ``beta`` (``nbar`` defaults to the
    ensemble mean, which balances migration exactly), biased migration
    ``beta``, self interaction ``delta`` and ``density(n, alpha, t)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if model == "random_migration" and "nbar" not in params:
        params["nbar"] = float(ens.n.mean())
    rhs = _rhs(model, ens, params)
    if model == "competition":
        c = ens.resource if ens.resource is not None else params["c0"]
        y = _rk4(rhs, np.append(ens.n, c), ens.t, t_end, dt)
        # an RK4 step can overshoot the floor in the step where the resource runs out
        n, resource = y[:-1], max(float(y[-1]), 0.0)
    else:
        n, resource = _rk4(rhs, ens.n.copy(), ens.t, t_end, dt), ens.resource
    if np.any(n < 0):
        raise FloatingPointError("ensemble integration produced negative sizes")
    pts = ens.points.copy()
    pts[:, 0] = n
    return replace(ens, points=pts, t=float(t_end), resource=resource)


def histogram(ens: Ensemble, bin_edges) -> Histogram:
    """Population density per unit size; out-of-range members get overflow bins."""
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be a strictly increasing sequence of length >= 2")
    n = ens.n
    if n.min() < edges[0]:
        edges = np.concatenate([[n.min()], edges])
    if n.max() >= edges[-1]:
        edges = np.concatenate([edges, [np.nextafter(n.max(), np.inf)]])
    counts, _ = np.histogram(n, bins=edges)
    return Histogram(edges, counts * ens.weight / np.diff(edges))


def _cumulative(rho: Field, x: np.ndarray) -> np.ndarray:
    return cumulative_n(rho.values, rho.grid.n_axis, x)


def l1_distance(rho_pred: Field, hist: Histogram) -> float:
    """Relative L1 mismatch between a predicted marginal and a histogram, per bin."""
    if rho_pred.grid.ndim != 1:
        raise ValueError("rho_pred must be a 1D marginal over n")
    total = float(_cumulative(rho_pred, np.array([rho_pred.grid.n_axis.hi]))[0])
    if total <= 0:
        raise ValueError("predicted marginal has zero mass")
    pred = np.diff(_cumulative(rho_pred, hist.bin_edges))
    # mass predicted outside the histogram range is unmatched
    outside = total - pred.sum()
    return float((np.abs(pred - hist.masses).sum() + abs(outside)) / total)


def default_edges(grid: PhaseGrid, bins: int) -> np.ndarray:
    ax = grid.n_axis
    return np.linspace(ax.lo, ax.hi, bins + 1)


def density_table(times, fields) -> Callable:
    """``u(n, alpha, t)`` from snapshots: bilinear in phase space, linear in time."""
    times = np.asarray(times, dtype=float)

    def density(n, alpha, t):
        j = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        r = (t - times[j]) / (times[j + 1] - times[j])
        return (1 - r) * interpolate(fields[j], n, alpha) + r * interpolate(fields[j + 1], n, alpha)

    return density
