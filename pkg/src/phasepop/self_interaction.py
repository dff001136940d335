"""Growth rates proportional to the local phase-space density.

Each population grows as ``dn/dt = alpha n u(n, alpha, t) delta``, where
``delta`` is the phase volume of the midpoint window.  In the smooth regime
the distribution satisfies the implicit relation

    u = u0(m, alpha) / (alpha delta t u0(m, alpha) + 1),   m = n (alpha delta t u - 1)**2,

which is solved node by node with plain fixed-point (Jacobi) sweeps.  Once
characteristics cross, the sweeps stop contracting; that failure is reported
as :class:`NonConvergence` rather than hidden.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .grid import Field, PhaseGrid, cumulative_n, integrate, interpolate, slice_at, sup_norm_diff
from .initial import sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelfInteractionConfig:
    delta: float = 0.1
    epsilon: float = 1e-4
    max_iters: int = 10_000
    divergence_window: int = 5
    # 1.0 is the undamped iteration; smaller values blend in the previous iterate
    relaxation: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.divergence_window < 1:
            raise ValueError("divergence_window must be >= 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass(frozen=True)
class FixedPointReport:
    t: float
    converged: bool
    iterations: int
    final_mismatch: float
    residual: float
    mismatches: tuple[float, ...] = field(default=(), repr=False)


class NonConvergence(RuntimeError):
    """Fixed-point sweeps stalled or diverged; carries the best iterate."""

    def __init__(self, report: FixedPointReport, best: Field):
        super().__init__(f"fixed point did not converge at t={report.t:g} after {report.iterations} "
                         f"iterations (mismatch {report.final_mismatch:.3g})")
        self.report = report
        self.field = best


def fixed_point_iterate(u_k: Field, u0, t: float, config: SelfInteractionConfig) -> Field:
    """One synchronous sweep of the implicit map over every node."""
    n, alpha = u_k.grid.mesh()
    s = alpha * config.delta * t
    v = u0(n * (s * u_k.values - 1.0) ** 2, alpha)
    out = v / (s * v + 1.0)
    if config.relaxation != 1.0:
        out = (1.0 - config.relaxation) * u_k.values + config.relaxation * out
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite fixed-point iterate at t={t}")
    return Field(u_k.grid, out)


def implicit_residual(u: Field, u0, t: float, delta: float) -> float:
    """Sup-norm defect of ``u = (1 - s u) u0(n (1 - s u)^2, alpha)``, ``s = alpha delta t``."""
    n, alpha = u.grid.mesh()
    q = 1.0 - alpha * delta * t * u.values
    return float(np.max(np.abs(u.values - q * u0(n * q**2, alpha))))


def solve_at_time(u0, grid: PhaseGrid, t: float, config: SelfInteractionConfig,
                  warm_start: Field | None = None) -> tuple[Field, FixedPointReport]:
    """Iterate to tolerance at time ``t``.

    Raises :class:`NonConvergence` when the mismatch has grown for
    ``divergence_window`` consecutive sweeps or ``max_iters`` is hit.
    """
    if grid.names != ("n", "alpha"):
        raise ValueError(f"self-interaction needs axes ('n', 'alpha'), grid has {grid.names}")
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if warm_start is not None and warm_start.grid != grid:
        raise ValueError("warm start lives on a different grid")
    u = warm_start if warm_start is not None else sample(u0, grid)
    best, best_eps = u, np.inf
    mismatches = []
    rising = 0
    while True:
        nxt = fixed_point_iterate(u, u0, t, config)
        eps = sup_norm_diff(nxt, u)
        if mismatches and eps > mismatches[-1]:
            rising += 1
            logger.debug("t=%g: mismatch rose to %.3g at iteration %d", t, eps, len(mismatches) + 1)
        else:
            rising = 0
        mismatches.append(eps)
        u = nxt
        if eps < best_eps:
            best, best_eps = u, eps
        if eps <= config.epsilon:
            if any(b > a for a, b in zip(mismatches[1:], mismatches[2:])):
                logger.info("t=%g: mismatch was not monotone after the first sweep", t)
            report = FixedPointReport(t, True, len(mismatches), eps,
                                      implicit_residual(u, u0, t, config.delta), tuple(mismatches))
            return u, report
        if rising >= config.divergence_window or len(mismatches) >= config.max_iters:
            report = FixedPointReport(t, False, len(mismatches), eps,
                                      implicit_residual(best, u0, t, config.delta), tuple(mismatches))
            raise NonConvergence(report, best)


def time_sweep(u0, grid: PhaseGrid, times, config: SelfInteractionConfig) -> list[tuple[Field, FixedPointReport]]:
    """Solve at each time, warm-starting from the previous solution.

    Stops at the first failure; the failing time appears last with its best
    iterate and a report whose ``converged`` flag is false.
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be nonnegative and strictly increasing")
    out = []
    warm = None
    for t in times:
        try:
            u, report = solve_at_time(u0, grid, t, config, warm_start=warm)
        except NonConvergence as exc:
            logger.warning("%s", exc)
            out.append((exc.field, exc.report))
            break
        out.append((u, report))
        warm = u
    return out


def trace_characteristic(u: Field, n0: float, alpha: float, t: float, delta: float) -> float:
    """Position at time ``t`` of the field characteristic that started at ``n0``.

    This is a characteristic of the continuity equation, which moves at
    ``2 alpha delta n u``, twice the speed of an individual population.
    Along every characteristic ``sqrt(n) (1 - alpha delta t u)`` keeps its
    initial value ``sqrt(n0)``; the root is bracketed on the grid nodes and
    refined against the bilinearly interpolated field.
    """
    def g(n):
        return np.sqrt(n) * (1.0 - alpha * delta * t * interpolate(u, n, alpha)) - np.sqrt(n0)

    nodes = u.grid.n_axis.nodes
    vals = g(nodes)
    sign = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if vals[0] == 0:
        return float(nodes[0])
    if len(sign) == 0:
        raise ValueError(f"characteristic from n0={n0} leaves the grid by t={t}")
    i = sign[0]
    return brentq(lambda x: float(g(x)), nodes[i], nodes[i + 1], xtol=1e-13)


def trace_member(u: Field, u_start: Field, n0: float, alpha: float) -> float:
    """Current size of the population that started at ``n0``, read off a converged field.

    Populations never overtake each other and never change ``alpha``, so the
    number of populations below a given member on its ``alpha`` line is the
    same in ``u_start`` and ``u``.
    """
    ax = u.grid.n_axis
    below = float(cumulative_n(slice_at(u_start, alpha), u_start.grid.n_axis, n0))
    line = slice_at(u, alpha)
    total = float(cumulative_n(line, ax, ax.hi))
    if not 0 < below < total:
        raise ValueError(f"member at n0={n0} has no interior quantile on alpha={alpha}")
    return brentq(lambda x: float(cumulative_n(line, ax, x)) - below, ax.lo, ax.hi, xtol=1e-13)


def mass_drift(fields) -> float:
    """Largest relative deviation of the integral from the first field's."""
    masses = np.array([integrate(f) for f in fields])
    return float(np.max(np.abs(masses - masses[0])) / masses[0])
