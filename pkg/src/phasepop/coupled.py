"""Time stepping for the weakly nonlinear models.

Resource competition
    ``dc/dt = -gamma N``, ``dn_i/dt = beta_i n_i c``.  The distribution is the
    exponential-growth solution evaluated at the effective time
    ``xi = int c dt``; ``xi`` and ``c`` are advanced with explicit steps and
    ``N`` is re-integrated from the field after each step.

Biased migration
    ``dn_i/dt = (alpha_i - beta) n_i + alpha_i beta N / A``.  ``A`` (the
    alpha moment) is invariant, ``R = N / A`` is re-integrated each step and
    ``xi(alpha, t) = int R exp(-(alpha - beta) t) dt`` is kept per alpha node.

Both steppers are first order by default; ``predictor_corrector=True`` swaps
in a Heun step (second order).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .closed_form import exp_u
from .grid import Field, GridError, PhaseGrid, first_moment_n, first_moment_param, warn_if_truncated
from .initial import sample

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Non-finite state or an invalid step request."""


def _steps_to(t: float, dt: float) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a multiple of dt = {dt}")
    return k


# --------------------------------------------------------------------------
# resource competition


@dataclass(frozen=True)
class CompetitionParams:
    c0: float
    gamma: float
    dt: float = 1e-4
    predictor_corrector: bool = False

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if self.gamma < 0:
            raise ValueError(f"consumption rate gamma must be >= 0, got {self.gamma}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class CompetitionState:
    k: int
    t: float
    xi: float
    c: float
    N: float
    history: tuple = field(default=(), repr=False)

    @property
    def exhausted(self) -> bool:
        return self.c < 0


def competition_field(u0, grid: PhaseGrid, xi: float) -> Field:
    """Distribution at effective time ``xi``: the exponential solution with ``alpha := beta``."""
    n, beta = grid.mesh()
    return Field(grid, exp_u(u0, n, beta, xi))


def competition_initial(u0, grid: PhaseGrid, params: CompetitionParams) -> tuple[CompetitionState, Field]:
    if grid.names != ("n", "beta"):
        raise GridError(f"competition needs axes ('n', 'beta'), grid has {grid.names}")
    f = sample(u0, grid)
    N = first_moment_n(f)
    return CompetitionState(0, 0.0, 0.0, params.c0, N, ((0.0, params.c0, N),)), f


def competition_step(state: CompetitionState, u0, grid: PhaseGrid, params: CompetitionParams,
                     dt: float | None = None) -> tuple[CompetitionState, Field]:
    dt = params.dt if dt is None else dt
    if state.c < 0:
        raise SolverError(f"resource exhausted (c = {state.c:g}); no further steps")
    if params.predictor_corrector:
        xi_p = state.xi + state.c * dt
        c_p = state.c - params.gamma * state.N * dt
        N_p = first_moment_n(competition_field(u0, grid, xi_p))
        xi = state.xi + 0.5 * (state.c + c_p) * dt
        c_rate = 0.5 * (state.N + N_p)
    else:
        xi = state.xi + state.c * dt
        c_rate = None
    f = competition_field(u0, grid, xi)
    N = first_moment_n(f)
    c = state.c - params.gamma * (N if c_rate is None else c_rate) * dt
    k = state.k + 1
    t = k * dt
    if not np.isfinite([xi, c, N]).all():
        raise SolverError(f"non-finite competition state at step {k}: xi={xi}, c={c}, N={N}")
    return CompetitionState(k, t, xi, c, N, state.history + ((t, c, N),)), f


@dataclass
class Trajectory:
    """Snapshots keyed by requested time plus the scalar time series."""

    times: list[float]
    snapshots: list[Field]
    series: np.ndarray  # rows (t, c, N) or (t, R, N)
    columns: tuple[str, ...]
    final_state: object = None


def competition_run(u0, grid: PhaseGrid, params: CompetitionParams, times, every: int = 1) -> Trajectory:
    """Run the competition stepper until the last requested time or exhaustion.

    The loop stops at the first step whose resource goes negative.  Past that
    point the resource is held at its floor of zero, so ``xi`` and the
    distribution stay frozen; later snapshots repeat the final field.
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times must be nonnegative and strictly increasing")
    targets = [_steps_to(t, params.dt) for t in times]
    state, f = competition_initial(u0, grid, params)
    snaps = {}
    kmax = max(targets, default=0)
    if 0 in targets:
        snaps[0] = f
    while state.k < kmax and not state.exhausted:
        state, f = competition_step(state, u0, grid, params)
        if state.k in targets:
            snaps[state.k] = f
    if state.exhausted:
        logger.info("resource exhausted at t = %.6g (xi = %.6g)", state.t, state.xi)
    for kt in targets:
        snaps.setdefault(kt, f)
    warn_if_truncated(f, "competition")
    series = np.array(state.history)
    keep = np.zeros(len(series), dtype=bool)
    keep[::every] = True
    keep[-1] = True
    return Trajectory(times, [snaps[kt] for kt in targets], series[keep], ("t", "c", "N"), state)


# --------------------------------------------------------------------------
# biased migration


@dataclass(frozen=True)
class BiasedParams:
    beta: float
    dt: float = 1e-4
    predictor_corrector: bool = False

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True, eq=False)
class BiasedState:
    k: int
    t: float
    xi_of_alpha: np.ndarray
    R: float
    A: float
    beta: float
    N: float
    history: tuple = field(default=(), repr=False)


def biased_u(u0, n, alpha, t, xi_value, beta):
    """``exp(-(alpha-beta) t) * u0(n exp(-(alpha-beta) t) - alpha beta xi, alpha)``."""
    n = np.asarray(n, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    g = np.exp(-(alpha - beta) * t)
    out = g * u0(n * g - alpha * beta * np.asarray(xi_value, dtype=float), alpha)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def biased_field(u0, grid: PhaseGrid, t: float, xi_of_alpha: np.ndarray, beta: float) -> Field:
    n, alpha = grid.mesh()
    return Field(grid, biased_u(u0, n, alpha, t, xi_of_alpha[np.newaxis, :], beta))


def biased_initial(u0, grid: PhaseGrid, params: BiasedParams) -> tuple[BiasedState, Field]:
    if grid.names != ("n", "alpha"):
        raise GridError(f"biased migration needs axes ('n', 'alpha'), grid has {grid.names}")
    f = sample(u0, grid)
    A = first_moment_param(f, "alpha")
    if not A > 0:
        raise ValueError(f"alpha moment A must be positive, got {A}")
    N = first_moment_n(f)
    xi = np.zeros(grid.axis("alpha").count)
    xi.flags.writeable = False
    return BiasedState(0, 0.0, xi, N / A, A, params.beta, N, ((0.0, N / A, N),)), f


def biased_step(state: BiasedState, u0, grid: PhaseGrid, params: BiasedParams,
                dt: float | None = None) -> tuple[BiasedState, Field]:
    dt = params.dt if dt is None else dt
    alpha = grid.axis("alpha").nodes
    beta = state.beta
    k = state.k + 1
    t = k * dt
    rate = state.R * np.exp(-(alpha - beta) * state.t)
    if params.predictor_corrector:
        xi_p = state.xi_of_alpha + rate * dt
        R_p = first_moment_n(biased_field(u0, grid, t, xi_p, beta)) / state.A
        xi = state.xi_of_alpha + 0.5 * (rate + R_p * np.exp(-(alpha - beta) * t)) * dt
    else:
        xi = state.xi_of_alpha + rate * dt
    f = biased_field(u0, grid, t, xi, beta)
    N = first_moment_n(f)
    R = N / state.A
    if not (np.isfinite(R) and np.all(np.isfinite(xi))):
        raise SolverError(f"non-finite biased-migration state at step {k}")
    xi.flags.writeable = False
    return BiasedState(k, t, xi, R, state.A, beta, N, state.history + ((t, R, N),)), f


def biased_run(u0, grid: PhaseGrid, params: BiasedParams, times, every: int = 1,
               on_step=None) -> Trajectory:
    """Step to ``max(times)``; ``on_step(state, field)`` is called after every step."""
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times must be nonnegative and strictly increasing")
    targets = [_steps_to(t, params.dt) for t in times]
    state, f = biased_initial(u0, grid, params)
    snaps = {0: f} if 0 in targets else {}
    while state.k < max(targets, default=0):
        state, f = biased_step(state, u0, grid, params)
        if on_step is not None:
            on_step(state, f)
        if state.k in targets:
            snaps[state.k] = f
    warn_if_truncated(f, "biased migration")
    series = np.array(state.history)
    keep = np.zeros(len(series), dtype=bool)
    keep[::every] = True
    keep[-1] = True
    return Trajectory(times, [snaps[kt] for kt in targets], series[keep], ("t", "R", "N"), state)


def xi_at(state: BiasedState, grid: PhaseGrid, alpha):
    """``xi`` at arbitrary alpha by linear interpolation between axis nodes."""
    return np.interp(alpha, grid.axis("alpha").nodes, state.xi_of_alpha)


def growth_condition(alpha_i, n_i, sum_alpha, sum_n, beta):
    """True where a population currently grows under biased migration."""
    if not np.all(np.asarray(beta) > 0):
        raise ValueError("growth condition requires beta > 0")
    if not (np.all(np.asarray(sum_alpha) > 0) and np.all(np.asarray(sum_n) > 0)):
        raise ValueError("growth condition requires positive sums")
    alpha_i = np.asarray(alpha_i, dtype=float)
    n_i = np.asarray(n_i, dtype=float)
    out = alpha_i / sum_alpha > (1.0 - alpha_i / beta) * n_i / sum_n
    return out if out.ndim else bool(out)
