"""Implicit Euler time stepping through the resolvent.

Each step solves

    (1/dt) beta(u^n) + A_mu u^n = g^n + Div f(u^n) + (1/dt) beta(u^{n-1})

with ``g^n`` the time average of the truncated source ``g_R(., ., u^{n-1})``
over ``[t_{n-1}, t_n]``.  Levels are stored together with the per-step solver
reports; the piecewise-constant interpolant takes the value ``u^n`` on
``(t_{n-1}, t_n]``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .elliptic import EllipticProblem, SolveReport, SolverSettings, solve_resolvent
from .errors import (InvalidParameterError, NonconvergenceError, TimeRangeError,
                     TruncationError)
from .grid import Field, check_same_grid, lp_norm
from .nonlinearities import SourceSpec, g_truncate
from .operators import ModelParams, energy_J

__all__ = [
    "SchemeConfig",
    "Trajectory",
    "average_source",
    "step",
    "auto_truncation_radius",
    "run_trajectory",
    "interpolants",
]


@dataclass(frozen=True)
class SchemeConfig:
    """Time discretization settings.

    ``R`` is the source truncation radius: a positive number, ``"auto"`` or
    ``None`` (no truncation).  ``blowup_threshold = None`` means
    ``1e6 * (1 + ||u0||_{1+1/m})``.
    """

    T: float
    N: int
    R: Union[float, str, None] = "auto"
    quad_points: int = 4
    adaptive: bool = False
    blowup_threshold: Optional[float] = None
    extinction_threshold: float = 1e-10
    growth_factor: float = 1.5
    max_halvings: int = 40
    implicit_source: bool = False
    solver: SolverSettings = SolverSettings()

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidParameterError(f"need T > 0, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameterError(f"need a positive integer N, got {self.N}")
        if self.quad_points < 1:
            raise InvalidParameterError("quad_points must be >= 1")
        if self.blowup_threshold is not None and not self.blowup_threshold > 0:
            raise InvalidParameterError("blowup_threshold must be positive")
        if not self.extinction_threshold > 0:
            raise InvalidParameterError("extinction_threshold must be positive")
        if not self.growth_factor > 1:
            raise InvalidParameterError("growth_factor must exceed 1")
        if isinstance(self.R, str):
            if self.R != "auto":
                raise InvalidParameterError(f"R must be a number, 'auto' or None, got {self.R!r}")
        elif self.R is not None and not self.R > 0:
            raise InvalidParameterError(f"need R > 0, got {self.R}")

    @property
    def dt(self) -> float:
        return self.T / self.N


@dataclass
class Trajectory:
    times: np.ndarray
    levels: list
    beta_levels: list
    reports: list
    dt_history: np.ndarray
    status: str = "completed"
    event_time: Optional[float] = None
    failed_step: Optional[int] = None
    message: str = ""
    R: Optional[float] = None
    max_linf: float = 0.0
    truncation_consistent: bool = True
    source_increments: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def label(self) -> str:
        if self.status in ("extinct", "blown_up"):
            return f"{self.status}({self.event_time:.6g})"
        if self.status == "failed":
            return f"failed({self.failed_step})"
        return self.status

    @property
    def final(self) -> Field:
        return self.levels[-1]

    def linf_bound_excess(self) -> np.ndarray:
        """``||beta(u^n)||_inf - ||beta(u^0)||_inf - sum_{k<=n} dt_k ||g^k||_inf``."""
        b = np.array([np.abs(bl.values).max() for bl in self.beta_levels])
        budget = b[0] + np.concatenate(([0.0], np.cumsum(self.source_increments)))
        return b - budget

    def a_priori_estimate(self, params: ModelParams) -> float:
        """``sum dt ||(u^n - u^{n-1})/dt||_2^2 + max_n J(u^n)``."""
        total = 0.0
        for k, dt in enumerate(self.dt_history, start=1):
            diff = (self.levels[k].values - self.levels[k - 1].values) / dt
            total += dt * params.grid.h * float(np.dot(diff, diff))
        return total + max(energy_J(u, params) for u in self.levels)


def average_source(source: SourceSpec, u_prev: Field, t_interval, quad_points: int = 4) -> Field:
    """Time average of ``g(., x, u_prev)`` over ``t_interval``.

    Autonomous sources are evaluated once; otherwise the composite midpoint
    rule with ``quad_points`` nodes is used.
    """
    t0, t1 = map(float, t_interval)
    if not t1 > t0:
        raise InvalidParameterError(f"degenerate time interval ({t0}, {t1})")
    x = u_prev.grid.nodes
    if source.is_zero:
        return Field.zeros(u_prev.grid)
    if source.is_autonomous:
        return u_prev.with_values(source(t0, x, u_prev.values))
    nodes = t0 + (np.arange(quad_points) + 0.5) * (t1 - t0) / quad_points
    acc = sum(source(t, x, u_prev.values) for t in nodes)
    return u_prev.with_values(acc / quad_points)


def _solve_step(u_prev, gn, dt, params, scheme):
    rhs = Field(u_prev.grid, gn.values + params.beta(u_prev.values) / dt)
    return solve_resolvent(EllipticProblem(params, dt, rhs, w0=u_prev), scheme.solver)


def step(u_prev: Field, t_n: float, dt: float, params: ModelParams, scheme: SchemeConfig):
    """Advance one implicit step from ``t_n`` to ``t_n + dt``.

    ``params.source`` is used as given (truncate it beforehand).  With
    ``scheme.implicit_source`` the source is evaluated at the new level by a
    Picard iteration instead of at ``u_prev``.

    Returns
    -------
    (Field, SolveReport)

    Raises
    ------
    NonconvergenceError, TruncationError
        The resolvent solve failed; the exception carries the last iterate.
    """
    if not dt > 0:
        raise InvalidParameterError(f"need dt > 0, got {dt}")
    check_same_grid(u_prev.grid, params.grid)
    interval = (t_n, t_n + dt)
    gn = average_source(params.source, u_prev, interval, scheme.quad_points)
    u, report = _solve_step(u_prev, gn, dt, params, scheme)
    if scheme.implicit_source and params.source.depends_on_u:
        tol = scheme.solver.fp_tol
        for _ in range(100):
            gn = average_source(params.source, u, interval, scheme.quad_points)
            u_next, report = _solve_step(u_prev, gn, dt, params, scheme)
            change = float(np.abs(u_next.values - u.values).max())
            u = u_next
            if change <= tol * (1.0 + float(np.abs(u.values).max())):
                break
        else:
            raise NonconvergenceError("implicit source iteration did not converge",
                                      iterate=u.values, residual=change)
    report.source_norm = float(np.abs(gn.values).max())
    return u, report


def auto_truncation_radius(u0: Field, params: ModelParams, T: float) -> Optional[float]:
    """Radius from the L-infinity budget, iterated twice from ``||u0||_inf + 1``."""
    src = params.source
    if src.is_zero or not src.depends_on_u:
        return None
    c_g, q_g = src.growth_constants()
    b0 = float(np.abs(params.beta(u0.values)).max())
    R = float(np.abs(u0.values).max()) + 1.0
    for _ in range(2):
        R = float(params.beta.inverse(np.array(b0 + T * c_g * (1.0 + R ** q_g))))
    return R


def _gamma(params: ModelParams) -> float:
    return 1.0 + params.beta.holder_alpha


def run_trajectory(u0: Field, params: ModelParams, scheme: SchemeConfig) -> Trajectory:
    """March from ``u0`` to ``T`` (or to extinction, blow-up or failure)."""
    check_same_grid(u0.grid, params.grid)
    if scheme.R == "auto":
        R = auto_truncation_radius(u0, params, scheme.T)
    else:
        R = scheme.R
    run_params = params if R is None or params.source.is_zero else replace(
        params, source=g_truncate(params.source, R))
    gamma = _gamma(params)
    norm0 = lp_norm(u0, gamma)
    blowup = scheme.blowup_threshold
    if blowup is None:
        blowup = 1e6 * (1.0 + norm0)
    thr = scheme.extinction_threshold
    armed = float(np.abs(u0.values).max()) >= thr

    times, levels = [0.0], [u0]
    beta_levels = [u0.with_values(params.beta(u0.values))]
    reports, dts, incr = [], [], []
    traj = Trajectory(np.zeros(1), levels, beta_levels, reports, np.zeros(0), R=R)

    t, n, dt = 0.0, 0, scheme.dt
    u = u0
    while scheme.T - t > 1e-12 * scheme.T:
        n += 1
        dt_try = min(dt, scheme.T - t)
        halvings = 0
        while True:
            err = None
            try:
                u_new, rep = step(u, t, dt_try, run_params, scheme)
            except (NonconvergenceError, TruncationError) as exc:
                err = exc
            if err is None and scheme.adaptive:
                prev, new = lp_norm(u, gamma), lp_norm(u_new, gamma)
                if prev > 0 and new > scheme.growth_factor * prev and halvings < scheme.max_halvings:
                    err = "growth"
            if err is None:
                break
            if not scheme.adaptive or halvings >= scheme.max_halvings:
                traj.status = "failed"
                traj.failed_step = n
                traj.message = str(err)
                break
            halvings += 1
            dt_try *= 0.5
        if traj.status == "failed":
            break
        dt = dt_try
        t = scheme.T if scheme.T - (t + dt_try) <= 1e-12 * scheme.T else t + dt_try
        if not scheme.adaptive:
            t = scheme.T * n / scheme.N if n < scheme.N else scheme.T
        u = u_new
        times.append(t)
        levels.append(u)
        beta_levels.append(u.with_values(params.beta(u.values)))
        reports.append(rep)
        dts.append(dt_try)
        incr.append(dt_try * rep.source_norm)
        linf = float(np.abs(u.values).max())
        if lp_norm(u, gamma) > blowup:
            traj.status, traj.event_time = "blown_up", t
            break
        if linf < thr and armed:
            traj.status, traj.event_time = "extinct", t
            break
        armed = armed or linf >= thr

    traj.times = np.array(times)
    traj.dt_history = np.array(dts)
    traj.source_increments = np.array(incr)
    traj.max_linf = max(float(np.abs(v.values).max()) for v in levels)
    if R is not None and not run_params.source.is_zero:
        traj.truncation_consistent = traj.max_linf <= R
        if not traj.truncation_consistent and scheme.R == "auto":
            warnings.warn(f"max ||u||_inf = {traj.max_linf:.6g} exceeds the automatic "
                          f"truncation radius {R:.6g}; set R explicitly", RuntimeWarning)
    return traj


def interpolants(traj: Trajectory, t: float):
    """``(u_tilde, beta_tilde, u_piecewise)`` at time ``t``.

    ``u_tilde`` and ``beta_tilde`` interpolate levels and ``beta`` levels
    linearly; ``u_piecewise`` equals ``u^n`` on ``(t_{n-1}, t_n]``.
    """
    times = traj.times
    if not (times[0] <= t <= times[-1]):
        raise TimeRangeError(f"t = {t} outside [{times[0]}, {times[-1]}]")
    n = int(np.searchsorted(times, t, side="left"))
    if n == 0 or t == times[n]:
        k = max(n, 0)
        return traj.levels[k], traj.beta_levels[k], traj.levels[k]
    theta = (t - times[n - 1]) / (times[n] - times[n - 1])
    u0, u1 = traj.levels[n - 1], traj.levels[n]
    b0, b1 = traj.beta_levels[n - 1], traj.beta_levels[n]
    u_t = u1.with_values(u0.values + theta * (u1.values - u0.values))
    b_t = b1.with_values(b0.values + theta * (b1.values - b0.values))
    return u_t, b_t, u1
