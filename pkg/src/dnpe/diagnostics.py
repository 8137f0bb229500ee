"""Measured checks of computed trajectories.

Every check returns measured quantities next to the bound it is compared
with, so a failing property is visible as a number rather than a bare flag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (IncompatibilityError, InvalidComparisonError, InvalidParameterError,
                     InvalidRegimeError)
from .grid import Field, build_grid, check_same_grid, lp_norm
from .nonlinearities import FluxSpec, SourceSpec, g_truncate, validate_regime
from .operators import (ModelParams, A_mu_values, J_values, div_flux_values, energy_E)
from .stepper import Trajectory, average_source

__all__ = [
    "CheckResult",
    "DiagnosticsReport",
    "EpsCertificate",
    "ExtinctionReport",
    "BlowupReport",
    "certify_eps_approximation",
    "check_contraction",
    "check_comparison",
    "detect_extinction",
    "detect_blowup",
    "blowup_time_scaling",
    "check_energy_dissipation",
    "sample_accretivity",
    "stationary_residual",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.bound)

    def as_dict(self):
        return {"name": self.name, "measured": float(self.measured),
                "bound": float(self.bound), "pass": self.passed}


@dataclass
class DiagnosticsReport:
    checks: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def add(self, name, measured, bound) -> CheckResult:
        res = CheckResult(name, float(measured), float(bound))
        self.checks.append(res)
        return res

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"checks": [c.as_dict() for c in self.checks],
                "extras": {k: _jsonable(v) for k, v in self.extras.items()},
                "passed": self.passed}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _l1(values, h):
    return float(h * np.sum(np.abs(values)))


def _run_source(source: SourceSpec, traj: Trajectory) -> SourceSpec:
    if traj.R is None or source.is_zero:
        return source
    return g_truncate(source, traj.R)


def _step_sources(source, traj, quad_points):
    out = []
    for k in range(1, len(traj.levels)):
        out.append(average_source(source, traj.levels[k - 1],
                                  (traj.times[k - 1], traj.times[k]), quad_points).values)
    return out


@dataclass
class EpsCertificate:
    epsilon_time: float
    epsilon_data: float
    epsilon_source: float
    step_residuals: np.ndarray

    def valid_for(self, eps: float) -> bool:
        return bool(max(self.epsilon_time, self.epsilon_data, self.epsilon_source) < eps)

    def as_dict(self):
        return {"epsilon_time": self.epsilon_time, "epsilon_data": self.epsilon_data,
                "epsilon_source": self.epsilon_source,
                "max_step_residual": float(np.max(self.step_residuals, initial=0.0))}


def certify_eps_approximation(traj: Trajectory, params: ModelParams, u0: Optional[Field] = None,
                              quad_points: int = 4) -> EpsCertificate:
    """Measure how far the trajectory is from an exact backward-Euler relation.

    ``epsilon_source`` integrates ``||g(t, ., u_dt(t)) - g^n||_1`` over each
    step with the midpoint rule; ``step_residuals`` are L1 norms of
    ``(beta(u^n) - beta(u^{n-1}))/dt + A_mu u^n - Div f(u^n) - g^n``.
    """
    h = params.grid.h
    x = params.grid.nodes
    u0 = traj.levels[0] if u0 is None else u0
    eps_data = _l1(params.beta(traj.levels[0].values) - params.beta(u0.values), h)
    dts = np.asarray(traj.dt_history)
    source = _run_source(params.source, traj)
    gns = _step_sources(source, traj, quad_points)
    kernel = params.kernel()
    eps_src, res = 0.0, []
    for k in range(1, len(traj.levels)):
        t0, t1 = traj.times[k - 1], traj.times[k]
        dt = t1 - t0
        u = traj.levels[k].values
        nodes = t0 + (np.arange(quad_points) + 0.5) * dt / quad_points
        defect = sum(_l1(source(t, x, u) - gns[k - 1], h) for t in nodes) / quad_points
        eps_src += dt * defect
        r = ((traj.beta_levels[k].values - traj.beta_levels[k - 1].values) / dt
             + A_mu_values(u, params, kernel) - div_flux_values(u, h, params.flux) - gns[k - 1])
        res.append(_l1(r, h))
    return EpsCertificate(float(dts.max()) if dts.size else 0.0, eps_data, float(eps_src),
                          np.array(res))


def _check_pair(trajA: Trajectory, trajB: Trajectory):
    check_same_grid(trajA.levels[0].grid, trajB.levels[0].grid)
    if len(trajA.times) != len(trajB.times) or not np.allclose(trajA.times, trajB.times,
                                                               rtol=0, atol=1e-12):
        raise IncompatibilityError("trajectories use different time grids")


def check_contraction(trajA: Trajectory, trajB: Trajectory, sourceA: SourceSpec,
                      sourceB: SourceSpec, flux: Optional[FluxSpec] = None, tol: float = 1e-8,
                      defect_allowance: float = 0.0, quad_points: int = 4) -> DiagnosticsReport:
    """L1 contraction of the ``beta`` levels.

    Compares ``||beta(u^n) - beta(v^n)||_1`` with
    ``||beta(u^0) - beta(v^0)||_1 + sum_k dt_k ||g_A^k - g_B^k||_1`` at
    every saved time.  For a nonzero ``flux`` the accumulated convection
    defect ``sum_k dt_k |<Div f(u^k) - Div f(v^k), sgn(u^k - v^k)>|`` is
    reported; it bounds how far the central convection can break the
    inequality.
    """
    _check_pair(trajA, trajB)
    grid = trajA.levels[0].grid
    h = grid.h
    gA = _step_sources(_run_source(sourceA, trajA), trajA, quad_points)
    gB = _step_sources(_run_source(sourceB, trajB), trajB, quad_points)
    lhs = np.array([_l1(a.values - b.values, h)
                    for a, b in zip(trajA.beta_levels, trajB.beta_levels)])
    dts = np.diff(trajA.times)
    src = np.array([dt * _l1(a - b, h) for dt, a, b in zip(dts, gA, gB)])
    rhs = lhs[0] + np.concatenate(([0.0], np.cumsum(src)))
    defect = 0.0
    if flux is not None and not flux.is_zero:
        for k in range(1, len(trajA.levels)):
            u, v = trajA.levels[k].values, trajB.levels[k].values
            d = div_flux_values(u, h, flux) - div_flux_values(v, h, flux)
            defect += dts[k - 1] * abs(h * np.dot(d, np.sign(u - v)))
    rep = DiagnosticsReport()
    rep.add("l1_contraction", float(np.max(lhs - rhs)), tol + defect_allowance)
    rep.series.update(times=trajA.times, lhs=lhs, rhs=rhs)
    rep.extras.update(convection_defect=float(defect),
                      violation=float(max(0.0, np.max(lhs - rhs))))
    return rep


def check_comparison(trajA: Trajectory, trajB: Trajectory, sourceA: Optional[SourceSpec] = None,
                     sourceB: Optional[SourceSpec] = None, flux: Optional[FluxSpec] = None,
                     tol: float = 1e-8, C: float = 1.0, validate: bool = True) -> DiagnosticsReport:
    """Order preservation: ``max (u^n - v^n)_+`` over all levels and nodes.

    With ``validate`` the ordering of the initial data (and of the sources,
    sampled on the range of the computed levels) is enforced first.
    """
    _check_pair(trajA, trajB)
    grid = trajA.levels[0].grid
    if validate:
        if np.any(trajA.levels[0].values > trajB.levels[0].values):
            raise InvalidComparisonError("initial data are not ordered (u0 <= v0 fails)")
        if sourceA is not None and sourceB is not None:
            lo = min(min(l.values.min() for l in trajA.levels), min(l.values.min() for l in trajB.levels))
            hi = max(max(l.values.max() for l in trajA.levels), max(l.values.max() for l in trajB.levels))
            for s in np.linspace(lo, hi, 33):
                for t in trajA.times[:: max(1, len(trajA.times) // 8)]:
                    if np.any(sourceA(t, grid.nodes, s) > sourceB(t, grid.nodes, s) + 1e-14):
                        raise InvalidComparisonError("sources are not ordered (g_A <= g_B fails)")
    gap = max(float(np.max(a.values - b.values)) for a, b in zip(trajA.levels, trajB.levels))
    bound = tol if flux is None or flux.is_zero else tol + C * grid.h
    rep = DiagnosticsReport()
    rep.add("comparison", max(gap, 0.0), bound)
    return rep


def _extinction_k_min(params):
    s, q, m = params.s, params.q, params.beta.m
    return min(1.0, (1.0 - s * q - (q - 1.0) * m) / (m * s * q))


@dataclass
class ExtinctionReport:
    extinct_at: Optional[float]
    alpha: float
    k: float
    times: np.ndarray
    Z: np.ndarray
    max_increment: float
    decay_rate: float

    @property
    def nonincreasing(self) -> bool:
        return self.max_increment <= 0.0

    def as_dict(self):
        return {"extinct_at": self.extinct_at, "alpha": self.alpha, "k": self.k,
                "max_increment_after_first_step": self.max_increment,
                "measured_decay_rate": self.decay_rate}


def detect_extinction(traj: Trajectory, params: ModelParams, k: float = 1.0,
                      threshold: float = 1e-10) -> ExtinctionReport:
    """Extinction time and the decay series ``Z = Y^(1 - alpha)``.

    ``Y = ||u||_{1/m+k}^{1/m+k}`` and ``alpha = (q - 1 + k)/(1/m + k)``.
    ``max_increment`` is the largest step of ``Z`` after the first step;
    ``decay_rate`` is the average slope ``-(Z_end - Z_1)/(t_end - t_1)``.
    """
    issues = validate_regime(params, "extinction")
    if issues:
        raise InvalidRegimeError(issues)
    k_min = _extinction_k_min(params)
    if k < k_min:
        raise InvalidRegimeError([f"k >= {k_min:g} fails (k = {k:g})"])
    m = params.beta.m
    gamma = 1.0 / m + k
    alpha = (params.q - 1.0 + k) / gamma
    if not alpha < 1:
        raise InvalidRegimeError([f"alpha < 1 fails (alpha = {alpha:g})"])
    Y = np.array([lp_norm(u, gamma) ** gamma for u in traj.levels])
    Z = Y ** (1.0 - alpha)
    t = np.asarray(traj.times)
    linf = np.array([np.abs(u.values).max() for u in traj.levels])
    below = np.nonzero(linf < threshold)[0]
    extinct_at = float(t[below[0]]) if below.size else None
    inc = np.diff(Z[1:])
    max_inc = float(inc.max()) if inc.size else 0.0
    rate = float(-(Z[-1] - Z[1]) / (t[-1] - t[1])) if len(t) > 2 else 0.0
    return ExtinctionReport(extinct_at, float(alpha), float(k), t, Z, max_inc, rate)


@dataclass
class BlowupReport:
    blown_up_at: Optional[float]
    energy_u0: float
    tstar_factor: float
    times: np.ndarray
    W: np.ndarray
    growth_exponent: Optional[float]

    @property
    def energy_negative(self) -> bool:
        return self.energy_u0 < 0

    def as_dict(self):
        return {"blown_up_at": self.blown_up_at, "energy_u0": self.energy_u0,
                "energy_negative": self.energy_negative, "tstar_factor": self.tstar_factor,
                "measured_growth_exponent": self.growth_exponent}


def detect_blowup(traj: Trajectory, params: ModelParams,
                  threshold: Optional[float] = None) -> BlowupReport:
    """Blow-up time and the growth of ``W = ||u||_{1+1/m}^{1+1/m}``.

    ``growth_exponent`` is the least-squares slope of ``log(dW/dt)`` against
    ``log W`` over the steps where ``W`` grows (superlinear growth shows as
    a slope above 1).  ``tstar_factor`` is ``||u0||_{1+1/m}^(1/m - r)``, the
    data dependence of the blow-up time bound.
    """
    issues = validate_regime(params, "blowup")
    if issues:
        raise InvalidRegimeError(issues)
    m, r = params.beta.m, params.source.r
    gamma = 1.0 + 1.0 / m
    u0 = traj.levels[0]
    norms = np.array([lp_norm(u, gamma) for u in traj.levels])
    if threshold is None:
        threshold = 1e6 * (1.0 + norms[0])
    above = np.nonzero(norms > threshold)[0]
    t = np.asarray(traj.times)
    blown = float(t[above[0]]) if above.size else None
    with np.errstate(over="ignore"):
        W = norms ** gamma
    slope = None
    dW = np.diff(W) / np.diff(t)
    ok = (dW > 0) & np.isfinite(dW) & np.isfinite(W[:-1]) & (W[:-1] > 0)
    if ok.sum() >= 3:
        slope = float(np.polyfit(np.log(W[:-1][ok]), np.log(dW[ok]), 1)[0])
    tstar = float(norms[0] ** (1.0 / m - r)) if norms[0] > 0 else math.inf
    return BlowupReport(blown, float(energy_E(u0, params)), tstar, t, W, slope)


def blowup_time_scaling(amplitudes, times, m: float, r: float) -> DiagnosticsReport:
    """Blow-up times under data scaling versus ``T* ~ ||u0||^(1/m - r)``.

    Passes when the times strictly decrease with the amplitude; the
    measured and predicted ratios are reported side by side.
    """
    amps = np.asarray(amplitudes, dtype=float)
    ts = np.asarray(times, dtype=float)
    order = np.argsort(amps)
    amps, ts = amps[order], ts[order]
    rep = DiagnosticsReport()
    # number of amplitude increases that fail to shorten the blow-up time
    rep.add("non_decreasing_steps", int(np.sum(np.diff(ts) >= 0)), 0)
    rep.extras["measured_ratios"] = (ts[1:] / ts[:-1]).tolist()
    rep.extras["predicted_ratios"] = ((amps[1:] / amps[:-1]) ** (1.0 / m - r)).tolist()
    return rep


def check_energy_dissipation(traj: Trajectory, params: ModelParams, tol: float = 1e-8,
                             quad_points: int = 4) -> DiagnosticsReport:
    """Discrete energy inequality along the trajectory.

    With ``g = 0`` and ``f = 0`` the check is ``J(u^n) - J(u^{n-1}) <= tol``.
    Otherwise each step must satisfy the convexity estimate

        J(u^n) + <beta(u^n) - beta(u^{n-1}), delta>/dt
            <= J(u^{n-1}) + <g^n + Div f(u^n), delta>,   delta = u^n - u^{n-1},

    up to ``tol * (1 + |J(u^{n-1})|)``.
    """
    h = params.grid.h
    kernel = params.kernel()
    J = np.array([J_values(u.values, params, kernel) for u in traj.levels])
    rep = DiagnosticsReport()
    rep.series.update(times=traj.times, J=J)
    strict = params.source.is_zero and params.flux.is_zero
    if len(J) < 2:
        rep.add("energy_increase" if strict else "energy_inequality", 0.0, tol)
        return rep
    if strict:
        inc = np.diff(J)
        rep.series["increments"] = inc
        rep.add("energy_increase", float(inc.max()), tol)
        return rep
    gns = _step_sources(_run_source(params.source, traj), traj, quad_points)
    excess = []
    for k in range(1, len(traj.levels)):
        dt = traj.times[k] - traj.times[k - 1]
        u, up = traj.levels[k].values, traj.levels[k - 1].values
        delta = u - up
        db = traj.beta_levels[k].values - traj.beta_levels[k - 1].values
        lhs = J[k] + h * np.dot(db, delta) / dt
        rhs = J[k - 1] + h * np.dot(gns[k - 1] + div_flux_values(u, h, params.flux), delta)
        excess.append((lhs - rhs) / (1.0 + abs(J[k - 1])))
    excess = np.array(excess)
    rep.series["relative_excess"] = excess
    rep.add("energy_inequality", float(excess.max()), tol)
    return rep


def _random_pair_fields(rng, x, a, b, smooth):
    L = b - a
    if smooth:
        modes = np.arange(1, 7)
        out = []
        for _ in range(2):
            c = rng.normal(size=modes.size) / modes
            out.append(np.sin(np.pi * np.outer((x - a) / L, modes)) @ c * rng.uniform(0.2, 3.0))
        return out
    return [rng.normal(size=x.size) * rng.uniform(0.1, 3.0) for _ in range(2)]


def sample_accretivity(params: ModelParams, trials: int = 1000, n: Optional[int] = None,
                       seed: int = 0, C: float = 1.0, smooth: bool = False) -> DiagnosticsReport:
    """Sample ``S = h sum [A(v) - A(w)]_i sgn(v_i - w_i)`` over random pairs.

    ``A(v) = A_mu(beta^-1(v)) - Div f(beta^-1(v))`` acts on the ``beta``
    variable.  ``sgn(0) = 0``.  For ``f != 0`` the convection part alone is
    tracked as well, since only it can be negative (by ``O(h)`` for smooth
    data, hence ``smooth=True`` for refinement studies).
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if n is not None and n != params.grid.n:
        params = replace(params, grid=build_grid(params.grid.a, params.grid.b, n))
    grid = params.grid
    h, x = grid.h, grid.nodes
    kernel = params.kernel()
    rng = np.random.default_rng(seed)
    S = np.empty(trials)
    S_conv = np.empty(trials)
    for i in range(trials):
        v, w = _random_pair_fields(rng, x, grid.a, grid.b, smooth)
        if i % 10 == 0:
            w = v.copy()
            w[rng.random(x.size) < 0.5] += rng.normal()
        u1, u2 = params.beta.inverse(v), params.beta.inverse(w)
        sg = np.sign(v - w)
        conv = div_flux_values(u1, h, params.flux) - div_flux_values(u2, h, params.flux)
        diff = A_mu_values(u1, params, kernel) - A_mu_values(u2, params, kernel)
        S_conv[i] = -h * np.dot(conv, sg)
        S[i] = h * np.dot(diff, sg) + S_conv[i]
    rep = DiagnosticsReport()
    rep.series.update(S=S, S_conv=S_conv)
    bound = 1e-10 if params.flux.is_zero else C * h
    rep.add("accretivity", float(max(0.0, -S.min())), bound)
    rep.extras.update(min_S=float(S.min()), convection_violation=float(max(0.0, -S_conv.min())),
                      n=grid.n, h=h)
    return rep


def stationary_residual(u: Field, params: ModelParams, h: Field) -> float:
    """L1 norm of ``A_mu u - Div f(u) - h``."""
    check_same_grid(u.grid, params.grid)
    check_same_grid(h.grid, params.grid)
    gh = params.grid.h
    r = A_mu_values(u.values, params) - div_flux_values(u.values, gh, params.flux) - h.values
    return _l1(r, gh)
