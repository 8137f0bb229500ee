"""Scenario runners: one per qualitative property of the equation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..diagnostics import (DiagnosticsReport, blowup_time_scaling, certify_eps_approximation,
                           check_comparison, check_contraction, check_energy_dissipation,
                           detect_blowup, detect_extinction, sample_accretivity,
                           stationary_residual)
from ..elliptic import solve_stationary
from ..errors import InvalidRegimeError, NonconvergenceError, TruncationError
from ..grid import Field, lp_norm
from ..nonlinearities import SourceSpec
from ..stepper import Trajectory, interpolants, run_trajectory
from .config import ExperimentConfig

__all__ = ["ScenarioResult", "run_scenario", "EXIT_PASS", "EXIT_CHECK", "EXIT_SOLVER",
           "EXIT_CONFIG", "smooth_perturbation"]

EXIT_PASS, EXIT_CHECK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3, 4


@dataclass
class ScenarioResult:
    scenario: str
    report: DiagnosticsReport
    trajectory: Optional[Trajectory] = None
    params: object = None
    status: str = "completed"
    event_time: Optional[float] = None
    solver_failure: Optional[str] = None
    series_extra: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if self.solver_failure is not None:
            return EXIT_SOLVER
        return EXIT_PASS if self.report.passed else EXIT_CHECK

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: measured {c.measured:.6g} "
                f"(bound {c.bound:.6g})" for c in self.report.checks]


class _SolverFailure(Exception):
    pass


def smooth_perturbation(grid, rng, modes=5) -> np.ndarray:
    """Random sine series vanishing at the endpoints, max-norm about one."""
    k = np.arange(1, modes + 1)
    c = rng.normal(size=modes) / k
    z = (grid.nodes - grid.a) / (grid.b - grid.a)
    v = np.sin(np.pi * np.outer(z, k)) @ c
    return v / max(np.abs(v).max(), 1e-300)


def _run(u0, params, scheme) -> Trajectory:
    traj = run_trajectory(u0, params, scheme)
    if traj.status == "failed":
        raise _SolverFailure(f"step {traj.failed_step}: {traj.message}")
    return traj


@dataclass(frozen=True)
class _Shifted:
    """``base(t, x, u) + shift(x)``; picklable so sweeps can use process pools."""

    base: SourceSpec
    shift: np.ndarray

    def __call__(self, t, x, u):
        return self.base(t, x, u) + self.shift


def _shifted_source(source: SourceSpec, shift: np.ndarray) -> SourceSpec:
    if source.kind == "zero":
        return SourceSpec("constant_in_u", value=shift)
    if source.kind == "constant_in_u":
        return SourceSpec("constant_in_u", value=source.constant_values(np.zeros(shift.size)) + shift)
    return SourceSpec("function", func=_Shifted(source, shift), autonomous=source.is_autonomous)


def _evolve(cfg, params, res):
    ck = cfg.checks
    u0 = cfg.initial_field(params.grid)
    scheme = cfg.scheme()
    traj = _run(u0, params, scheme)
    res.trajectory = traj
    rep = res.report
    if params.flux.is_zero:
        rep.add("linf_bound", float(traj.linf_bound_excess().max()), ck["tol"])
    energy = check_energy_dissipation(traj, params, tol=ck["tol"])
    rep.checks += energy.checks
    if traj.R is not None and not params.source.is_zero:
        rep.add("truncation_consistent", traj.max_linf - traj.R, 0.0)
    cert = certify_eps_approximation(traj, params, quad_points=scheme.quad_points)
    rep.extras["eps_certificate"] = cert.as_dict()
    rep.extras["a_priori_estimate"] = traj.a_priori_estimate(params)


def _extinction(cfg, params, res):
    ck = cfg.checks
    u0 = cfg.initial_field(params.grid)
    scheme = cfg.scheme()
    traj = _run(u0, params, scheme)
    res.trajectory = traj
    ext = detect_extinction(traj, params, k=ck["k"], threshold=scheme.extinction_threshold)
    half = _run(u0 * 0.5, params, scheme)
    ext_half = detect_extinction(half, params, k=ck["k"], threshold=scheme.extinction_threshold)
    rep = res.report
    t_ext = ext.extinct_at if ext.extinct_at is not None else math.inf
    t_half = ext_half.extinct_at if ext_half.extinct_at is not None else math.inf
    rep.add("extinct_before_T", t_ext, scheme.T)
    rep.add("decay_series_nonincreasing", ext.max_increment, 0.0)
    rep.add("halved_data_not_later", t_half - t_ext if math.isfinite(t_ext) else math.inf, 0.0)
    rep.extras.update(extinction=ext.as_dict(), halved_extinct_at=ext_half.extinct_at,
                      u0_norm=lp_norm(u0, 1.0 + params.beta.holder_alpha))
    res.series_extra["Z"] = ext.Z


def _blowup(cfg, params, res):
    ck = cfg.checks
    scheme = cfg.scheme(adaptive=True, R="none")
    times, amps = [], []
    rep = res.report
    for i, mult in enumerate(ck["amplitudes"]):
        u0 = cfg.initial_field(params.grid, scale=mult)
        traj = _run(u0, params, scheme)
        b = detect_blowup(traj, params, threshold=scheme.blowup_threshold)
        if i == 0:
            res.trajectory = traj
            rep.add("initial_energy_negative", b.energy_u0, -np.finfo(float).tiny)
            rep.extras["blowup"] = b.as_dict()
        rep.add(f"blown_up[x{mult:g}]", 0.0 if traj.status == "blown_up" else 1.0, 0.0)
        times.append(traj.event_time if traj.status == "blown_up" else math.inf)
        amps.append(mult)
    if len(times) > 1:
        scal = blowup_time_scaling(amps, times, params.beta.m, params.source.r)
        rep.checks += scal.checks
        rep.extras.update(scal.extras)
    rep.extras["blowup_times"] = times


def _stabilization(cfg, params, res):
    ck = cfg.checks
    u0 = cfg.initial_field(params.grid)
    traj = _run(u0, params, cfg.scheme())
    res.trajectory = traj
    h = Field(params.grid, params.source.constant_values(params.grid.nodes)
              if not params.source.is_zero else np.zeros(params.grid.n))
    try:
        stat, _ = solve_stationary(params, h, cfg.solver())
    except (NonconvergenceError, TruncationError) as exc:
        raise _SolverFailure(f"stationary solve: {exc}") from exc
    res_stat = stationary_residual(stat, params, h)
    series = np.array([stationary_residual(u, params, h) for u in traj.levels])
    drops = max((float(np.max(a.values - b.values))
                 for a, b in zip(traj.levels[:-1], traj.levels[1:])), default=0.0)
    rep = res.report
    rep.add("levels_nondecreasing", max(drops, 0.0), ck["monotone_tol"])
    rep.add("final_stationary_residual", series[-1],
            ck["residual_factor"] * max(res_stat, np.finfo(float).tiny))
    dist = params.grid.h * float(np.sum(np.abs(traj.final.values - stat.values)))
    rep.add("l1_distance_to_stationary", dist, ck["l1_tol"])
    rep.extras["stationary_solver_residual"] = res_stat
    res.series_extra["stationary_residual"] = series


def _partner(cfg, params, rng):
    ck = cfg.checks
    u0 = cfg.initial_field(params.grid)
    scale = max(float(np.abs(u0.values).max()), 1.0)
    pert = smooth_perturbation(params.grid, rng) * scale * ck["partner_scale"]
    shift = smooth_perturbation(params.grid, rng) * ck["source_shift"]
    return u0, pert, shift


def _contraction(cfg, params, res):
    ck = cfg.checks
    rep = res.report
    scheme = cfg.scheme()
    worst, defects = -math.inf, []
    for i in range(ck["pairs"]):
        rng = np.random.default_rng(cfg.seed + i)
        u0, pert, shift = _partner(cfg, params, rng)
        params_b = replace(params, source=_shifted_source(params.source, shift))
        ta = _run(u0, params, scheme)
        tb = _run(Field(params.grid, u0.values + pert), params_b, scheme)
        if i == 0:
            res.trajectory = ta
        c = check_contraction(ta, tb, params.source, params_b.source, flux=params.flux, tol=ck["tol"],
                              quad_points=scheme.quad_points)
        worst = max(worst, c["l1_contraction"].measured)
        defects.append(c.extras["convection_defect"])
    rep.add("l1_contraction", worst, ck["tol"] + max(defects))
    rep.extras["convection_defects"] = defects


def _comparison(cfg, params, res):
    ck = cfg.checks
    scheme = cfg.scheme()
    rng = np.random.default_rng(cfg.seed)
    u0, pert, shift = _partner(cfg, params, rng)
    params_b = replace(params, source=_shifted_source(params.source, np.abs(shift)))
    ta = _run(u0, params, scheme)
    tb = _run(Field(params.grid, u0.values + np.abs(pert)), params_b, scheme)
    res.trajectory = ta
    c = check_comparison(ta, tb, params.source, params_b.source, flux=params.flux, tol=ck["tol"],
                         C=ck["C"])
    res.report.checks += c.checks


def cauchy_differences(trajs):
    """``sup_n ||beta(u^n_coarse) - beta_tilde_fine(t_n)||_1`` for consecutive runs."""
    out = []
    for coarse, fine in zip(trajs[:-1], trajs[1:]):
        h = coarse.levels[0].grid.h
        d = 0.0
        for t, b in zip(coarse.times, coarse.beta_levels):
            _, bt, _ = interpolants(fine, min(t, fine.times[-1]))
            d = max(d, h * float(np.sum(np.abs(b.values - bt.values))))
        out.append(d)
    return out


def _convergence(cfg, params, res):
    ck = cfg.checks
    u0 = cfg.initial_field(params.grid)
    trajs = [_run(u0, params, cfg.scheme(N=N)) for N in ck["levels"]]
    res.trajectory = trajs[-1]
    D = cauchy_differences(trajs)
    for i in range(1, len(D)):
        rep_ratio = D[i] / D[i - 1] if D[i - 1] > 0 else math.inf
        res.report.add(f"cauchy_ratio[N={ck['levels'][i]}]", rep_ratio, ck["ratio_max"])
    res.report.extras["cauchy_differences"] = D


def _accretivity(cfg, params, res):
    ck = cfg.checks
    n = params.grid.n
    a = sample_accretivity(params, ck["trials"], n=n, seed=cfg.seed, C=ck["C"],
                           smooth=not params.flux.is_zero)
    b = sample_accretivity(params, ck["trials"], n=2 * n, seed=cfg.seed, C=ck["C"],
                           smooth=not params.flux.is_zero)
    rep = res.report
    if params.flux.is_zero:
        rep.add(f"accretivity[n={n}]", a["accretivity"].measured, a["accretivity"].bound)
        rep.add(f"accretivity[n={2 * n}]", b["accretivity"].measured, b["accretivity"].bound)
    else:
        va, vb = a.extras["convection_violation"], b.extras["convection_violation"]
        rep.add("convection_violation_decreases", vb - va, 0.0)
        rep.extras.update(violation_n=va, violation_2n=vb)
    rep.extras.update(min_S_n=a.extras["min_S"], min_S_2n=b.extras["min_S"])


_RUNNERS = {
    "evolve": _evolve,
    "extinction": _extinction,
    "blowup": _blowup,
    "stabilization": _stabilization,
    "contraction": _contraction,
    "comparison": _comparison,
    "convergence": _convergence,
    "accretivity": _accretivity,
}


def run_scenario(cfg: ExperimentConfig) -> ScenarioResult:
    """Run the configured scenario and collect its checks.

    Solver breakdowns are caught and reported through ``solver_failure``
    (exit code 3) instead of propagating.
    """
    params = cfg.model_params()
    res = ScenarioResult(cfg.scenario, DiagnosticsReport(), params=params,
                         warnings=list(cfg.warnings))
    try:
        _RUNNERS[cfg.scenario](cfg, params, res)
    except _SolverFailure as exc:
        res.solver_failure = str(exc)
        res.status = "failed"
    except (NonconvergenceError, TruncationError) as exc:
        res.solver_failure = f"{type(exc).__name__}: {exc}"
        res.status = "failed"
    except InvalidRegimeError as exc:
        # the detector's hypotheses do not hold: a failed check, not a crash
        res.report.add("regime_hypotheses", len(exc.violations), 0)
        res.report.extras["regime_violations"] = exc.violations
    traj = res.trajectory
    if traj is not None and res.solver_failure is None:
        res.status = traj.label
        res.event_time = traj.event_time
    return res
