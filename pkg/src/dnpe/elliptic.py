"""Resolvent and stationary solves by convex minimization.

For a frozen convection argument ``w`` the discrete problem

    beta(u) + lam * A_mu(u) = lam * Div f(w) + lam * rhs

is the optimality condition of the strictly convex functional

    J_w(u) = h sum B(u_i) + lam J_A(u) - lam <rhs, u>_h - lam <Div f(w), u>_h,

minimized here by damped Newton with Armijo backtracking.  An outer damped
Picard loop ``w <- (1 - theta) w + theta Gamma(w)`` resolves the convection.

``rhs`` is normalized so that the maximum principle reads
``||beta(u)||_inf <= lam ||rhs||_inf`` (f = 0); one implicit Euler step with
step ``dt`` is ``lam = dt``, ``rhs = g^n + beta(u^{n-1}) / dt``.  In
stationary mode the beta term is dropped and ``lam = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, cg

from .errors import InvalidParameterError, NonconvergenceError, TruncationError
from .grid import Field, check_same_grid, w1p_seminorm
from .nonlinearities import f_truncate
from .operators import (J_values, ModelParams, A_mu_values, div_flux_values, phi)

__all__ = [
    "SolverSettings",
    "EllipticProblem",
    "SolveReport",
    "objective_Jw",
    "gradient_Jw",
    "minimize_inner",
    "solve_resolvent",
    "solve_stationary",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and caps (config keys ``solver.*``)."""

    inner_tol: float = 1e-10
    fp_tol: float = 1e-8
    max_inner: int = 200
    max_outer: int = 200
    theta: float = 1.0
    dense_limit: int = 512
    truncation_margin: float = 0.1

    def __post_init__(self):
        if not (self.inner_tol > 0 and self.fp_tol > 0):
            raise InvalidParameterError("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise InvalidParameterError("iteration caps must be >= 1")
        if not 0 < self.theta <= 1:
            raise InvalidParameterError(f"need 0 < theta <= 1, got {self.theta}")


@dataclass(frozen=True)
class EllipticProblem:
    params: ModelParams
    lam: float
    rhs: Field
    w0: Optional[Field] = None
    mode: str = "resolvent"

    def __post_init__(self):
        if self.mode not in ("resolvent", "stationary"):
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        if self.mode == "resolvent" and not self.lam > 0:
            raise InvalidParameterError(f"need lambda > 0, got {self.lam}")
        check_same_grid(self.rhs.grid, self.params.grid)
        if self.w0 is not None:
            check_same_grid(self.w0.grid, self.params.grid)

    @property
    def stationary(self) -> bool:
        return self.mode == "stationary"

    @property
    def scale(self) -> float:
        return 1.0 if self.stationary else self.lam


@dataclass
class SolveReport:
    outer_iterations: int = 0
    inner_iterations_total: int = 0
    final_fixed_point_residual: float = 0.0
    final_gradient_norm: float = 0.0
    linf_bound_check: float = 0.0
    converged: bool = False
    truncation_radius: Optional[float] = None
    fixed_point_history: list = field(default_factory=list)
    contraction_factor: Optional[float] = None
    source_norm: float = 0.0

    def as_dict(self):
        return {
            "outer_iterations": self.outer_iterations,
            "inner_iterations_total": self.inner_iterations_total,
            "final_fixed_point_residual": self.final_fixed_point_residual,
            "final_gradient_norm": self.final_gradient_norm,
            "linf_bound_check": self.linf_bound_check,
            "converged": self.converged,
            "truncation_radius": self.truncation_radius,
            "contraction_factor": self.contraction_factor,
            "source_norm": self.source_norm,
        }


class _Objective:
    """``J_w`` with gradient and Hessian in the h-weighted inner product."""

    # |t| floor where beta' or Phi_q' are singular (m > 1, q < 2)
    FLOOR = 1e-30
    TIE = 1e-6

    def __init__(self, problem: EllipticProblem, w_values, flux):
        self.problem = problem
        self.params = params = problem.params
        self.h = params.grid.h
        self.lam = problem.scale
        self.with_beta = not problem.stationary
        self.kernel = params.kernel()
        conv = div_flux_values(w_values, self.h, flux)
        self.load = problem.rhs.values + conv

    def value(self, u):
        lam, h = self.lam, self.h
        out = lam * J_values(u, self.params, self.kernel) - lam * h * np.dot(self.load, u)
        if self.with_beta:
            out += h * np.sum(self.params.beta.primitive(u))
        return float(out)

    def gradient(self, u):
        g = self.lam * (A_mu_values(u, self.params, self.kernel) - self.load)
        if self.with_beta:
            g = g + self.params.beta(u)
        return g

    def noise_floor(self, u):
        """Gradient size below which round-off dominates.

        For ``q < 2`` a perturbation ``delta ~ eps (|u_i| + |u_j|)`` of a
        pair difference ``d`` changes ``Phi_q(d)`` by up to
        ``min(delta^(q-1), (q-1) |d|^(q-2) delta)``, far above ``eps`` near a
        tie; that term is added.
        """
        params, h, lam = self.params, self.h, self.lam
        slopes = np.diff(np.concatenate(([0.0], u, [0.0]))) / h
        fl = np.abs(slopes) ** (params.p - 1.0) / h
        mag = lam * (fl[1:] + fl[:-1] + np.abs(self.load))
        extra = 0.0
        if params.mu != 0:
            k, q = self.kernel, params.q
            au = np.abs(u)
            d = np.abs(u[:, None] - u[None, :]) ** (q - 1.0)
            mag = mag + lam * params.mu * 2.0 * (np.sum(k.weights * d, axis=1)
                                                 + k.tail * au ** (q - 1.0))
            if q < 2:
                delta = 4 * _EPS * (au[:, None] + au[None, :])
                dist = np.maximum(np.abs(u[:, None] - u[None, :]), np.maximum(delta, self.FLOOR))
                tie = np.minimum(delta ** (q - 1.0), (q - 1.0) * dist ** (q - 2.0) * delta)
                extra = lam * params.mu * 2.0 * float(np.max(np.sum(k.weights * tie, axis=1)))
        if self.with_beta:
            mag = mag + np.abs(self.params.beta(u))
        return 256 * _EPS * float(mag.max()) + extra

    def _diag_and_bands(self, u, majorize=False):
        params, h, lam = self.params, self.h, self.lam
        slopes = np.diff(np.concatenate(([0.0], u, [0.0]))) / h
        a = (params.p - 1.0) * np.abs(slopes) ** (params.p - 2.0) / h ** 2
        diag = lam * (a[1:] + a[:-1])
        off = -lam * a[1:-1]
        if self.with_beta:
            db = params.beta.derivative(u, floor=self.FLOOR)
            if majorize:
                au = np.maximum(np.abs(u), self.FLOOR)
                db = np.maximum(db, np.abs(params.beta(au)) / au)
            diag = diag + db
        return diag, off

    def _pair_curvature(self, u, rows=slice(None), majorize=False):
        q = self.params.q
        d = np.abs(u[rows, None] - u[None, :])
        c = (q - 1.0) * np.maximum(d, self.FLOOR) ** (q - 2.0)
        if q < 2 and majorize:
            return c / (q - 1.0)
        if q < 2:
            # near a tie the exact curvature makes Newton map d to (q-2)/(q-1) d,
            # which cycles for q = 1.5; the secant slope |d|^(q-2) lands on d = 0
            near = d <= self.TIE * (np.abs(u[rows, None]) + np.abs(u[None, :]))
            c = np.where(near, c / (q - 1.0), c)
        return c

    def _tail_curvature(self, u, majorize=False):
        q = self.params.q
        c = np.maximum(np.abs(u), self.FLOOR) ** (q - 2.0)
        return c if (majorize and q < 2) else (q - 1.0) * c

    def hessian(self, u, majorize=False):
        """Hessian of ``J_w``; with ``majorize`` every curvature of a power
        ``|t|^gamma`` with ``gamma < 2`` is replaced by the secant slope
        ``|t|^(gamma-2)``, whose quadratic model lies above the objective."""
        diag, off = self._diag_and_bands(u, majorize)
        H = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        params = self.params
        if params.mu != 0:
            k, q = self.kernel, params.q
            c = self.lam * params.mu * 2.0
            B = k.weights * self._pair_curvature(u, majorize=majorize)
            H -= c * B
            H[np.diag_indices_from(H)] += c * (B.sum(axis=1)
                                               + k.tail * self._tail_curvature(u, majorize))
        return H

    def newton_direction(self, u, g, dense_limit, majorize=False):
        n = u.size
        params = self.params
        if params.mu == 0:
            diag, off = self._diag_and_bands(u, majorize)
            ab = np.zeros((2, n))
            ab[0, 1:] = off
            ab[1] = diag
            shift = 0.0
            for _ in range(12):
                try:
                    ab_s = ab.copy()
                    ab_s[1] += shift
                    return sla.solveh_banded(ab_s, -g)
                except (sla.LinAlgError, ValueError):
                    shift = max(10 * shift, 1e-12 * (1.0 + np.abs(diag).max()))
            return None
        if n <= dense_limit:
            H = self.hessian(u, majorize)
            shift = 0.0
            scale = 1.0 + np.abs(np.diag(H)).max()
            for _ in range(12):
                try:
                    c = sla.cho_factor(H + shift * np.eye(n), check_finite=False)
                    d = sla.cho_solve(c, -g, check_finite=False)
                    if np.all(np.isfinite(d)):
                        return d
                except (sla.LinAlgError, ValueError):
                    pass
                shift = max(10 * shift, 1e-12 * scale)
            return None
        return self._matrix_free_direction(u, g, majorize)

    def _matrix_free_direction(self, u, g, majorize=False, block=256):
        params = self.params
        diag, off = self._diag_and_bands(u, majorize)
        k, q = self.kernel, params.q
        c = self.lam * params.mu * 2.0
        n = u.size
        row_sum = np.empty(n)
        for start in range(0, n, block):
            rows = slice(start, min(n, start + block))
            row_sum[rows] = (k.weights[rows]
                             * self._pair_curvature(u, rows, majorize)).sum(axis=1)
        diag = diag + c * (row_sum + k.tail * self._tail_curvature(u, majorize))

        def matvec(v):
            out = diag * v
            out[:-1] += off * v[1:]
            out[1:] += off * v[:-1]
            for start in range(0, n, block):
                rows = slice(start, min(n, start + block))
                out[rows] -= c * (k.weights[rows] * self._pair_curvature(u, rows, majorize)) @ v
            return out

        op = LinearOperator((n, n), matvec=matvec)
        pre = LinearOperator((n, n), matvec=lambda v: v / diag)
        d, info = cg(op, -g, M=pre, rtol=1e-12, maxiter=10 * n)
        return d


def objective_Jw(u: Field, w: Field, problem: EllipticProblem) -> float:
    """Value of ``J_w(u)`` (flux used as given, no truncation)."""
    check_same_grid(u.grid, problem.params.grid)
    return _Objective(problem, w.values, problem.params.flux).value(u.values)


def gradient_Jw(u: Field, w: Field, problem: EllipticProblem) -> Field:
    """h-weighted gradient of ``J_w``: ``beta(u) + lam A_mu u - lam Div f(w) - lam rhs``."""
    return u.with_values(_Objective(problem, w.values, problem.params.flux).gradient(u.values))


def _inner_tolerance(problem, tol):
    return tol * (1.0 + problem.scale * np.abs(problem.rhs.values).max())


def _line_search(obj, u, f, g, d, gnorm):
    """Backtracking along ``d``.

    Returns ``(u_new, J(u_new), |grad J(u_new)|_inf, alpha)`` or None.
    """
    slope = float(np.dot(g, d))
    # once the predicted decrease is below the round-off of J itself,
    # backtrack on the gradient norm instead of the objective value
    residual_mode = obj.h * abs(slope) < 1e4 * _EPS * (1.0 + abs(f))
    g2 = float(np.linalg.norm(g))
    alpha = 1.0
    while alpha >= 1e-12:
        trial = u + alpha * d
        f_trial = obj.value(trial)
        gt = obj.gradient(trial)
        gt_max = float(np.abs(gt).max())
        if residual_mode:
            shrink = 1.0 - 1e-4 * alpha
            ok = gt_max <= shrink * gnorm or np.linalg.norm(gt) <= shrink * g2
        else:
            ok = f_trial <= f + 1e-4 * alpha * obj.h * slope
        if ok:
            return trial, f_trial, gt_max, alpha
        alpha *= 0.5
    return None


def _descent(d, g):
    return d is not None and np.all(np.isfinite(d)) and np.dot(g, d) < 0


def _poor_model(obj, f, g, d, step):
    """Actual decrease below a quarter of the quadratic model's prediction."""
    predicted = -0.5 * obj.h * float(np.dot(g, d))
    return predicted > 1e4 * _EPS * (1.0 + abs(f)) and f - step[1] < 0.25 * predicted


def _better(a, b):
    """Prefer the lower objective, or the smaller gradient once values tie."""
    if b is None:
        return a
    if a is None:
        return b
    if a[1] == b[1]:
        return a if a[2] <= b[2] else b
    return a if a[1] < b[1] else b


def _minimize(obj: _Objective, u0, tol, max_iter, dense_limit, history=None):
    u = np.array(u0, dtype=float)
    f = obj.value(u)
    if history is not None:
        history.append(f)
    gnorm = math.inf
    for it in range(max_iter + 1):
        g = obj.gradient(u)
        gnorm = float(np.abs(g).max())
        noise = obj.noise_floor(u)
        if gnorm <= max(tol, noise):
            return u, it, gnorm
        if it == max_iter:
            break
        step = None
        d = obj.newton_direction(u, g, dense_limit)
        if _descent(d, g):
            step = _line_search(obj, u, f, g, d, gnorm)
        if step is None or step[3] < 1.0 or _poor_model(obj, f, g, d, step):
            # exact Newton overshoots on |t|^gamma with gamma < 2 (kinks of
            # beta and Phi_q); the majorized model never needs damping there
            d = obj.newton_direction(u, g, dense_limit, majorize=True)
            if _descent(d, g):
                step = _better(step, _line_search(obj, u, f, g, d, gnorm))
        if step is None:
            step = _line_search(obj, u, f, g, -g / max(1.0, gnorm), gnorm)
        if step is None:
            raise NonconvergenceError(
                f"line search failed at inner iteration {it} (gradient norm {gnorm:.3e})",
                iterate=u, residual=gnorm)
        u, f = step[0], step[1]
        if history is not None:
            history.append(f)
    raise NonconvergenceError(
        f"inner minimization did not reach {tol:.3e} in {max_iter} iterations "
        f"(gradient norm {gnorm:.3e})", iterate=u, residual=gnorm)


def minimize_inner(w: Field, problem: EllipticProblem, tol: float = 1e-10,
                   max_iter: int = 200, start: Optional[Field] = None, history=None,
                   dense_limit: int = 512):
    """Minimize ``J_w`` for frozen ``w``.

    Stops when the max-norm of the h-weighted gradient is below
    ``tol * (1 + lam ||rhs||_inf)`` (or at the round-off floor of the
    gradient terms).  ``history``, when a list, receives the objective value
    of every accepted iterate.

    Returns
    -------
    (Field, int)
        Minimizer and number of Newton iterations.
    """
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    obj = _Objective(problem, w.values, problem.params.flux)
    u0 = (start if start is not None else w).values
    u, its, _ = _minimize(obj, u0, _inner_tolerance(problem, tol), max_iter, dense_limit,
                          history)
    return w.with_values(u), its


def _fixed_point(problem: EllipticProblem, settings: SolverSettings, flux, report):
    params = problem.params
    grid = params.grid
    w = problem.w0.values if problem.w0 is not None else np.zeros(grid.n)
    tol_inner = _inner_tolerance(problem, settings.inner_tol)
    start = w
    theta = settings.theta
    history = report.fixed_point_history
    for k in range(1, settings.max_outer + 1):
        obj = _Objective(problem, w, flux)
        u, its, gnorm = _minimize(obj, start, tol_inner, settings.max_inner,
                                  settings.dense_limit)
        report.inner_iterations_total += its
        report.outer_iterations = k
        report.final_gradient_norm = gnorm
        if flux.is_zero:
            report.final_fixed_point_residual = 0.0
            report.converged = True
            return u
        res = w1p_seminorm(Field(grid, u - w), params.p)
        history.append(res)
        report.final_fixed_point_residual = res
        if res <= settings.fp_tol * (1.0 + w1p_seminorm(Field(grid, u), params.p)):
            report.converged = True
            ratios = [b / a for a, b in zip(history[:-1], history[1:]) if a > 0 and b > 0]
            if ratios:
                # worst observed ratio of successive fixed-point residuals
                report.contraction_factor = float(max(ratios))
            return u
        if len(history) >= 2 and res > history[-2]:
            theta *= 0.5
        w = (1.0 - theta) * w + theta * u
        start = u
    raise NonconvergenceError(
        f"convection fixed point did not converge in {settings.max_outer} iterations "
        f"(residual {history[-1]:.3e})", iterate=u, residual=history[-1], history=history)


def solve_resolvent(problem: EllipticProblem, settings: SolverSettings = SolverSettings()):
    """Solve ``beta(u) + lam A_mu u = lam Div f(u) + lam rhs``.

    The flux is truncated at ``R = (1 + margin) beta^-1(lam ||rhs||_inf)``;
    the solution is then required to stay inside ``[-R, R]``.

    Returns
    -------
    (Field, SolveReport)

    Raises
    ------
    NonconvergenceError
        Inner or outer iteration cap reached.
    TruncationError
        ``||u||_inf > R`` a posteriori.
    """
    if problem.stationary:
        raise InvalidParameterError("use solve_stationary for mode='stationary'")
    params = problem.params
    report = SolveReport()
    bound = problem.lam * float(np.abs(problem.rhs.values).max())
    if bound == 0.0:
        report.outer_iterations = 1
        report.converged = True
        return Field.zeros(params.grid), report
    flux = params.flux
    R = None
    if not flux.is_zero:
        R = (1.0 + settings.truncation_margin) * float(params.beta.inverse(np.array(bound)))
        flux = f_truncate(flux, R)
        report.truncation_radius = R
    u = _fixed_point(problem, settings, flux, report)
    report.linf_bound_check = float(np.abs(params.beta(u)).max()) - bound
    if R is not None and np.abs(u).max() > R:
        raise TruncationError(
            f"||u||_inf = {np.abs(u).max():.6g} exceeds the truncation radius {R:.6g}")
    return Field(params.grid, u), report


def solve_stationary(params: ModelParams, h: Field, settings: SolverSettings = SolverSettings(),
                     w0: Optional[Field] = None):
    """Solve ``A_mu u = Div f(u) + h`` (beta term dropped, same fixed-point loop)."""
    problem = EllipticProblem(params, 1.0, h, w0=w0, mode="stationary")
    report = SolveReport()
    if not np.any(h.values):
        report.outer_iterations = 1
        report.converged = True
        return Field.zeros(params.grid), report
    u = _fixed_point(problem, settings, params.flux, report)
    return Field(params.grid, u), report
