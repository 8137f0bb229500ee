"""Discrete operators and energies.

Conventions (all on a :class:`~dnpe.grid.Grid` with zero exterior values):

* p-Laplacian in flux form,
  ``(-Delta_p u)_i = -(Phi_p(D_{i+1/2}) - Phi_p(D_{i-1/2})) / h`` with
  ``D_{i+1/2} = (u_{i+1} - u_i) / h`` and ``Phi_p(x) = |x|^(p-2) x``.
* fractional q-Laplacian (normalizing constant 1),
  ``2 sum_{j != i} w_ij Phi_q(u_i - u_j) + 2 tau_i Phi_q(u_i)``.
* convection, central conservative differences
  ``(f(u_{i+1}) - f(u_{i-1})) / (2h)``.

Every operator is the h-weighted gradient of the matching energy, so
``duality_pairing(apply_A_mu(u), d)`` is the directional derivative of
``energy_J`` along ``d``.

Row sums of the nonlocal operator are formed by ``numpy.sum`` along the
contiguous axis of a C-ordered ``n x n`` array (pairwise summation in a
fixed order), so results are bitwise reproducible for a given ``n``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionError, InvalidEpsilonError, InvalidParameterError,
                     UnsupportedFunctionalError)
from .grid import (Field, Grid, _check_sq, check_same_grid, exterior_tail, gagliardo_energy,
                   lp_norm, pair_weights, w1p_seminorm)
from .nonlinearities import BetaSpec, FluxSpec, SourceSpec

__all__ = [
    "ModelParams",
    "NonlocalKernel",
    "build_nonlocal_kernel",
    "apply_p_laplacian",
    "apply_frac_q_laplacian",
    "apply_divergence_flux",
    "apply_A_mu",
    "duality_pairing",
    "energy_J",
    "energy_E",
    "energy_I",
    "check_algebraic_inequalities",
    "AlgebraicReport",
]


def phi(x, p):
    """``|x|^(p-2) x``, with value 0 at 0."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** (p - 1.0)


@dataclass(frozen=True)
class ModelParams:
    p: float
    q: float
    s: float
    mu: float
    beta: BetaSpec
    flux: FluxSpec
    source: SourceSpec
    grid: Grid

    def __post_init__(self):
        if not self.p > 2:
            raise InvalidParameterError(f"need p > 2, got p={self.p}")
        if not self.q > 1:
            raise InvalidParameterError(f"need q > 1, got q={self.q}")
        if not 0 < self.s < 1:
            raise InvalidParameterError(f"need 0 < s < 1, got s={self.s}")
        if not self.mu >= 0:
            raise InvalidParameterError(f"need mu >= 0, got mu={self.mu}")

    def kernel(self):
        """Cached nonlocal kernel for this grid, or ``None`` when ``mu == 0``."""
        if self.mu == 0:
            return None
        return build_nonlocal_kernel(self.grid, self.s, self.q)


@dataclass(frozen=True, eq=False)
class NonlocalKernel:
    grid: Grid
    weights: np.ndarray
    tail: np.ndarray
    s: float
    q: float


@functools.lru_cache(maxsize=32)
def _cached_kernel(grid, s, q):
    w = pair_weights(grid, s, q)
    tau = exterior_tail(grid, s, q)
    w.setflags(write=False)
    tau.setflags(write=False)
    return NonlocalKernel(grid, w, tau, s, q)


def build_nonlocal_kernel(grid: Grid, s: float, q: float) -> NonlocalKernel:
    """Pair weights ``h / |x_i - x_j|^(1+sq)`` and exterior tails ``tau_i``."""
    _check_sq(s, q)
    return _cached_kernel(grid, float(s), float(q))


# ---------------------------------------------------------------------------
# array kernels used by the solver

def p_laplacian_values(values, h, p):
    slopes = np.diff(np.concatenate(([0.0], values, [0.0]))) / h
    flux = phi(slopes, p)
    return -(flux[1:] - flux[:-1]) / h


def frac_values(values, weights, tail, q):
    diff = values[:, None] - values[None, :]
    return 2.0 * np.sum(weights * phi(diff, q), axis=1) + 2.0 * tail * phi(values, q)


def div_flux_values(values, h, flux: FluxSpec):
    if flux.is_zero:
        return np.zeros_like(values)
    f = flux(np.concatenate(([0.0], values, [0.0])))
    return (f[2:] - f[:-2]) / (2.0 * h)


def A_mu_values(values, params: ModelParams, kernel=None):
    out = p_laplacian_values(values, params.grid.h, params.p)
    if params.mu != 0:
        kernel = kernel or params.kernel()
        out = out + params.mu * frac_values(values, kernel.weights, kernel.tail, params.q)
    return out


def J_values(values, params: ModelParams, kernel=None):
    h = params.grid.h
    slopes = np.diff(np.concatenate(([0.0], values, [0.0]))) / h
    local = h * np.sum(np.abs(slopes) ** params.p) / params.p
    if params.mu == 0:
        return float(local)
    kernel = kernel or params.kernel()
    nonlocal_ = gagliardo_energy(values, h, kernel.weights, kernel.tail, params.q)
    return float(local + params.mu * nonlocal_ / params.q)


# ---------------------------------------------------------------------------
# public operators

def apply_p_laplacian(u: Field, p: float) -> Field:
    if not p > 1:
        raise InvalidParameterError(f"need p > 1, got {p}")
    return u.with_values(p_laplacian_values(u.values, u.grid.h, p))


def apply_frac_q_laplacian(u: Field, kernel: NonlocalKernel) -> Field:
    check_same_grid(u.grid, kernel.grid)
    return u.with_values(frac_values(u.values, kernel.weights, kernel.tail, kernel.q))


def apply_divergence_flux(u: Field, flux: FluxSpec) -> Field:
    return u.with_values(div_flux_values(u.values, u.grid.h, flux))


def apply_A_mu(u: Field, params: ModelParams, kernel: NonlocalKernel = None) -> Field:
    """``-Delta_p u + mu (-Delta)^s_q u``."""
    check_same_grid(u.grid, params.grid)
    if kernel is not None:
        check_same_grid(kernel.grid, u.grid)
    return u.with_values(A_mu_values(u.values, params, kernel))


def duality_pairing(Au: Field, phi_: Field) -> float:
    """``h * sum_i (Au)_i phi_i``."""
    check_same_grid(Au.grid, phi_.grid)
    return float(Au.grid.h * np.dot(Au.values, phi_.values))


def energy_J(u: Field, params: ModelParams) -> float:
    """``(1/p) ||grad u||_p^p + (mu/q) ||u||_{W^{s,q}_0}^q``."""
    check_same_grid(u.grid, params.grid)
    return J_values(u.values, params)


def _power_r(params):
    if params.source.kind != "power":
        raise UnsupportedFunctionalError(
            f"functional needs the power source |u|^(r-1) u, got {params.source.kind!r}")
    return float(params.source.r)


def energy_E(u: Field, params: ModelParams) -> float:
    """``J(u) - ||u||_{r+1}^{r+1} / (r+1)`` for the power source ``|u|^(r-1) u``.

    A zero source is accepted and gives ``E = J``.
    """
    if params.source.kind == "zero":
        return energy_J(u, params)
    r = _power_r(params)
    return energy_J(u, params) - lp_norm(u, r + 1) ** (r + 1) / (r + 1)


def energy_I(u: Field, params: ModelParams, epsilon: float):
    """Modified energy of the blow-up argument and its constant.

    Returns ``(I, c_eps)`` with::

        I = (1-eps)/p ||grad u||_p^p - ||u||_{r+1}^{r+1}/(r+1)
            + mu (1-eps)/p ||u||_{W^{s,q}}^q
        c_eps = 1 - p / ((r+1)(1-eps))
    """
    r = _power_r(params)
    p = params.p
    if not 0 < epsilon < 1:
        raise InvalidEpsilonError(f"need 0 < epsilon < 1, got {epsilon}")
    c_eps = 1.0 - p / ((r + 1.0) * (1.0 - epsilon))
    if not c_eps > 0:
        raise InvalidEpsilonError(f"c_eps = {c_eps:.6g} <= 0 for epsilon = {epsilon}")
    factor = (1.0 - epsilon) / p
    value = factor * w1p_seminorm(u, p) ** p - lp_norm(u, r + 1) ** (r + 1) / (r + 1)
    if params.mu != 0:
        k = params.kernel()
        value += params.mu * factor * gagliardo_energy(u.values, u.grid.h, k.weights, k.tail,
                                                       params.q)
    return float(value), float(c_eps)


@dataclass(frozen=True)
class AlgebraicReport:
    p: float
    trials: int
    c1: float
    c2: float
    passed: bool


def check_algebraic_inequalities(p: float, trials: int = 100_000, seed: int = 0) -> AlgebraicReport:
    """Empirical constants of the two vector inequalities for ``Phi_p`` (scalar case).

    ``c1`` is the largest observed ratio
    ``|Phi(x) - Phi(y)| / (|x - y| (|x| + |y|)^(p-2))`` and ``c2`` the smallest
    ``(Phi(x) - Phi(y)) (x - y) / |x - y|^p``.
    """
    if not p >= 2:
        raise InvalidParameterError(f"need p >= 2, got {p}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(trials) * 10.0 ** rng.uniform(-2, 2, trials)
    y = rng.standard_normal(trials) * 10.0 ** rng.uniform(-2, 2, trials)
    keep = x != y
    x, y = x[keep], y[keep]
    dphi = phi(x, p) - phi(y, p)
    d = x - y
    upper = np.abs(dphi) / (np.abs(d) * (np.abs(x) + np.abs(y)) ** (p - 2.0))
    lower = dphi * d / np.abs(d) ** p
    c1, c2 = float(upper.max()), float(lower.min())
    return AlgebraicReport(p, int(keep.sum()), c1, c2, bool(c2 > 0 and np.isfinite(c1)))
