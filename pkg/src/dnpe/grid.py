"""Uniform 1-D mesh on (a, b) with zero boundary and exterior values.

Only interior nodes are stored.  The values at ``x_0 = a`` and
``x_{n+1} = b`` and everywhere outside ``(a, b)`` are implicitly zero, which
encodes both the Dirichlet condition of the p-Laplacian and the exterior
condition of the nonlocal operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidDomainError, InvalidExponentError

__all__ = [
    "Grid",
    "Field",
    "build_grid",
    "lp_norm",
    "w1p_seminorm",
    "wsq_seminorm",
    "pair_weights",
    "exterior_tail",
]


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise InvalidDomainError(f"endpoints must be finite, got ({self.a}, {self.b})")
        if not self.b > self.a:
            raise InvalidDomainError(f"need b > a, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidDomainError(f"need at least one interior node, got n={self.n}")
        h = (self.b - self.a) / (self.n + 1)
        nodes = self.a + h * np.arange(1, self.n + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)

    @property
    def length(self) -> float:
        return self.b - self.a


def build_grid(a: float, b: float, n: int) -> Grid:
    """Uniform grid with ``n`` interior nodes ``x_i = a + i*h``, ``h = (b-a)/(n+1)``."""
    try:
        a, b = float(a), float(b)
    except (TypeError, ValueError) as exc:
        raise InvalidDomainError(f"endpoints must be real numbers: {exc}") from None
    return Grid(a, b, n)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values at the interior nodes of ``grid`` (read-only)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if values.shape != (self.grid.n,):
            raise DimensionError(
                f"field has {values.size} values but the grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.n))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(grid.nodes))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def _other(self, other):
        if isinstance(other, Field):
            check_same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__


def check_same_grid(g1: Grid, g2: Grid) -> None:
    if g1 is g2:
        return
    if (g1.a, g1.b, g1.n) != (g2.a, g2.b, g2.n):
        raise DimensionError(f"grid mismatch: {g1} vs {g2}")


def lp_norm(u: Field, gamma) -> float:
    """Discrete L^gamma norm ``(h * sum |u_i|^gamma)^(1/gamma)``.

    ``gamma`` may be ``math.inf`` (or the string ``"infinity"``) for the
    max-norm.
    """
    if isinstance(gamma, str):
        if gamma.lower() not in ("inf", "infinity"):
            raise InvalidExponentError(f"unknown exponent {gamma!r}")
        gamma = math.inf
    if math.isnan(gamma) or gamma < 1:
        raise InvalidExponentError(f"need gamma >= 1, got {gamma}")
    a = np.abs(u.values)
    if math.isinf(gamma):
        return float(a.max())
    scale = a.max()
    if scale == 0.0:
        return 0.0
    # scaled to avoid overflow of |u|^gamma during blow-up runs
    return float(scale * (u.grid.h * np.sum((a / scale) ** gamma)) ** (1.0 / gamma))


def _padded(values):
    return np.concatenate(([0.0], values, [0.0]))


def w1p_seminorm(u: Field, p: float) -> float:
    """``(h * sum_{i=0}^{n} |(u_{i+1} - u_i)/h|^p)^(1/p)`` with zero end values."""
    if not p > 1:
        raise InvalidExponentError(f"need p > 1, got {p}")
    slopes = np.abs(np.diff(_padded(u.values))) / u.grid.h
    scale = slopes.max()
    if scale == 0.0:
        return 0.0
    return float(scale * (u.grid.h * np.sum((slopes / scale) ** p)) ** (1.0 / p))


def pair_weights(grid: Grid, s: float, q: float) -> np.ndarray:
    """Midpoint weights ``w_ij = h / |x_i - x_j|^(1+sq)``, zero on the diagonal."""
    x = grid.nodes
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, 1.0)
    w = grid.h / dist ** (1.0 + s * q)
    np.fill_diagonal(w, 0.0)
    return w


def exterior_tail(grid: Grid, s: float, q: float) -> np.ndarray:
    """Exact ``int_{R \\ (a,b)} |x_i - y|^(-1-sq) dy`` for every node."""
    sq = s * q
    x = grid.nodes
    return ((x - grid.a) ** (-sq) + (grid.b - x) ** (-sq)) / sq


def _check_sq(s, q):
    if not 0.0 < s < 1.0:
        raise InvalidExponentError(f"need 0 < s < 1, got s={s}")
    if not q > 1:
        raise InvalidExponentError(f"need q > 1, got q={q}")


def gagliardo_energy(values, h, weights, tail, q) -> float:
    """``||u||_{W^{s,q}_0}^q`` from precomputed weights (see :func:`wsq_seminorm`)."""
    diff = np.abs(values[:, None] - values[None, :])
    interior = np.sum(weights * diff ** q)
    exterior = 2.0 * np.sum(tail * np.abs(values) ** q)
    return float(h * (interior + exterior))


def wsq_seminorm(u: Field, s: float, q: float) -> float:
    """Discrete Gagliardo seminorm of ``u`` extended by zero outside (a, b).

    The double integral splits into node pairs inside the domain (midpoint
    rule, same-cell pairs dropped) and the exact exterior tail::

        ||u||^q = h * sum_{i != j} w_ij |u_i - u_j|^q + 2 h * sum_i tau_i |u_i|^q
    """
    _check_sq(s, q)
    g = u.grid
    energy = gagliardo_energy(u.values, g.h, pair_weights(g, s, q), exterior_tail(g, s, q), q)
    return energy ** (1.0 / q)
