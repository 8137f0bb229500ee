"""Structural nonlinearities: beta (and B, beta^-1), the flux f, the source g.

The built-in families are the power laws ``beta(t) = |t|^(1/m-1) t`` and
``g(u) = |u|^(r-1) u``.  Arbitrary monotone beta enters only through
:meth:`BetaSpec.from_table`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import InvalidParameterError

__all__ = [
    "BetaSpec",
    "FluxSpec",
    "SourceSpec",
    "beta_eval",
    "beta_inv",
    "beta_primitive",
    "g_eval",
    "g_truncate",
    "f_eval",
    "f_prime",
    "f_truncate",
    "f_monotone_split",
    "validate_regime",
    "SCENARIOS",
]


def _signed_power(t, e):
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** e


class _MonotoneTable:
    """Odd-agnostic monotone interpolant with linear extension past the table."""

    def __init__(self, t_nodes, values):
        t = np.asarray(t_nodes, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.size < 3 or t.shape != v.shape:
            raise InvalidParameterError("beta table needs two 1-D arrays of equal length >= 3")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(v) <= 0):
            raise InvalidParameterError("beta table must be strictly increasing in both columns")
        if not (t[0] < 0 < t[-1]):
            raise InvalidParameterError("beta table must bracket 0")
        self.interp = PchipInterpolator(t, v, extrapolate=False)
        self.deriv = self.interp.derivative()
        anti = self.interp.antiderivative()
        self.anti = lambda x: anti(x) - anti(0.0)
        if abs(float(self.interp(0.0))) > 1e-14:
            raise InvalidParameterError("beta table must satisfy beta(0) = 0")
        self.t, self.v = t, v
        self.slope_lo = float(self.deriv(t[0]))
        self.slope_hi = float(self.deriv(t[-1]))
        if self.slope_lo <= 0 or self.slope_hi <= 0:
            raise InvalidParameterError("beta table needs positive end slopes")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.t[0], self.t[-1])
        out = self.interp(xc)
        out = np.where(x > self.t[-1], self.v[-1] + self.slope_hi * (x - self.t[-1]), out)
        return np.where(x < self.t[0], self.v[0] + self.slope_lo * (x - self.t[0]), out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = self.deriv(np.clip(x, self.t[0], self.t[-1]))
        out = np.where(x > self.t[-1], self.slope_hi, out)
        return np.where(x < self.t[0], self.slope_lo, out)

    def primitive(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.t[0], self.t[-1])
        out = self.anti(xc)
        over = x - xc
        # linear extension: int (v_end + slope*(s - t_end)) ds
        v_end = np.where(x > self.t[-1], self.v[-1], self.v[0])
        slope = np.where(x > self.t[-1], self.slope_hi, self.slope_lo)
        return out + v_end * over + 0.5 * slope * over ** 2

    def inverse(self, y, tol=1e-12):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        hi_mask = y > self.v[-1]
        lo_mask = y < self.v[0]
        out[hi_mask] = self.t[-1] + (y[hi_mask] - self.v[-1]) / self.slope_hi
        out[lo_mask] = self.t[0] + (y[lo_mask] - self.v[0]) / self.slope_lo
        mid = ~(hi_mask | lo_mask)
        lo = np.full(np.count_nonzero(mid), self.t[0])
        hi = np.full_like(lo, self.t[-1])
        target = y[mid]
        for _ in range(200):
            c = 0.5 * (lo + hi)
            below = self.interp(c) < target
            lo = np.where(below, c, lo)
            hi = np.where(below, hi, c)
            if np.all(hi - lo <= tol * (1.0 + np.abs(c))):
                break
        out[mid] = 0.5 * (lo + hi)
        return out


@dataclass(frozen=True)
class BetaSpec:
    """Increasing bijection ``beta`` with ``beta(0) = 0``.

    ``m`` is the power-law exponent; it is ignored when a monotone table is
    attached with :meth:`from_table`.
    """

    m: float = 1.0
    table: Optional[_MonotoneTable] = None

    def __post_init__(self):
        if self.table is None and not (math.isfinite(self.m) and self.m >= 1):
            raise InvalidParameterError(f"need m >= 1, got m={self.m}")

    @classmethod
    def from_table(cls, t_nodes, values) -> "BetaSpec":
        return cls(m=float("nan"), table=_MonotoneTable(t_nodes, values))

    @property
    def is_power(self) -> bool:
        return self.table is None

    @property
    def holder_alpha(self) -> float:
        return min(1.0, 1.0 / self.m) if self.is_power else 1.0

    def __call__(self, t):
        if self.table is not None:
            return self.table(t)
        if self.m == 1:
            return np.asarray(t, dtype=float) * 1.0
        return _signed_power(t, 1.0 / self.m)

    def inverse(self, v):
        if self.table is not None:
            return self.table.inverse(v)
        if self.m == 1:
            return np.asarray(v, dtype=float) * 1.0
        return _signed_power(v, self.m)

    def primitive(self, t):
        if self.table is not None:
            return self.table.primitive(t)
        e = 1.0 / self.m + 1.0
        return np.abs(np.asarray(t, dtype=float)) ** e / e

    def derivative(self, t, floor=0.0):
        """``beta'(t)``; ``|t|`` is floored at ``floor`` (infinite at 0 when m > 1)."""
        if self.table is not None:
            return self.table.derivative(t)
        t = np.asarray(t, dtype=float)
        if self.m == 1:
            return np.ones_like(t)
        with np.errstate(divide="ignore"):
            return (1.0 / self.m) * np.maximum(np.abs(t), floor) ** (1.0 / self.m - 1.0)

    def lower_slope(self, K: float) -> float:
        """Constant ``C_K`` in ``beta(t) - beta(t') >= C_K (t - t')`` on ``[-K, K]``."""
        if self.table is not None:
            grid = np.linspace(-K, K, 2001)
            return float(np.min(self.table.derivative(grid)))
        return (1.0 / self.m) * K ** (1.0 / self.m - 1.0)


def beta_eval(spec: BetaSpec, t):
    return spec(t)


def beta_inv(spec: BetaSpec, v):
    return spec.inverse(v)


def beta_primitive(spec: BetaSpec, t):
    """``B(t) = int_0^t beta(s) ds``."""
    return spec.primitive(t)


# ---------------------------------------------------------------------------
# flux

FLUX_KINDS = ("zero", "power", "table", "split")


@dataclass(frozen=True)
class FluxSpec:
    """Scalar flux ``f_1`` with ``f_1(0) = 0`` (d = 1).

    ``power``: ``coefficient * |u|^(gamma+1)`` (``odd=False``) or
    ``coefficient * |u|^gamma * u`` (``odd=True``); ``gamma`` is the growth
    exponent of ``f'``.  ``table``: user callables ``func`` and ``deriv``.
    ``radius`` clamps the argument to ``[-radius, radius]``.
    """

    kind: str = "zero"
    gamma: float = 1.0
    coefficient: float = 1.0
    odd: bool = False
    func: Optional[Callable] = None
    deriv: Optional[Callable] = None
    radius: Optional[float] = None
    # used by kind == "split"
    parent: Optional["FluxSpec"] = None
    part: int = 0

    def __post_init__(self):
        if self.kind not in FLUX_KINDS:
            raise InvalidParameterError(f"unknown flux kind {self.kind!r}")
        if self.kind == "power" and not self.gamma >= 0:
            raise InvalidParameterError(f"need gamma >= 0, got {self.gamma}")
        if self.kind == "table" and (self.func is None or self.deriv is None):
            raise InvalidParameterError("table flux needs both func and deriv")
        if self.radius is not None and not self.radius > 0:
            raise InvalidParameterError(f"need radius > 0, got {self.radius}")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "power" and self.coefficient == 0)

    def _clip(self, u):
        u = np.asarray(u, dtype=float)
        return u if self.radius is None else np.clip(u, -self.radius, self.radius)

    def __call__(self, u):
        u = self._clip(u)
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "power":
            if self.odd:
                return self.coefficient * np.abs(u) ** self.gamma * u
            return self.coefficient * np.abs(u) ** (self.gamma + 1.0)
        if self.kind == "table":
            return np.asarray(self.func(u), dtype=float) * np.ones_like(u)
        return self.parent._split_value(u, self.part)

    def derivative(self, u):
        u_raw = np.asarray(u, dtype=float)
        u = self._clip(u_raw)
        if self.kind == "zero":
            out = np.zeros_like(u)
        elif self.kind == "power":
            out = self.coefficient * (self.gamma + 1.0) * np.abs(u) ** self.gamma
            if not self.odd:
                out = out * np.sign(u)
        elif self.kind == "table":
            out = np.asarray(self.deriv(u), dtype=float) * np.ones_like(u)
        else:
            d = self.parent.derivative(u)
            out = np.maximum(d, 0.0) if self.part > 0 else np.minimum(d, 0.0)
        if self.radius is not None:
            out = np.where(np.abs(u_raw) > self.radius, 0.0, out)
        return out

    def _split_value(self, u, part):
        """Closed form for power kinds, adaptive quadrature otherwise."""
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "power" and self.radius is None:
            f = self(u)
            if self.odd:
                keep = (self.coefficient > 0) == (part > 0)
                return f if keep else np.zeros_like(f)
            increasing_side = u > 0 if self.coefficient > 0 else u < 0
            mask = increasing_side if part > 0 else ~increasing_side
            return np.where(mask, f, 0.0)
        clip = (lambda d: max(d, 0.0)) if part > 0 else (lambda d: min(d, 0.0))
        flat = np.ravel(u)
        out = np.array([
            quad(lambda s: clip(float(self.derivative(s))), 0.0, float(x), limit=200,
                 epsabs=1e-13, epsrel=1e-12)[0]
            for x in flat
        ])
        return out.reshape(np.shape(u))

    @property
    def growth_exponent(self) -> Optional[float]:
        if self.kind == "zero":
            return 0.0
        if self.kind in ("power", "table"):
            return self.gamma
        return self.parent.growth_exponent

    def lipschitz_bound(self, R: float) -> float:
        """``sup_{[-R, R]} |f'|``."""
        if self.kind == "zero":
            return 0.0
        if self.radius is not None:
            R = min(R, self.radius)
        if self.kind == "power":
            return abs(self.coefficient) * (self.gamma + 1.0) * R ** self.gamma
        s = np.linspace(-R, R, 4001)
        return float(np.max(np.abs(self.derivative(s))))


def f_eval(spec: FluxSpec, u):
    return spec(u)


def f_prime(spec: FluxSpec, u):
    return spec.derivative(u)


def f_truncate(spec: FluxSpec, R: float) -> FluxSpec:
    """``f_R``: equal to ``f`` on ``[-R, R]`` and constant outside."""
    if not R > 0:
        raise InvalidParameterError(f"truncation radius must be positive, got {R}")
    if spec.radius is not None:
        R = min(R, spec.radius)
    return replace(spec, radius=float(R))


def f_monotone_split(spec: FluxSpec):
    """Nondecreasing and nonincreasing parts ``(f_up, f_down)``.

    ``f_up' = (f')_+``, ``f_down' = (f')_-``, both vanishing at 0, so
    ``f_up + f_down = f``.
    """
    return (FluxSpec(kind="split", parent=spec, part=1),
            FluxSpec(kind="split", parent=spec, part=-1))


# ---------------------------------------------------------------------------
# source

SOURCE_KINDS = ("zero", "constant_in_u", "power", "lipschitz_table", "function")


@dataclass(frozen=True)
class SourceSpec:
    """Source ``g(t, x, u)``.

    kinds
        ``zero``; ``constant_in_u`` (``value`` is a number, an array of
        nodal values or a callable of x); ``power`` (``|u|^(r-1) u``);
        ``lipschitz_table`` (``func(u)`` with Lipschitz constant
        ``lipschitz``); ``function`` (``func(t, x, u)``, possibly
        time-dependent).
    """

    kind: str = "zero"
    r: Optional[float] = None
    value: object = None
    func: Optional[Callable] = None
    lipschitz: Optional[float] = None
    autonomous: bool = True
    radius: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise InvalidParameterError(f"unknown source kind {self.kind!r}")
        if self.kind == "power" and not (self.r is not None and self.r > 0):
            raise InvalidParameterError(f"power source needs r > 0, got {self.r}")
        if self.kind == "constant_in_u" and self.value is None:
            raise InvalidParameterError("constant_in_u source needs a value")
        if self.kind in ("lipschitz_table", "function") and self.func is None:
            raise InvalidParameterError(f"{self.kind} source needs func")
        if self.radius is not None and not self.radius > 0:
            raise InvalidParameterError(f"need radius > 0, got {self.radius}")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def is_autonomous(self) -> bool:
        return self.kind != "function" or self.autonomous

    @property
    def depends_on_u(self) -> bool:
        return self.kind in ("power", "lipschitz_table", "function")

    def constant_values(self, x):
        v = self.value
        if callable(v):
            return np.asarray(v(np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x))
        if hasattr(v, "values"):
            v = v.values
        return np.broadcast_to(np.asarray(v, dtype=float), np.shape(x)).astype(float)

    def __call__(self, t, x, u):
        u = np.asarray(u, dtype=float)
        if self.radius is not None:
            u = np.clip(u, -self.radius, self.radius)
        if self.kind == "zero":
            return np.zeros(np.broadcast(np.asarray(x), u).shape)
        if self.kind == "constant_in_u":
            return self.constant_values(x) * np.ones_like(u)
        if self.kind == "power":
            return _signed_power(u, self.r)
        if self.kind == "lipschitz_table":
            return np.asarray(self.func(u), dtype=float) * np.ones_like(u)
        return np.asarray(self.func(t, np.asarray(x, dtype=float), u), dtype=float) * np.ones_like(u)

    def growth_constants(self):
        """``(c_g, q_g)`` with ``|g(t,x,s)| <= c_g (1 + |s|^q_g)``."""
        if self.kind == "zero":
            return 0.0, 1.0
        if self.kind == "power":
            return 1.0, float(self.r)
        if self.kind == "constant_in_u":
            v = self.value
            if callable(v):
                raise InvalidParameterError("growth constant of a callable h needs nodal values")
            return float(np.max(np.abs(np.asarray(getattr(v, "values", v), dtype=float)))), 1.0
        if self.kind == "lipschitz_table":
            g0 = float(abs(np.asarray(self.func(np.zeros(1)))[0]))
            return max(g0, float(self.lipschitz or 0.0)), 1.0
        raise InvalidParameterError("growth constants of a general function source are unknown")


def g_eval(spec: SourceSpec, t, x, u):
    return spec(t, x, u)


def g_truncate(spec: SourceSpec, R: float) -> SourceSpec:
    """``g_R(t, x, u) = g(t, x, sgn(u) min(|u|, R))``."""
    if not R > 0:
        raise InvalidParameterError(f"truncation radius must be positive, got {R}")
    if spec.radius is not None:
        R = min(R, spec.radius)
    return replace(spec, radius=float(R))


# ---------------------------------------------------------------------------
# regime checks

SCENARIOS = ("evolve", "extinction", "blowup", "stabilization", "contraction",
             "comparison", "convergence", "accretivity")


def validate_regime(params, scenario: str) -> list:
    """Hypotheses of the theorem behind ``scenario`` that ``params`` violate.

    Returns an empty list when every condition holds.  Each entry names the
    failing inequality together with the numbers involved.
    """
    if scenario not in SCENARIOS:
        raise InvalidParameterError(f"unknown scenario {scenario!r}")
    p, q, mu = params.p, params.q, params.mu
    beta, flux, source = params.beta, params.flux, params.source
    out = []
    if beta.is_power and p < 1 + 1 / beta.m:
        out.append(f"(beta2) p >= 1 + 1/m fails (p = {p}, 1/m = {1 / beta.m:g})")

    if scenario == "extinction":
        if not mu > 0:
            out.append("mu > 0 fails")
        if not beta.is_power:
            out.append("beta must be the power law |t|^(1/m-1) t")
        if source.kind != "power":
            out.append("source must be the power law |u|^(r-1) u")
        else:
            r, m = source.r, beta.m
            if not q < r + 1:
                out.append(f"q < r+1 fails (q = {q:g}, r+1 = {r + 1:g})")
            if beta.is_power and not r + 1 < 1 / m + 1:
                out.append(f"r+1 < 1/m+1 fails (r+1 = {r + 1:g}, 1/m+1 = {1 / m + 1:g})")
    elif scenario == "blowup":
        if not beta.is_power:
            out.append("beta must be the power law |t|^(1/m-1) t")
        if source.kind != "power":
            out.append("source must be the power law |u|^(r-1) u")
        else:
            r = source.r
            if mu == 0 and not r > p - 1:
                out.append(f"r > p-1 fails (r = {r:g}, p-1 = {p - 1:g})")
            if mu > 0 and not r > min(p - 1, q - 1):
                out.append(f"r > min(p-1, q-1) fails (r = {r:g}, min = {min(p - 1, q - 1):g})")
        if not flux.is_zero:
            gam = flux.growth_exponent
            if gam is None:
                out.append("(f1) growth exponent of f' unknown")
            elif not 2 * (gam + 1) < p:
                out.append(f"(f1) 2(gamma+1) < p fails (2(gamma+1) = {2 * (gam + 1):g}, p = {p:g})")
    elif scenario == "stabilization":
        if not mu > 0:
            out.append("mu > 0 fails")
        if source.kind == "zero":
            pass
        elif source.kind != "constant_in_u":
            out.append("source must be a fixed h(x) independent of u")
        elif not callable(source.value) and np.any(
                np.asarray(getattr(source.value, "values", source.value), dtype=float) < 0):
            out.append("h >= 0 fails")
    return out
