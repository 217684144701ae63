"""Constitutive laws: co-albedo graphs, the emission law, insolation and forcing.

The co-albedo takes the ice value below the ice-formation temperature (-10 C
by default) and the warm value above it, either through a Lipschitz ramp
(Sellers) or a jump regularized on demand (Budyko).  Emission is a strictly
increasing law with closed-form primitive and inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

ICE_FORMATION_TEMP = -10.0


class WrongVariant(TypeError):
    """Operation defined for the other co-albedo variant."""


class NonpositiveLambda(ValueError):
    """Regularization parameter must be positive."""


class NonMonotoneLaw(ValueError):
    """Emission law must be strictly increasing."""


def _ramp(u, lo: float, hi: float, ice: float, warm: float) -> np.ndarray:
    """Piecewise-linear ramp: ice for u<=lo, warm for u>=hi, linear between."""
    u = np.asarray(u, dtype=float)
    slope = (warm - ice) / (hi - lo)
    return np.clip(ice + slope * (u - lo), ice, warm)


def _ramp_slope(u, lo: float, hi: float, ice: float, warm: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    slope = (warm - ice) / (hi - lo)
    return np.where((u > lo) & (u < hi), slope, 0.0)


def _ramp_antiderivative(r, lo, hi, ice, warm, anchor):
    """Integral of the ramp from anchor to r, evaluated in closed form."""
    slope = (warm - ice) / (hi - lo)

    def prim(s):
        # antiderivative with prim(lo) = 0
        s = np.asarray(s, dtype=float)
        below = ice * (s - lo)
        mid = ice * (s - lo) + 0.5 * slope * (s - lo) ** 2
        above = 0.5 * (ice + warm) * (hi - lo) + warm * (s - hi)
        return np.where(s <= lo, below, np.where(s >= hi, above, mid))

    return prim(r) - prim(anchor)


def _check_levels(ice: float, warm: float) -> None:
    if not 0.0 < ice < warm < 1.0:
        raise ValueError(f"need 0 < ice < warm < 1, got ice={ice}, warm={warm}")


@dataclass(frozen=True)
class SellersCoalbedo:
    """Continuous co-albedo: linear ramp of the given half-width around the threshold."""

    ice: float = 0.2
    warm: float = 0.8
    threshold: float = ICE_FORMATION_TEMP
    half_width: float = 1.0

    def __post_init__(self):
        _check_levels(self.ice, self.warm)
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    @property
    def lipschitz(self) -> float:
        return (self.warm - self.ice) / (2.0 * self.half_width)

    def __call__(self, u) -> np.ndarray:
        lo = self.threshold - self.half_width
        hi = self.threshold + self.half_width
        return _ramp(u, lo, hi, self.ice, self.warm)

    def slope(self, u) -> np.ndarray:
        lo = self.threshold - self.half_width
        hi = self.threshold + self.half_width
        return _ramp_slope(u, lo, hi, self.ice, self.warm)

    def primitive(self, r) -> np.ndarray:
        """Convex antiderivative of the ramp, anchored to 0 at the threshold."""
        lo = self.threshold - self.half_width
        hi = self.threshold + self.half_width
        return _ramp_antiderivative(r, lo, hi, self.ice, self.warm, self.threshold)


@dataclass(frozen=True)
class BudykoCoalbedo:
    """Multivalued co-albedo: jump from ice to warm at the threshold.

    Dynamics never evaluate the graph itself; they go through the
    regularization yosida(lam, .), the resolvent-based single-valued Lipschitz
    ramp over [threshold + lam*ice, threshold + lam*warm].
    """

    ice: float = 0.2
    warm: float = 0.8
    threshold: float = ICE_FORMATION_TEMP

    def __post_init__(self):
        _check_levels(self.ice, self.warm)

    def yosida(self, lam: float, u) -> np.ndarray:
        """Closed-form regularization of the jump at scale lam > 0."""
        self._check_lam(lam)
        lo = self.threshold + lam * self.ice
        hi = self.threshold + lam * self.warm
        return _ramp(u, lo, hi, self.ice, self.warm)

    def yosida_slope(self, lam: float, u) -> np.ndarray:
        self._check_lam(lam)
        lo = self.threshold + lam * self.ice
        hi = self.threshold + lam * self.warm
        return _ramp_slope(u, lo, hi, self.ice, self.warm)

    def yosida_lipschitz(self, lam: float) -> float:
        self._check_lam(lam)
        return 1.0 / lam

    def yosida_primitive(self, lam: float, r) -> np.ndarray:
        self._check_lam(lam)
        lo = self.threshold + lam * self.ice
        hi = self.threshold + lam * self.warm
        return _ramp_antiderivative(r, lo, hi, self.ice, self.warm, self.threshold)

    def section(self, u) -> np.ndarray:
        """Single-valued selection used only for residual reporting.

        Takes the midpoint (ice + warm)/2 at the threshold itself; the choice
        never enters the dynamics.
        """
        u = np.asarray(u, dtype=float)
        mid = 0.5 * (self.ice + self.warm)
        return np.where(
            u < self.threshold, self.ice, np.where(u > self.threshold, self.warm, mid)
        )

    def primitive(self, r) -> np.ndarray:
        """Antiderivative of the jump graph, anchored to 0 at the threshold."""
        r = np.asarray(r, dtype=float)
        d = r - self.threshold
        return np.where(d >= 0, self.warm * d, self.ice * d)

    @staticmethod
    def _check_lam(lam: float) -> None:
        if lam <= 0:
            raise NonpositiveLambda(f"lam={lam}")


CoalbedoGraph = Union[SellersCoalbedo, BudykoCoalbedo]


def beta_eval(graph: CoalbedoGraph, u) -> np.ndarray:
    """Evaluate a continuous (Sellers) co-albedo; Budyko needs yosida_eval."""
    if not isinstance(graph, SellersCoalbedo):
        raise WrongVariant("beta_eval needs the continuous variant; use yosida_eval")
    return graph(u)


def yosida_eval(graph: CoalbedoGraph, lam: float, u) -> np.ndarray:
    """Evaluate the regularized jump co-albedo; Sellers is already single-valued."""
    if not isinstance(graph, BudykoCoalbedo):
        raise WrongVariant("yosida_eval needs the jump variant; use beta_eval")
    return graph.yosida(lam, u)


def j_primitive(graph: CoalbedoGraph, lam_or_eps: float | None, r) -> np.ndarray:
    """Antiderivative (anchored at the threshold) of the single-valued branch.

    For the jump variant lam_or_eps is the regularization scale; for the ramp
    variant it is ignored (the ramp width is part of the graph).
    """
    if isinstance(graph, BudykoCoalbedo):
        if lam_or_eps is None:
            raise WrongVariant("jump variant needs a regularization scale")
        return graph.yosida_primitive(lam_or_eps, r)
    return graph.primitive(r)


@dataclass(frozen=True)
class LinearEmission:
    """Emission law g(r) = slope * r + offset with slope > 0."""

    slope: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.slope <= 0:
            raise NonMonotoneLaw(f"slope={self.slope} must be positive")

    def __call__(self, r) -> np.ndarray:
        return self.slope * np.asarray(r, dtype=float) + self.offset

    def derivative_bound(self) -> float:
        return self.slope

    def primitive(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return 0.5 * self.slope * r * r + self.offset * r

    def inverse(self, v) -> np.ndarray:
        return (np.asarray(v, dtype=float) - self.offset) / self.slope


@dataclass(frozen=True)
class Forcing:
    """Insolation S and external forcing f, plus the data used for asymptotics.

    S is a positive scalar or a callable of x (evaluated at quadrature nodes);
    f is a scalar, or a callable of t returning a scalar or nodal array.
    f_inf is the large-time forcing level (defaults to f when f is constant)
    and c_f > 0 the ceiling constant with f_inf <= -c_f, used by the
    stationary thresholds.
    """

    S: Union[float, Callable] = 1.0
    f: Union[float, Callable] = 0.0
    f_inf: float | None = None
    c_f: float | None = None

    def __post_init__(self):
        if np.isscalar(self.S) and self.S <= 0:
            raise ValueError("insolation must be positive")
        if self.f_inf is None and np.isscalar(self.f):
            object.__setattr__(self, "f_inf", float(self.f))
        if self.c_f is None and self.f_inf is not None and self.f_inf < 0:
            object.__setattr__(self, "c_f", -float(self.f_inf))

    def insolation_nodal(self, basis) -> np.ndarray:
        if callable(self.S):
            vals = np.asarray(self.S(basis.nodes), dtype=float)
        else:
            vals = np.full(basis.quad_order, float(self.S))
        if np.any(vals <= 0):
            raise ValueError("insolation must be positive at all nodes")
        return vals

    def s_bounds(self, basis) -> tuple[float, float]:
        vals = self.insolation_nodal(basis)
        return float(vals.min()), float(vals.max())

    def forcing_nodal(self, t: float, basis) -> np.ndarray:
        f = self.f(t) if callable(self.f) else self.f
        f = np.asarray(f, dtype=float)
        if f.ndim == 0:
            return np.full(basis.quad_order, float(f))
        return f

    def f_inf_bounds(self) -> tuple[float, float]:
        """(sup-norm of f_inf, ceiling c_f); both required for thresholds."""
        if self.f_inf is None or self.c_f is None:
            raise ValueError("forcing lacks asymptotic data (f_inf, c_f)")
        return abs(float(self.f_inf)), float(self.c_f)
