"""Stationary states: equilibria, branch bounds, thresholds, multiplicity scan.

The stationary balance is A u + g(u) = Q S beta(u) + f_inf on I.  Equilibria
are found by Newton iteration on the spectral residual (the analytic Jacobian
diag(mu) + projected nodal slope makes the unstable middle branch reachable),
with a damped monotone fixed point as fallback; the same damped map, started
from the constant sub/supersolution, brackets every solution between the
minimal and maximal branches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import (
    LegendreBasis,
    basis_eval,
    l2_norm,
    quad_integral,
    to_nodal,
    to_spectral,
)
from .constitutive import SellersCoalbedo
from .solver import ModelConfig


class NoConvergence(RuntimeError):
    """Equilibrium iteration failed to reach the residual tolerance."""


class HypothesisViolated(ValueError):
    """Threshold data violates the sign condition on g(-10-eps) + c_f."""


def _f_inf_nodal(cfg: ModelConfig, basis: LegendreBasis) -> np.ndarray:
    f_inf = cfg.forcing.f_inf
    if f_inf is None:
        raise ValueError("stationary analysis needs forcing.f_inf")
    return np.full(basis.quad_order, float(f_inf))


def stationary_residual(
    coeffs, Q: float, cfg: ModelConfig, basis: LegendreBasis
) -> np.ndarray:
    """Spectral residual A u + proj(g(u) - Q S beta(u) - f_inf)."""
    coeffs = np.asarray(coeffs, dtype=float)
    u_nodal = to_nodal(coeffs, basis)
    s_nodal = cfg.forcing.insolation_nodal(basis)
    f_nodal = _f_inf_nodal(cfg, basis)
    nonlin = cfg.emission(u_nodal) - Q * s_nodal * cfg.beta(u_nodal) - f_nodal
    return coeffs * basis.eigenvalues + to_spectral(nonlin, basis)


def _jacobian(coeffs, Q, cfg, basis) -> np.ndarray:
    u_nodal = to_nodal(coeffs, basis)
    s_nodal = cfg.forcing.insolation_nodal(basis)
    slope = cfg.emission.derivative_bound() - Q * s_nodal * cfg.beta_slope(u_nodal)
    proj = (basis.table * basis.weights) * slope  # rows: modes, cols: nodes
    return np.diag(basis.eigenvalues) + proj @ basis.table.T


def solve_stationary(
    Q: float,
    cfg: ModelConfig,
    init,
    tol: float = 1e-9,
    max_iter: int = 60,
) -> np.ndarray:
    """Find an equilibrium near init, or raise NoConvergence.

    Newton first (reaches unstable branches); if it stalls or diverges, fall
    back to the damped fixed point, which converges to a stable branch.
    """
    basis = cfg.basis()
    c = cfg.as_field(init, basis).astype(float).copy()
    if not np.all(np.isfinite(c)):
        raise ValueError("initial guess must be finite")
    for _ in range(max_iter):
        res = stationary_residual(c, Q, cfg, basis)
        if l2_norm(res) < tol:
            return c
        try:
            delta = np.linalg.solve(_jacobian(c, Q, cfg, basis), res)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)) or l2_norm(delta) > 1e8:
            break
        c = c - delta
    c = _damped_fixed_point(Q, cfg, cfg.as_field(init, basis), tol)
    if c is None:
        raise NoConvergence(f"no equilibrium reached from the given init at Q={Q}")
    return c


def _damping(Q: float, cfg: ModelConfig, basis: LegendreBasis) -> float:
    s_min, _ = cfg.forcing.s_bounds(basis)
    return Q * s_min * cfg.beta_lipschitz() + cfg.emission.derivative_bound()


def _damped_step(coeffs, Q, cfg, basis, delta, s_nodal, f_nodal):
    u_nodal = to_nodal(coeffs, basis)
    rhs = Q * s_nodal * cfg.beta(u_nodal) - cfg.emission(u_nodal) + f_nodal
    return (to_spectral(rhs, basis) + delta * coeffs) / (basis.eigenvalues + delta)


def _damped_fixed_point(Q, cfg, coeffs, tol, max_iter=200000):
    basis = cfg.basis()
    delta = _damping(Q, cfg, basis)
    s_nodal = cfg.forcing.insolation_nodal(basis)
    f_nodal = _f_inf_nodal(cfg, basis)
    c = coeffs
    for _ in range(max_iter):
        c_next = _damped_step(c, Q, cfg, basis, delta, s_nodal, f_nodal)
        if not np.all(np.isfinite(c_next)):
            return None
        if l2_norm(stationary_residual(c_next, Q, cfg, basis)) < tol:
            return c_next
        c = c_next
    return None


def solution_bracket(Q: float, cfg: ModelConfig, basis: LegendreBasis):
    """Constant sub/supersolution levels bounding every equilibrium."""
    s_min, s_max = cfg.forcing.s_bounds(basis)
    f_norm, c_f = cfg.forcing.f_inf_bounds()
    ice, warm = cfg.coalbedo.ice, cfg.coalbedo.warm
    lo = float(cfg.emission.inverse(Q * s_min * ice - f_norm))
    hi = float(cfg.emission.inverse(Q * s_max * warm - c_f))
    return lo, hi


def minimal_maximal(
    Q: float,
    cfg: ModelConfig,
    tol: float = 1e-9,
    max_iter: int = 200000,
    return_iterates: bool = False,
):
    """Minimal and maximal equilibria by monotone iteration from the bracket.

    The damped map with delta >= Q S_0 L_beta + g' is order-preserving, so the
    sequence from the constant subsolution increases to the minimal solution
    and the one from the supersolution decreases to the maximal solution.
    """
    basis = cfg.basis()
    delta = _damping(Q, cfg, basis)
    s_nodal = cfg.forcing.insolation_nodal(basis)
    f_nodal = _f_inf_nodal(cfg, basis)
    lo, hi = solution_bracket(Q, cfg, basis)
    out, iterates = [], []
    for level in (lo, hi):
        c = basis.constant_field(level)
        trail = [c]
        for _ in range(max_iter):
            c_next = _damped_step(c, Q, cfg, basis, delta, s_nodal, f_nodal)
            trail.append(c_next)
            if l2_norm(stationary_residual(c_next, Q, cfg, basis)) < tol:
                break
            c = c_next
        else:
            raise NoConvergence(f"monotone iteration stalled at Q={Q}")
        out.append(trail[-1])
        iterates.append(trail)
    u_min, u_max = out
    if return_iterates:
        return u_min, u_max, iterates
    return u_min, u_max


@dataclass(frozen=True)
class Thresholds:
    """Solar-constant thresholds separating the multiplicity regimes.

    q1..q4 use the emission law g at the ramp edges (the reading consistent
    with the constant-solution balance); alt_q1..alt_q4 use its primitive.
    Both are reported because the source notation is ambiguous; `valid` is the
    balance hypothesis under which the regime classification applies.
    """

    q1: float
    q2: float
    q3: float
    q4: float
    alt_q1: float
    alt_q2: float
    alt_q3: float
    alt_q4: float
    valid: bool

    @property
    def window(self) -> tuple[float, float]:
        """The open interval of Q with at least three equilibria."""
        return self.q2, self.q3


def q_thresholds(cfg: ModelConfig, eps: float | None = None) -> Thresholds:
    """Balanced constants Q1..Q4 from the co-albedo edges and the forcing data."""
    basis = cfg.basis()
    graph = cfg.coalbedo
    if eps is None:
        eps = graph.half_width if isinstance(graph, SellersCoalbedo) else 0.0
    s_min, s_max = cfg.forcing.s_bounds(basis)
    f_norm, c_f = cfg.forcing.f_inf_bounds()
    ice, warm = graph.ice, graph.warm
    u_c = graph.threshold

    def quads(gfun):
        lo_num = float(gfun(u_c - eps)) + c_f
        hi_num = float(gfun(u_c + eps)) + f_norm
        return (
            lo_num / (s_max * warm),
            hi_num / (s_min * warm),
            lo_num / (s_max * ice),
            hi_num / (s_min * ice),
            lo_num,
            hi_num,
        )

    q1, q2, q3, q4, lo_num, hi_num = quads(cfg.emission)
    a1, a2, a3, a4, _, _ = quads(cfg.emission.primitive)
    if lo_num <= 0:
        raise HypothesisViolated(
            f"g({u_c - eps}) + c_f = {lo_num} must be positive"
        )
    valid = hi_num / lo_num <= (s_min * warm) / (s_max * ice)
    return Thresholds(q1, q2, q3, q4, a1, a2, a3, a4, valid)


def energy_functional(
    coeffs, Q: float, cfg: ModelConfig, basis: LegendreBasis
) -> float:
    """Variational energy whose critical points are the equilibria.

    (1/2) int rho |u'|^2 + int G(u) - int f_inf u - Q int S j(u), with G the
    emission primitive and j the co-albedo primitive; the gradient in spectral
    coordinates is exactly stationary_residual.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    u_nodal = to_nodal(coeffs, basis)
    s_nodal = cfg.forcing.insolation_nodal(basis)
    f_nodal = _f_inf_nodal(cfg, basis)
    grad_term = 0.5 * float(np.sum(basis.eigenvalues * coeffs * coeffs))
    dens = (
        cfg.emission.primitive(u_nodal)
        - f_nodal * u_nodal
        - Q * s_nodal * cfg.j_primitive(u_nodal)
    )
    return grad_term + float(quad_integral(dens, basis))


@dataclass
class Equilibrium:
    """One converged stationary state with its certificate data."""

    coeffs: np.ndarray
    residual: float
    energy: float
    classification: str
    u_at_center: float


@dataclass
class StationaryBranch:
    """All deduplicated equilibria found at one Q."""

    Q: float
    equilibria: list[Equilibrium]

    @property
    def count(self) -> int:
        return len(self.equilibria)


def _classify(nodal: np.ndarray, threshold: float) -> str:
    if np.max(nodal) < threshold:
        return "below"
    if np.min(nodal) > threshold:
        return "above"
    return "mixed"


def _scalar_balance_roots(Q, cfg, basis, lo, hi, samples=4001):
    """Roots of g(u) = Q S beta(u) + f_inf over the bracket, for constant data."""
    f_inf = float(cfg.forcing.f_inf)
    s_val = float(np.mean(cfg.forcing.insolation_nodal(basis)))

    def h(u):
        return float(cfg.emission(u) - Q * s_val * cfg.beta(u) - f_inf)

    grid = np.linspace(lo - 1.0, hi + 1.0, samples)
    vals = np.array([h(u) for u in grid])
    roots = []
    for a, b, va, vb in zip(grid, grid[1:], vals, vals[1:]):
        if va == 0.0:
            roots.append(float(a))
        if va * vb < 0:
            x, y = a, b
            for _ in range(80):
                mid = 0.5 * (x + y)
                if h(x) * h(mid) <= 0:
                    y = mid
                else:
                    x = mid
            roots.append(0.5 * (x + y))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def default_multistart(Q: float, cfg: ModelConfig) -> list[float]:
    """Constant inits guaranteed to reach every branch for constant data."""
    basis = cfg.basis()
    lo, hi = solution_bracket(Q, cfg, basis)
    inits = [lo, hi, cfg.coalbedo.threshold]
    if not callable(cfg.forcing.S) and not callable(cfg.forcing.f):
        roots = _scalar_balance_roots(Q, cfg, basis, lo, hi)
        inits.extend(roots)
        inits.extend(
            0.5 * (a + b) for a, b in zip(roots, roots[1:])
        )
    return inits


def scan_q(
    cfg: ModelConfig,
    q_values: Sequence[float],
    inits: Sequence[float] | None = None,
    tol: float = 1e-9,
    dedup_tol: float = 1e-6,
) -> list[StationaryBranch]:
    """Multistart equilibrium search over a sorted Q grid.

    Missing branches are reported (lower counts), never fatal; equilibria
    closer than dedup_tol in L2 are merged.
    """
    basis = cfg.basis()
    center = np.array([float(basis_eval(n, 0.0)) for n in range(basis.n_modes)])
    branches = []
    for Q in q_values:
        found: list[np.ndarray] = []
        start_points = list(inits) if inits is not None else default_multistart(Q, cfg)
        for init in start_points:
            try:
                c = solve_stationary(Q, cfg, init, tol=tol)
            except NoConvergence:
                continue
            if any(l2_norm(c - other) <= dedup_tol for other in found):
                continue
            found.append(c)
        found.sort(key=lambda c: c[0])
        eqs = []
        for c in found:
            nodal = to_nodal(c, basis)
            eqs.append(
                Equilibrium(
                    coeffs=c,
                    residual=float(l2_norm(stationary_residual(c, Q, cfg, basis))),
                    energy=energy_functional(c, Q, cfg, basis),
                    classification=_classify(nodal, cfg.coalbedo.threshold),
                    u_at_center=float(c @ center),
                )
            )
        branches.append(StationaryBranch(Q=float(Q), equilibria=eqs))
    return branches
