"""Legendre eigenbasis of the degenerate latitude diffusion operator.

The diffusion operator A u = -d/dx((1 - x^2) du/dx) on I = (-1, 1) needs no
boundary conditions (the flux (1 - x^2) u' vanishes at the poles) and is
diagonal in the basis of L2-orthonormal Legendre polynomials

    e_n(x) = sqrt((2n + 1) / 2) * P_n(x),      A e_n = mu_n e_n,  mu_n = n(n+1).

Fields live either as coefficient vectors in this basis ("spectral") or as
values at Gauss-Legendre quadrature nodes ("nodal").  All operations accept
batches: the mode/node axis is always the last one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class QuadratureOrderTooLow(ValueError):
    """Quadrature order below n_modes + 1 would alias the transforms."""


class DimensionMismatch(ValueError):
    """Array length does not match the basis mode count / quadrature order."""


class NegativeTime(ValueError):
    """Semigroup is only defined forward in time."""


def legendre_poly(n: int, x) -> np.ndarray:
    """Evaluate P_n(x) by the three-term recurrence.

    (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}, with P_0 = 1, P_1 = x.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p


def legendre_poly_deriv(n: int, x) -> np.ndarray:
    """Evaluate dP_n/dx via the identity (1 - x^2) P_n' = n (P_{n-1} - x P_n).

    Exact for |x| < 1; quadrature nodes are always strictly interior.
    """
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return n * (legendre_poly(n - 1, x) - x * legendre_poly(n, x)) / (1.0 - x * x)


def basis_eval(n: int, x) -> np.ndarray:
    """Evaluate the orthonormal eigenfunction e_n(x) = sqrt((2n+1)/2) P_n(x)."""
    return np.sqrt((2 * n + 1) / 2.0) * legendre_poly(n, x)


@dataclass(frozen=True)
class LegendreBasis:
    """Precomputed eigenbasis data: quadrature rule, mode table, eigenvalues.

    table[n, j] = e_n(x_j); eigenvalues[n] = n(n+1).  Immutable after
    construction and safe to share between concurrently running paths.
    """

    n_modes: int
    quad_order: int
    nodes: np.ndarray
    weights: np.ndarray
    table: np.ndarray
    eigenvalues: np.ndarray

    def constant_field(self, value: float) -> np.ndarray:
        """Spectral coefficients of the constant function u(x) = value."""
        c = np.zeros(self.n_modes)
        c[0] = value * np.sqrt(2.0)
        return c


@lru_cache(maxsize=32)
def build_basis(n_modes: int, quad_order: int | None = None) -> LegendreBasis:
    """Build the basis with n_modes eigenfunctions and a Gauss rule of order quad_order.

    quad_order defaults to 2 * n_modes, which integrates products of two
    band-limited fields exactly; it must be at least n_modes + 1.
    """
    if n_modes < 1:
        raise ValueError("need at least one mode")
    if quad_order is None:
        quad_order = 2 * n_modes
    if quad_order < n_modes + 1:
        raise QuadratureOrderTooLow(
            f"quad_order={quad_order} < n_modes+1={n_modes + 1}"
        )
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)
    table = np.vstack([basis_eval(n, nodes) for n in range(n_modes)])
    mu = np.arange(n_modes, dtype=float)
    mu = mu * (mu + 1.0)
    out = LegendreBasis(
        n_modes=n_modes,
        quad_order=quad_order,
        nodes=nodes,
        weights=weights,
        table=table,
        eigenvalues=mu,
    )
    for arr in (out.nodes, out.weights, out.table, out.eigenvalues):
        arr.setflags(write=False)
    return out


def to_spectral(values, basis: LegendreBasis) -> np.ndarray:
    """Project nodal values onto the basis: c_n = sum_j w_j e_n(x_j) v_j."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != basis.quad_order:
        raise DimensionMismatch(
            f"got {values.shape[-1]} nodal values, quadrature order is {basis.quad_order}"
        )
    return (values * basis.weights) @ basis.table.T


def to_nodal(coeffs, basis: LegendreBasis) -> np.ndarray:
    """Evaluate a spectral field at the quadrature nodes."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.n_modes:
        raise DimensionMismatch(
            f"got {coeffs.shape[-1]} coefficients, basis has {basis.n_modes} modes"
        )
    return coeffs @ basis.table


def apply_operator(coeffs, basis: LegendreBasis) -> np.ndarray:
    """Apply the diffusion operator: (A u)_n = mu_n c_n."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.n_modes:
        raise DimensionMismatch("coefficient count does not match basis")
    return coeffs * basis.eigenvalues


def semigroup_apply(coeffs, t: float, basis: LegendreBasis) -> np.ndarray:
    """Apply the diffusion semigroup e^{-tA}: coefficients decay as e^{-mu_n t}.

    The L2 norm is non-increasing in t; mode 0 (the spatial mean) is preserved.
    """
    if t < 0:
        raise NegativeTime(f"t={t}")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.n_modes:
        raise DimensionMismatch("coefficient count does not match basis")
    return coeffs * np.exp(-basis.eigenvalues * t)


def l2_norm(coeffs) -> np.ndarray:
    """L2(I) norm of a spectral field (Parseval)."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.sqrt(np.sum(coeffs * coeffs, axis=-1))


def quad_integral(values, basis: LegendreBasis) -> np.ndarray:
    """Integrate nodal values over I with the stored quadrature rule."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != basis.quad_order:
        raise DimensionMismatch("nodal value count does not match quadrature order")
    return values @ basis.weights
