"""Pathwise time integration of the stochastic energy balance equation.

One sample path of the noise integral z is an explicit input; the solver is a
pure function of (config, initial data, path).  Two stepping forms:

y-form (substitute y = u - z and integrate the transformed equation):
    (I + dt A) y_{k+1} = y_k + dt [ proj(Q S beta(u_k) - g(u_k) + f_k) - A z_k ]
    with u_k = y_k + z_k; the -A z_k term carries the diffusion of the noise.

u-form (safe for rough noise, adds the increment directly):
    (I + dt A) u_{k+1} = u_k + dt proj(Q S beta(u_k) - g(u_k) + f_k) + (z_{k+1} - z_k)

Both are IMEX: the diffusion solve is diagonal (divide mode n by 1 + dt mu_n),
the reaction terms are evaluated at the quadrature nodes and projected back
onto the band limit.  The explicit reaction imposes the documented step bound
dt < 1 / (Q S_1 L_beta + g'), checked with a warning.  All field arguments may
be batched with the mode axis last.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .basis import LegendreBasis, build_basis, l2_norm, to_nodal, to_spectral
from .constitutive import (
    BudykoCoalbedo,
    CoalbedoGraph,
    Forcing,
    LinearEmission,
    SellersCoalbedo,
)
from .noise import (
    CylindricalNoise,
    FiniteNoise,
    NoiseOff,
    NoiseSpec,
    SamplePath,
    gw_path,
    path_rng,
)


class GridMismatch(ValueError):
    """Sample path grid does not match the configuration grid."""


class VariantMismatch(TypeError):
    """Operation requires the other co-albedo variant."""


@dataclass(frozen=True)
class ModelConfig:
    """Everything that defines one model run except the noise realization."""

    Q: float
    coalbedo: CoalbedoGraph
    emission: LinearEmission
    forcing: Forcing
    n_modes: int = 32
    quad_order: int | None = None
    dt: float = 1e-3
    t_final: float = 5.0
    form: str = "y"
    yosida_lam: float | None = None

    def __post_init__(self):
        if self.Q <= 0:
            raise ValueError("Q must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_final != 0.0 and self.t_final < self.dt:
            raise ValueError("t_final must be 0 or at least dt")
        if self.form not in ("y", "u"):
            raise ValueError(f"unknown stepping form {self.form!r}")
        if isinstance(self.coalbedo, BudykoCoalbedo):
            if self.yosida_lam is None or self.yosida_lam <= 0:
                raise ValueError("jump co-albedo requires a positive yosida_lam")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def basis(self) -> LegendreBasis:
        return build_basis(self.n_modes, self.quad_order)

    def beta(self, u) -> np.ndarray:
        if isinstance(self.coalbedo, BudykoCoalbedo):
            return self.coalbedo.yosida(self.yosida_lam, u)
        return self.coalbedo(u)

    def beta_slope(self, u) -> np.ndarray:
        if isinstance(self.coalbedo, BudykoCoalbedo):
            return self.coalbedo.yosida_slope(self.yosida_lam, u)
        return self.coalbedo.slope(u)

    def beta_lipschitz(self) -> float:
        if isinstance(self.coalbedo, BudykoCoalbedo):
            return self.coalbedo.yosida_lipschitz(self.yosida_lam)
        return self.coalbedo.lipschitz

    def j_primitive(self, r) -> np.ndarray:
        if isinstance(self.coalbedo, BudykoCoalbedo):
            return self.coalbedo.yosida_primitive(self.yosida_lam, r)
        return self.coalbedo.primitive(r)

    def stable_dt(self, basis: LegendreBasis) -> float:
        _, s_max = self.forcing.s_bounds(basis)
        return 1.0 / (
            self.Q * s_max * self.beta_lipschitz() + self.emission.derivative_bound()
        )

    def as_field(self, u0, basis: LegendreBasis) -> np.ndarray:
        """Coerce a scalar or coefficient vector to spectral coefficients."""
        if np.isscalar(u0):
            return basis.constant_field(float(u0))
        u0 = np.asarray(u0, dtype=float)
        if u0.shape[-1] != basis.n_modes:
            raise GridMismatch("initial field does not match the basis size")
        return u0


def zero_path(cfg: ModelConfig, n_steps: int | None = None) -> SamplePath:
    """The deterministic (noise-off) path on the configuration grid."""
    return gw_path(
        NoiseOff(), cfg.dt, cfg.n_steps if n_steps is None else n_steps, 0, cfg.n_modes
    )


def _check_grid(cfg: ModelConfig, path: SamplePath) -> None:
    if path.n_steps != cfg.n_steps:
        raise GridMismatch(
            f"path has {path.n_steps} steps, config wants {cfg.n_steps}"
        )
    if path.n_steps > 0 and abs(path.dt - cfg.dt) > 1e-12 * max(1.0, cfg.dt):
        raise GridMismatch(f"path dt={path.dt} vs config dt={cfg.dt}")
    if path.z.shape[-1] != cfg.n_modes:
        raise GridMismatch("path spectral width does not match the basis size")


def step(
    state, z_k, z_k1, t_k: float, cfg: ModelConfig, basis: LegendreBasis
) -> np.ndarray:
    """Advance one IMEX step; state is y or u according to cfg.form."""
    state = np.asarray(state, dtype=float)
    dt = cfg.dt
    mu = basis.eigenvalues
    s_nodal = cfg.forcing.insolation_nodal(basis)
    f_nodal = cfg.forcing.forcing_nodal(t_k, basis)
    if cfg.form == "y":
        u_nodal = to_nodal(state + z_k, basis)
        rhs = to_spectral(
            cfg.Q * s_nodal * cfg.beta(u_nodal) - cfg.emission(u_nodal) + f_nodal,
            basis,
        )
        return (state + dt * (rhs - mu * z_k)) / (1.0 + dt * mu)
    u_nodal = to_nodal(state, basis)
    rhs = to_spectral(
        cfg.Q * s_nodal * cfg.beta(u_nodal) - cfg.emission(u_nodal) + f_nodal, basis
    )
    return (state + dt * rhs + (z_k1 - z_k)) / (1.0 + dt * mu)


def nondegeneracy_measure(
    field, eps: float, basis: LegendreBasis, center: float = -10.0
) -> np.ndarray:
    """Quadrature measure of {x : |u(x) - center| <= eps}.

    Large values of measure/eps flag the near-threshold plateaus for which
    uniqueness of jump-co-albedo solutions is not guaranteed.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    field = np.asarray(field, dtype=float)
    nodal = to_nodal(field, basis) if field.shape[-1] == basis.n_modes else field
    inside = np.abs(nodal - center) <= eps
    return inside @ basis.weights


@dataclass
class Trajectory:
    """Stored states of one run plus per-step diagnostics.

    coeffs[j] is the spectral field at times[j]; when the y-form ran,
    y_coeffs[j] + z at the same instant reproduces coeffs[j] exactly.
    """

    times: np.ndarray
    coeffs: np.ndarray
    y_coeffs: np.ndarray | None
    l2: np.ndarray
    nodal_min: np.ndarray
    nodal_max: np.ndarray
    nondeg: dict[float, np.ndarray]

    @property
    def final(self) -> np.ndarray:
        return self.coeffs[-1]


def sup_distance(a: Trajectory, b: Trajectory) -> float:
    """Largest stored-time L2 distance between two trajectories."""
    if a.coeffs.shape != b.coeffs.shape:
        raise GridMismatch("trajectories were stored on different grids")
    return float(np.max(l2_norm(a.coeffs - b.coeffs)))


def solve_path(
    cfg: ModelConfig,
    u0,
    path: SamplePath,
    store_every: int = 1,
    nondeg_eps: Sequence[float] = (),
) -> Trajectory:
    """Integrate one path; deterministic in (cfg, u0, path)."""
    basis = cfg.basis()
    _check_grid(cfg, path)
    n_steps = cfg.n_steps
    dt = cfg.dt
    mu = basis.eigenvalues
    denom = 1.0 + dt * mu
    s_nodal = cfg.forcing.insolation_nodal(basis)
    q_s = cfg.Q * s_nodal
    f_const = not callable(cfg.forcing.f)
    f_nodal = cfg.forcing.forcing_nodal(0.0, basis)
    w = basis.weights
    table_t = basis.table.T  # u_nodal @ table_t after weighting = to_spectral

    if dt >= cfg.stable_dt(basis):
        warnings.warn(
            f"dt={dt} exceeds the explicit-reaction bound {cfg.stable_dt(basis):.3g}",
            stacklevel=2,
        )

    u = cfg.as_field(u0, basis)
    y_form = cfg.form == "y"
    state = u - path.z[0] if y_form else u.copy()

    stored_idx = list(range(0, n_steps + 1, max(1, store_every)))
    if stored_idx[-1] != n_steps:
        stored_idx.append(n_steps)
    stored_pos = {k: j for j, k in enumerate(stored_idx)}
    n_stored = len(stored_idx)
    coeffs = np.empty((n_stored, cfg.n_modes))
    y_coeffs = np.empty((n_stored, cfg.n_modes)) if y_form else None

    def record(k, state_k):
        j = stored_pos.get(k)
        if j is None:
            return
        if y_form:
            y_coeffs[j] = state_k
            coeffs[j] = state_k + path.z[k]
        else:
            coeffs[j] = state_k

    record(0, state)
    emission = cfg.emission
    beta = cfg.beta
    for k in range(n_steps):
        z_k = path.z[k]
        if not f_const:
            f_nodal = cfg.forcing.forcing_nodal(k * dt, basis)
        if y_form:
            u_nodal = (state + z_k) @ basis.table
            rhs = ((q_s * beta(u_nodal) - emission(u_nodal) + f_nodal) * w) @ table_t
            state = (state + dt * (rhs - mu * z_k)) / denom
        else:
            u_nodal = state @ basis.table
            rhs = ((q_s * beta(u_nodal) - emission(u_nodal) + f_nodal) * w) @ table_t
            state = (state + dt * rhs + (path.z[k + 1] - z_k)) / denom
        record(k + 1, state)

    nodal = to_nodal(coeffs, basis)
    nondeg = {
        float(e): nondegeneracy_measure(nodal, e, basis, cfg.coalbedo.threshold)
        for e in nondeg_eps
    }
    if isinstance(cfg.coalbedo, BudykoCoalbedo):
        plateau = nondegeneracy_measure(nodal, 0.1, basis, cfg.coalbedo.threshold)
        if np.any(plateau > 1.0):
            warnings.warn(
                "trajectory develops a plateau near the ice threshold; "
                "jump-co-albedo solutions may be non-unique there",
                stacklevel=2,
            )
    return Trajectory(
        times=path.times[stored_idx],
        coeffs=coeffs,
        y_coeffs=y_coeffs,
        l2=l2_norm(coeffs),
        nodal_min=nodal.min(axis=-1),
        nodal_max=nodal.max(axis=-1),
        nondeg=nondeg,
    )


@dataclass
class ComparisonResult:
    """Pathwise comparison of two runs sharing one noise realization."""

    times: np.ndarray
    gap: np.ndarray
    bound: np.ndarray
    pos_gap: np.ndarray
    pos_bound: np.ndarray
    inputs_ordered: bool
    max_order_violation: float

    @property
    def order_preserved(self) -> bool:
        """Ordered data implies ordered trajectories (vacuous otherwise)."""
        return (not self.inputs_ordered) or self.max_order_violation <= 1e-12

    @property
    def bound_holds(self) -> bool:
        slack = 1e-12 * np.maximum(1.0, self.bound)
        return bool(
            np.all(self.gap <= self.bound + slack)
            and np.all(self.pos_gap <= self.pos_bound + slack)
        )

    @property
    def sup_gap(self) -> float:
        return float(np.max(self.gap))


def _pos_norm(diff_nodal, basis: LegendreBasis) -> np.ndarray:
    clipped = np.clip(diff_nodal, 0.0, None)
    return np.sqrt((clipped * clipped) @ basis.weights)


def comparison_check(
    cfg: ModelConfig, u0, u0_hat, f, f_hat, path: SamplePath,
    store_every: int = 1,
) -> ComparisonResult:
    """Run the pair (u0, f) / (u0_hat, f_hat) on one path and compare.

    Checks the exponential gap estimate
        ||u - u_hat||(t) <= e^{t Q S_0 L_beta} (||du_0|| + int_0^t ||df||)
    plus its positive-part version, and whether nodal ordering of the data
    propagated to every stored step.
    """
    if not isinstance(cfg.coalbedo, SellersCoalbedo):
        raise VariantMismatch("comparison estimate needs the Lipschitz variant")
    basis = cfg.basis()
    cfg_a = replace(cfg, forcing=replace(cfg.forcing, f=f, f_inf=None, c_f=None))
    cfg_b = replace(cfg, forcing=replace(cfg.forcing, f=f_hat, f_inf=None, c_f=None))
    traj_a = solve_path(cfg_a, u0, path, store_every)
    traj_b = solve_path(cfg_b, u0_hat, path, store_every)

    diff = traj_a.coeffs - traj_b.coeffs
    diff_nodal = to_nodal(diff, basis)
    gap = l2_norm(diff)
    pos_gap = _pos_norm(diff_nodal, basis)

    s_min, _ = cfg.forcing.s_bounds(basis)
    rate = cfg.Q * s_min * cfg.coalbedo.lipschitz
    du0 = cfg.as_field(u0, basis) - cfg.as_field(u0_hat, basis)
    du0_nodal = to_nodal(du0, basis)

    # left-point cumulative integral of the forcing gap on the full grid
    n_steps = cfg.n_steps
    f_static = not (callable(cfg_a.forcing.f) or callable(cfg_b.forcing.f))
    eval_steps = (0,) if f_static else range(n_steps + 1)
    df_norm = np.empty(n_steps + 1)
    df_pos_norm = np.empty(n_steps + 1)
    f_ordered = True
    for k in eval_steps:
        fa = cfg_a.forcing.forcing_nodal(k * cfg.dt, basis)
        fb = cfg_b.forcing.forcing_nodal(k * cfg.dt, basis)
        d = fa - fb
        df_norm[k] = np.sqrt((d * d) @ basis.weights)
        df_pos_norm[k] = _pos_norm(d, basis)
        f_ordered &= bool(np.all(d <= 1e-12))
    if f_static:
        df_norm[:] = df_norm[0]
        df_pos_norm[:] = df_pos_norm[0]
    cum = np.concatenate([[0.0], np.cumsum(df_norm[:-1]) * cfg.dt])
    cum_pos = np.concatenate([[0.0], np.cumsum(df_pos_norm[:-1]) * cfg.dt])

    times = traj_a.times
    idx = np.rint(times / cfg.dt).astype(int) if n_steps else np.array([0])
    growth = np.exp(rate * times)
    bound = growth * (l2_norm(du0) + cum[idx])
    pos_bound = growth * (_pos_norm(du0_nodal, basis) + cum_pos[idx])

    inputs_ordered = bool(np.all(du0_nodal <= 1e-12)) and f_ordered
    max_violation = float(np.max(diff_nodal)) if diff_nodal.size else 0.0
    return ComparisonResult(
        times=times,
        gap=gap,
        bound=bound,
        pos_gap=pos_gap,
        pos_bound=pos_bound,
        inputs_ordered=inputs_ordered,
        max_order_violation=max_violation,
    )


@dataclass
class LadderResult:
    """Distances between consecutive rungs of a parameter ladder."""

    values: list[float]
    distances: list[float]

    @property
    def monotone(self) -> bool:
        return all(
            b <= a * (1 + 1e-9) for a, b in zip(self.distances, self.distances[1:])
        )


def lambda_convergence(
    cfg: ModelConfig, lambdas: Sequence[float], u0, path: SamplePath,
    store_every: int = 1,
) -> LadderResult:
    """Sup-time distances between consecutive regularization levels.

    The ladder must decrease strictly; an empty ladder (fewer than two rungs)
    yields an empty table.
    """
    lambdas = [float(v) for v in lambdas]
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda ladder must decrease strictly")
    if not isinstance(cfg.coalbedo, BudykoCoalbedo):
        raise VariantMismatch("regularization ladder needs the jump variant")
    runs = [
        solve_path(replace(cfg, yosida_lam=lam), u0, path, store_every)
        for lam in lambdas
    ]
    dists = [sup_distance(a, b) for a, b in zip(runs, runs[1:])]
    return LadderResult(values=lambdas, distances=dists)


@dataclass
class EpsLadderResult:
    """Distance to the deterministic run for each noise amplitude."""

    values: list[float]
    distances: list[float]

    @property
    def monotone(self) -> bool:
        return all(
            b <= a * (1 + 1e-9) for a, b in zip(self.distances, self.distances[1:])
        )

    @property
    def ratios(self) -> list[float]:
        return [
            b / a if a else float("nan")
            for a, b in zip(self.distances, self.distances[1:])
        ]


def eps_convergence(
    cfg: ModelConfig, eps_ladder: Sequence[float], u0, path: SamplePath,
    store_every: int = 1,
) -> EpsLadderResult:
    """Distances between the eps-scaled-noise runs and the deterministic one.

    All rungs reuse the same realization scaled by eps, so the table is a
    coupled-path convergence experiment, not a Monte Carlo one.
    """
    base = solve_path(cfg, u0, path.scaled(0.0), store_every)
    dists = []
    for eps in eps_ladder:
        if eps == 0:
            dists.append(0.0)
            continue
        run = solve_path(cfg, u0, path.scaled(float(eps)), store_every)
        dists.append(sup_distance(run, base))
    return EpsLadderResult(values=[float(e) for e in eps_ladder], distances=dists)


@dataclass
class EnsembleResult:
    """Stored spectral states of many paths: coeffs[j, p] at times[j] for path p."""

    times: np.ndarray
    coeffs: np.ndarray
    seeds: tuple[int, int]


def solve_ensemble(
    cfg: ModelConfig,
    u0,
    noise: NoiseSpec,
    seed: int,
    n_paths: int,
    store_every: int = 1,
    time_chunk: int = 4096,
    path_offset: int = 0,
) -> EnsembleResult:
    """Integrate n_paths independent realizations in lockstep.

    Path p uses the stream keyed by (seed, path_offset + p), identical to
    gw_path(..., path_index=path_offset + p), so a single path re-run in
    isolation reproduces its ensemble member bit-exactly and disjoint blocks
    tile a larger ensemble.  Increments are drawn in time chunks to bound
    memory; the reduction order over paths is fixed.
    """
    basis = cfg.basis()
    n_steps = cfg.n_steps
    dt = cfg.dt
    mu = basis.eigenvalues
    denom = 1.0 + dt * mu
    s_nodal = cfg.forcing.insolation_nodal(basis)
    q_s = cfg.Q * s_nodal
    f_const = not callable(cfg.forcing.f)
    f_nodal = cfg.forcing.forcing_nodal(0.0, basis)
    w = basis.weights
    table_t = basis.table.T
    y_form = cfg.form == "y"

    if isinstance(noise, CylindricalNoise):
        if noise.n_modes >= cfg.n_modes:
            raise GridMismatch("noise modes must fit inside the basis")
        slots = slice(1, noise.n_modes + 1)
        scale = noise.mode_scale
        m = noise.n_modes
    elif isinstance(noise, FiniteNoise):
        if noise.fields.shape[1] != cfg.n_modes:
            raise GridMismatch("finite-noise fields do not match the basis size")
        slots = None
        m = noise.n_modes
    else:
        slots = None
        m = 0

    stored_idx = list(range(0, n_steps + 1, max(1, store_every)))
    if stored_idx[-1] != n_steps:
        stored_idx.append(n_steps)
    stored_pos = {k: j for j, k in enumerate(stored_idx)}
    coeffs = np.empty((len(stored_idx), n_paths, cfg.n_modes))

    u_init = cfg.as_field(u0, basis)
    state = np.tile(u_init, (n_paths, 1))
    z = np.zeros((n_paths, cfg.n_modes))
    rngs = [path_rng(seed, path_offset + p) for p in range(n_paths)]

    def record(k, state_k):
        j = stored_pos.get(k)
        if j is not None:
            coeffs[j] = state_k + z if y_form else state_k

    record(0, state)
    emission = cfg.emission
    beta = cfg.beta
    sqrt_dt = np.sqrt(dt)
    for start in range(0, n_steps, time_chunk):
        span = min(time_chunk, n_steps - start)
        if m:
            inc = np.empty((n_paths, span, m))
            for p, rng in enumerate(rngs):
                inc[p] = rng.normal(0.0, sqrt_dt, size=(span, m))
        for j in range(span):
            k = start + j
            if not f_const:
                f_nodal = cfg.forcing.forcing_nodal(k * dt, basis)
            z_prev = z
            if isinstance(noise, CylindricalNoise):
                z = z.copy()
                z[:, slots] += (float(noise.psi(k * dt)) * scale) * inc[:, j, :]
            elif isinstance(noise, FiniteNoise):
                z = z + inc[:, j, :] @ noise.fields
            if y_form:
                u_nodal = (state + z_prev) @ basis.table
                rhs = ((q_s * beta(u_nodal) - emission(u_nodal) + f_nodal) * w) @ table_t
                state = (state + dt * (rhs - mu * z_prev)) / denom
            else:
                u_nodal = state @ basis.table
                rhs = ((q_s * beta(u_nodal) - emission(u_nodal) + f_nodal) * w) @ table_t
                state = (state + dt * rhs + (z - z_prev)) / denom
            record(k + 1, state)
    return EnsembleResult(
        times=dt * np.asarray(stored_idx, dtype=float),
        coeffs=coeffs,
        seeds=(seed, n_paths),
    )
