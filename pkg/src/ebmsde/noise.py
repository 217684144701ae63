"""Brownian forcing in spectral coordinates.

Implements sampling of Brownian increments, the pathwise stochastic integral
(the running integral of the noise operator against the cylindrical Wiener
process, held as a spectral trajectory), the stochastic convolution with the
diffusion semigroup (per mode an exact Ornstein-Uhlenbeck recursion), and the
Monte Carlo second-moment checks against their closed-form targets.

Cylindrical noise drives eigenmode n (n >= 1; the constant mode is excluded
because its eigenvalue vanishes) with weight gain_n / sqrt(mu_n) and an
optional scalar time modulation psi(t).  All Monte Carlo estimators reduce in
fixed path order; path streams are counter-based (Philox) keyed by
(seed, path index), so results do not depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .basis import LegendreBasis, to_nodal


class ModeOverflow(ValueError):
    """Noise modes must fit strictly inside the spectral resolution."""


class RequiresConstantG(ValueError):
    """Exact convolution recursion needs a time-constant noise operator."""


@dataclass(frozen=True)
class ConstantModulation:
    """psi(t) = scale."""

    scale: float = 1.0

    def __call__(self, t) -> np.ndarray:
        return np.full_like(np.asarray(t, dtype=float), self.scale)

    def squared_integral(self, t: float) -> float:
        return self.scale**2 * t


@dataclass(frozen=True)
class PowerDecayModulation:
    """psi(t) = (t + 1/a)^(-alpha) with a > 0 and 2*alpha > 1.

    The squared integral over (0, inf) is finite: a^(2 alpha - 1)/(2 alpha - 1),
    which is what makes the large-time limit of the noise integral exist.
    """

    a: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("a must be positive")
        if 2.0 * self.alpha <= 1.0:
            raise ValueError(f"needs 2*alpha > 1, got alpha={self.alpha}")

    def __call__(self, t) -> np.ndarray:
        return (np.asarray(t, dtype=float) + 1.0 / self.a) ** (-self.alpha)

    def squared_integral(self, t: float) -> float:
        p = 2.0 * self.alpha - 1.0
        full = self.a**p / p
        if math.isinf(t):
            return full
        return full - (t + 1.0 / self.a) ** (-p) / p


Modulation = Union[ConstantModulation, PowerDecayModulation]


@dataclass(frozen=True)
class NoiseOff:
    """No stochastic forcing."""

    n_modes: int = 0


@dataclass(frozen=True)
class FiniteNoise:
    """Finitely many Brownian motions, each multiplying a fixed spectral field.

    fields[k] holds the coefficient vector of the field attached to the k-th
    Brownian motion.
    """

    fields: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.fields, dtype=float))
        object.__setattr__(self, "fields", arr)

    @property
    def n_modes(self) -> int:
        return self.fields.shape[0]


@dataclass(frozen=True)
class CylindricalNoise:
    """Independent Brownian motions on eigenmodes n = 1..n_modes.

    Mode n carries weight gains[n-1] / sqrt(mu_n).  Explicit gains win;
    otherwise gains default to mu_n^(-sigma), so sigma=0 gives unit gains and
    sigma=1 the smoother choice used for solver runs.
    """

    n_modes: int
    gains: np.ndarray | None = None
    sigma: float = 0.0
    psi: Modulation = field(default_factory=ConstantModulation)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("cylindrical noise needs at least one mode")
        if self.gains is not None:
            g = np.asarray(self.gains, dtype=float)
            if g.shape != (self.n_modes,):
                raise ValueError("gains length must equal n_modes")
            if np.any(g < 0):
                raise ValueError("gains must be nonnegative")
            object.__setattr__(self, "gains", g)

    @property
    def mode_eigenvalues(self) -> np.ndarray:
        n = np.arange(1, self.n_modes + 1, dtype=float)
        return n * (n + 1.0)

    @property
    def gains_array(self) -> np.ndarray:
        if self.gains is not None:
            return self.gains
        return self.mode_eigenvalues ** (-self.sigma)

    @property
    def mode_scale(self) -> np.ndarray:
        """Per-mode amplitude gain_n / sqrt(mu_n)."""
        return self.gains_array / np.sqrt(self.mode_eigenvalues)


NoiseSpec = Union[NoiseOff, FiniteNoise, CylindricalNoise]


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    """Counter-based stream for one path, keyed by (seed, path_index)."""
    bitgen = np.random.Philox(key=seed)
    if path_index:
        bitgen = bitgen.jumped(path_index)
    return np.random.Generator(bitgen)


def sample_increments(
    seed: int, dt: float, n_steps: int, n_procs: int, path_index: int = 0
) -> np.ndarray:
    """Draw the (n_steps, n_procs) matrix of i.i.d. Normal(0, dt) increments."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 0:
        raise ValueError("step count must be nonnegative")
    rng = path_rng(seed, path_index)
    return rng.normal(0.0, math.sqrt(dt), size=(n_steps, n_procs))


@dataclass(frozen=True)
class SamplePath:
    """One realization of the driving noise on a uniform grid.

    z[k] is the spectral trajectory of the running noise integral at t_k
    (z[0] = 0); increments[k, j] is the k-th Brownian increment of process j.
    Regenerating with the same (seed, path_index, spec) is bit-exact.
    """

    seed: int
    path_index: int
    times: np.ndarray
    increments: np.ndarray
    z: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def scaled(self, factor: float) -> "SamplePath":
        """The same realization with the noise amplitude multiplied by factor."""
        return replace(self, increments=factor * self.increments, z=factor * self.z)


def _cylindrical_z(noise: CylindricalNoise, times, increments) -> np.ndarray:
    """Left-point Ito sums of psi dB, scaled per mode; shape (K+1, n_modes)."""
    psi_left = noise.psi(times[:-1])
    weighted = increments * psi_left[:, None]
    z_modes = np.zeros((len(times), noise.n_modes))
    np.cumsum(weighted, axis=0, out=z_modes[1:])
    return z_modes * noise.mode_scale


def gw_path(
    noise: NoiseSpec, dt: float, n_steps: int, seed: int, n_coeffs: int,
    path_index: int = 0,
) -> SamplePath:
    """Sample one path of the noise integral as a spectral trajectory."""
    times = dt * np.arange(n_steps + 1)
    if isinstance(noise, NoiseOff):
        return SamplePath(
            seed, path_index, times,
            np.zeros((n_steps, 0)), np.zeros((n_steps + 1, n_coeffs)),
        )
    if isinstance(noise, FiniteNoise):
        if noise.fields.shape[1] != n_coeffs:
            raise ModeOverflow("finite-noise fields do not match the basis size")
        inc = sample_increments(seed, dt, n_steps, noise.n_modes, path_index)
        brownian = np.zeros((n_steps + 1, noise.n_modes))
        np.cumsum(inc, axis=0, out=brownian[1:])
        return SamplePath(seed, path_index, times, inc, brownian @ noise.fields)
    if noise.n_modes >= n_coeffs:
        raise ModeOverflow(
            f"noise mode {noise.n_modes} needs basis size > {noise.n_modes}"
        )
    inc = sample_increments(seed, dt, n_steps, noise.n_modes, path_index)
    z = np.zeros((n_steps + 1, n_coeffs))
    z[:, 1 : noise.n_modes + 1] = _cylindrical_z(noise, times, inc)
    return SamplePath(seed, path_index, times, inc, z)


def path_from_increments(
    noise: NoiseSpec, dt: float, increments: np.ndarray, n_coeffs: int,
    seed: int = -1, path_index: int = 0,
) -> SamplePath:
    """Assemble a SamplePath from externally supplied increments.

    Used to couple runs across grids: coarsening one fine realization keeps
    all resolutions on the same Brownian path.
    """
    increments = np.asarray(increments, dtype=float)
    n_steps = increments.shape[0]
    times = dt * np.arange(n_steps + 1)
    if isinstance(noise, NoiseOff):
        return SamplePath(seed, path_index, times, increments,
                          np.zeros((n_steps + 1, n_coeffs)))
    if isinstance(noise, FiniteNoise):
        brownian = np.zeros((n_steps + 1, noise.n_modes))
        np.cumsum(increments, axis=0, out=brownian[1:])
        return SamplePath(seed, path_index, times, increments,
                          brownian @ noise.fields)
    if noise.n_modes >= n_coeffs:
        raise ModeOverflow("noise modes must fit inside the basis")
    z = np.zeros((n_steps + 1, n_coeffs))
    z[:, 1 : noise.n_modes + 1] = _cylindrical_z(noise, times, increments)
    return SamplePath(seed, path_index, times, increments, z)


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Aggregate fine increments onto a grid coarser by an integer factor."""
    n_steps, m = increments.shape
    if n_steps % factor:
        raise ValueError("step count must be divisible by the coarsening factor")
    return increments.reshape(n_steps // factor, factor, m).sum(axis=1)


def isometry_target(noise: NoiseSpec, t: float) -> float:
    """Closed-form E||z_t||^2.

    Cylindrical: (integral of psi^2 over (0,t)) * sum_n gains_n^2 / mu_n;
    for unit gains the mode sum telescopes to n_modes/(n_modes+1).
    Finite-dimensional: t * sum_k ||field_k||^2.
    """
    if isinstance(noise, NoiseOff):
        return 0.0
    if isinstance(noise, FiniteNoise):
        return t * float(np.sum(noise.fields**2))
    mode_sum = float(np.sum(noise.gains_array**2 / noise.mode_eigenvalues))
    return noise.psi.squared_integral(t) * mode_sum


@dataclass(frozen=True)
class MonteCarloMoment:
    """A Monte Carlo second-moment estimate next to its analytic target."""

    mc_mean: float
    target: float
    stderr: float
    n_paths: int
    t: float

    @property
    def rel_err(self) -> float:
        return abs(self.mc_mean - self.target) / self.target if self.target else 0.0

    @property
    def within(self) -> float:
        """Distance to the target in standard errors."""
        return abs(self.mc_mean - self.target) / self.stderr if self.stderr else 0.0


def _mc_stats(sq_norms: np.ndarray, target: float, t: float) -> MonteCarloMoment:
    n = len(sq_norms)
    mean = float(np.mean(sq_norms))
    stderr = float(np.std(sq_norms, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MonteCarloMoment(mean, target, stderr, n, t)


def _batch_increments(
    seed: int, dt: float, n_steps: int, n_procs: int, first: int, count: int
) -> np.ndarray:
    """Stack the increment matrices of paths first..first+count-1: (count, K, m)."""
    out = np.empty((count, n_steps, n_procs))
    for i in range(count):
        out[i] = sample_increments(seed, dt, n_steps, n_procs, first + i)
    return out


def isometry_estimate(
    noise: NoiseSpec, t: float, n_paths: int, seed: int, n_steps: int = 64,
    chunk: int = 2048,
) -> MonteCarloMoment:
    """Monte Carlo E||z_t||^2 against the closed-form target.

    With constant modulation the left-point sum telescopes to the exact
    endpoint value, so n_steps only matters for decaying modulations.
    """
    if n_paths < 100:
        raise ValueError("need at least 100 paths for a meaningful estimate")
    target = isometry_target(noise, t)
    if isinstance(noise, NoiseOff):
        return MonteCarloMoment(0.0, target, 0.0, n_paths, t)
    dt = t / n_steps
    times = dt * np.arange(n_steps + 1)
    sq = np.empty(n_paths)
    for first in range(0, n_paths, chunk):
        count = min(chunk, n_paths - first)
        inc = _batch_increments(seed, dt, n_steps, noise.n_modes, first, count)
        if isinstance(noise, FiniteNoise):
            zt = inc.sum(axis=1) @ noise.fields
        else:
            psi_left = noise.psi(times[:-1])
            zt = np.einsum("pkm,k->pm", inc, psi_left) * noise.mode_scale
        sq[first : first + count] = np.sum(zt * zt, axis=-1)
    return _mc_stats(sq, target, t)


def convolution_trace(t: float, n_modes: int, gains=None) -> float:
    """Trace formula (1/2) sum_n gains_n^2 (1 - e^{-2 t mu_n}) / mu_n^2.

    Monotone nondecreasing in t and bounded by the t -> inf limit
    (1/2) sum gains_n^2 / mu_n^2.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = np.arange(1, n_modes + 1, dtype=float)
    mu = n * (n + 1.0)
    g2 = np.ones(n_modes) if gains is None else np.asarray(gains, dtype=float) ** 2
    if math.isinf(t):
        decay = np.ones_like(mu)
    else:
        decay = -np.expm1(-2.0 * t * mu)
    return 0.5 * float(np.sum(g2 * decay / mu**2))


def _ou_factors(noise: CylindricalNoise, dt: float):
    if not isinstance(noise.psi, ConstantModulation):
        raise RequiresConstantG(
            "exact convolution recursion needs constant modulation; "
            "use the generic Ito sum for decaying noise"
        )
    mu = noise.mode_eigenvalues
    decay = np.exp(-mu * dt)
    kick = (
        noise.psi.scale
        * noise.mode_scale
        * np.sqrt(-np.expm1(-2.0 * mu * dt) / (2.0 * mu))
    )
    return decay, kick


def stochastic_convolution(
    noise: CylindricalNoise, dt: float, n_steps: int, seed: int, n_coeffs: int,
    path_index: int = 0,
) -> np.ndarray:
    """Trajectory of the stochastic convolution with the diffusion semigroup.

    Per mode the grid values follow the exact Ornstein-Uhlenbeck update
    x_{k+1} = e^{-mu dt} x_k + (gain/sqrt(mu)) sqrt((1-e^{-2 mu dt})/(2 mu)) xi,
    so every grid point has the exact marginal law regardless of dt.
    """
    if not isinstance(noise, CylindricalNoise):
        raise RequiresConstantG("stochastic convolution is defined for cylindrical noise")
    if noise.n_modes >= n_coeffs:
        raise ModeOverflow("noise modes must fit inside the basis")
    decay, kick = _ou_factors(noise, dt)
    rng = path_rng(seed, path_index)
    xi = rng.standard_normal((n_steps, noise.n_modes))
    out = np.zeros((n_steps + 1, n_coeffs))
    x = np.zeros(noise.n_modes)
    for k in range(n_steps):
        x = decay * x + kick * xi[k]
        out[k + 1, 1 : noise.n_modes + 1] = x
    return out


def _convolution_mc(
    noise: CylindricalNoise, t: float, n_paths: int, seed: int, n_steps: int,
    track_sup: bool, chunk: int = 2048,
) -> MonteCarloMoment:
    scale = noise.psi.scale if isinstance(noise.psi, ConstantModulation) else None
    if scale is None:
        raise RequiresConstantG("convolution estimates need constant modulation")
    target = scale**2 * convolution_trace(t, noise.n_modes, noise.gains_array)
    dt = t / n_steps
    decay, kick = _ou_factors(noise, dt)
    out = np.empty(n_paths)
    for first in range(0, n_paths, chunk):
        count = min(chunk, n_paths - first)
        xi = np.empty((count, n_steps, noise.n_modes))
        for i in range(count):
            xi[i] = path_rng(seed, first + i).standard_normal(
                (n_steps, noise.n_modes)
            )
        x = np.zeros((count, noise.n_modes))
        best = np.zeros(count)
        for k in range(n_steps):
            x = decay * x + kick * xi[:, k, :]
            if track_sup:
                np.maximum(best, np.sum(x * x, axis=-1), out=best)
        if not track_sup:
            best = np.sum(x * x, axis=-1)
        out[first : first + count] = best
    return _mc_stats(out, target, t)


def stochastic_convolution_ito(
    noise: CylindricalNoise, dt: float, n_steps: int, seed: int, n_coeffs: int,
    path_index: int = 0,
) -> np.ndarray:
    """Convolution trajectory by the generic left-point sum, any modulation.

    x_{k+1} = e^{-mu dt} (x_k + psi(t_k) (gain/sqrt(mu)) dB_k): lower-order
    than the exact recursion of stochastic_convolution but valid for decaying
    modulations.
    """
    if noise.n_modes >= n_coeffs:
        raise ModeOverflow("noise modes must fit inside the basis")
    mu = noise.mode_eigenvalues
    decay = np.exp(-mu * dt)
    inc = sample_increments(seed, dt, n_steps, noise.n_modes, path_index)
    psi_left = noise.psi(dt * np.arange(n_steps))
    out = np.zeros((n_steps + 1, n_coeffs))
    x = np.zeros(noise.n_modes)
    for k in range(n_steps):
        x = decay * (x + psi_left[k] * noise.mode_scale * inc[k])
        out[k + 1, 1 : noise.n_modes + 1] = x
    return out


def convolution_estimate(
    noise: CylindricalNoise, t: float, n_paths: int, seed: int, n_steps: int = 64
) -> MonteCarloMoment:
    """Monte Carlo E of the squared convolution norm at time t vs the trace formula."""
    return _convolution_mc(noise, t, n_paths, seed, n_steps, track_sup=False)


def running_sup_estimate(
    noise: CylindricalNoise, t: float, n_paths: int, seed: int, n_steps: int = 64
) -> MonteCarloMoment:
    """Monte Carlo E[sup_{s<=t} ||convolution_s||^2] against the trace at t.

    The ratio estimate/target is the empirical constant in the second-moment
    maximal inequality for the convolution; it should stay bounded across
    horizons.
    """
    return _convolution_mc(noise, t, n_paths, seed, n_steps, track_sup=True)


def path_nodal(path: SamplePath, basis: LegendreBasis) -> np.ndarray:
    """Nodal values of the noise trajectory at every grid time."""
    return to_nodal(path.z, basis)
