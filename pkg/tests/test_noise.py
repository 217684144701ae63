import math

import numpy as np
import pytest

from ebmsde.noise import (
    ConstantModulation,
    CylindricalNoise,
    FiniteNoise,
    ModeOverflow,
    NoiseOff,
    PowerDecayModulation,
    RequiresConstantG,
    coarsen_increments,
    convolution_estimate,
    convolution_trace,
    gw_path,
    isometry_estimate,
    isometry_target,
    path_from_increments,
    running_sup_estimate,
    sample_increments,
    stochastic_convolution,
)

TRACE_LIMIT = 0.5 * (math.pi**2 / 3.0 - 3.0)


def test_increment_moments():
    dt = 0.01
    draws = sample_increments(12345, dt, 1000, 100)  # 1e5 draws
    assert abs(draws.mean()) < 4.0 * math.sqrt(dt / draws.size)
    assert draws.var() == pytest.approx(dt, rel=0.05)


def test_increment_determinism():
    a = sample_increments(7, 0.1, 50, 3)
    b = sample_increments(7, 0.1, 50, 3)
    assert np.array_equal(a, b)
    c = sample_increments(8, 0.1, 50, 3)
    assert not np.array_equal(a, c)
    d = sample_increments(7, 0.1, 50, 3, path_index=1)
    assert not np.array_equal(a, d)


def test_modulations():
    psi = PowerDecayModulation(a=1.0, alpha=1.0)
    assert psi(0.0) == 1.0
    assert psi(1.0) == 0.5
    assert psi.squared_integral(math.inf) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        PowerDecayModulation(a=1.0, alpha=0.5)
    assert ConstantModulation(2.0).squared_integral(3.0) == pytest.approx(12.0)


def test_gw_path_off_and_overflow():
    path = gw_path(NoiseOff(), 0.1, 10, 0, 8)
    assert np.all(path.z == 0.0)
    assert path.z.shape == (11, 8)
    with pytest.raises(ModeOverflow):
        gw_path(CylindricalNoise(n_modes=8), 0.1, 10, 0, 8)


def test_gw_path_regeneration_bit_exact():
    noise = CylindricalNoise(n_modes=4)
    a = gw_path(noise, 0.01, 100, 99, 8)
    b = gw_path(noise, 0.01, 100, 99, 8)
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.increments, b.increments)
    assert a.z[0] == pytest.approx(0.0)


def test_gw_path_single_mode_variance():
    # per-mode isometry: Var z^1(1) = 1/mu_1 = 0.5
    noise = CylindricalNoise(n_modes=1)
    vals = np.array([
        gw_path(noise, 1 / 16, 16, 4242, 4, path_index=p).z[-1, 1]
        for p in range(10_000)
    ])
    assert vals.var() == pytest.approx(0.5, rel=0.05)


def test_isometry_target_telescopes():
    for t, n in [(1.0, 1), (2.0, 4), (1.0, 16), (0.5, 100)]:
        target = isometry_target(CylindricalNoise(n_modes=n), t)
        assert target == pytest.approx(t * n / (n + 1), rel=1e-12)
    big = isometry_target(CylindricalNoise(n_modes=100_000), 1.0)
    assert abs(big - 1.0) < 2e-5  # partial sums approach the full-series value 1


def test_isometry_target_finite_and_power():
    fields = np.zeros((2, 6))
    fields[0, 1] = 2.0
    fields[1, 3] = 1.0
    assert isometry_target(FiniteNoise(fields), 3.0) == pytest.approx(15.0)
    noise = CylindricalNoise(n_modes=3, psi=PowerDecayModulation(1.0, 1.0))
    mode_sum = sum(1 / (n * (n + 1)) for n in (1, 2, 3))
    assert isometry_target(noise, math.inf) == pytest.approx(mode_sum)


def test_isometry_estimate_within_stderr():
    noise = CylindricalNoise(n_modes=4)
    est = isometry_estimate(noise, 2.0, 4000, seed=11)
    assert est.target == pytest.approx(1.6)
    assert est.within < 4.0
    with pytest.raises(ValueError):
        isometry_estimate(noise, 1.0, 10, seed=1)


def test_isometry_estimate_power_decay_limit():
    noise = CylindricalNoise(n_modes=4, psi=PowerDecayModulation(1.0, 1.0))
    # psi^2 is steepest near t=0, so the left-point bias needs a fine grid
    est = isometry_estimate(noise, 50.0, 3000, seed=5, n_steps=4000)
    assert est.mc_mean == pytest.approx(est.target, rel=0.05)
    assert est.target == pytest.approx(
        isometry_target(noise, math.inf), rel=0.025
    )


def test_isometry_estimate_finite_noise():
    fields = np.zeros((1, 5))
    fields[0, 2] = 1.5
    est = isometry_estimate(FiniteNoise(fields), 2.0, 2000, seed=3)
    assert est.target == pytest.approx(4.5)
    assert est.within < 4.0


def test_convolution_trace_values():
    assert convolution_trace(0.0, 16) == 0.0
    assert convolution_trace(math.inf, 1) == pytest.approx(1 / 8)
    # series value of (1/2) sum 1/(n(n+1))^2, checked against the closed form
    assert abs(convolution_trace(1000.0, 10_000) - TRACE_LIMIT) < 1e-9
    t1 = convolution_trace(0.5, 8)
    t2 = convolution_trace(1.0, 8)
    assert 0.0 < t1 < t2 < convolution_trace(math.inf, 8)


def test_stochastic_convolution_exact_recursion():
    noise = CylindricalNoise(n_modes=1)
    out = stochastic_convolution(noise, 0.25, 16, seed=21, n_coeffs=4)
    assert np.all(out[0] == 0.0)
    assert np.all(out[:, 0] == 0.0)
    assert np.all(out[:, 2:] == 0.0)
    # stationary variance gamma^2/(2 mu^2) = 1/8 at large t
    term = np.array([
        stochastic_convolution(noise, 0.5, 16, seed=p, n_coeffs=4)[-1, 1]
        for p in range(8000)
    ])
    assert term.var() == pytest.approx(1 / 8, rel=0.1)


def test_convolution_estimate_matches_trace():
    noise = CylindricalNoise(n_modes=16)
    est = convolution_estimate(noise, 1.0, 4000, seed=13)
    assert est.target == pytest.approx(convolution_trace(1.0, 16))
    assert est.rel_err < 0.05
    decaying = CylindricalNoise(n_modes=2, psi=PowerDecayModulation(1.0, 1.0))
    with pytest.raises(RequiresConstantG):
        convolution_estimate(decaying, 1.0, 500, seed=1)
    with pytest.raises(RequiresConstantG):
        stochastic_convolution(decaying, 0.1, 4, seed=1, n_coeffs=8)


def test_running_sup_ratio_bounded():
    noise = CylindricalNoise(n_modes=8)
    ratios = []
    for horizon in (0.5, 1.0, 2.0):
        est = running_sup_estimate(noise, horizon, 600, seed=2)
        ratios.append(est.mc_mean / est.target)
    assert all(1.0 <= r <= 20.0 for r in ratios)
    assert max(ratios) / min(ratios) < 3.0


def test_path_scaling_and_coarsening():
    noise = CylindricalNoise(n_modes=3)
    path = gw_path(noise, 0.125, 8, 17, 6)
    half = path.scaled(0.5)
    assert np.array_equal(half.z, 0.5 * path.z)
    coarse_inc = coarsen_increments(path.increments, 2)
    assert coarse_inc.shape == (4, 3)
    assert coarse_inc[0] == pytest.approx(path.increments[0] + path.increments[1])
    rebuilt = path_from_increments(noise, 0.25, coarse_inc, 6)
    # terminal value of the Ito sum is grid-independent for constant psi
    assert rebuilt.z[-1] == pytest.approx(path.z[-1], abs=1e-14)
    with pytest.raises(ValueError):
        coarsen_increments(path.increments, 3)


def test_finite_noise_path_shape():
    fields = np.zeros((2, 6))
    fields[0, 0] = 1.0
    fields[1, 4] = 0.5
    path = gw_path(FiniteNoise(fields), 0.1, 20, 5, 6)
    assert path.z.shape == (21, 6)
    brownian = np.cumsum(path.increments, axis=0)
    assert path.z[1:] == pytest.approx(brownian @ fields)


def test_increments_csv_export(tmp_path):
    from ebmsde.output import write_increments_csv

    noise = CylindricalNoise(n_modes=2)
    path = gw_path(noise, 0.5, 4, 33, 4)
    out = write_increments_csv(str(tmp_path / "inc.csv"), path.times,
                               path.increments)
    lines = open(out).read().splitlines()
    assert lines[0] == "step,t_left,dB_1,dB_2"
    assert len(lines) == 5
    assert float(lines[1].split(",")[2]) == path.increments[0, 0]


def test_ito_sum_convolution_fallback():
    from ebmsde.noise import stochastic_convolution_ito

    # constant modulation: the generic sum must reproduce the trace formula
    # (with its O(dt) bias) where the exact recursion is also available
    noise = CylindricalNoise(n_modes=4)
    dt, n_steps = 1.0 / 256, 256
    sq = np.array([
        np.sum(stochastic_convolution_ito(noise, dt, n_steps, p, 8)[-1] ** 2)
        for p in range(3000)
    ])
    assert sq.mean() == pytest.approx(convolution_trace(1.0, 4), rel=0.08)
    # decaying modulation is accepted here (only the exact recursion rejects it)
    decaying = CylindricalNoise(n_modes=2, psi=PowerDecayModulation(1.0, 1.0))
    out = stochastic_convolution_ito(decaying, 0.1, 16, seed=1, n_coeffs=6)
    assert out.shape == (17, 6)
    assert np.all(out[0] == 0.0)
