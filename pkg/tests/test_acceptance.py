"""Acceptance suite: every shipped claim, one test per criterion.

Each test prints one [PASS]/[FAIL] line (run with -s to see them inline) and
asserts the stated tolerance; runtime budgets are asserted too.
"""

import math
import time
import warnings

import numpy as np

from ebmsde.basis import (
    basis_eval,
    build_basis,
    l2_norm,
    legendre_poly,
    legendre_poly_deriv,
)
from ebmsde.cli import main as cli_main
from ebmsde.config import parse_config
from ebmsde.constitutive import (
    BudykoCoalbedo,
    Forcing,
    LinearEmission,
    SellersCoalbedo,
)
from ebmsde.experiments import run_experiment
from ebmsde.noise import (
    CylindricalNoise,
    PowerDecayModulation,
    convolution_estimate,
    convolution_trace,
    isometry_estimate,
    isometry_target,
)
from ebmsde.solver import ModelConfig, lambda_convergence, solve_ensemble, zero_path
from ebmsde.stationary import energy_functional, q_thresholds, scan_q

SEED = 20260810
MIDDLE = -75.0 / 7.0


def report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name} {detail}".rstrip())
    assert ok, f"{name} {detail}"


def reference_model(**overrides) -> ModelConfig:
    base = dict(
        Q=4.5,
        coalbedo=SellersCoalbedo(ice=0.2, warm=0.8, half_width=1.0),
        emission=LinearEmission(slope=1.0),
        forcing=Forcing(S=1.0, f=-12.0),
        n_modes=32,
        dt=1e-3,
        t_final=1.0,
    )
    base.update(overrides)
    return ModelConfig(**base)


def test_criterion_1_eigenbasis():
    t0 = time.perf_counter()
    b = build_basis(32, 64)
    gram = (b.table * b.weights) @ b.table.T
    ortho_err = float(np.abs(gram - np.eye(32)).max())
    worst_resid = 0.0
    for n in range(32):
        if n == 0:
            lhs = np.zeros_like(b.nodes)
        else:
            lhs = -math.sqrt((2 * n + 1) / 2) * n * (
                legendre_poly_deriv(n - 1, b.nodes)
                - legendre_poly(n, b.nodes)
                - b.nodes * legendre_poly_deriv(n, b.nodes)
            )
        resid = lhs - b.eigenvalues[n] * basis_eval(n, b.nodes)
        worst_resid = max(worst_resid, math.sqrt((resid * resid) @ b.weights))
    elapsed = time.perf_counter() - t0
    report(
        "criterion 1: eigenbasis",
        ortho_err < 1e-10 and worst_resid < 1e-8 and elapsed < 1.0,
        f"(ortho {ortho_err:.2e}, resid {worst_resid:.2e}, {elapsed:.2f}s)",
    )


def test_criterion_2_truncated_isometry():
    t0 = time.perf_counter()
    closed_ok = True
    mc_ok = True
    detail = []
    for t, n_w in [(1.0, 1), (2.0, 4), (1.0, 16)]:
        noise = CylindricalNoise(n_modes=n_w)
        target = isometry_target(noise, t)
        closed_ok &= abs(target - t * n_w / (n_w + 1)) <= 1e-12 * target
        est = isometry_estimate(noise, t, 10_000, SEED)
        mc_ok &= est.within <= 4.0
        detail.append(f"{est.within:.2f}se")
    elapsed = time.perf_counter() - t0
    report(
        "criterion 2: truncated isometry",
        closed_ok and mc_ok and elapsed < 10.0,
        f"({', '.join(detail)}, {elapsed:.1f}s)",
    )


def test_criterion_3_convolution_isometry():
    t0 = time.perf_counter()
    noise = CylindricalNoise(n_modes=16)
    est = convolution_estimate(noise, 1.0, 10_000, SEED)
    sanity = convolution_trace(1000.0, 10_000)
    limit = 0.5 * (math.pi**2 / 3.0 - 3.0)
    elapsed = time.perf_counter() - t0
    report(
        "criterion 3: convolution isometry",
        est.rel_err < 0.05 and abs(sanity - limit) < 1e-6 and elapsed < 30.0,
        f"(rel {est.rel_err:.3f}, trace err {abs(sanity - limit):.1e}, "
        f"{elapsed:.1f}s)",
    )


def test_criterion_4_comparison_estimate():
    t0 = time.perf_counter()
    doc = """
seed: 20260810
model:
  n_modes: 24
  dt: 0.001
  t_final: 2.0
noise:
  mode: cylindrical
  n_modes: 6
  sigma: 1.0
  psi: {type: constant, scale: 0.1}
experiment: {kind: compare, random_configs: 50}
"""
    res = run_experiment(parse_config(doc), out_dir=None, figures=False)
    elapsed = time.perf_counter() - t0
    report(
        "criterion 4: comparison estimate (50 configs)",
        res.passed and elapsed < 60.0,
        f"({res.summary['checks']}, {elapsed:.1f}s)",
    )


def test_criterion_5_eps_stability():
    t0 = time.perf_counter()
    doc = """
seed: 20260810
model:
  Q: 4.5
  n_modes: 32
  dt: 0.001
  t_final: 1.0
  forcing: {S: 1.0, f: -12.0}
noise:
  mode: cylindrical
  n_modes: 8
  sigma: 1.0
  psi: {type: constant, scale: 0.5}
experiment: {kind: converge-eps, u0: -8.0, eps_ladder: [0.4, 0.2, 0.1, 0.05], target: 0.01}
"""
    res = run_experiment(parse_config(doc), out_dir=None, figures=False)
    sellers_ok = res.passed
    dists = res.summary["distances"]
    budyko_doc = doc.replace(
        "  forcing: {S: 1.0, f: -12.0}",
        "  forcing: {S: 1.0, f: -12.0}\n  coalbedo: {variant: budyko}\n  lambda: 0.001",
    ).replace(", target: 0.01}", "}")
    with warnings.catch_warnings():
        # the documented step-bound warning fires for lambda = 1e-3
        warnings.simplefilter("ignore", UserWarning)
        res_b = run_experiment(parse_config(budyko_doc), out_dir=None,
                               figures=False)
    elapsed = time.perf_counter() - t0
    report(
        "criterion 5: eps->0 stability",
        sellers_ok and res_b.summary["checks"]["distances_decrease"]
        and elapsed < 60.0,
        f"(sellers dists {['%.4f' % d for d in dists]}, {elapsed:.1f}s)",
    )


def test_criterion_6_lambda_convergence():
    t0 = time.perf_counter()
    cfg = reference_model(coalbedo=BudykoCoalbedo(), yosida_lam=1e-1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        res = lambda_convergence(cfg, [1e-1, 1e-2, 1e-3, 1e-4], -8.0,
                                 zero_path(cfg))
    cauchy = res.monotone
    tiny = all(d < 1e-8 for d in res.distances)
    elapsed = time.perf_counter() - t0
    report(
        "criterion 6: regularization convergence",
        cauchy and tiny and elapsed < 60.0,
        f"(max dist {max(res.distances):.1e}, {elapsed:.1f}s)",
    )


def test_criterion_7_multiplicity_regimes():
    t0 = time.perf_counter()
    model = reference_model()
    basis = model.basis()
    th = q_thresholds(model)
    thresholds_ok = (th.q1, th.q2, th.q3, th.q4) == (1.25, 3.75, 5.0, 15.0)

    branches = scan_q(model, [1.0, 4.5, 16.0])
    counts_ok = [b.count for b in branches] == [1, 3, 1]
    vals_1 = branches[0].equilibria[0].u_at_center
    vals_45 = [eq.u_at_center for eq in branches[1].equilibria]
    vals_16 = branches[2].equilibria[0].u_at_center
    values_ok = (
        abs(vals_1 - (-11.8)) < 1e-6
        and np.allclose(vals_45, [-11.1, MIDDLE, -8.4], atol=1e-6)
        and abs(vals_16 - 0.8) < 1e-6
    )
    residual_ok = all(
        eq.residual < 1e-9 for b in branches for eq in b.equilibria
    )
    energies = [
        energy_functional(eq.coeffs, 4.5, model, basis)
        for eq in branches[1].equilibria
    ]
    energy_ok = energies[1] > max(energies[0], energies[2])
    elapsed = time.perf_counter() - t0
    report(
        "criterion 7: multiplicity regimes",
        thresholds_ok and counts_ok and values_ok and residual_ok
        and energy_ok and elapsed < 30.0,
        f"(counts {[b.count for b in branches]}, {elapsed:.1f}s)",
    )


def test_criterion_8_longtime_stabilization():
    t0 = time.perf_counter()
    model = reference_model(t_final=50.0)
    noise = CylindricalNoise(n_modes=16, sigma=1.0,
                             psi=PowerDecayModulation(a=1.0, alpha=1.0))
    ens = solve_ensemble(model, -8.0, noise, SEED, 100, store_every=5000)
    basis = model.basis()
    warm = basis.constant_field(-8.4)
    terminal = l2_norm(ens.coeffs[-1] - warm)
    n_within = int(np.sum(terminal < 1e-2))
    elapsed = time.perf_counter() - t0
    report(
        "criterion 8: long-time stabilization",
        n_within >= 90 and elapsed < 600.0,
        f"({n_within}/100 within 1e-2 of -8.4, {elapsed:.1f}s)",
    )


def test_criterion_9_resolution_study():
    t0 = time.perf_counter()
    doc = """
seed: 20260810
model:
  Q: 4.5
  n_modes: 32
  t_final: 1.0
  forcing: {S: 1.0, f: -12.0}
noise:
  mode: cylindrical
  n_modes: 8
  sigma: 1.0
  psi: {type: constant, scale: 0.5}
experiment:
  kind: resolution-study
  dts: [0.002, 0.001]
  modes_pair: [16, 32]
  ratio_band: [1.7, 2.3]
  modes_tol: 1.0e-6
"""
    res = run_experiment(parse_config(doc), out_dir=None, figures=False)
    elapsed = time.perf_counter() - t0
    report(
        "criterion 9: resolution study",
        res.passed and elapsed < 300.0,
        f"(yu {['%.2f' % r for r in res.summary['yu_ratios']]}, "
        f"self {['%.2f' % r for r in res.summary['self_ratios']]}, "
        f"modes diff {res.summary['modes_l2_diff']:.1e}, {elapsed:.1f}s)",
    )


DETERMINISM_CONFIGS = {
    "simulate": """
seed: 20260810
model:
  n_modes: 16
  t_final: 0.5
noise: {mode: cylindrical, n_modes: 8, sigma: 1.0}
experiment: {kind: simulate, u0: -8.0, store_every: 10, nondeg_eps: [0.5], dump_increments: true}
""",
    "isometry": """
seed: 20260810
model: {n_modes: 20, t_final: 1.0}
noise: {mode: cylindrical, n_modes: 16}
experiment:
  kind: isometry
  n_paths: 10000
  cases: [{t: 1.0, n_modes: 1}, {t: 2.0, n_modes: 4}, {t: 1.0, n_modes: 16}]
""",
    "convolution": """
seed: 20260810
model: {n_modes: 20, t_final: 1.0}
noise: {mode: cylindrical, n_modes: 16}
experiment: {kind: convolution, n_paths: 10000, sup_paths: 1000}
""",
    "compare": """
seed: 20260810
model:
  n_modes: 24
  t_final: 2.0
noise:
  mode: cylindrical
  n_modes: 6
  sigma: 1.0
  psi: {type: constant, scale: 0.1}
experiment: {kind: compare, random_configs: 50}
""",
    "converge-eps": """
seed: 20260810
model:
  Q: 4.5
  n_modes: 32
  t_final: 1.0
  forcing: {S: 1.0, f: -12.0}
noise:
  mode: cylindrical
  n_modes: 8
  sigma: 1.0
  psi: {type: constant, scale: 0.5}
experiment: {kind: converge-eps, u0: -8.0, target: 0.01}
""",
    "converge-lambda": """
seed: 20260810
model:
  Q: 4.5
  n_modes: 32
  t_final: 1.0
  coalbedo: {variant: budyko}
  lambda: 0.1
  forcing: {S: 1.0, f: -12.0}
experiment: {kind: converge-lambda, u0: -8.0, target: 1.0e-8}
""",
    "stationary": """
seed: 20260810
model:
  Q: 4.5
  n_modes: 32
  forcing: {S: 1.0, f: -12.0}
experiment: {kind: stationary}
""",
    "scan-q": """
seed: 20260810
model:
  Q: 4.5
  n_modes: 32
  forcing: {S: 1.0, f: -12.0}
experiment: {kind: scan-q, q_values: [1.0, 4.5, 16.0]}
""",
    "longtime": """
seed: 20260810
model:
  Q: 4.5
  n_modes: 32
  dt: 0.001
  t_final: 50.0
  forcing: {S: 1.0, f: -12.0}
noise:
  mode: cylindrical
  n_modes: 16
  sigma: 1.0
  psi: {type: power, a: 1.0, alpha: 1.0}
experiment: {kind: longtime, u0: -8.0, n_paths: 100, tol: 0.01, store_every: 5000}
""",
}


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    identical = True
    failed_kind = ""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for kind, doc in DETERMINISM_CONFIGS.items():
            cfg_file = tmp_path / f"{kind}.yaml"
            cfg_file.write_text(doc)
            outs = []
            for tag in ("a", "b"):
                out = tmp_path / f"{kind}-{tag}"
                code = cli_main([kind, "--config", str(cfg_file),
                                 "--out", str(out), "--no-figures"])
                assert code == 0, f"{kind} run exited {code}"
                outs.append(out)
            for name in sorted(p.name for p in outs[0].iterdir()):
                if not (name.endswith(".csv") or name.endswith(".json")):
                    continue
                if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
                    identical = False
                    failed_kind = f"{kind}/{name}"
    elapsed = time.perf_counter() - t0
    report(
        "criterion 10: determinism",
        identical,
        f"({'byte-identical' if identical else failed_kind}, {elapsed:.0f}s)",
    )
