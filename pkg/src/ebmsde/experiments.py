"""Experiment orchestration: one run kind per invocation, deterministic in seed.

Each experiment returns named tables (written as CSV), a summary with
per-check pass/fail flags plus provenance, and in-memory arrays used only for
figure rendering.  Monte Carlo reductions always run in fixed path order, and
any thread fan-out merges results by index, so outputs never depend on the
parallelism degree.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .basis import l2_norm, to_nodal
from .config import RunConfig, ValidationError
from .constitutive import BudykoCoalbedo, LinearEmission, SellersCoalbedo
from .noise import (
    ConstantModulation,
    CylindricalNoise,
    NoiseOff,
    coarsen_increments,
    convolution_estimate,
    convolution_trace,
    gw_path,
    isometry_estimate,
    path_from_increments,
    running_sup_estimate,
    sample_increments,
)
from .output import canonical_hash, emit_outputs, write_increments_csv
from .solver import (
    ModelConfig,
    comparison_check,
    eps_convergence,
    lambda_convergence,
    solve_ensemble,
    solve_path,
    sup_distance,
    zero_path,
)
from .stationary import (
    minimal_maximal,
    q_thresholds,
    scan_q,
    solution_bracket,
)

TRACE_LIMIT_ALL_MODES = 0.5 * (math.pi**2 / 3.0 - 3.0)


@dataclass
class RunResult:
    summary: dict
    tables: dict
    figure_data: dict
    passed: bool
    files: list


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _experiment_u0(params, default=-8.0):
    u0 = params.get("u0", default)
    if isinstance(u0, (list, tuple)):
        return np.asarray(u0, dtype=float)
    return float(u0)


def _make_path(rc: RunConfig, model: ModelConfig | None = None):
    model = model or rc.model
    return gw_path(rc.noise, model.dt, model.n_steps, rc.seed, model.n_modes)


# --------------------------------------------------------------------------
# individual experiment kinds
# --------------------------------------------------------------------------


def _run_simulate(rc: RunConfig):
    p = rc.experiment
    model = rc.model
    basis = model.basis()
    path = _make_path(rc)
    nondeg_eps = [float(e) for e in (p["nondeg_eps"] or [])]
    traj = solve_path(model, _experiment_u0(p), path,
                      store_every=int(p["store_every"]), nondeg_eps=nondeg_eps)

    coeff_header = ["t"] + [f"c_{n}" for n in range(model.n_modes)]
    coeff_rows = [[t, *c] for t, c in zip(traj.times, traj.coeffs)]
    nodal = to_nodal(traj.coeffs, basis)
    nodal_header = ["t"] + [f"x{j}" for j in range(basis.quad_order)]
    nodal_rows = [[t, *v] for t, v in zip(traj.times, nodal)]
    diag_header = ["t", "l2", "nodal_min", "nodal_max"] + [
        f"nondeg_{e:g}" for e in nondeg_eps
    ]
    diag_rows = [
        [t, traj.l2[j], traj.nodal_min[j], traj.nodal_max[j]]
        + [traj.nondeg[e][j] for e in nondeg_eps]
        for j, t in enumerate(traj.times)
    ]
    tables = {
        "trajectory": (coeff_header, coeff_rows),
        "trajectory_nodal": (nodal_header, nodal_rows),
        "diagnostics": (diag_header, diag_rows),
        "nodes": (
            ["j", "x", "weight"],
            [[j, basis.nodes[j], basis.weights[j]] for j in range(basis.quad_order)],
        ),
    }
    extras = {
        "final_l2": float(traj.l2[-1]),
        "final_nodal_min": float(traj.nodal_min[-1]),
        "final_nodal_max": float(traj.nodal_max[-1]),
        "dump_increments": bool(p["dump_increments"]),
    }
    fig = {"times": traj.times, "nodal": nodal, "nodes": basis.nodes,
           "l2": traj.l2, "nodal_min": traj.nodal_min, "nodal_max": traj.nodal_max}
    checks = {}
    if p["dump_increments"]:
        fig["increments"] = (path.times, path.increments)
    return extras, checks, tables, fig


def _isometry_cases(rc: RunConfig):
    p = rc.experiment
    if p["cases"]:
        cases = []
        for i, case in enumerate(p["cases"]):
            if not isinstance(case, dict) or "t" not in case:
                raise ValidationError(f"experiment.cases[{i}]",
                                      "expected a mapping with at least 't'")
            cases.append((float(case["t"]), case.get("n_modes")))
        return cases
    return [(float(p["t"]), None)]


def _run_isometry(rc: RunConfig):
    p = rc.experiment
    if isinstance(rc.noise, NoiseOff):
        raise ValidationError("noise.mode", "isometry experiment needs noise")
    rows = []
    checks = {}
    worst = 0.0
    for t, n_modes in _isometry_cases(rc):
        noise = rc.noise
        if n_modes is not None:
            if not isinstance(noise, CylindricalNoise):
                raise ValidationError("experiment.cases",
                                      "per-case n_modes needs cylindrical noise")
            if noise.gains is not None:
                raise ValidationError("experiment.cases",
                                      "per-case n_modes conflicts with explicit gains")
            noise = replace(noise, n_modes=int(n_modes))
        est = isometry_estimate(noise, t, int(p["n_paths"]), rc.seed,
                                n_steps=int(p["n_steps"]))
        rows.append([t, est.mc_mean, est.target, est.stderr, est.rel_err])
        worst = max(worst, est.within)
        checks[f"isometry_t{t:g}_m{getattr(noise, 'n_modes', 0)}"] = bool(
            est.within <= float(p["max_stderr_units"])
        )
    tables = {"isometry": (["t", "mc_mean", "target", "stderr", "rel_err"], rows)}
    extras = {"max_stderr_units_seen": worst,
              "n_paths": int(p["n_paths"])}
    return extras, checks, tables, {"rows": rows}


def _run_convolution(rc: RunConfig):
    p = rc.experiment
    noise = rc.noise
    if not isinstance(noise, CylindricalNoise):
        raise ValidationError("noise.mode",
                              "convolution experiment needs cylindrical noise")
    if not isinstance(noise.psi, ConstantModulation):
        raise ValidationError("noise.psi.type",
                              "convolution experiment needs constant modulation")
    t = float(p["t"])
    est = convolution_estimate(noise, t, int(p["n_paths"]), rc.seed,
                               n_steps=int(p["n_steps"]))
    rows = [[t, est.mc_mean, est.target, est.stderr, est.rel_err]]

    sanity = convolution_trace(float(p["sanity_t"]), int(p["sanity_modes"]))
    sanity_err = abs(sanity - TRACE_LIMIT_ALL_MODES)

    bk_rows = []
    ratios = []
    for horizon in p["horizons"]:
        sup = running_sup_estimate(noise, float(horizon), int(p["sup_paths"]),
                                   rc.seed, n_steps=int(p["n_steps"]))
        ratio = sup.mc_mean / sup.target if sup.target else float("inf")
        ratios.append(ratio)
        bk_rows.append([float(horizon), sup.mc_mean, sup.target, ratio, sup.stderr])

    checks = {
        "second_moment_matches_trace": bool(est.rel_err <= float(p["rel_tol"])),
        "trace_limit_sanity": bool(sanity_err <= float(p["sanity_tol"])),
        "sup_ratio_bounded": bool(all(1.0 <= r <= 20.0 for r in ratios)),
    }
    tables = {
        "convolution": (["t", "mc_mean", "target", "stderr", "rel_err"], rows),
        "burkholder": (
            ["horizon", "mc_sup_mean", "trace_target", "ratio", "stderr"],
            bk_rows,
        ),
    }
    extras = {
        "trace_limit": {"computed": sanity, "analytic": TRACE_LIMIT_ALL_MODES,
                        "abs_err": sanity_err},
        "mc": {"mean": est.mc_mean, "stderr": est.stderr},
    }
    return extras, checks, tables, {"rows": rows, "burkholder": bk_rows}


def _affine_region(nodal_min, nodal_max, graph: SellersCoalbedo) -> bool:
    lo = graph.threshold - graph.half_width
    hi = graph.threshold + graph.half_width
    m, M = float(np.min(nodal_min)), float(np.max(nodal_max))
    return M <= lo or m >= hi or (m >= lo and M <= hi)


def _random_ordered_case(rc: RunConfig, index: int):
    """One random Sellers config with ordered data on a shared smooth path.

    Data are constant in x with a positive constant shift, drawn so both
    members stay inside a single affine branch of the co-albedo at every node
    (redrawn otherwise); there the IMEX step is order-preserving exactly.
    """
    rng = np.random.Generator(np.random.Philox(key=rc.seed).jumped(1_000_000 + index))
    model = rc.model
    region_names = ("ice", "ramp", "warm")
    for _ in range(40):
        region = int(rng.integers(0, 3))
        if region == 1:  # ramp interior: needs a contractive ramp
            q = float(rng.uniform(0.8, 1.6))
            half_width = float(rng.uniform(2.0, 4.0))
        else:
            q = float(rng.uniform(1.0, 6.0))
            half_width = float(rng.uniform(0.5, 2.0))
        graph = SellersCoalbedo(
            ice=float(rng.uniform(0.1, 0.35)),
            warm=float(rng.uniform(0.55, 0.9)),
            half_width=half_width,
        )
        emission = LinearEmission(slope=float(rng.uniform(0.8, 2.0)))
        margin = 0.25 * half_width if region == 1 else 2.0
        if region == 0:
            u_ref = graph.threshold - half_width - float(rng.uniform(1.0, 3.0))
        elif region == 2:
            u_ref = graph.threshold + half_width + float(rng.uniform(1.0, 3.0))
        else:
            u_ref = graph.threshold + float(rng.uniform(-0.4, 0.0)) * half_width
        f_base = float(emission(u_ref) - q * graph(u_ref))
        shift = float(rng.uniform(0.0, margin / 4.0))
        f_shift = float(rng.uniform(0.0, margin / 8.0))
        cfg = replace(
            model, Q=q, coalbedo=graph, emission=emission,
            forcing=replace(model.forcing, f=f_base, f_inf=None, c_f=None),
        )
        base_noise = rc.noise
        if isinstance(base_noise, NoiseOff):
            path = zero_path(cfg)
        else:
            path = gw_path(base_noise, cfg.dt, cfg.n_steps, rc.seed,
                           cfg.n_modes, path_index=index)
        res = comparison_check(cfg, u_ref - shift / 2.0, u_ref + shift / 2.0,
                               f_base, f_base + f_shift, path)
        traj_lo = solve_path(
            replace(cfg, forcing=replace(cfg.forcing, f=f_base, f_inf=None, c_f=None)),
            u_ref - shift / 2.0, path)
        traj_hi = solve_path(
            replace(cfg, forcing=replace(cfg.forcing, f=f_base + f_shift,
                                         f_inf=None, c_f=None)),
            u_ref + shift / 2.0, path)
        both_min = np.minimum(traj_lo.nodal_min, traj_hi.nodal_min)
        both_max = np.maximum(traj_lo.nodal_max, traj_hi.nodal_max)
        if _affine_region(both_min, both_max, graph):
            return index, q, graph.lipschitz, region_names[region], res
    raise RuntimeError(f"could not draw an affine-safe config for index {index}")


def _run_compare(rc: RunConfig):
    p = rc.experiment
    model = rc.model
    n_random = int(p["random_configs"])
    if n_random <= 0:
        path = _make_path(rc)
        res = comparison_check(model, _experiment_u0(p), p["u0_hat"],
                               float(p["f"]), float(p["f_hat"]), path,
                               store_every=int(p["store_every"]))
        rows = [
            [t, g, b, pg, pb]
            for t, g, b, pg, pb in zip(res.times, res.gap, res.bound,
                                       res.pos_gap, res.pos_bound)
        ]
        checks = {
            "order_preserved": res.order_preserved,
            "gap_bound_holds": res.bound_holds,
        }
        tables = {"compare": (["t", "gap", "bound", "pos_gap", "pos_bound"], rows)}
        extras = {"sup_gap": res.sup_gap,
                  "inputs_ordered": res.inputs_ordered,
                  "max_order_violation": res.max_order_violation}
        return extras, checks, tables, {"result": res}

    results = _map_ordered(lambda i: _random_ordered_case(rc, i),
                           list(range(n_random)), rc.threads)
    rows = []
    all_ordered, all_bounded = True, True
    for index, q, lipschitz, region, res in results:
        rows.append([
            index, q, lipschitz, region, res.sup_gap,
            res.order_preserved, res.bound_holds, res.max_order_violation,
        ])
        all_ordered &= res.order_preserved
        all_bounded &= res.bound_holds
    checks = {"order_preserved_all": bool(all_ordered),
              "gap_bound_holds_all": bool(all_bounded)}
    tables = {
        "compare_suite": (
            ["config", "Q", "lipschitz", "region", "sup_gap",
             "order_preserved", "bound_holds", "max_order_violation"],
            rows,
        )
    }
    extras = {"n_configs": n_random}
    return extras, checks, tables, {"rows": rows}


def _run_converge_eps(rc: RunConfig):
    p = rc.experiment
    ladder = [float(e) for e in p["eps_ladder"]]
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValidationError("experiment.eps_ladder", "must decrease strictly")
    path = _make_path(rc)
    res = eps_convergence(rc.model, ladder, _experiment_u0(p), path,
                          store_every=int(p["store_every"]))
    ratios = [float("nan")] + res.ratios
    rows = [[e, d, r] for e, d, r in zip(res.values, res.distances, ratios)]
    target = p["target"]
    checks = {"distances_decrease": res.monotone}
    if target is not None:
        checks["final_below_target"] = bool(res.distances[-1] < float(target))
    tables = {"eps_convergence": (["eps", "sup_distance", "ratio"], rows)}
    extras = {"distances": res.distances}
    return extras, checks, tables, {"ladder": res}


def _run_converge_lambda(rc: RunConfig):
    p = rc.experiment
    lambdas = [float(v) for v in p["lambdas"]]
    path = _make_path(rc)
    res = lambda_convergence(rc.model, lambdas, _experiment_u0(p), path,
                             store_every=int(p["store_every"]))
    rows = [
        [hi, lo, d]
        for hi, lo, d in zip(res.values, res.values[1:], res.distances)
    ]
    target = p["target"]
    checks = {"distances_cauchy": res.monotone}
    if target is not None:
        checks["all_below_target"] = bool(
            all(d < float(target) for d in res.distances)
        )
    tables = {"lambda_convergence": (["lambda_hi", "lambda_lo", "sup_distance"],
                                     rows)}
    extras = {"distances": res.distances}
    return extras, checks, tables, {"ladder": res}


def _thresholds_dict(model: ModelConfig) -> dict:
    th = q_thresholds(model)
    return {
        "q1": th.q1, "q2": th.q2, "q3": th.q3, "q4": th.q4,
        "alt_reading": {"q1": th.alt_q1, "q2": th.alt_q2,
                        "q3": th.alt_q3, "q4": th.alt_q4},
        "balance_hypothesis_holds": th.valid,
        "functional_convention": "integrals over (-1,1) with dx; "
                                 "emission primitive without positive-part",
    }


def _branch_tables(branches, basis):
    kmax = max((b.count for b in branches), default=0)
    header = ["Q", "count"]
    for i in range(1, kmax + 1):
        header += [f"u_at_0_{i}", f"residual_{i}", f"J_{i}", f"class_{i}"]
    rows = []
    for b in branches:
        row = [b.Q, b.count]
        for eq in b.equilibria:
            row += [eq.u_at_center, eq.residual, eq.energy, eq.classification]
        row += [""] * (len(header) - len(row))
        rows.append(row)
    return header, rows


def _run_stationary(rc: RunConfig):
    p = rc.experiment
    model = rc.model
    basis = model.basis()
    q = float(p["q"]) if p["q"] is not None else model.Q
    inits = p["inits"]
    branch = scan_q(model, [q], inits=inits, tol=float(p["tol"]))[0]
    u_min, u_max = minimal_maximal(q, model, tol=float(p["tol"]))
    lo, hi = solution_bracket(q, model, basis)
    min_nodal = to_nodal(u_min, basis)
    max_nodal = to_nodal(u_max, basis)
    ordered = True
    bracketed = True
    for eq in branch.equilibria:
        nodal = to_nodal(eq.coeffs, basis)
        ordered &= bool(np.all(nodal >= min_nodal - 1e-7)
                        and np.all(nodal <= max_nodal + 1e-7))
        bracketed &= bool(np.all(nodal >= lo - 1e-7) and np.all(nodal <= hi + 1e-7))
    checks = {
        "residuals_below_tol": bool(
            all(eq.residual < float(p["tol"]) for eq in branch.equilibria)
        ),
        "equilibria_bracketed": bracketed,
        "minimal_maximal_enclose": ordered,
    }
    header, rows = _branch_tables([branch], basis)
    tables = {"equilibria": (header, rows)}
    extras = {
        "Q": q,
        "count": branch.count,
        "thresholds": _thresholds_dict(model),
        "bracket": {"low": lo, "high": hi},
        "u_min_at_0": float(np.interp(0.0, basis.nodes, min_nodal)),
        "u_max_at_0": float(np.interp(0.0, basis.nodes, max_nodal)),
    }
    if isinstance(model.coalbedo, BudykoCoalbedo):
        # sensitivity of the regularized stationary set to the ramp scale,
        # matching branches of the finer problem by proximity (near-threshold
        # branches legitimately move by O(lambda))
        finer = replace(model, yosida_lam=model.yosida_lam / 10.0)
        finer_branch = scan_q(finer, [q], inits=inits, tol=float(p["tol"]))[0]
        shift = 0.0
        for eq in branch.equilibria:
            if finer_branch.equilibria:
                shift = max(shift, min(
                    float(l2_norm(other.coeffs - eq.coeffs))
                    for other in finer_branch.equilibria
                ))
        extras["lambda_sensitivity"] = {
            "lambda": model.yosida_lam,
            "lambda_finer": finer.yosida_lam,
            "count_finer": finer_branch.count,
            "max_l2_shift": shift,
        }
    fig = {"basis": basis, "branch": branch, "u_min": u_min, "u_max": u_max}
    return extras, checks, tables, fig


def _expected_count(q, th):
    if q < th.q1:
        return 1
    if th.q2 < q < th.q3:
        return 3
    if q > th.q4:
        return 1
    return None


def _run_scan_q(rc: RunConfig):
    p = rc.experiment
    model = rc.model
    basis = model.basis()
    q_values = sorted(float(q) for q in p["q_values"])
    th = q_thresholds(model)
    branches = _map_ordered(
        lambda q: scan_q(model, [q], tol=float(p["tol"]),
                         dedup_tol=float(p["dedup_tol"]))[0],
        q_values, rc.threads,
    )
    counts_ok = True
    for b in branches:
        expected = _expected_count(b.Q, th)
        if expected == 1 and b.count != 1:
            counts_ok = False
        if expected == 3 and b.count < 3:
            counts_ok = False
    checks = {
        "regime_counts_match": bool(counts_ok),
        "residuals_below_tol": bool(
            all(eq.residual < float(p["tol"])
                for b in branches for eq in b.equilibria)
        ),
    }
    header, rows = _branch_tables(branches, basis)
    tables = {"bifurcation": (header, rows)}
    extras = {
        "thresholds": _thresholds_dict(model),
        "counts": {str(b.Q): b.count for b in branches},
    }
    fig = {"branches": branches, "thresholds": th}
    return extras, checks, tables, fig


def _run_longtime(rc: RunConfig):
    p = rc.experiment
    model = rc.model
    basis = model.basis()
    noise = rc.noise
    if isinstance(noise, CylindricalNoise) and isinstance(
        noise.psi, ConstantModulation
    ) and noise.psi.scale != 0.0:
        raise ValidationError(
            "noise.psi.type",
            "longtime stabilization needs decaying (or no) noise",
        )
    branch = scan_q(model, [model.Q])[0]
    if not branch.equilibria:
        raise RuntimeError("no equilibria found; cannot measure distances")
    eq_fields = np.stack([eq.coeffs for eq in branch.equilibria])

    n_paths = int(p["n_paths"])
    tol = float(p["tol"])
    store_every = int(p["store_every"])
    u0 = _experiment_u0(p)

    if isinstance(noise, NoiseOff) or n_paths == 1:
        traj = solve_path(model, u0, _make_path(rc), store_every=store_every)
        coeffs = traj.coeffs[:, None, :]
        times = traj.times
    elif rc.threads <= 1:
        ens = solve_ensemble(model, u0, noise, rc.seed, n_paths,
                             store_every=store_every)
        times, coeffs = ens.times, ens.coeffs
    else:
        # disjoint path blocks; streams are index-keyed so the tiling is
        # identical to one big run, merged in block order
        blocks = min(rc.threads, n_paths)
        sizes = [n_paths // blocks + (1 if i < n_paths % blocks else 0)
                 for i in range(blocks)]
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
        parts = _map_ordered(
            lambda i: solve_ensemble(model, u0, noise, rc.seed, sizes[i],
                                     store_every=store_every,
                                     path_offset=int(offsets[i])),
            list(range(blocks)), rc.threads,
        )
        times = parts[0].times
        coeffs = np.concatenate([part.coeffs for part in parts], axis=1)

    # distance of every stored state to every equilibrium
    diffs = coeffs[:, :, None, :] - eq_fields[None, None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=-1))
    min_dist = dists.min(axis=-1)
    nearest = dists.argmin(axis=-1)
    terminal = min_dist[-1]
    within = terminal < tol
    frac = float(np.mean(within))

    series_rows = [
        [t, float(np.mean(min_dist[j] < tol)), float(np.median(min_dist[j])),
         float(np.quantile(min_dist[j], 0.9))]
        for j, t in enumerate(times)
    ]
    path_rows = [
        [pidx, float(terminal[pidx]), bool(within[pidx]), int(nearest[-1, pidx])]
        for pidx in range(coeffs.shape[1])
    ]
    checks = {"stabilized_fraction": bool(frac >= float(p["target_fraction"]))}
    tables = {
        "stabilization": (["t", "frac_within", "median_dist", "q90_dist"],
                          series_rows),
        "paths": (["path", "terminal_distance", "within", "nearest_equilibrium"],
                  path_rows),
    }
    n_run = coeffs.shape[1]
    extras = {
        "fraction_within": frac,
        "fraction_stderr": math.sqrt(max(frac * (1.0 - frac), 0.0) / n_run),
        "tol": tol,
        "equilibria_u_at_0": [eq.u_at_center for eq in branch.equilibria],
    }
    fig = {"times": times, "min_dist": min_dist, "tol": tol}
    return extras, checks, tables, fig


def _run_resolution(rc: RunConfig):
    p = rc.experiment
    model = rc.model
    u0 = _experiment_u0(p, default=-8.2)
    dts = [float(v) for v in p["dts"]]
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValidationError("experiment.dts", "must decrease strictly")
    chain = dts + [dts[-1] / 2.0]
    dt_fine = chain[-1]
    n_fine = int(round(model.t_final / dt_fine))
    factors = [int(round(dt / dt_fine)) for dt in chain]
    for dt, fac in zip(chain, factors):
        if abs(fac * dt_fine - dt) > 1e-12:
            raise ValidationError("experiment.dts",
                                  "must be integer multiples of the finest dt")
    m = rc.noise.n_modes if not isinstance(rc.noise, NoiseOff) else 0
    inc_fine = (sample_increments(rc.seed, dt_fine, n_fine, m)
                if m else np.zeros((n_fine, 0)))

    store_dt = chain[0]
    det_runs = {}
    yu_gaps = []
    for dt, fac in zip(chain, factors):
        inc = coarsen_increments(inc_fine, fac) if m else np.zeros(
            (n_fine // fac, 0))
        path = path_from_increments(rc.noise, dt, inc, model.n_modes,
                                    seed=rc.seed)
        every = int(round(store_dt / dt))
        cfg_y = replace(model, dt=dt, form="y")
        cfg_u = replace(model, dt=dt, form="u")
        traj_y = solve_path(cfg_y, u0, path, store_every=every)
        traj_u = solve_path(cfg_u, u0, path, store_every=every)
        yu_gaps.append(sup_distance(traj_y, traj_u))
        # self-convergence is measured noise-off: the coupled-path noise
        # contribution is first order only in the mean square, so a single
        # path's sup distance would not expose the scheme's order cleanly
        det_runs[dt] = solve_path(cfg_y, u0, path.scaled(0.0),
                                  store_every=every)

    self_errs = [
        sup_distance(det_runs[a], det_runs[b])
        for a, b in zip(chain, chain[1:])
    ]
    yu_ratios = [a / b if b else float("nan")
                 for a, b in zip(yu_gaps, yu_gaps[1:])]
    self_ratios = [a / b if b else float("nan")
                   for a, b in zip(self_errs, self_errs[1:])]
    lo_band, hi_band = [float(v) for v in p["ratio_band"]]

    n_lo, n_hi = (int(v) for v in p["modes_pair"])
    mode_runs = []
    for n_modes in (n_lo, n_hi):
        cfg = replace(model, n_modes=n_modes, quad_order=None, dt=dts[-1])
        n_steps = int(round(model.t_final / dts[-1]))
        inc = coarsen_increments(inc_fine, factors[len(dts) - 1]) if m else (
            np.zeros((n_steps, 0)))
        path = path_from_increments(rc.noise, dts[-1], inc, n_modes,
                                    seed=rc.seed)
        traj = solve_path(cfg, u0, path,
                          store_every=int(round(store_dt / dts[-1])))
        mode_runs.append(traj.l2)
    modes_diff = float(np.max(np.abs(mode_runs[0] - mode_runs[1])))

    rows = [
        [dt, gap, err]
        for dt, gap, err in zip(chain[:-1], yu_gaps[:-1], self_errs)
    ]
    checks = {
        "yu_gap_first_order": bool(
            all(lo_band <= r <= hi_band for r in yu_ratios[: len(dts) - 1])
        ),
        "self_error_first_order": bool(
            all(lo_band <= r <= hi_band for r in self_ratios[: len(dts) - 1])
        ),
        "modes_refinement_stable": bool(modes_diff < float(p["modes_tol"])),
    }
    tables = {
        "resolution": (["dt", "yform_uform_gap", "self_error"], rows),
    }
    extras = {
        "yu_ratios": yu_ratios,
        "self_ratios": self_ratios,
        "modes_pair": [n_lo, n_hi],
        "modes_l2_diff": modes_diff,
    }
    fig = {"chain": chain, "yu_gaps": yu_gaps, "self_errs": self_errs}
    return extras, checks, tables, fig


_RUNNERS = {
    "simulate": _run_simulate,
    "isometry": _run_isometry,
    "convolution": _run_convolution,
    "compare": _run_compare,
    "converge-eps": _run_converge_eps,
    "converge-lambda": _run_converge_lambda,
    "stationary": _run_stationary,
    "scan-q": _run_scan_q,
    "longtime": _run_longtime,
    "resolution-study": _run_resolution,
}


def run_experiment(rc: RunConfig, out_dir: str | None = None,
                   figures: bool = True) -> RunResult:
    """Execute one experiment; optionally write tables, summary and figures."""
    kind = rc.experiment["kind"]
    extras, checks, tables, fig_data = _RUNNERS[kind](rc)
    passed = all(checks.values()) if checks else True
    summary = {
        "experiment": kind,
        "passed": passed,
        "checks": checks,
        "seed": rc.seed,
        "config_hash": canonical_hash(rc.raw),
        "version": __version__,
    }
    summary.update(extras)
    files = []
    if out_dir is not None:
        files = emit_outputs(summary, tables, out_dir)
        if kind == "simulate" and rc.experiment.get("dump_increments") and (
            "increments" in fig_data
        ):
            times, inc = fig_data["increments"]
            files.append(write_increments_csv(
                f"{out_dir}/increments.csv", times, inc))
        if figures:
            from .figures import render_figures

            files.extend(render_figures(kind, summary, tables, fig_data, out_dir))
    return RunResult(summary=summary, tables=tables, figure_data=fig_data,
                     passed=passed, files=files)
