"""Run configuration: one YAML document per experiment, fully validated.

Validation reports the first offending field by its path (e.g.
"model.lambda: must be positive for the budyko variant").  The parsed
document is also kept verbatim for provenance hashing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .constitutive import BudykoCoalbedo, Forcing, LinearEmission, SellersCoalbedo
from .noise import (
    ConstantModulation,
    CylindricalNoise,
    FiniteNoise,
    NoiseOff,
    NoiseSpec,
    PowerDecayModulation,
)
from .solver import ModelConfig


class ParseError(ValueError):
    """Config document is not syntactically valid."""


class ValidationError(ValueError):
    """Config document violates a constraint; .path points at the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


KINDS = (
    "simulate",
    "isometry",
    "convolution",
    "compare",
    "converge-eps",
    "converge-lambda",
    "stationary",
    "scan-q",
    "longtime",
    "resolution-study",
)


@dataclass
class RunConfig:
    seed: int
    output_dir: str
    threads: int
    model: ModelConfig
    noise: NoiseSpec
    experiment: dict
    raw: dict = field(repr=False, default_factory=dict)


def _require(doc: dict, key: str, path: str):
    if key not in doc or doc[key] is None:
        raise ValidationError(f"{path}.{key}" if path else key, "is required")
    return doc[key]


def _number(value, path: str, *, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, f"expected a number, got {value!r}")
    v = float(value)
    if positive and v <= 0:
        raise ValidationError(path, "must be positive")
    if nonnegative and v < 0:
        raise ValidationError(path, "must be nonnegative")
    return v


def _integer(value, path: str, *, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValidationError(path, f"must be at least {minimum}")
    return value


def _choice(value, path: str, options) -> str:
    # YAML 1.1 reads a bare `off` as boolean False
    if value is False:
        value = "off"
    if value not in options:
        raise ValidationError(path, f"must be one of {sorted(options)}, got {value!r}")
    return value


def _number_list(value, path: str, *, positive=False) -> list[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ValidationError(path, "expected a nonempty list of numbers")
    return [
        _number(v, f"{path}[{i}]", positive=positive) for i, v in enumerate(value)
    ]


def _coalbedo(doc: dict, path: str):
    variant = _choice(doc.get("variant", "sellers"), f"{path}.variant",
                      {"sellers", "budyko"})
    ice = _number(doc.get("ice", 0.2), f"{path}.ice")
    warm = _number(doc.get("warm", 0.8), f"{path}.warm")
    threshold = _number(doc.get("threshold", -10.0), f"{path}.threshold")
    if not 0.0 < ice < warm < 1.0:
        raise ValidationError(path, f"needs 0 < ice < warm < 1, got {ice}, {warm}")
    if variant == "budyko":
        return BudykoCoalbedo(ice=ice, warm=warm, threshold=threshold)
    half_width = _number(doc.get("half_width", 1.0), f"{path}.half_width",
                         positive=True)
    return SellersCoalbedo(ice=ice, warm=warm, threshold=threshold,
                           half_width=half_width)


def _model(doc: dict, path: str = "model") -> ModelConfig:
    q = _number(doc.get("Q", 4.5), f"{path}.Q", positive=True)
    n_modes = _integer(doc.get("n_modes", 32), f"{path}.n_modes", minimum=1)
    quad_order = doc.get("quad_order")
    if quad_order is not None:
        quad_order = _integer(quad_order, f"{path}.quad_order",
                              minimum=n_modes + 1)
    dt = _number(doc.get("dt", 1e-3), f"{path}.dt", positive=True)
    t_final = _number(doc.get("t_final", 5.0), f"{path}.t_final", nonnegative=True)
    form = _choice(doc.get("form", "y"), f"{path}.form", {"y", "u"})
    coalbedo = _coalbedo(doc.get("coalbedo", {}) or {}, f"{path}.coalbedo")

    lam = doc.get("lambda")
    if isinstance(coalbedo, BudykoCoalbedo):
        if lam is None:
            raise ValidationError(f"{path}.lambda",
                                  "is required for the budyko variant")
        lam = _number(lam, f"{path}.lambda")
        if lam <= 0:
            raise ValidationError(f"{path}.lambda",
                                  "must be positive for the budyko variant")
    elif lam is not None:
        lam = _number(lam, f"{path}.lambda", positive=True)

    em = doc.get("emission", {}) or {}
    emission = LinearEmission(
        slope=_number(em.get("slope", 1.0), f"{path}.emission.slope",
                      positive=True),
        offset=_number(em.get("offset", 0.0), f"{path}.emission.offset"),
    )

    fo = doc.get("forcing", {}) or {}
    s_val = _number(fo.get("S", 1.0), f"{path}.forcing.S", positive=True)
    f_val = _number(fo.get("f", -12.0), f"{path}.forcing.f")
    f_inf = fo.get("f_inf")
    f_inf = _number(f_inf, f"{path}.forcing.f_inf") if f_inf is not None else None
    c_f = fo.get("c_f")
    c_f = _number(c_f, f"{path}.forcing.c_f", positive=True) if c_f is not None else None
    forcing = Forcing(S=s_val, f=f_val, f_inf=f_inf, c_f=c_f)

    try:
        return ModelConfig(
            Q=q, coalbedo=coalbedo, emission=emission, forcing=forcing,
            n_modes=n_modes, quad_order=quad_order, dt=dt, t_final=t_final,
            form=form, yosida_lam=lam,
        )
    except ValueError as exc:
        raise ValidationError(path, str(exc)) from exc


def _noise(doc: dict, model: ModelConfig, path: str = "noise") -> NoiseSpec:
    mode = _choice(doc.get("mode", "off"), f"{path}.mode",
                   {"off", "finite", "cylindrical"})
    if mode == "off":
        return NoiseOff()
    if mode == "finite":
        fields = doc.get("fields")
        if not isinstance(fields, list) or not fields:
            raise ValidationError(f"{path}.fields",
                                  "finite noise needs a list of coefficient rows")
        arr = []
        for i, row in enumerate(fields):
            vals = _number_list(row, f"{path}.fields[{i}]")
            if len(vals) != model.n_modes:
                raise ValidationError(
                    f"{path}.fields[{i}]",
                    f"row length {len(vals)} != model.n_modes {model.n_modes}",
                )
            arr.append(vals)
        return FiniteNoise(fields=np.asarray(arr))
    n_modes = _integer(doc.get("n_modes", 16), f"{path}.n_modes", minimum=1)
    if n_modes >= model.n_modes:
        raise ValidationError(
            f"{path}.n_modes",
            f"must be below model.n_modes={model.n_modes} (mode 0 is excluded)",
        )
    gains = doc.get("gains")
    if gains is not None:
        gains = np.asarray(_number_list(gains, f"{path}.gains"))
        if len(gains) != n_modes:
            raise ValidationError(f"{path}.gains", "length must equal n_modes")
    sigma = _number(doc.get("sigma", 0.0), f"{path}.sigma", nonnegative=True)
    psi_doc = doc.get("psi", {}) or {}
    psi_type = _choice(psi_doc.get("type", "constant"), f"{path}.psi.type",
                       {"constant", "power"})
    if psi_type == "constant":
        psi = ConstantModulation(
            scale=_number(psi_doc.get("scale", 1.0), f"{path}.psi.scale")
        )
    else:
        a = _number(psi_doc.get("a", 1.0), f"{path}.psi.a", positive=True)
        alpha = _number(psi_doc.get("alpha", 1.0), f"{path}.psi.alpha")
        if 2.0 * alpha <= 1.0:
            raise ValidationError(f"{path}.psi.alpha",
                                  f"requires 2*alpha > 1, got alpha={alpha}")
        psi = PowerDecayModulation(a=a, alpha=alpha)
    return CylindricalNoise(n_modes=n_modes, gains=gains, sigma=sigma, psi=psi)


_EXPERIMENT_DEFAULTS: dict[str, dict] = {
    "simulate": {"u0": -8.0, "store_every": 1, "nondeg_eps": [],
                 "dump_increments": False},
    "isometry": {"t": 1.0, "n_paths": 10000, "n_steps": 64, "cases": None,
                 "max_stderr_units": 4.0},
    "convolution": {"t": 1.0, "n_paths": 10000, "n_steps": 64,
                    "rel_tol": 0.05, "horizons": [0.5, 1.0, 2.0],
                    "sup_paths": 2000, "sanity_t": 1000.0,
                    "sanity_modes": 10000, "sanity_tol": 1e-6},
    "compare": {"u0": -8.0, "u0_hat": -7.0, "f": -12.0, "f_hat": -12.0,
                "store_every": 1, "random_configs": 0},
    "converge-eps": {"eps_ladder": [0.4, 0.2, 0.1, 0.05], "u0": -8.0,
                     "target": 1e-2, "store_every": 1},
    "converge-lambda": {"lambdas": [1e-1, 1e-2, 1e-3, 1e-4], "u0": -8.0,
                        "target": None, "store_every": 1},
    "stationary": {"q": None, "tol": 1e-9, "inits": None},
    "scan-q": {"q_values": [1.0, 4.5, 16.0], "tol": 1e-9, "dedup_tol": 1e-6},
    "longtime": {"u0": -8.0, "n_paths": 100, "tol": 1e-2,
                 "target_fraction": 0.9, "store_every": 50},
    "resolution-study": {"dts": [2e-3, 1e-3], "u0": -8.2,
                         "modes_pair": [16, 32], "ratio_band": [1.7, 2.3],
                         "modes_tol": 1e-6},
}


def _experiment(doc: dict, path: str = "experiment") -> dict:
    kind = _choice(_require(doc, "kind", ""), f"{path}.kind", set(KINDS))
    params = dict(_EXPERIMENT_DEFAULTS[kind])
    for key, value in doc.items():
        if key == "kind":
            continue
        if key not in params:
            raise ValidationError(f"{path}.{key}",
                                  f"unknown parameter for kind {kind!r}")
        params[key] = value
    for key in ("tol", "dedup_tol", "target", "rel_tol", "sanity_tol"):
        if params.get(key) is not None:
            params[key] = _number(params[key], f"{path}.{key}", positive=True)
    params["kind"] = kind
    return params


def parse_config(text: str) -> RunConfig:
    """Parse and validate one YAML run document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("config document must be a mapping")
    seed = _integer(_require(doc, "seed", ""), "seed", minimum=0)
    if seed >= 2**64:
        raise ValidationError("seed", "must fit in 64 bits")
    output_dir = doc.get("output_dir", "out")
    threads = _integer(doc.get("threads", 1), "threads", minimum=1)
    model = _model(doc.get("model", {}) or {})
    noise = _noise(doc.get("noise", {}) or {}, model)
    experiment = _experiment(
        doc.get("experiment", {}) or {"kind": "simulate"}
    )
    return RunConfig(
        seed=seed, output_dir=str(output_dir), threads=threads,
        model=model, noise=noise, experiment=experiment, raw=doc,
    )


def load_config(path: str) -> RunConfig:
    with open(path, "r") as fh:
        return parse_config(fh.read())
