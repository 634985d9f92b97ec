"""Study configuration: strict JSON schema plus semantic checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .kernel import KernelError, KernelSpec, make_kernel
from .particle_sim import INITIAL_LAWS, InitialLaw

__all__ = ["ConfigError", "StudyConfig", "parse_config", "config_from_dict", "with_overrides", "SCHEMA"]


class ConfigError(ValueError):
    pass


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kernel", "N", "runs", "seed", "t_end"],
    "properties": {
        "kernel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["uniform", "linear", "paper_example", "series"]},
                "coefficients": {"type": "array", "items": _NUM, "minItems": 1},
                "truncation": {"type": "integer", "minimum": 0},
            },
        },
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dim": {"enum": [1, 2, 3]},
                "L": _POS,
                "periodic": {"type": "boolean"},
            },
        },
        "initial_law": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"enum": list(INITIAL_LAWS)},
                "x_amplitude": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
            },
        },
        "N": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "runs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "t_end": {"type": "number", "minimum": 0},
        "snapshot_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "Nx": {"type": "integer", "minimum": 2},
                "Nv": {"type": "integer", "minimum": 2},
                "dt": _POS,
            },
        },
        "histogram": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"x_bins": {"type": "integer", "minimum": 1}},
        },
        "metrics": {"type": "array", "items": {"enum": ["L1", "W1v"]}, "minItems": 1},
        "estimators": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "marginal": {"enum": ["tagged", "pooled"]},
                "defect": {"enum": ["tagged", "pooled"]},
            },
        },
        "alpha": {"type": "array", "items": _NUM, "minItems": 1},
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "j": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "t": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
        },
        "output_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class StudyConfig:
    kernel: KernelSpec
    N: tuple[int, ...]
    runs: int
    seed: int
    t_end: float
    dim: int = 1
    L: float = 1.0
    periodic: bool = True
    law: InitialLaw = field(default_factory=InitialLaw)
    snapshot_times: tuple[float, ...] = ()
    solver_Nx: int = 64
    solver_Nv: int | None = None
    solver_dt: float = 1e-2
    x_bins: int = 32
    metrics: tuple[str, ...] = ("L1", "W1v")
    marginal_estimator: str = "tagged"
    defect_estimator: str = "pooled"
    alpha: tuple[float, ...] = (1.0,)
    bound_j: tuple[int, ...] = (1, 2)
    bound_t: tuple[float, ...] = ()
    output_dir: str = "out"
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def to_json(self) -> str:
        """Canonical single-line JSON of the source config (for report headers).

        Worker count and output location do not change results and are left out.
        """
        prov = {k: v for k, v in self.raw.items() if k not in ("workers", "output_dir")}
        return json.dumps(prov, sort_keys=True, separators=(",", ":"))


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def config_from_dict(data: dict) -> StudyConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"config error at {_path(err)}: {err.message}")

    kern = data["kernel"]
    try:
        spec = make_kernel(kern["name"], kern.get("coefficients"), kern.get("truncation"))
    except KernelError as exc:
        raise ConfigError(f"config error at kernel: {exc}") from exc

    alpha = tuple(float(a) for a in data.get("alpha", [1.0]))
    for a in alpha:
        if not a > math.log(2.0):
            raise ConfigError(f"config error at alpha: alpha must exceed log 2 (got {a})")

    t_end = float(data["t_end"])
    snaps = tuple(sorted(float(t) for t in data.get("snapshot_times", [t_end])))
    if snaps and snaps[-1] > t_end:
        raise ConfigError("config error at snapshot_times: times must not exceed t_end")

    geo = data.get("geometry", {})
    law_d = data.get("initial_law", {})
    solver = data.get("solver", {})
    est = data.get("estimators", {})
    bounds = data.get("bounds", {})
    return StudyConfig(
        kernel=spec,
        N=tuple(int(n) for n in data["N"]),
        runs=int(data["runs"]),
        seed=int(data["seed"]),
        t_end=t_end,
        dim=int(geo.get("dim", 1)),
        L=float(geo.get("L", 1.0)),
        periodic=bool(geo.get("periodic", True)),
        law=InitialLaw(law_d.get("name", "uniform_x_two_point_v"),
                       float(law_d.get("x_amplitude", 0.0))),
        snapshot_times=snaps,
        solver_Nx=int(solver.get("Nx", 64)),
        solver_Nv=solver.get("Nv"),
        solver_dt=float(solver.get("dt", 1e-2)),
        x_bins=int(data.get("histogram", {}).get("x_bins", 32)),
        metrics=tuple(data.get("metrics", ["L1", "W1v"])),
        marginal_estimator=est.get("marginal", "tagged"),
        defect_estimator=est.get("defect", "pooled"),
        alpha=alpha,
        bound_j=tuple(bounds.get("j", [1, 2])),
        bound_t=tuple(float(t) for t in bounds.get("t", snaps)),
        output_dir=data.get("output_dir", "out"),
        workers=int(data.get("workers", 1)),
        raw=data,
    )


def parse_config(path) -> StudyConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)


def with_overrides(cfg: StudyConfig, *, seed=None, workers=None, output_dir=None) -> StudyConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
        changes["raw"] = {**cfg.raw, "seed": int(seed)}
    if workers is not None:
        changes["workers"] = int(workers)
    if output_dir is not None:
        changes["output_dir"] = str(output_dir)
    return replace(cfg, **changes)
