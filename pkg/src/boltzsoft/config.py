"""Flat ``key = value`` run configuration with dotted sections.

Keys are written either fully dotted (``kernel.gamma = -1``) or under an
INI-style ``[kernel]`` header.  ``#`` starts a comment.  Every error names
the offending line and field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InputError
from .initial_data import FAMILIES
from .norms import WeightSpec
from .phase_space import KernelParams, SpatialDomain, SphereQuadrature, VelocityGrid
from .solver import SolverConfig


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _opt_float(s: str):
    return None if s.strip().lower() in ("none", "") else float(s)


def _opt_int(s: str):
    return None if s.strip().lower() in ("none", "") else int(s)


def _pfloat(s: str) -> float:
    return math.inf if s.strip().lower() in ("inf", "infinity") else float(s)


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "kernel.gamma": (float, -1.0),
    "kernel.b0": (float, 1.0),
    "kernel.m": (float, 0.5),
    "grid.extent": (float, 8.0),
    "grid.n": (int, 25),
    "grid.sphere_order": (int, 8),
    "grid.interpolation": (str, "corrected"),
    "domain.mode": (str, "homogeneous"),
    "domain.period": (_floats, (1.0,)),
    "domain.cells": (_ints, (1,)),
    "solver.horizon": (float, 1.0),
    "solver.substeps": (int, 4),
    "solver.picard_tol": (float, 1e-10),
    "solver.picard_max_iters": (int, 20),
    "solver.C1": (float, 1.0),
    "solver.positivity_tol": (float, 1e-10),
    "solver.physics": (str, "full"),
    "solver.windows": (int, 5),
    "weight.beta": (float, 37.0),
    "weight.beta_exploratory": (float, 6.0),
    "weight.p": (_pfloat, 4.0),
    "weight.q": (_opt_float, 2.0),
    "weight.mode": (str, "theorem"),
    "initial.family": (str, "gaussian-bump"),
    "initial.target_norm": (_opt_float, 0.5),
    "initial.epsilon": (float, 0.1),
    "initial.seed": (_opt_int, None),
    "initial.amplitude": (float, 0.3),
    "initial.separation": (float, 3.0),
    "output.dir": (str, "out"),
    "sweep.m_list": (_floats, (0.4, 0.2, 0.1, 0.05)),
    "sweep.p": (_pfloat, 4.0),
    "sweep.delta": (float, 0.1),
    "sweep.evaluator": (str, "point"),
    "sweep.rel_tol": (float, 0.2),
    "verify.n": (int, 25),
    "verify.coarse_n": (int, 17),
    "verify.solver_n": (int, 17),
    "verify.fields": (int, 50),
    "verify.random_fields": (int, 5),
    "verify.criteria": (_ints, tuple(range(1, 14))),
    "verify.norms": (_floats, (0.1, 0.5, 1.0)),
    "verify.seed": (int, 20240601),
    "verify.march_norm": (float, 1.0),
    "kernel_report.betas": (_floats, (0.0, 6.0, 10.0, 37.0)),
}


def parse_text(text: str) -> dict:
    """Parse config text into {dotted key: typed value}; unknown keys and bad values raise ConfigError."""
    values: dict = {}
    lines: dict = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError("malformed section header", no)
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", no)
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", no)
        full = f"{section}.{key}" if section and "." not in key else key
        if full not in SCHEMA:
            raise ConfigError("unknown field", no, full)
        if full in values:
            raise ConfigError(f"duplicate field (first set on line {lines[full]})", no, full)
        parser = SCHEMA[full][0]
        try:
            values[full] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"invalid value {val!r} ({exc})", no, full) from None
        lines[full] = no
    out = {k: d for k, (_, d) in SCHEMA.items()}
    out.update(values)
    out["__lines__"] = lines
    return out


@dataclass
class RunConfig:
    """Validated run configuration (all component invariants checked)."""

    kernel: KernelParams
    grid: VelocityGrid
    sphere: SphereQuadrature
    interpolation: str
    domain: SpatialDomain
    solver: SolverConfig
    windows: int
    weight: WeightSpec
    beta_exploratory: float
    initial: dict
    output_dir: Path
    sweep: dict
    verify: dict
    kernel_report: dict
    raw: dict = field(repr=False, default_factory=dict)

    def exploratory_weight(self) -> WeightSpec:
        return WeightSpec(self.beta_exploratory, self.weight.p, self.weight.q, "exploratory", self.kernel.gamma)


def build(values: dict, mode: str | None = None, out: str | None = None) -> RunConfig:
    """Construct a RunConfig; component validation errors become ConfigError with line and field."""
    lines = values.get("__lines__", {})

    def fail(key: str, exc: Exception):
        raise ConfigError(str(exc), lines.get(key), key) from None

    def guard(keys, fn):
        try:
            return fn()
        except (InputError, ValueError) as exc:
            fail(next((k for k in keys if k in lines), keys[0]), exc)

    v = dict(values)
    if mode is not None:
        if mode not in ("theorem", "exploratory"):
            raise ConfigError(f"unknown mode {mode!r}", None, "weight.mode")
        v["weight.mode"] = mode
    if out is not None:
        v["output.dir"] = out
    kernel = guard(["kernel.gamma", "kernel.b0", "kernel.m"],
                   lambda: KernelParams(v["kernel.gamma"], v["kernel.b0"], v["kernel.m"]))
    grid = guard(["grid.n", "grid.extent"], lambda: VelocityGrid(v["grid.extent"], v["grid.n"]))
    sphere = guard(["grid.sphere_order"], lambda: SphereQuadrature(v["grid.sphere_order"]))
    if v["grid.interpolation"] not in ("corrected", "trilinear"):
        fail("grid.interpolation", ValueError("must be 'corrected' or 'trilinear'"))
    dm = v["domain.mode"]
    per = v["domain.period"]
    cel = v["domain.cells"]
    domain = guard(["domain.mode", "domain.period", "domain.cells"],
                   lambda: SpatialDomain(dm, per[0] if len(per) == 1 else per, cel[0] if len(cel) == 1 else cel))
    solver = guard(["solver.horizon", "solver.substeps", "solver.picard_tol", "solver.picard_max_iters",
                    "solver.C1", "solver.positivity_tol", "solver.physics"],
                   lambda: SolverConfig(v["solver.horizon"], v["solver.substeps"], v["solver.picard_tol"],
                                        v["solver.picard_max_iters"], v["solver.C1"], v["solver.positivity_tol"],
                                        v["solver.physics"]))
    if v["solver.windows"] < 1:
        fail("solver.windows", ValueError("must be >= 1"))
    weight = guard(["weight.beta", "weight.p", "weight.q", "weight.mode"],
                   lambda: WeightSpec(v["weight.beta"], v["weight.p"], v["weight.q"], v["weight.mode"], kernel.gamma))
    guard(["weight.beta_exploratory"],
          lambda: WeightSpec(v["weight.beta_exploratory"], weight.p, weight.q, "exploratory", kernel.gamma))
    fam = v["initial.family"]
    if fam not in FAMILIES:
        fail("initial.family", ValueError(f"unknown family, expected one of {FAMILIES}"))
    if fam == "random-smooth" and v["initial.seed"] is None:
        fail("initial.seed", ValueError("random-smooth data require an explicit seed"))
    initial = {"family": fam, "target_norm": v["initial.target_norm"], "epsilon": v["initial.epsilon"],
               "seed": v["initial.seed"], "amplitude": v["initial.amplitude"],
               "separation": v["initial.separation"]}
    sweep = {"m_list": v["sweep.m_list"], "p": v["sweep.p"], "delta": v["sweep.delta"],
             "evaluator": v["sweep.evaluator"], "rel_tol": v["sweep.rel_tol"]}
    if sweep["evaluator"] not in ("point", "lattice"):
        fail("sweep.evaluator", ValueError("must be 'point' or 'lattice'"))
    verify = {k.split(".", 1)[1]: v[k] for k in SCHEMA if k.startswith("verify.")}
    for k in ("n", "coarse_n", "solver_n"):
        if verify[k] < 3 or verify[k] % 2 == 0:
            fail(f"verify.{k}", ValueError("must be an odd integer >= 3"))
    if verify["fields"] < 1 or verify["random_fields"] < 1:
        fail("verify.fields", ValueError("must be >= 1"))
    if any(c < 1 or c > 13 for c in verify["criteria"]):
        fail("verify.criteria", ValueError("criterion ids run from 1 to 13"))
    return RunConfig(kernel, grid, sphere, v["grid.interpolation"], domain, solver, v["solver.windows"], weight,
                     v["weight.beta_exploratory"], initial, Path(v["output.dir"]), sweep, verify,
                     {"betas": v["kernel_report.betas"]}, values)


def load(path: str | Path | None, mode: str | None = None, out: str | None = None) -> RunConfig:
    """Read and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return build(parse_text(""), mode, out)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return build(parse_text(text), mode, out)
