"""Run orchestration: config parsing, CLI subcommands, serialization.

Configs are strict JSON: unknown keys are errors, defaults are filled in
and echoed back, so parse -> serialize -> parse is the identity on the
resolved document. Frames stream to NDJSON (a header line carrying the
config echo, then one object per frame), run summaries to CSV, kernel
estimates to a single JSON document.

Exit codes: 0 success, 2 config error, 3 solver non-convergence, 4
phase-band violation, 5 property-suite failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .elliptic import EllipticOperatorSpec, NonConvergenceError
from .evolution import EvolutionConfig, PhaseBandViolationError, run
from .fboperator import (
    VelocityLaw,
    difference_law,
    identity_law,
    op_H,
    op_I,
    op_I_minus,
    squares_law,
    table_law,
)
from .geometry import GraphInterface, PeriodicGrid, ResolutionError

_EXIT_CONFIG = 2
_EXIT_NONCONVERGENCE = 3
_EXIT_BAND = 4
_EXIT_PROPERTY = 5

_SUITES = (
    "gcp",
    "bulk_monotone",
    "translation",
    "constant_shift",
    "far_field_decay",
    "modulus",
    "evolution_comparison",
)


class ConfigError(ValueError):
    """Configuration file violates the schema."""


@dataclass(frozen=True)
class RunConfig:
    phase: str
    grid: PeriodicGrid
    delta: float
    opspec: EllipticOperatorSpec
    opspec_minus: Optional[EllipticOperatorSpec]
    law: VelocityLaw
    initial: np.ndarray
    evolution: Optional[dict]
    linearize: dict
    outputs: dict
    seed: int
    echo: dict

    @property
    def two_phase(self) -> bool:
        return self.phase == "two"

    def interface(self) -> GraphInterface:
        return GraphInterface(self.initial, self.grid, self.delta,
                              self.two_phase)

    def evolution_config(self) -> EvolutionConfig:
        if self.evolution is None:
            raise ConfigError("an 'evolution' section with T is required to run")
        ev = self.evolution
        return EvolutionConfig(
            T=ev["T"],
            law=self.law,
            opspec=self.opspec,
            opspec_minus=self.opspec_minus,
            cfl=ev["cfl"],
            dt_max=ev["dt_max"] if ev["dt_max"] is not None else np.inf,
            frame_stride=ev["frame_stride"],
            order=ev["order"],
            tol=ev["tol"],
        )


def _require_keys(section: dict, allowed: dict, where: str) -> dict:
    """Enforce strict keys and fill defaults; _REQUIRED marks mandatory."""
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")
    out = {}
    for key, default in allowed.items():
        if key in section:
            out[key] = section[key]
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} in {where}")
        else:
            out[key] = default
    return out


class _Required:
    pass


_REQUIRED = _Required()


def _number(value, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    v = float(value)
    if positive and not v > 0:
        raise ConfigError(f"{where} must be positive")
    return v


def _integer(value, where: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}")
    return value


def _parse_operator(section, where: str) -> EllipticOperatorSpec:
    sec = _require_keys(section or {}, {"kind": "laplace", "lam": 1.0, "Lam": 1.0},
                        where)
    kind = sec["kind"]
    if kind not in ("laplace", "pucci_plus", "pucci_minus"):
        raise ConfigError(f"{where}.kind must be laplace|pucci_plus|pucci_minus")
    try:
        return EllipticOperatorSpec(kind, _number(sec["lam"], f"{where}.lam", True),
                                    _number(sec["Lam"], f"{where}.Lam", True))
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_law(section, phase: str) -> VelocityLaw:
    default_id = "identity" if phase == "one" else "difference"
    if section is None:
        section = {"id": default_id}
    if "id" not in section:
        raise ConfigError("missing required key 'id' in law")
    law_id = section["id"]
    try:
        if law_id == "identity":
            _require_keys(section, {"id": _REQUIRED}, "law")
            law = identity_law()
        elif law_id == "difference":
            _require_keys(section, {"id": _REQUIRED}, "law")
            law = difference_law()
        elif law_id == "squares":
            sec = _require_keys(section, {"id": _REQUIRED, "a_lo": 0.2, "a_hi": 5.0},
                                "law")
            law = squares_law(_number(sec["a_lo"], "law.a_lo", True),
                              _number(sec["a_hi"], "law.a_hi", True))
        elif law_id == "table":
            sec = _require_keys(
                section,
                {"id": _REQUIRED, "a_points": _REQUIRED, "a_values": _REQUIRED,
                 "lambda0": _REQUIRED, "Lambda0": _REQUIRED,
                 "b_points": None, "b_values": None},
                "law",
            )
            law = table_law(sec["a_points"], sec["a_values"],
                            _number(sec["lambda0"], "law.lambda0", True),
                            _number(sec["Lambda0"], "law.Lambda0", True),
                            sec["b_points"], sec["b_values"])
        else:
            raise ConfigError(f"unknown law id {law_id!r}")
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"law: {e}") from e
    expected = "one_phase" if phase == "one" else "two_phase"
    if law.arity != expected:
        raise ConfigError(f"law {law_id!r} has arity {law.arity}, "
                          f"but phase is {phase!r}")
    return law


def _parse_initial(section, grid: PeriodicGrid, base_dir: Path) -> np.ndarray:
    if section is None:
        raise ConfigError("missing required section 'initial'")
    if "kind" not in section:
        raise ConfigError("missing required key 'kind' in initial")
    kind = section["kind"]
    if kind == "flat":
        sec = _require_keys(section, {"kind": _REQUIRED, "value": _REQUIRED},
                            "initial")
        return np.full(grid.n_x, _number(sec["value"], "initial.value", True))
    if kind == "sine":
        sec = _require_keys(
            section,
            {"kind": _REQUIRED, "mean": _REQUIRED, "amplitude": _REQUIRED,
             "mode": 1},
            "initial",
        )
        x = grid.x_nodes()
        mode = _integer(sec["mode"], "initial.mode", 1)
        return (_number(sec["mean"], "initial.mean", True)
                + _number(sec["amplitude"], "initial.amplitude")
                * np.sin(2.0 * np.pi * mode * x / grid.period))
    if kind == "samples":
        sec = _require_keys(section, {"kind": _REQUIRED, "path": _REQUIRED},
                            "initial")
        path = base_dir / str(sec["path"])
        if not path.is_file():
            raise ConfigError(f"initial.path does not exist: {path}")
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"initial samples {path}: line {e.lineno}: "
                                  f"{e.msg}") from e
        values = np.asarray(data, dtype=float)
        if values.ndim != 1 or values.size != grid.n_x:
            raise ConfigError(
                f"initial samples must be a flat array of length {grid.n_x}"
            )
        return values
    raise ConfigError(f"unknown initial kind {kind!r}")


def _config_from_dict(doc: dict, base_dir: Path,
                      resolution: Optional[tuple] = None,
                      seed: Optional[int] = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    top = _require_keys(
        doc,
        {"phase": _REQUIRED, "grid": _REQUIRED, "delta": 0.05,
         "operator": None, "operator_minus": None, "law": None,
         "initial": _REQUIRED, "evolution": None, "linearize": None,
         "output": None, "seed": 0},
        "config",
    )
    phase = top["phase"]
    if phase not in ("one", "two"):
        raise ConfigError("phase must be 'one' or 'two'")
    two_phase = phase == "two"

    cap_key = "L" if two_phase else "height_cap"
    grid_sec = _require_keys(
        top["grid"] or {},
        {"n_x": 256, "n_y": 256, "period": 2.0 * np.pi, cap_key: _REQUIRED},
        "grid",
    )
    n_x = _integer(grid_sec["n_x"], "grid.n_x", 8)
    n_y = _integer(grid_sec["n_y"], "grid.n_y", 8)
    if resolution is not None:
        n_x, n_y = resolution
    try:
        grid = PeriodicGrid(n_x, n_y,
                            _number(grid_sec["period"], "grid.period", True),
                            _number(grid_sec[cap_key], f"grid.{cap_key}", True))
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from e

    delta = _number(top["delta"], "delta")
    if delta < 0:
        raise ConfigError("delta must be >= 0")

    opspec = _parse_operator(top["operator"], "operator")
    opspec_minus = (_parse_operator(top["operator_minus"], "operator_minus")
                    if top["operator_minus"] is not None else None)
    if opspec_minus is not None and not two_phase:
        raise ConfigError("operator_minus only applies to phase 'two'")

    law = _parse_law(top["law"], phase)
    initial = _parse_initial(top["initial"], grid, base_dir)

    evolution = None
    if top["evolution"] is not None:
        ev = _require_keys(
            top["evolution"],
            {"T": _REQUIRED, "cfl": 0.4, "dt_max": None, "frame_stride": 1,
             "order": 2, "tol": 1e-10},
            "evolution",
        )
        evolution = {
            "T": _number(ev["T"], "evolution.T", True),
            "cfl": _number(ev["cfl"], "evolution.cfl", True),
            "dt_max": (None if ev["dt_max"] is None
                       else _number(ev["dt_max"], "evolution.dt_max", True)),
            "frame_stride": _integer(ev["frame_stride"],
                                     "evolution.frame_stride", 1),
            "order": _integer(ev["order"], "evolution.order", 1),
            "tol": _number(ev["tol"], "evolution.tol", True),
        }
        if evolution["order"] not in (1, 2):
            raise ConfigError("evolution.order must be 1 or 2")

    linearize = _require_keys(
        top["linearize"] or {},
        {"x0": 0, "eps": None, "order": 1},
        "linearize",
    )
    linearize = {
        "x0": _integer(linearize["x0"], "linearize.x0", 0),
        "eps": (None if linearize["eps"] is None
                else _number(linearize["eps"], "linearize.eps", True)),
        "order": _integer(linearize["order"], "linearize.order", 1),
    }

    outputs = _require_keys(
        top["output"] or {},
        {"frames": "frames.ndjson", "summary": "summary.csv",
         "kernel": "kernel.json", "probe": "probe.json",
         "verify": "verify.json"},
        "output",
    )

    seed_val = seed if seed is not None else _integer(top["seed"], "seed", 0)

    echo = {
        "phase": phase,
        "grid": {"n_x": grid.n_x, "n_y": grid.n_y, "period": grid.period,
                 cap_key: grid.height_cap},
        "delta": delta,
        "operator": {"kind": opspec.kind, "lam": opspec.lam, "Lam": opspec.Lam},
        "operator_minus": (None if opspec_minus is None else
                           {"kind": opspec_minus.kind,
                            "lam": opspec_minus.lam,
                            "Lam": opspec_minus.Lam}),
        "law": top["law"] if top["law"] is not None else
               {"id": "identity" if phase == "one" else "difference"},
        "initial": top["initial"],
        "evolution": evolution,
        "linearize": linearize,
        "output": outputs,
        "seed": seed_val,
    }
    return RunConfig(phase, grid, delta, opspec, opspec_minus, law, initial,
                     evolution, linearize, outputs, seed_val, echo)


def parse_config(path, resolution: Optional[tuple] = None,
                 seed: Optional[int] = None) -> RunConfig:
    """Parse and validate a JSON config file; unknown keys are errors."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from e
    return _config_from_dict(doc, path.parent, resolution, seed)


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _frame_record(frame) -> dict:
    i_minus = frame.fluxes.i_minus
    return {
        "t": float(frame.t),
        "dt": float(frame.stats["dt"]),
        "f": [float(v) for v in frame.f],
        "i_plus": [float(v) for v in frame.fluxes.i_plus],
        "i_minus": None if i_minus is None else [float(v) for v in i_minus],
        "stats": {k: float(v) for k, v in frame.stats.items()},
    }


def cmd_run(config: RunConfig, out_dir: Path) -> int:
    """Evolve the configured interface, streaming frames to NDJSON."""
    ev = config.evolution_config()
    f0 = config.interface()
    out_dir.mkdir(parents=True, exist_ok=True)
    frames_path = out_dir / config.outputs["frames"]
    summary_path = out_dir / config.outputs["summary"]
    frames = []
    code = 0
    with open(frames_path, "w") as fh:
        fh.write(_json_line({"config": config.echo}))

        def emit(frame):
            frames.append(frame)
            fh.write(_json_line(_frame_record(frame)))

        try:
            run(f0, ev, on_frame=emit)
        except PhaseBandViolationError as e:
            print(f"run halted: {e}", file=sys.stderr)
            code = _EXIT_BAND
        except NonConvergenceError as e:
            print(f"run halted: {e}", file=sys.stderr)
            code = _EXIT_NONCONVERGENCE
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "f_min", "f_max", "lipschitz", "max_rhs"])
        for fr in frames:
            writer.writerow([repr(float(fr.t)), repr(fr.stats["f_min"]),
                             repr(fr.stats["f_max"]), repr(fr.stats["lipschitz"]),
                             repr(float(np.abs(fr.rhs).max()))])
    if frames:
        last = frames[-1]
        print(f"{len(frames)} frames to {frames_path}; final t={last.t:.6g} "
              f"f in [{last.stats['f_min']:.6g}, {last.stats['f_max']:.6g}]")
    return code


def cmd_probe(config: RunConfig, out_dir: Path, subject: str = "I") -> int:
    """Evaluate one flux profile at the initial interface and dump it."""
    if subject not in ("I", "Iplus", "Iminus", "H"):
        raise ConfigError(f"unknown probe subject {subject!r}")
    f = config.interface()
    order = (config.evolution or {"order": 2})["order"]
    tol = (config.evolution or {"tol": 1e-10})["tol"]
    if subject in ("Iminus", "H") and not config.two_phase:
        raise ConfigError(f"subject {subject} needs phase 'two'")
    clipped = ()
    if subject in ("I", "Iplus"):
        fluxes = op_I(f, config.opspec, order, tol)
        values, clipped = fluxes.i_plus, fluxes.clipped
    elif subject == "Iminus":
        values = op_I_minus(f, config.opspec_minus or config.opspec, order, tol)
    else:
        values = op_H(f, config.law, config.opspec, config.opspec_minus,
                      order, tol)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / config.outputs["probe"]
    doc = {
        "config": config.echo,
        "subject": subject,
        "order": order,
        "x": [float(v) for v in config.grid.x_nodes()],
        "values": [float(v) for v in values],
        "clipped": list(clipped),
    }
    with open(path, "w") as fh:
        fh.write(_json_line(doc))
    print(f"{subject} profile to {path}; range [{min(doc['values']):.6g}, "
          f"{max(doc['values']):.6g}]")
    return 0


def cmd_linearize(config: RunConfig, out_dir: Path) -> int:
    """Extract the kernel row at the initial interface and dump it as JSON."""
    f = config.interface()
    lin = config.linearize
    estimate = analysis.linearize_I(f, config.opspec, lin["eps"], lin["x0"],
                                    lin["order"])
    period = config.grid.period
    radii = [period / 8.0, period / 4.0, period / 2.0]
    doc = {
        "config": config.echo,
        "estimate": estimate.as_dict(),
        "tail": {"radii": radii,
                 "mass": [estimate.tail_mass(R) for R in radii]},
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / config.outputs["kernel"]
    with open(path, "w") as fh:
        fh.write(_json_line(doc))
    print(f"kernel estimate to {path}; c0={estimate.c0:.6g} "
          f"drift={estimate.drift:.3g}")
    return 0


def _run_suite(name: str, config: RunConfig):
    """Instantiate one property suite with grids scaled to the config."""
    n_x, n_y = config.grid.n_x, config.grid.n_y
    seed = config.seed
    two_pi = 2.0 * np.pi
    if name == "gcp":
        return [analysis.check_gcp(seed=seed,
                                   grid=PeriodicGrid(n_x, n_y, two_pi, 2.0))]
    if name == "bulk_monotone":
        return [analysis.check_bulk_monotone(seed=seed + 1,
                                             grid=PeriodicGrid(n_x, n_y, two_pi, 2.0))]
    if name == "translation":
        return [analysis.check_translation(seed=seed + 2,
                                           grid=PeriodicGrid(n_x, n_y, two_pi, 2.0))]
    if name == "constant_shift":
        return [analysis.check_constant_shift(seed=seed + 3,
                                              grid=PeriodicGrid(n_x, n_y, two_pi, 2.0))]
    if name == "far_field_decay":
        return [analysis.check_far_field_decay(seed=seed + 4,
                                               grid=PeriodicGrid(n_x, n_y, two_pi, 2.0))]
    if name == "modulus":
        return [
            analysis.check_modulus("one_phase",
                                   grid=PeriodicGrid(n_x, n_y, two_pi, 2.5)),
            analysis.check_modulus("two_phase",
                                   grid=PeriodicGrid(n_x, n_y, two_pi, 3.0)),
        ]
    if name == "evolution_comparison":
        return [analysis.check_evolution_comparison(
            seed=seed + 5, grid=PeriodicGrid(n_x, n_y, 8.0 * np.pi, 2.5))]
    raise ConfigError(f"unknown suite {name!r}")


def cmd_verify(config: RunConfig, out_dir: Path, suites=None) -> int:
    """Run the named property suites; exit 0 iff all pass."""
    names = list(suites) if suites else list(_SUITES)
    for name in names:
        if name not in _SUITES:
            raise ConfigError(f"unknown suite {name!r}; choose from "
                              f"{', '.join(_SUITES)}")
    reports = []
    for name in names:
        for report in _run_suite(name, config):
            reports.append(report)
            print(report.summary())
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / config.outputs["verify"]
    with open(path, "w") as fh:
        fh.write(_json_line({"config": config.echo,
                             "reports": [r.as_dict() for r in reports]}))
    return 0 if all(r.passed for r in reports) else _EXIT_PROPERTY


def _parse_resolution(text: str) -> tuple:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ConfigError("resolution must look like 256x256")
    try:
        n_x, n_y = int(parts[0]), int(parts[1])
    except ValueError as e:
        raise ConfigError("resolution must look like 256x256") from e
    return n_x, n_y


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heleshaw",
        description="Free boundary interface flows via elliptic solves",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "evolve the configured interface and stream frames"),
        ("probe", "evaluate one flux profile at the initial interface"),
        ("linearize", "extract the kernel row at the initial interface"),
        ("verify", "run property suites"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to JSON config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--resolution", default=None,
                       help="grid override, e.g. 256x256")
        if name == "probe":
            p.add_argument("--subject", default="I",
                           choices=("I", "Iplus", "Iminus", "H"))
        if name == "verify":
            p.add_argument("suites", nargs="*",
                           help=f"suites to run (default all): {', '.join(_SUITES)}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        resolution = (_parse_resolution(args.resolution)
                      if args.resolution else None)
        config = parse_config(args.config, resolution, args.seed)
        out_dir = Path(args.out)
        if args.command == "run":
            return cmd_run(config, out_dir)
        if args.command == "probe":
            return cmd_probe(config, out_dir, args.subject)
        if args.command == "linearize":
            return cmd_linearize(config, out_dir)
        return cmd_verify(config, out_dir, args.suites)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return _EXIT_CONFIG
    except (ValueError, ResolutionError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return _EXIT_CONFIG
    except PhaseBandViolationError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_BAND
    except NonConvergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
