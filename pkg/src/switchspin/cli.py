"""Command-line front end.

A run is described by a JSON config file; a handful of flags override it.
Example config::

    {
      "task": "synthesize-selective",
      "system": {"A": 1.0, "B": 1.0, "omega_I": -0.5},
      "target": {"axis": [0, 0, 1], "angle": "pi", "manifold": "alpha"},
      "seed": 0,
      "out": "runs/selective"
    }

``system`` takes one of four shapes:

* ``{"A", "B", "omega_I"}``: one nucleus in A-units;
* ``{"nuclei": [{"A", "B", "omega_I"}, ...], "Omega_S"}``: several nuclei;
* ``{"lab": {"B0", "gamma_e", "gamma_n", "A", "B"}}``: one nucleus in SI;
* ``{"lab": {"B0", "gamma_e"}, "nuclei": [{"gamma_n", "A", "B"}, ...]}``.

The lab shapes are required with ``--units SI``.  SI frequencies are divided
by ``|A|`` (by the largest remaining frequency when ``A = 0``) so the library
always works in A-units; durations are converted back on output.

Rotations are ``{"axis": [...], "angle": ...}``, ``{"quaternion": [w, x, y, z]}``,
``"identity"`` or ``"random"`` (drawn from ``seed``).  Angles accept
arithmetic on numbers and ``pi``, e.g. ``"pi/2"``.

Exit status: 0 success, 2 invalid input, 3 synthesis did not converge (the
best-effort artifact is still written and flagged), 4 degenerate or
uncontrollable system.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fileio
from . import operators as ops
from . import protocols as proto
from .errors import DegenerateFrameError, NotControllableError, SynthesisError
from .sequence import (
    PulseSequence,
    Schedule,
    bloch_trajectory,
    conditional_rotations,
    full_propagator,
    manifold_propagators,
    multi_full_propagator,
)
from .su2 import Rotation, random_rotation, rot_fidelity, rot_from_axis_angle
from .synthesis import (
    SynthesisOptions,
    lowenthal_k,
    multi_chains,
    synthesize_multi,
    synthesize_pair,
    synthesize_selective,
    synthesize_uniform,
)
from .system import (
    LabFrameParams,
    Manifold,
    MultiSystemParams,
    SystemParams,
    check_multi_controllability,
    derive_frame,
    from_lab_frame,
    lie_closure_dimension,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
EXIT_DEGENERATE = 4

TASKS = (
    "frame",
    "synthesize-uniform",
    "synthesize-selective",
    "synthesize-pair",
    "synthesize-multi",
    "protocol",
    "simulate",
    "scan",
    "trajectory",
)
PROTOCOLS = (
    "refocused-uniform",
    "refocused-controlled",
    "controlled-z",
    "polarization-transfer",
    "cartan",
)
PROTOCOL_TOL = 1e-6


class ConfigError(ValueError):
    """Raised for configs that cannot be turned into a run."""


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def parse_number(value) -> float:
    """Float from a number or an arithmetic string over numbers and ``pi``."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a number, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported expression {value!r}")

    try:
        out = ev(ast.parse(value, mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot evaluate {value!r}: {exc}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{value!r} is not finite")
    return out


def _vector(value, name: str) -> np.ndarray:
    try:
        v = np.array([parse_number(x) for x in value], dtype=float)
    except TypeError:
        raise ConfigError(f"{name} must be a list of three numbers") from None
    if v.shape != (3,):
        raise ConfigError(f"{name} must have three components")
    return v


def parse_rotation(spec, rng: np.random.Generator) -> Optional[Rotation]:
    """Rotation from a config entry; ``None`` stays ``None`` (a free manifold)."""
    if spec is None:
        return None
    if spec == "identity":
        return Rotation.identity()
    if spec == "random":
        return random_rotation(rng)
    if not isinstance(spec, dict):
        raise ConfigError(f"cannot read rotation {spec!r}")
    if "quaternion" in spec:
        q = np.array([parse_number(x) for x in spec["quaternion"]])
        if q.shape != (4,) or not np.linalg.norm(q) > 0:
            raise ConfigError("quaternion must have four components, not all zero")
        return Rotation.from_array(q)
    if "axis" in spec and "angle" in spec:
        axis = _vector(spec["axis"], "axis")
        if not np.linalg.norm(axis) > 0:
            raise ConfigError("rotation axis must be nonzero")
        return rot_from_axis_angle(axis / np.linalg.norm(axis), parse_number(spec["angle"]))
    raise ConfigError(f"rotation needs 'axis' and 'angle' or 'quaternion': {spec!r}")


def _manifold(value) -> Manifold:
    try:
        return Manifold.coerce(value)
    except ValueError:
        raise ConfigError(f"unknown manifold {value!r}") from None


def _quat_list(r: Optional[Rotation]):
    return None if r is None else r.array.tolist()


def _matrix_json(u: np.ndarray) -> dict:
    return {"re": u.real.tolist(), "im": u.imag.tolist()}


def _matrix_from_json(d) -> np.ndarray:
    try:
        u = np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)
    except (KeyError, TypeError, ValueError):
        raise ConfigError("matrices are given as {'re': [[...]], 'im': [[...]]}") from None
    return u


NAMED_GATES = {
    "identity": np.eye(4, dtype=complex),
    "controlled-z": ops.block_diag(np.eye(2), np.diag([1.0, -1.0])),
    "cnot": ops.block_diag(np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])),
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Validated run description; internal quantities are in A-units."""

    task: str
    system: object
    units: str = "A-units"
    freq_scale: float = 1.0
    seed: int = 0
    out: Path = Path("switchspin-out")
    raw: dict = field(default_factory=dict)
    offsets: np.ndarray = field(default_factory=lambda: np.array(proto.DEFAULT_OFFSETS))
    dt: float = 0.05

    @property
    def time_scale(self) -> float:
        """Multiplier taking internal durations to output units."""
        return 1.0 / self.freq_scale

    @property
    def is_multi(self) -> bool:
        return isinstance(self.system, MultiSystemParams)

    def options(self) -> SynthesisOptions:
        extra = dict(self.raw.get("options") or {})
        extra["rng_seed"] = self.seed
        try:
            return SynthesisOptions(**extra)
        except TypeError as exc:
            raise ConfigError(f"bad synthesis option: {exc}") from None

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _si_scale(A: float, others: Sequence[float]) -> float:
    scale = abs(A) if A != 0 else max((abs(x) for x in others), default=0.0)
    if not scale > 0:
        raise ConfigError("cannot choose an SI frequency scale: all couplings and Larmor frequencies vanish")
    return scale


def parse_system(spec: dict, units: str):
    """System object and the frequency scale that maps it to A-units."""
    if not isinstance(spec, dict):
        raise ConfigError("'system' must be an object")
    try:
        if "lab" in spec:
            if units != "SI":
                raise ConfigError("lab-frame systems need --units SI")
            lab = dict(spec["lab"])
            if "nuclei" in spec:
                base = {k: float(lab.pop(k)) for k in ("B0", "gamma_e")}
                ps = [from_lab_frame(LabFrameParams(**base, **{k: float(v) for k, v in n.items()})) for n in spec["nuclei"]]
                scale = _si_scale(ps[0].A, [ps[0].B, ps[0].omega_I])
                return MultiSystemParams(tuple(p.scaled(1 / scale) for p in ps)), scale
            p = from_lab_frame(LabFrameParams(**{k: float(v) for k, v in lab.items()}))
            scale = _si_scale(p.A, [p.B, p.omega_I])
            return p.scaled(1 / scale), scale
        if units == "SI":
            raise ConfigError("SI units need gyromagnetic inputs under 'lab'")
        if "nuclei" in spec:
            nuclei = tuple(
                SystemParams(**{k: parse_number(v) for k, v in n.items()}) for n in spec["nuclei"]
            )
            return MultiSystemParams(nuclei, parse_number(spec.get("Omega_S", 0.0))), 1.0
        return SystemParams(**{k: parse_number(v) for k, v in spec.items()}), 1.0
    except TypeError as exc:
        raise ConfigError(f"bad system description: {exc}") from None
    except KeyError as exc:
        raise ConfigError(f"system description lacks {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="switchspin",
        description="Synthesize and simulate delay / pi-flip sequences for electron-nuclear spin pairs.",
    )
    ap.add_argument("--config", type=Path, help="JSON run description")
    ap.add_argument("--task", choices=TASKS, help="task to run (overrides the config)")
    ap.add_argument("--seed", type=int, help="random seed recorded in every artifact")
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--units", choices=fileio.UNITS, help="unit system of the inputs")
    ap.add_argument("--offset-min", type=float, help="lowest electron offset of a scan")
    ap.add_argument("--offset-max", type=float, help="highest electron offset of a scan")
    ap.add_argument("--offset-steps", type=int, help="number of offsets in a scan")
    ap.add_argument("--dt", type=float, help="trajectory sampling interval")
    ap.add_argument("--sequence", type=Path, help="sequence file for simulate, scan and trajectory")
    return ap


def load_config(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("the config must be a JSON object")
    for key, val in (("task", args.task), ("seed", args.seed), ("units", args.units), ("dt", args.dt)):
        if val is not None:
            raw[key] = val
    if args.out is not None:
        raw["out"] = str(args.out)
    if args.sequence is not None:
        raw["sequence"] = str(args.sequence)
    grid = dict(raw.get("offsets") or {})
    for key, val in (("min", args.offset_min), ("max", args.offset_max), ("steps", args.offset_steps)):
        if val is not None:
            grid[key] = val
    if grid:
        raw["offsets"] = grid

    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"unknown or missing task {task!r}; choose from {', '.join(TASKS)}")
    units = raw.get("units", "A-units")
    if units not in fileio.UNITS:
        raise ConfigError(f"units must be one of {fileio.UNITS}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if "system" not in raw:
        raise ConfigError("the config lacks a 'system'")
    system, scale = parse_system(raw["system"], units)

    lo = parse_number(grid.get("min", -5.0)) / scale
    hi = parse_number(grid.get("max", 5.0)) / scale
    steps = grid.get("steps", 41)
    if not isinstance(steps, int) or steps < 1 or hi < lo:
        raise ConfigError("offset grid needs steps >= 1 and min <= max")
    dt = parse_number(raw.get("dt", 0.05 / scale)) * scale
    if not dt > 0:
        raise ConfigError("dt must be positive")

    cfg = RunConfig(
        task=task,
        system=system,
        units=units,
        freq_scale=scale,
        seed=seed,
        out=Path(raw.get("out", "switchspin-out")),
        raw=raw,
        offsets=np.linspace(lo, hi, steps),
        dt=dt,
    )
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {cfg.out} is not writable: {exc}") from None
    return cfg


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


@dataclass
class Outcome:
    """What a task hands back to :func:`run` for the manifest."""

    fidelity_alpha: Optional[float] = None
    fidelity_beta: Optional[float] = None
    converged: bool = True
    segments: int = 0
    total_duration: float = 0.0
    artifacts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def _single(cfg: RunConfig) -> SystemParams:
    if cfg.is_multi:
        raise ConfigError(f"task {cfg.task} needs a single-nucleus system")
    return cfg.system


def _save_seq(cfg: RunConfig, item, meta: dict) -> Path:
    meta = {"task": cfg.task, "seed": cfg.seed, **meta}
    return fileio.save_sequence(cfg.out / "sequence.json", item, cfg.units, cfg.time_scale, meta)


def _synthesis_outcome(cfg: RunConfig, res, meta: dict) -> Outcome:
    path = _save_seq(cfg, res.sequence, meta)
    return Outcome(
        fidelity_alpha=res.fidelity_alpha,
        fidelity_beta=res.fidelity_beta,
        converged=res.converged,
        segments=res.segments_used,
        total_duration=res.sequence.total_duration * cfg.time_scale,
        artifacts=[path.name],
        extra={"k": res.k, "sweeps_used": res.sweeps_used, "notes": list(res.notes)},
    )


def task_frame(cfg: RunConfig) -> Outcome:
    systems = cfg.system.nuclei if cfg.is_multi else (cfg.system,)
    rows = []
    for p in systems:
        fr = derive_frame(p)
        s = fr.summary()
        s.update(
            t_alpha_over_pi=fr.t_alpha / math.pi,
            t_beta_over_pi=fr.t_beta / math.pi,
            gamma_degrees=math.degrees(fr.gamma_angle),
            lowenthal_k=lowenthal_k(fr.gamma_angle) if 0 < fr.gamma_angle < math.pi else None,
            lie_dimension=lie_closure_dimension(p),
        )
        rows.append(s)
    data = {"units": "A-units", "frames": rows}
    if cfg.is_multi:
        rep = check_multi_controllability(cfg.system)
        data["controllable"] = rep.ok
        data["equal_frequency_nuclei"] = rep.equal_frequency_nuclei
        data["coincident_pairs"] = rep.coincident_pairs
    path = fileio.write_json(cfg.out / "frame.json", data)
    for r in rows:
        print(
            f"t_alpha = {r['t_alpha']!r} ({r['t_alpha_over_pi']:.12g} pi)  "
            f"t_beta = {r['t_beta']!r} ({r['t_beta_over_pi']:.12g} pi)  "
            f"gamma = {r['gamma_angle']!r} rad"
        )
    return Outcome(artifacts=[path.name], extra={"frames": rows})


def task_uniform(cfg: RunConfig) -> Outcome:
    frame = derive_frame(_single(cfg))
    spec = cfg.raw.get("target") or {}
    r = parse_rotation({k: v for k, v in spec.items() if k != "manifold"} if isinstance(spec, dict) else spec, cfg.rng())
    if r is None:
        raise ConfigError("synthesize-uniform needs a target")
    m = _manifold(spec.get("manifold", "alpha") if isinstance(spec, dict) else "alpha")
    v = r.vector
    s = float(np.linalg.norm(v))
    axis = v / s if s > 0 else np.array([0.0, 0.0, 1.0])
    angle = 2.0 * math.atan2(s, r.w)
    res = synthesize_uniform(frame, axis, angle, cfg.options(), m)
    targets = {m.value: _quat_list(r), m.other.value: None}
    return _synthesis_outcome(cfg, res, {"targets": targets})


def task_selective(cfg: RunConfig) -> Outcome:
    frame = derive_frame(_single(cfg))
    spec = cfg.raw.get("target") or {}
    m = _manifold(spec.get("manifold", "alpha") if isinstance(spec, dict) else "alpha")
    r = parse_rotation({k: v for k, v in spec.items() if k != "manifold"} if isinstance(spec, dict) else spec, cfg.rng())
    if r is None:
        raise ConfigError("synthesize-selective needs a target")
    res = synthesize_selective(frame, r, m, cfg.options())
    targets = {m.value: _quat_list(r), m.other.value: _quat_list(Rotation.identity())}
    return _synthesis_outcome(cfg, res, {"targets": targets})


def _pair_targets(spec, rng):
    if not isinstance(spec, dict):
        raise ConfigError("targets must map 'alpha' and 'beta' to rotations or null")
    unknown = set(spec) - {"alpha", "beta"}
    if unknown:
        raise ConfigError(f"unknown manifolds in targets: {sorted(unknown)}")
    return parse_rotation(spec.get("alpha"), rng), parse_rotation(spec.get("beta"), rng)


def task_pair(cfg: RunConfig) -> Outcome:
    frame = derive_frame(_single(cfg))
    ta, tb = _pair_targets(cfg.raw.get("targets"), cfg.rng())
    res = synthesize_pair(frame, ta, tb, cfg.options())
    return _synthesis_outcome(cfg, res, {"targets": {"alpha": _quat_list(ta), "beta": _quat_list(tb)}})


def task_multi(cfg: RunConfig) -> Outcome:
    if not cfg.is_multi:
        raise ConfigError("synthesize-multi needs a 'nuclei' system")
    specs = cfg.raw.get("targets")
    if not isinstance(specs, list):
        raise ConfigError("synthesize-multi needs a list of per-nucleus targets")
    rng = cfg.rng()
    targets = [_pair_targets(s, rng) for s in specs]
    res = synthesize_multi(cfg.system, targets, cfg.options(), float(cfg.raw.get("time_limit", 60.0)))
    meta = {"targets": [{"alpha": _quat_list(a), "beta": _quat_list(b)} for a, b in targets]}
    return _synthesis_outcome(cfg, res, meta)


def _protocol_result(cfg: RunConfig, frame):
    spec = cfg.raw.get("protocol") or {}
    name = spec.get("name") if isinstance(spec, dict) else spec
    opts = cfg.options()
    if name == "refocused-uniform":
        return proto.refocused_uniform(
            frame, _vector(spec.get("axis", [1, 0, 0]), "axis"), parse_number(spec.get("angle", "pi")), opts, cfg.offsets
        )
    if name == "refocused-controlled":
        return proto.refocused_controlled(
            frame, _vector(spec.get("axis", [0, 0, 1]), "axis"), parse_number(spec.get("angle", "pi")), opts, cfg.offsets
        )
    if name == "controlled-z":
        return proto.controlled_z_composite(frame, opts)
    if name == "polarization-transfer":
        return proto.polarization_transfer(frame, opts)
    if name == "cartan":
        if "gate" in spec:
            if spec["gate"] not in NAMED_GATES:
                raise ConfigError(f"unknown gate {spec['gate']!r}; choose from {sorted(NAMED_GATES)}")
            u = NAMED_GATES[spec["gate"]]
        elif "unitary" in spec:
            u = _matrix_from_json(spec["unitary"])
        else:
            raise ConfigError("the cartan protocol needs 'gate' or 'unitary'")
        return proto.cartan_synthesize(u, frame, opts)
    raise ConfigError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}")


def task_protocol(cfg: RunConfig) -> Outcome:
    p = _single(cfg)
    res = _protocol_result(cfg, derive_frame(p))
    meta = {"protocol": cfg.raw.get("protocol"), "target_unitary": _matrix_json(res.target), "fidelity": res.fidelity}
    path = _save_seq(cfg, res.schedule, meta)
    artifacts = [path.name]
    extra = {"fidelity": res.fidelity, "notes": list(res.notes)}
    extra.update({k: v for k, v in res.checkpoints.items()})
    if res.profile is not None and res.profile.offsets.size:
        prof = fileio.write_profile_csv(cfg.out / "profile.csv", _to_output_offsets(cfg, res.profile), cfg.seed)
        artifacts.append(prof.name)
        extra.update(metric=res.profile.metric.value, profile_worst=res.profile.worst, profile_spread=res.profile.spread)
    if "final_error" in res.checkpoints:
        ok = res.checkpoints["final_error"] <= PROTOCOL_TOL
    else:
        ok = res.fidelity >= 1.0 - PROTOCOL_TOL
    return Outcome(
        converged=ok,
        segments=res.schedule.n_delays,
        total_duration=res.schedule.total_duration * cfg.time_scale,
        artifacts=artifacts,
        extra=extra,
    )


def _to_output_offsets(cfg: RunConfig, profile):
    return proto.OffsetProfile(profile.offsets * cfg.freq_scale, profile.fidelities, profile.metric)


def _read_sequence(cfg: RunConfig):
    path = cfg.raw.get("sequence")
    if not path:
        raise ConfigError(f"task {cfg.task} needs a sequence file (--sequence)")
    try:
        data = fileio.load_sequence_file(path)
        ts = cfg.time_scale if data.get("units") == "SI" else 1.0
        if data.get("units") == "SI" and cfg.units != "SI":
            raise ConfigError("an SI sequence file needs an SI config to fix the time unit")
        return fileio.sequence_from_dict(data, ts), data.get("meta", {})
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read sequence {path}: {exc}") from None


def _meta_rotation(q) -> Optional[Rotation]:
    return None if q is None else Rotation.from_array(q)


def task_simulate(cfg: RunConfig) -> Outcome:
    item, meta = _read_sequence(cfg)
    out = Outcome(segments=len(item.delays) if isinstance(item, PulseSequence) else item.n_delays)
    out.total_duration = item.total_duration * cfg.time_scale
    data: dict = {}
    if cfg.is_multi:
        if not isinstance(item, PulseSequence):
            raise ConfigError("multi-nucleus simulation needs a pulse sequence")
        pairs = multi_chains(item.delays, cfg.system) if item.flip_even else None
        if pairs is None:
            raise ConfigError("multi-nucleus simulation needs a flip-even sequence")
        u = multi_full_propagator(item, cfg.system)
        data["nuclei"] = [{"u_alpha": _quat_list(pr.u_alpha), "u_beta": _quat_list(pr.u_beta)} for pr in pairs]
        tg = meta.get("targets")
        if isinstance(tg, list):
            fa = [rot_fidelity(_meta_rotation(t["alpha"]), pr.u_alpha) for t, pr in zip(tg, pairs) if t.get("alpha")]
            fb = [rot_fidelity(_meta_rotation(t["beta"]), pr.u_beta) for t, pr in zip(tg, pairs) if t.get("beta")]
            out.fidelity_alpha = min(fa) if fa else None
            out.fidelity_beta = min(fb) if fb else None
    else:
        p = _single(cfg)
        u = full_propagator(item, p)
        if isinstance(item, PulseSequence):
            frame = derive_frame(p)
            if item.flip_even:
                pair = manifold_propagators(item, frame)
                ua, ub = pair.u_alpha, pair.u_beta
            else:
                ua, ub = conditional_rotations(item, frame)
            data.update(u_alpha=_quat_list(ua), u_beta=_quat_list(ub), flip_even=item.flip_even)
            tg = meta.get("targets")
            if isinstance(tg, dict):
                if tg.get("alpha") is not None:
                    out.fidelity_alpha = rot_fidelity(_meta_rotation(tg["alpha"]), ua)
                if tg.get("beta") is not None:
                    out.fidelity_beta = rot_fidelity(_meta_rotation(tg["beta"]), ub)
        if "target_unitary" in meta:
            out.extra["fidelity"] = ops.trace_fidelity(_matrix_from_json(meta["target_unitary"]), u)
    data["unitary"] = _matrix_json(u)
    path = fileio.write_json(cfg.out / "propagator.json", data)
    out.artifacts.append(path.name)
    return out


def task_scan(cfg: RunConfig) -> Outcome:
    p = _single(cfg)
    item, meta = _read_sequence(cfg)
    metric = cfg.raw.get("metric", proto.Metric.UP_TO_ELECTRON_Z.value)
    try:
        metric = proto.Metric(metric)
    except ValueError:
        raise ConfigError(f"unknown metric {metric!r}") from None
    target = _matrix_from_json(meta["target_unitary"]) if "target_unitary" in meta else None
    prof = proto.offset_scan(item, p, cfg.offsets, metric, target)
    path = fileio.write_profile_csv(cfg.out / "profile.csv", _to_output_offsets(cfg, prof), cfg.seed)
    sched = item.to_schedule() if isinstance(item, PulseSequence) else item
    return Outcome(
        segments=sched.n_delays,
        total_duration=sched.total_duration * cfg.time_scale,
        artifacts=[path.name],
        extra={"metric": metric.value, "profile_worst": prof.worst, "profile_spread": prof.spread},
    )


def task_trajectory(cfg: RunConfig) -> Outcome:
    frame = derive_frame(_single(cfg))
    item, _ = _read_sequence(cfg)
    if not isinstance(item, PulseSequence):
        raise ConfigError("trajectories need a pulse sequence, not a general schedule")
    v0 = _vector(cfg.raw.get("v0", [0, 0, 1]), "v0")
    start = _manifold(cfg.raw.get("electron_start", item.start_manifold.value))
    traj = bloch_trajectory(item, frame, v0, start, cfg.dt)
    path = fileio.write_trajectory_csv(cfg.out / "trajectory.csv", traj, cfg.seed, cfg.time_scale)
    return Outcome(
        segments=len(item),
        total_duration=item.total_duration * cfg.time_scale,
        artifacts=[path.name],
        extra={"samples": len(traj), "final_vector": traj.points[-1].tolist()},
    )


TASK_FUNCS = {
    "frame": task_frame,
    "synthesize-uniform": task_uniform,
    "synthesize-selective": task_selective,
    "synthesize-pair": task_pair,
    "synthesize-multi": task_multi,
    "protocol": task_protocol,
    "simulate": task_simulate,
    "scan": task_scan,
    "trajectory": task_trajectory,
}


def _manifest(cfg: RunConfig, out: Outcome, status: int, error: Optional[str] = None) -> dict:
    return {
        "task": cfg.task,
        "seed": cfg.seed,
        "fidelity_alpha": out.fidelity_alpha,
        "fidelity_beta": out.fidelity_beta,
        "converged": out.converged,
        "segments": out.segments,
        "total_duration": out.total_duration,
        "units": cfg.units,
        "exit_status": status,
        "error": error,
        "artifacts": out.artifacts,
        "inputs": cfg.raw,
        "version": package_version(),
        **out.extra,
    }


def run(cfg: RunConfig) -> int:
    """Execute one task, write its manifest and return the exit status."""
    try:
        out = TASK_FUNCS[cfg.task](cfg)
    except SynthesisError as exc:
        out = Outcome(converged=False, extra={"best_residual": exc.best_residual})
        fileio.write_manifest(cfg.out / "manifest.json", _manifest(cfg, out, EXIT_NOT_CONVERGED, str(exc)))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    status = EXIT_OK if out.converged else EXIT_NOT_CONVERGED
    fileio.write_manifest(cfg.out / "manifest.json", _manifest(cfg, out, status))
    summary = {
        "task": cfg.task,
        "converged": out.converged,
        "fidelity_alpha": out.fidelity_alpha,
        "fidelity_beta": out.fidelity_beta,
        "segments": out.segments,
        "artifacts": [str(cfg.out / a) for a in out.artifacts + ["manifest.json"]],
    }
    if "fidelity" in out.extra:
        summary["fidelity"] = out.extra["fidelity"]
    print(json.dumps(fileio._clean(summary)))
    if status == EXIT_NOT_CONVERGED:
        print("warning: synthesis did not converge; best-effort artifact written", file=sys.stderr)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return run(cfg)
    except (DegenerateFrameError, NotControllableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
