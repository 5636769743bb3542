"""Command-line front end.

Subcommands
-----------
zeros        poles and zeros with dominant-qubit labels (optional heatmap)
heatmap      reflection magnitude on a complex-frequency grid
simulate     one drive strategy: trajectory CSV and metrics
sweep        circuit eigenfrequencies versus qubit-1 bare frequency
table        strategy x target comparison (``s3`` or ``s4`` layout)
convergence  circuit time-step halving check

The config file is JSON with optional sections ``bloch``, ``circuit`` and
``run``. Missing sections fall back to the reference parameter sets.
``run`` may set ``target``, ``freq_mode``, ``energy``, ``lifetimes``,
``sigma``, ``tau_ramp``, ``dt`` and ``evaluation``; command-line flags win.

Times given on the command line (``--t-eval``, ``--dt``) are in ns for both
models. Exit status is 0 on success, 1 on numerical failure and 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import circuit, experiments
from .bloch import StiffnessError
from .circuit import InstabilityError
from .experiments import DriveSpec, TargetSelectionError
from .metrics import MetricsError
from .model import (
    REFERENCE_BLOCH,
    REFERENCE_CIRCUIT,
    ConfigError,
    ParameterError,
    bloch_from_dict,
    circuit_from_dict,
    load_config,
)
from .response import PoleEvaluationError, heatmap as bloch_heatmap
from .roots import RootFindingError

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2

_TOP_KEYS = {"bloch", "circuit", "run"}
_RUN_KEYS = {"target", "freq_mode", "energy", "lifetimes", "sigma", "tau_ramp", "dt", "evaluation"}
_NS = 1e-9


class GuardViolation(ConfigError):
    """A circuit run left the linear regime without ``--allow-nonlinear``."""


# --------------------------------------------------------------------------- config


def _resolve(args: argparse.Namespace) -> tuple[Any, dict]:
    """Parameter set for ``args.model`` and the validated ``run`` section."""
    raw: dict = {}
    if args.config is not None:
        try:
            raw = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown top-level key {key!r}")
    run = raw.get("run", {})
    for key in run:
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown key {key!r} in [run]")
    if args.model == "bloch":
        p = bloch_from_dict(raw["bloch"]) if "bloch" in raw else REFERENCE_BLOCH
    else:
        p = circuit_from_dict(raw["circuit"]) if "circuit" in raw else REFERENCE_CIRCUIT
    return p, run


def _time_scale(model: str) -> float:
    """Factor from ns to the model's native time unit."""
    return 1.0 if model == "bloch" else _NS


def _spec(args: argparse.Namespace, run: dict) -> DriveSpec:
    scale = _time_scale(args.model)
    opts: dict[str, Any] = {}
    for key in ("lifetimes", "energy", "evaluation"):
        if key in run:
            opts[key] = run[key]
    for key in ("sigma", "tau_ramp", "dt"):
        if key in run:
            opts[key] = float(run[key]) * scale
    if getattr(args, "target", None) is not None:
        opts["target"] = args.target
    elif "target" in run:
        opts["target"] = run["target"]
    else:
        opts["target"] = 1
    if getattr(args, "freq_mode", None) is not None:
        opts["freq_mode"] = args.freq_mode
    elif "freq_mode" in run:
        opts["freq_mode"] = run["freq_mode"]
    if getattr(args, "energy", None) is not None:
        opts["energy"] = args.energy
    if getattr(args, "dt", None) is not None:
        opts["dt"] = args.dt * scale
    if args.t_eval is not None:
        opts["t_eval"] = args.t_eval * scale
    try:
        return DriveSpec(**opts)
    except TypeError as exc:
        raise ConfigError(f"bad [run] value: {exc}") from exc


def config_hash(p: Any, command: str, options: dict) -> str:
    """Short digest of everything that determines a command's output."""
    blob = json.dumps({"params": asdict(p), "command": command, "options": options}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------- output


class Writer:
    """Writes files into ``out`` with the config hash embedded."""

    def __init__(self, out: Path, digest: str, command: str):
        self.out = out
        self.digest = digest
        self.command = command
        out.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    @property
    def header(self) -> str:
        return f"cfzero {self.command} config_hash={self.digest}"

    def json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        doc = {"config_hash": self.digest, "command": self.command, **payload}
        path.write_text(json.dumps(_finite(doc), indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path

    def csv(self, name: str, columns: Sequence[str], rows) -> Path:
        path = self.out / name
        with open(path, "w") as fh:
            fh.write(f"# {self.header}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_cell(x) for x in row) + "\n")
        self.written.append(path)
        return path

    def via(self, name: str, dump) -> Path:
        """Let ``dump(path, header_comment)`` write the file."""
        path = self.out / name
        dump(path, self.header)
        self.written.append(path)
        return path

    def text(self, name: str, body: str) -> Path:
        path = self.out / name
        path.write_text(f"# {self.header}\n{body}")
        self.written.append(path)
        return path


def _cell(x: Any) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _finite(obj: Any) -> Any:
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_finite(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [_finite(obj.real), _finite(obj.imag)]
    return obj


# --------------------------------------------------------------------------- commands


def _feature_rows(feats) -> tuple[list[str], list[list]]:
    cols = ["kind", "re_Hz", "im_Hz", "re_rad_ns", "im_rad_ns", "dominant_qubit", "w_bus", "w_q1", "w_q2", "w_q3"]
    rows = []
    for f in feats:
        r = f.to_record()
        rows.append([r["kind"], r["re_Hz"], r["im_Hz"], r["re_rad_ns"], r["im_rad_ns"], str(r["dominant_qubit"]), *r["participation"]])
    return cols, rows


def _default_window(p: Any, model: str) -> tuple[float, float, float, float]:
    feats = [f for k in ("pole", "zero") for f in experiments.spectral_features(p, k) if f.dominant != "port"]
    re = np.array([f.location.re for f in feats])
    im = np.array([abs(f.location.im) for f in feats])
    span = max(re.max() - re.min(), 1e-3 * re.max())
    return (float(re.min() - 0.2 * span), float(re.max() + 0.2 * span), float(-1.5 * im.max()), float(1.5 * im.max()))


def _heatmap(p: Any, model: str, args: argparse.Namespace):
    window = tuple(args.window) if args.window else _default_window(p, model)
    if model == "bloch":
        return bloch_heatmap(p, window, args.n_re, args.n_im, jobs=args.jobs)
    return circuit.circuit_heatmap(p, window, args.n_re, args.n_im, jobs=args.jobs)


def _write_heatmap(w: Writer, grid, fmt: str) -> None:
    if fmt == "json":
        w.json("heatmap.json", {
            "re": grid.re_samples, "im": grid.im_samples, "abs_r": grid.values,
            "pole_mask": grid.pole_mask.astype(int), "minima": [list(m) for m in grid.minima()],
        })
    else:
        w.via("heatmap.csv", grid.to_csv)


def cmd_zeros(args, p, run, w: Writer) -> int:
    feats = {k: experiments.spectral_features(p, k) for k in ("pole", "zero")}
    if args.format == "json":
        w.json("features.json", {
            "model": args.model,
            "poles": [f.to_record() for f in feats["pole"]],
            "zeros": [f.to_record() for f in feats["zero"]],
        })
    else:
        cols, rows = _feature_rows(feats["pole"] + feats["zero"])
        w.csv("features.csv", cols, rows)
    if args.heatmap:
        _write_heatmap(w, _heatmap(p, args.model, args), args.format)
    return EXIT_OK


def cmd_heatmap(args, p, run, w: Writer) -> int:
    _write_heatmap(w, _heatmap(p, args.model, args), args.format)
    return EXIT_OK


def cmd_simulate(args, p, run, w: Writer) -> int:
    spec = _spec(args, run)
    res = experiments.run_strategy(p, spec, warn=False)
    if args.model == "circuit":
        ratio = float(np.max(res.run.max_current_ratio))
        if ratio > circuit.LINEAR_GUARD and not args.allow_nonlinear:
            raise GuardViolation(
                f"peak junction current reached {ratio:.3f} I_c (limit {circuit.LINEAR_GUARD}); "
                "lower the drive energy or pass --allow-nonlinear"
            )
    w.via("trajectory.csv", res.run.to_csv)
    summary = res.summary()
    summary["spec"] = asdict(spec)
    if args.format == "json":
        w.json("metrics.json", summary)
    else:
        r = res.report
        w.csv("metrics.csv", ["strategy", "target", "eta_1", "eta_2", "eta_3", "S_1", "S_2", "S_3", "C", "reflected_fraction", "dissipated_fraction", "t_eval"],
              [[summary["strategy"], r.target, *r.eta, *r.S, r.C, r.reflected_fraction, r.dissipated_fraction, r.t_eval]])
    return EXIT_OK


def cmd_sweep(args, p, run, w: Writer) -> int:
    if args.model != "circuit":
        raise ConfigError("sweep needs --model circuit")
    res = circuit.eigenfrequency_sweep(p, circuit.default_sweep_range(p, args.points), args.boundary)
    if args.format == "json":
        w.json("sweep.json", {
            "boundary": res.boundary, "bare_omega1": res.bare_omega1, "L_j1": res.L_j1,
            "curves": res.curves, "anticrossings": res.anticrossings(),
        })
    else:
        w.csv("sweep.csv", ["bare_omega1", "L_j1", "omega_1", "omega_2", "omega_3"],
              np.column_stack([res.bare_omega1, res.L_j1, res.curves]))
    return EXIT_OK


def cmd_table(args, p, run, w: Writer) -> int:
    spec = _spec(args, run)
    knobs = {k: v for k, v in asdict(spec).items() if k not in ("target", "freq_mode")}
    table, results = experiments.comparison(p, args.which, jobs=args.jobs, **knobs)
    if args.model == "circuit" and not args.allow_nonlinear:
        worst = max(max(r["summary"]["max_current_ratio"]) for r in results)
        if worst > circuit.LINEAR_GUARD:
            raise GuardViolation(f"a table run reached {worst:.3f} I_c; pass --allow-nonlinear to keep it")
    if args.format == "json":
        w.json("table.json", {"which": args.which, "rows": [asdict(r) for r in table.rows]})
    else:
        w.text("table.csv", table.to_csv())
    w.text("table.txt", table.to_text() + "\n")
    for i, r in enumerate(results):
        s = r["spec"]
        w.json(f"cell_{i:02d}_{s.freq_mode}_q{s.target}.json", {"spec": asdict(s), "summary": r["summary"]})
    return EXIT_OK


def cmd_convergence(args, p, run, w: Writer) -> int:
    if args.model != "circuit":
        raise ConfigError("convergence needs --model circuit")
    spec = _spec(args, run)
    wf, _ = experiments.build_drive(p, spec)
    rep = circuit.convergence_check(p, wf, spec.dt)
    payload = {"spec": asdict(spec), **rep.to_dict()}
    if args.format == "json":
        w.json("convergence.json", payload)
    else:
        w.csv("convergence.csv", ["dt", "compare_dt", "dq_1", "dq_2", "dq_3", "reflected_change", "max_change", "flagged", "unstable"],
              [[rep.dt, rep.compare_dt, *rep.qubit_energy_change, rep.reflected_change, rep.max_change, str(rep.flagged), str(rep.unstable)]])
    if rep.flagged:
        print(f"cfzero: dt={rep.dt:.3e} s not converged (max change {rep.max_change:.3g})", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


COMMANDS = {
    "zeros": cmd_zeros,
    "heatmap": cmd_heatmap,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "table": cmd_table,
    "convergence": cmd_convergence,
}


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config with 'bloch', 'circuit', 'run' sections")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers (default: logical cores)")
    common.add_argument("--t-eval", type=float, default=None, help="metric evaluation time in ns (default: end of drive)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--model", choices=("bloch", "circuit"), default="bloch")
    common.add_argument("--allow-nonlinear", action="store_true", help="keep circuit runs beyond the linear-regime guard")

    drive = argparse.ArgumentParser(add_help=False)
    drive.add_argument("--target", type=int, choices=(1, 2, 3))
    drive.add_argument("--freq-mode", choices=experiments.FREQ_MODES)
    drive.add_argument("--energy", type=float, help="injected energy (Bloch: quanta; circuit: source units)")
    drive.add_argument("--dt", type=float, help="circuit time step in ns")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--window", type=float, nargs=4, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"),
                      help="grid bounds in native units; IM is the decay component")
    grid.add_argument("--n-re", type=int, default=201)
    grid.add_argument("--n-im", type=int, default=101)

    ap = argparse.ArgumentParser(prog="cfzero", description="Complex-frequency zero targeting toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)
    z = sub.add_parser("zeros", parents=[common, grid], help="poles and zeros with qubit labels")
    z.add_argument("--heatmap", action="store_true", help="also write the reflection heatmap")
    sub.add_parser("heatmap", parents=[common, grid], help="reflection magnitude grid")
    sub.add_parser("simulate", parents=[common, drive], help="run one drive strategy")
    s = sub.add_parser("sweep", parents=[common], help="circuit eigenfrequency sweep")
    s.add_argument("--points", type=int, default=401)
    s.add_argument("--boundary", choices=("ground", "open"), default="ground")
    t = sub.add_parser("table", parents=[common, drive], help="strategy comparison table")
    t.add_argument("which", choices=tuple(experiments.TABLE_LAYOUTS))
    sub.add_parser("convergence", parents=[common, drive], help="time-step halving check")
    return ap


_NON_OPTIONS = {"config", "out", "jobs", "format", "command"}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("cfzero: config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        p, run = _resolve(args)
        options = {k: v for k, v in vars(args).items() if k not in _NON_OPTIONS}
        options["run"] = run
        writer = Writer(args.out, config_hash(p, args.command, options), args.command)
        code = COMMANDS[args.command](args, p, run, writer)
    except (ConfigError, ParameterError, TargetSelectionError) as exc:
        print(f"cfzero: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RootFindingError, InstabilityError, StiffnessError, PoleEvaluationError, MetricsError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"cfzero: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in writer.written:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
