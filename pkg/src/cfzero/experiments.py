"""Drive strategies and comparison protocols for both models.

A strategy is a frequency mode plus the pulse kind it implies:

=================  ========  =========================================
freq mode          kind      carrier
=================  ========  =========================================
``zero``           CF        the target's reflection zero
``conjugate-pole`` CF        complex conjugate of the target's pole
``bare``           Gaussian  bare frequency of the target qubit
``zero-real-part`` Gaussian  real part of the target's reflection zero
=================  ========  =========================================

Targets are chosen by dominant-qubit label, never by root index.

Energy protocol: Bloch runs inject ``energy`` quanta (default
:data:`BLOCH_ENERGY`). Circuit CF-at-zero pulses are scaled so the largest
predicted junction current is 2% of ``I_c``; every other strategy for the
same target is matched to that pulse's energy. Gaussian widths follow
:func:`gaussian_sigma`.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence, Union

import numpy as np

from . import bloch, circuit, metrics
from .model import BlochParams, CircuitParams, ParameterError
from .pulse import Waveform, cf_waveform, default_ramp, default_window, gaussian_waveform, match_energy
from .response import SpectralFeature, features as bloch_features

Model = Literal["bloch", "circuit"]
FreqMode = Literal["zero", "conjugate-pole", "bare", "zero-real-part"]
FREQ_MODES: tuple[str, ...] = ("zero", "conjugate-pole", "bare", "zero-real-part")
STRATEGY_NAMES = {
    "bare": "Gaussian (bare frequency)",
    "zero-real-part": "Gaussian (Re zero)",
    "zero": "CF (zero)",
    "conjugate-pole": "CF (conjugate pole)",
}

#: Injected excitation number for Bloch-model comparisons (quanta).
BLOCH_ENERGY = 0.5
#: Target peak junction current for circuit CF pulses, as a fraction of I_c.
CURRENT_FRACTION = 0.02

Params = Union[BlochParams, CircuitParams]


class TargetSelectionError(ValueError):
    """No (or more than one) feature carries the requested qubit label."""


def model_of(p: Params) -> Model:
    if isinstance(p, BlochParams):
        return "bloch"
    if isinstance(p, CircuitParams):
        return "circuit"
    raise TypeError(f"unsupported parameter type {type(p).__name__}")


def spectral_features(p: Params, kind: str) -> list[SpectralFeature]:
    if model_of(p) == "bloch":
        return bloch_features(p, kind)  # type: ignore[arg-type]
    return circuit.find_circuit_features(p, kind)  # type: ignore[arg-type]


def select_feature(feats: Sequence[SpectralFeature], target: int) -> SpectralFeature:
    hits = [f for f in feats if f.dominant == target]
    if len(hits) != 1:
        labels = [f.dominant for f in feats]
        raise TargetSelectionError(f"expected exactly one feature labeled {target}, found labels {labels}")
    return hits[0]


def qubit_features(feats: Sequence[SpectralFeature]) -> list[SpectralFeature]:
    return [f for f in feats if isinstance(f.dominant, int)]


def gaussian_sigma(p: Params) -> float:
    """``sqrt(ln 2) / delta``, with ``delta`` the smallest spacing of qubit-zero real parts.

    The resulting half-power bandwidth equals that spacing: the crowded
    regime in which carrier detuning alone cannot separate the qubits.
    """
    re = sorted(f.location.re for f in qubit_features(spectral_features(p, "zero")))
    if len(re) < 2:
        raise TargetSelectionError("need at least two qubit-dominated zeros to set sigma")
    return math.sqrt(math.log(2)) / float(np.min(np.diff(re)))


def bare_frequency(p: Params, target: int) -> float:
    if model_of(p) == "bloch":
        return float(p.omega_a[target - 1])  # type: ignore[union-attr]
    return float(p.bare_frequencies[target - 1])  # type: ignore[union-attr]


@dataclass(frozen=True)
class DriveSpec:
    """What to run: target qubit, frequency mode and protocol knobs."""

    target: int
    freq_mode: str = "zero"
    energy: float | None = None
    lifetimes: float = 8.0
    tau_ramp: float | None = None
    sigma: float | None = None
    mode: str = "nonlinear"
    tol: float = 1e-9
    dt: float = 1e-12
    t_eval: float | None = None
    evaluation: str = "end"

    def __post_init__(self) -> None:
        if self.target not in (1, 2, 3):
            raise ParameterError(f"target must be 1, 2 or 3, got {self.target}")
        if self.freq_mode not in FREQ_MODES:
            raise ParameterError(f"freq_mode must be one of {FREQ_MODES}, got {self.freq_mode!r}")

    @property
    def kind(self) -> str:
        return "cf" if self.freq_mode in ("zero", "conjugate-pole") else "gaussian"


@dataclass
class ExperimentResult:
    spec: DriveSpec
    model: str
    waveform: Waveform
    feature: SpectralFeature
    run: object
    report: metrics.MetricsReport
    protocol: dict = field(default_factory=dict)

    def summary(self) -> dict:
        d = self.report.to_dict()
        d["model"] = self.model
        d["freq_mode"] = self.spec.freq_mode
        d["strategy"] = STRATEGY_NAMES[self.spec.freq_mode]
        d["target_feature"] = self.feature.to_record()
        d["pulse"] = self.waveform.descriptor()
        if self.model == "circuit":
            d["max_current_ratio"] = [float(x) for x in self.run.max_current_ratio]  # type: ignore[attr-defined]
        else:
            d["ledger"] = self.run.ledger.to_dict()  # type: ignore[attr-defined]
        return d


def _cf_for(p: Params, spec: DriveSpec, omega: complex) -> Waveform:
    T = default_window(omega, spec.lifetimes)
    R = default_ramp(omega, T) if spec.tau_ramp is None else spec.tau_ramp
    return cf_waveform(omega, 1.0, 0.0, T, R)


def reference_cf(p: Params, spec: DriveSpec) -> Waveform:
    """The CF-at-zero pulse of the target, at the protocol amplitude."""
    z = select_feature(spectral_features(p, "zero"), spec.target)
    w = _cf_for(p, spec, z.omega)
    if model_of(p) == "bloch":
        return match_energy(w, spec.energy if spec.energy is not None else BLOCH_ENERGY)
    if spec.energy is not None:
        return match_energy(w, spec.energy)
    peak = circuit.amplitude_for_current(p, z.omega, CURRENT_FRACTION)  # type: ignore[arg-type]
    return replace(w, b0=complex(peak / w.peak_amplitude()))


def build_drive(p: Params, spec: DriveSpec) -> tuple[Waveform, SpectralFeature]:
    """Waveform for ``spec`` and the feature it targets."""
    ref = reference_cf(p, spec)
    E = ref.energy
    if spec.freq_mode == "zero":
        return ref, select_feature(spectral_features(p, "zero"), spec.target)
    if spec.freq_mode == "conjugate-pole":
        pole = select_feature(spectral_features(p, "pole"), spec.target)
        return match_energy(_cf_for(p, spec, np.conj(pole.omega)), E), pole
    zero = select_feature(spectral_features(p, "zero"), spec.target)
    carrier = bare_frequency(p, spec.target) if spec.freq_mode == "bare" else zero.location.re
    sigma = spec.sigma if spec.sigma is not None else gaussian_sigma(p)
    g = gaussian_waveform(carrier, 1.0, sigma, 5 * sigma, (0.0, 10 * sigma))
    return match_energy(g, E), zero


def protocol_hash(p: Params, spec: DriveSpec) -> str:
    blob = json.dumps({"params": asdict(p), "spec": asdict(spec)}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_strategy(p: Params, spec: DriveSpec, warn: bool = True) -> ExperimentResult:
    """Build the drive, integrate, and evaluate metrics."""
    model = model_of(p)
    wf, feat = build_drive(p, spec)
    span = (wf.t_on, wf.t_off)
    if model == "bloch":
        run = bloch.integrate(p, wf, span, tol=spec.tol, mode=spec.mode)  # type: ignore[arg-type]
    else:
        run = circuit.transient(p, wf, span, spec.dt, warn=warn)  # type: ignore[arg-type]
    proto = {"protocol": f"{spec.evaluation}|lifetimes={spec.lifetimes}"}
    rep = metrics.report(run, spec.target, spec.t_eval, spec.evaluation, label=STRATEGY_NAMES[spec.freq_mode])
    row = f"Qubit {spec.target}" if spec.freq_mode == "bare" else metrics.ZERO_ROW_NAMES[spec.target]
    rep = replace(rep, extra={**proto, "row_name": row})
    return ExperimentResult(spec, model, wf, feat, run, rep, proto)


def _run_summary(args) -> dict:
    p, spec = args
    res = run_strategy(p, spec, warn=False)
    return {"spec": spec, "report": res.report, "summary": res.summary()}


def run_batch(p: Params, specs: Sequence[DriveSpec], jobs: int = 1) -> list[dict]:
    """Run several strategies; output order follows ``specs`` regardless of ``jobs``."""
    items = [(p, s) for s in specs]
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_summary, items))
    return [_run_summary(it) for it in items]


TABLE_LAYOUTS = {
    "s3": (("bare", "zero-real-part", "zero", "conjugate-pole"), (3, 2, 1)),
    "s4": (("zero", "conjugate-pole"), (1,)),
}


def comparison(p: Params, which: str = "s3", jobs: int = 1, **spec_kwargs) -> tuple[metrics.ComparisonTable, list[dict]]:
    """Strategy x target matrix laid out as a crosstalk comparison table."""
    if which not in TABLE_LAYOUTS:
        raise ParameterError(f"table must be one of {sorted(TABLE_LAYOUTS)}, got {which!r}")
    modes, targets = TABLE_LAYOUTS[which]
    specs = [DriveSpec(target=t, freq_mode=m, **spec_kwargs) for m in modes for t in targets]
    results = run_batch(p, specs, jobs)
    runs = [(STRATEGY_NAMES[r["spec"].freq_mode], r["report"]) for r in results]
    return metrics.comparison_table(runs), results
