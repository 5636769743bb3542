"""Excitation efficiency, target selectivity and crosstalk suppression.

For a run with injected energy ``E_in(t)`` the efficiency of a storage
channel X is ``eta_X(t) = 100 * E_X(t) / E_in(t)`` (percent). Channels are
the three qubits (Bloch: excitation ``(sz+1)/2``; circuit: branch energy)
and the remaining mode (Bloch resonator ``|a|^2``; circuit: the rest of the
network energy).

    S_i = eta_i / sum_k eta_k
    C_i = eta_i / max_{k != i} eta_k
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .bloch import Trajectory
from .circuit import CircuitTrace

Run = Union[Trajectory, CircuitTrace]


class MetricsError(ValueError):
    """Metric undefined for the given inputs."""


@dataclass(frozen=True)
class EfficiencyCurves:
    """``eta`` is (n, 3) in percent; NaN where no energy has been injected yet."""

    t: np.ndarray
    eta: np.ndarray
    eta_res: np.ndarray


def _stored_channels(run: Run) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(run, Trajectory):
        return run.qubit_excitation(), np.abs(run.a) ** 2
    if isinstance(run, CircuitTrace):
        q = run.qubit_energy
        return q, run.stored() - q.sum(axis=1)
    raise TypeError(f"unsupported run type {type(run).__name__}")


def efficiency_curves(run: Run) -> EfficiencyCurves:
    """Per-channel efficiencies over the whole run."""
    q, rest = _stored_channels(run)
    e_in = np.asarray(run.e_in, dtype=float)
    if not np.any(e_in > 0):
        raise MetricsError("run has no input energy")
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(e_in[:, None] > 0, 100.0 * q / e_in[:, None], np.nan)
        eta_res = np.where(e_in > 0, 100.0 * rest / e_in, np.nan)
    return EfficiencyCurves(np.asarray(run.t), eta, eta_res)


def selectivity(eta: Sequence[float], target: int) -> tuple[float, np.ndarray]:
    """``(S_target, S)`` for a 1-based ``target``."""
    e = np.asarray(eta, dtype=float)
    total = e.sum()
    if not total > 0:
        raise MetricsError("selectivity undefined: all efficiencies are zero")
    S = e / total
    return float(S[target - 1]), S


def crosstalk_ratio(eta: Sequence[float], target: int) -> float:
    """``eta_target / max_{k != target} eta_k``; ``inf`` if every non-target is zero."""
    e = np.asarray(eta, dtype=float)
    others = np.delete(e, target - 1)
    m = others.max()
    if m <= 0:
        return math.inf
    return float(e[target - 1] / m)


def relative_excitation(eta: Sequence[float], target: int) -> np.ndarray:
    """Row of the crosstalk table: ``C`` on the target, ``eta_k / eta_target`` elsewhere."""
    e = np.asarray(eta, dtype=float)
    t = target - 1
    if not e[t] > 0:
        raise MetricsError("target efficiency is zero")
    row = e / e[t]
    row[t] = crosstalk_ratio(e, target)
    return row


@dataclass(frozen=True)
class MetricsReport:
    """Figures of merit of one run, evaluated at ``t_eval``."""

    target: int
    eta: tuple[float, float, float]
    S: tuple[float, float, float]
    C: float
    reflected_fraction: float
    dissipated_fraction: float
    t_eval: float
    evaluation: str = "end"
    label: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def S_target(self) -> float:
        return self.S[self.target - 1]

    @property
    def crosstalk_infinite(self) -> bool:
        return math.isinf(self.C)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "target": self.target,
            "eta_percent": list(self.eta),
            "S": list(self.S),
            "S_target": self.S_target,
            "C": None if self.crosstalk_infinite else self.C,
            "C_infinite": self.crosstalk_infinite,
            "reflected_fraction": self.reflected_fraction,
            "dissipated_fraction": self.dissipated_fraction,
            "t_eval": self.t_eval,
            "evaluation": self.evaluation,
            **self.extra,
        }


def default_t_eval(run: Run) -> float:
    """End of the drive window, clipped to the run."""
    drive = run.drive if isinstance(run, Trajectory) else run.source
    if drive is None:
        return float(run.t[-1])
    return float(min(drive.t_off, run.t[-1]))


def report(run: Run, target: int, t_eval: float | None = None, evaluation: str = "end", label: str = "") -> MetricsReport:
    """Metrics at ``t_eval`` (default: end of drive).

    ``evaluation="peak"`` uses each qubit's maximum stored energy up to
    ``t_eval`` divided by the energy injected by ``t_eval``.
    """
    if target not in (1, 2, 3):
        raise MetricsError(f"target must be 1, 2 or 3, got {target}")
    if t_eval is None:
        t_eval = default_t_eval(run)
    i = run.index_at(t_eval)
    if i < 0:
        raise MetricsError("t_eval precedes the run")
    E_in = float(run.e_in[i])
    if not E_in > 0:
        raise MetricsError("no input energy before t_eval")
    q, _ = _stored_channels(run)
    if evaluation == "end":
        stored = q[i]
    elif evaluation == "peak":
        stored = q[: i + 1].max(axis=0)
    else:
        raise MetricsError(f"evaluation must be 'end' or 'peak', got {evaluation!r}")
    eta = 100.0 * stored / E_in
    _, S = selectivity(eta, target)
    return MetricsReport(
        target=target,
        eta=tuple(float(x) for x in eta),  # type: ignore[arg-type]
        S=tuple(float(x) for x in S),  # type: ignore[arg-type]
        C=crosstalk_ratio(eta, target),
        reflected_fraction=float(run.e_refl[i] / E_in),
        dissipated_fraction=float(run.e_diss[i] / E_in),
        t_eval=float(run.t[i]),
        evaluation=evaluation,
        label=label,
    )


# --------------------------------------------------------------------------- tables

ZERO_ROW_NAMES = {1: "Rightmost zero", 2: "Middle zero", 3: "Leftmost zero"}


@dataclass(frozen=True)
class TableRow:
    strategy: str
    row_name: str
    target: int
    eta: tuple[float, float, float]
    S: tuple[float, float, float]
    C_row: tuple[float, float, float]


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[TableRow, ...]

    def strategies(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.strategy not in seen:
                seen.append(r.strategy)
        return seen

    def block(self, strategy: str) -> list[TableRow]:
        return [r for r in self.rows if r.strategy == strategy]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["strategy", "row", "target", "eta_1", "eta_2", "eta_3", "S_1", "S_2", "S_3", "C_1", "C_2", "C_3"])
        for r in self.rows:
            w.writerow([r.strategy, r.row_name, r.target, *(f"{x:.6g}" for x in r.eta + r.S + r.C_row)])
        return buf.getvalue()

    def to_text(self) -> str:
        """Fixed-width blocks: efficiencies, selectivity and crosstalk per strategy."""
        out = []
        width = max(len(r.row_name) for r in self.rows) + 2
        for title, attr, fmt in (("Efficiency (%)", "eta", "{:>8.1f}"), ("Target selectivity S_i", "S", "{:>8.2f}"), ("Crosstalk suppression C_i", "C_row", "{:>8.2f}")):
            for strat in self.strategies():
                out.append(f"{strat}: {title}")
                out.append(" " * width + "".join(f"{h:>8}" for h in ("Qubit 1", "Qubit 2", "Qubit 3")))
                for r in self.block(strat):
                    vals = "".join(fmt.format(x) if math.isfinite(x) else f"{'inf':>8}" for x in getattr(r, attr))
                    out.append(f"{r.row_name:<{width}}{vals}")
                out.append("")
        return "\n".join(out)


def table_row(strategy: str, eta: Sequence[float], target: int, row_name: str | None = None) -> TableRow:
    e = tuple(float(x) for x in eta)
    _, S = selectivity(e, target)
    return TableRow(
        strategy,
        row_name if row_name is not None else ZERO_ROW_NAMES[target],
        target,
        e,  # type: ignore[arg-type]
        tuple(float(x) for x in S),  # type: ignore[arg-type]
        tuple(float(x) for x in relative_excitation(e, target)),  # type: ignore[arg-type]
    )


def comparison_table(runs: Sequence[tuple[str, MetricsReport]], row_names: dict[int, str] | None = None) -> ComparisonTable:
    """Build a table from ``(strategy, report)`` pairs.

    All reports must share one evaluation protocol (``evaluation`` mode and,
    when set, the ``protocol`` entry of ``extra``).
    """
    if not runs:
        raise MetricsError("no runs given")
    protocols = {(r.evaluation, r.extra.get("protocol")) for _, r in runs}
    if len(protocols) > 1:
        raise MetricsError(f"runs use mismatched protocols: {sorted(map(str, protocols))}")
    names = row_names or ZERO_ROW_NAMES
    return ComparisonTable(
        tuple(table_row(s, r.eta, r.target, r.extra.get("row_name", names.get(r.target))) for s, r in runs)
    )
