"""Lumped three-transmon circuit: transient and small-signal analysis.

Topology (node index in brackets)::

    V_s --Z_0-- P[0] --C_k-- B[1] --C_c1-- Q1[2] --(C_1 | JJ_1 | R)-- gnd
                               |---C_c2-- Q2[3] --(C_2 | JJ_2 | R)-- gnd
                               `---C_c3-- Q3[4] --(C_3 | JJ_3 | R)-- gnd

State: node voltages ``V`` (5) and junction fluxes ``phi`` (3) with
``dphi_j/dt = V_Qj`` and ``I_j = I_cj sin(2 pi phi_j / Phi_0)``. The nodal
equations ``C dV/dt = -G V - I_JJ(phi) + e_P V_s / Z_0`` are advanced with
classical RK4 at a fixed step; ``C`` is inverted once.

Port waves: ``V+ = V_s / 2``, ``V- = V_P - V+``. Small-signal analysis
replaces each junction with ``L_j0`` and uses ``s = -1j * omega`` so that
complex frequencies share the ``exp(-1j*omega*t)`` convention.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from numba import njit
from scipy.linalg import eigh

from .model import CircuitParams, ComplexFreq, ParameterError, as_complex
from .pulse import Waveform
from .response import (
    CANCEL_RTOL,
    POLE_GUARD_RTOL,
    HeatmapGrid,
    PoleEvaluationError,
    SpectralFeature,
    classify_participation,
    grid_heatmap,
    null_vector,
)
from .roots import RootFindingError, polyroots

#: Frequency scale used to normalize the polynomial variable (rad/s).
OMEGA_SCALE = 5e10
#: Largest RK4 step accepted without ``check_dt=False`` (s).
MAX_DT = 2e-12
#: Linear-regime guard on |I_j| / I_c.
LINEAR_GUARD = 0.05


class InstabilityError(RuntimeError):
    """Transient produced NaN/overflow; ``t_fail`` in seconds."""

    def __init__(self, t_fail: float, dt: float):
        super().__init__(
            f"transient became non-finite at t={t_fail:.6e} s with dt={dt:.3e} s; "
            f"reduce the step (try dt <= {MAX_DT:.0e} s)"
        )
        self.t_fail = t_fail
        self.dt = dt


class LinearRegimeWarning(UserWarning):
    """A junction current exceeded the linear-regime guard."""

    def __init__(self, ratios):
        self.ratios = tuple(float(r) for r in ratios)
        worst = int(np.argmax(self.ratios))
        super().__init__(
            f"max |I_j|/I_c = {self.ratios[worst]:.4f} on qubit {worst + 1} exceeds {LINEAR_GUARD}"
        )


# --------------------------------------------------------------------------- network matrices


def capacitance_matrix(p: CircuitParams) -> np.ndarray:
    """5x5 nodal capacitance matrix for nodes (P, B, Q1, Q2, Q3)."""
    C = np.zeros((5, 5))

    def branch(i: int, j: int | None, c: float) -> None:
        C[i, i] += c
        if j is not None:
            C[j, j] += c
            C[i, j] -= c
            C[j, i] -= c

    branch(0, 1, p.C_k)
    for j in range(3):
        branch(1, 2 + j, p.C_c[j])
        branch(2 + j, None, p.C_j[j])
    return C


def conductance_diagonal(p: CircuitParams, port_sign: float = 1.0) -> np.ndarray:
    """Diagonal of the conductance matrix; ``port_sign=-1`` gives the time-reversed port."""
    g = np.zeros(5)
    g[0] = port_sign / p.Z_0
    if p.R_shunt is not None:
        g[2:] = 1.0 / p.R_shunt
    return g


def nodal_admittance(p: CircuitParams, s: complex, port_sign: float = 1.0) -> np.ndarray:
    """``Y(s) = s C + G + Gamma / s`` with the junctions linearized to ``L_j0``."""
    Y = s * capacitance_matrix(p) + np.diag(conductance_diagonal(p, port_sign)).astype(complex)
    for j in range(3):
        Y[2 + j, 2 + j] += 1.0 / (s * p.L_j0[j])
    return Y


# --------------------------------------------------------------------------- small signal


def _s_of(omega) -> np.ndarray:
    return -1j * np.asarray(omega, dtype=complex)


def input_impedance(p: CircuitParams, omega) -> np.ndarray:
    """``Z_in`` seen from the port through ``C_k`` (vectorized over omega)."""
    s = _s_of(omega)
    Ysum = np.zeros_like(s)
    for j in range(3):
        Yq = s * p.C_j[j] + 1.0 / (s * p.L_j0[j])
        if p.R_shunt is not None:
            Yq = Yq + 1.0 / p.R_shunt
        sc = s * p.C_c[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            Ysum = Ysum + np.where(sc == 0, 0.0, sc * Yq / (sc + Yq))
    with np.errstate(divide="ignore"):
        return 1.0 / (s * p.C_k) + 1.0 / Ysum


def _s11_raw(p: CircuitParams, omega) -> np.ndarray:
    Z = input_impedance(p, omega)
    with np.errstate(invalid="ignore"):
        out = (Z - p.Z_0) / (Z + p.Z_0)
    return np.where(np.isinf(Z), 1.0 + 0j, out)


def small_signal_s11(p: CircuitParams, omega, guard: bool = True) -> np.ndarray | complex:
    """Reflection ``S11 = (Z_in - Z_0)/(Z_in + Z_0)`` at complex ``omega`` (rad/s)."""
    scalar = isinstance(omega, (ComplexFreq, complex, float, int))
    w = np.asarray(as_complex(omega) if isinstance(omega, ComplexFreq) else omega, dtype=complex)
    if guard:
        poles = _poles_cached(p)
        if poles.size:
            dist = np.min(np.abs(w[..., None] - poles), axis=-1)
            bad = dist <= POLE_GUARD_RTOL * OMEGA_SCALE
            if np.any(bad):
                wb = complex(w[bad].flat[0])
                raise PoleEvaluationError(wb, complex(poles[np.argmin(np.abs(poles - wb))]))
    r = _s11_raw(p, w)
    return complex(r) if scalar else r


@dataclass(frozen=True)
class CircuitRational:
    """``S11 = num(x)/den(x)`` in the scaled Laplace variable ``x = s / OMEGA_SCALE``."""

    num_full: np.ndarray
    den_full: np.ndarray
    num: np.ndarray
    den: np.ndarray
    cancelled: tuple[complex, ...]
    scale: float = OMEGA_SCALE

    def __call__(self, omega) -> np.ndarray:
        x = _s_of(omega) / self.scale
        return np.polyval(self.num_full, x) / np.polyval(self.den_full, x)

    def roots_omega(self, kind: str) -> np.ndarray:
        c = self.num if kind == "zero" else self.den
        if len(c) <= 1:
            return np.empty(0, dtype=complex)
        x = polyroots(c)
        return 1j * x * self.scale  # omega = i s


def circuit_rational(p: CircuitParams, cancel_rtol: float = CANCEL_RTOL) -> CircuitRational:
    """Expand ``S11`` into polynomials by eliminating the fixed network by hand.

    Branch j: ``Y_q = (C L s^2 + (L/R) s + 1) / (L s)``,
    ``Y_j = s C_c Y_q / (s C_c + Y_q) = n_j / d_j``. With ``sum Y_j = N / D``,
    ``Z_in = (N + s C_k D) / (s C_k N)`` and
    ``S11 = (N + s C_k D - Z_0 s C_k N) / (N + s C_k D + Z_0 s C_k N)``.
    """
    w0 = OMEGA_SCALE
    sx = np.array([w0, 0.0])  # the polynomial "s" in terms of x
    n_list, d_list = [], []
    for j in range(3):
        L, Cq, Cc = p.L_j0[j], p.C_j[j], p.C_c[j]
        a = np.array([Cq * L * w0**2, (L / p.R_shunt if p.R_shunt else 0.0) * w0, 1.0])
        b = L * sx
        n_list.append(np.polymul(Cc * sx, a))
        d_list.append(np.polyadd(np.polymul(Cc * sx, b), a))
    D = np.polymul(np.polymul(d_list[0], d_list[1]), d_list[2])
    N = np.zeros(1)
    for j in range(3):
        others = [d_list[k] for k in range(3) if k != j]
        N = np.polyadd(N, np.polymul(n_list[j], np.polymul(others[0], others[1])))
    skD = np.polymul(p.C_k * sx, D)
    skN = np.polymul(p.C_k * sx, N)
    base = np.polyadd(N, skD)
    num = np.polysub(base, p.Z_0 * skN)
    den = np.polyadd(base, p.Z_0 * skN)
    # normalize so that the leading coefficient of den is 1
    lead = den[np.flatnonzero(np.abs(den) > 0)[0]]
    num = np.trim_zeros(num / lead, "f").astype(complex)
    den = np.trim_zeros(den / lead, "f").astype(complex)

    zr, pr = list(polyroots(num)), list(polyroots(den))
    cancelled: list[complex] = []
    tol = cancel_rtol
    while zr and pr:
        dist = np.abs(np.subtract.outer(np.array(zr), np.array(pr)))
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] > tol * max(1.0, abs(pr[j])):
            break
        cancelled.append(1j * 0.5 * (zr[i] + pr[j]) * w0)
        zr.pop(i)
        pr.pop(j)

    def rebuild(lead_c: complex, roots: list[complex]) -> np.ndarray:
        c = np.array([lead_c], dtype=complex)
        for z in roots:
            c = np.polymul(c, [1.0, -z])
        return c

    return CircuitRational(num, den, rebuild(num[0], zr), rebuild(den[0], pr), tuple(cancelled))


@lru_cache(maxsize=64)
def _poles_cached(p: CircuitParams) -> np.ndarray:
    return circuit_rational(p).roots_omega("pole")


def _label(p: CircuitParams, kind: str, omega: complex) -> tuple[object, tuple[float, ...]]:
    """Participation from branch currents: (C_k current, I_1, I_2, I_3)."""
    s = complex(-1j * omega)
    Y = nodal_admittance(p, s, port_sign=1.0 if kind == "pole" else -1.0)
    v, degenerate = null_vector(Y)
    currents = np.empty(4, dtype=complex)
    currents[0] = s * p.C_k * (v[0] - v[1])
    for j in range(3):
        currents[1 + j] = v[2 + j] / (s * p.L_j0[j])
    w = np.abs(currents) ** 2
    w = w / w.sum()
    return classify_participation(w, degenerate, first_label="port"), tuple(float(x) for x in w)


def find_circuit_features(p: CircuitParams, kind: Literal["pole", "zero"], verify_tol: float = 1e-8) -> list[SpectralFeature]:
    """Poles or zeros of S11 with ``Re omega >= 0``, labeled and sorted by real part.

    Roots come in ``(omega, -conj(omega))`` pairs for a real network; only the
    positive-frequency member is reported. Non-oscillating roots (the
    ``C_k``/``Z_0`` relaxation) have ``Re omega = 0`` and are kept, labeled
    ``"port"``. Participation entries are weights of (port coupling branch,
    junction 1, 2, 3).
    """
    if kind not in ("pole", "zero"):
        raise ValueError(f"kind must be 'pole' or 'zero', got {kind!r}")
    rat = circuit_rational(p)
    roots = rat.roots_omega(kind)
    # snap numerically non-oscillating roots onto the imaginary axis
    roots = np.where(np.abs(roots.real) <= 1e-9 * np.abs(roots), 1j * roots.imag, roots)
    roots = roots[roots.real >= 0]
    if kind == "zero" and roots.size:
        vals = np.abs(_s11_raw(p, roots))
        if np.any(vals >= verify_tol):
            raise RootFindingError(f"circuit zero fails |S11| < {verify_tol:g} (max {vals.max():.3e})", roots, vals)
    roots = roots[np.argsort(roots.real, kind="stable")]
    out = []
    for w in roots:
        lab, part = _label(p, kind, w)
        out.append(SpectralFeature(kind, ComplexFreq.from_complex(w), lab, part, units="rad/s"))
    return out


def circuit_heatmap(
    p: CircuitParams, window: tuple[float, float, float, float], n_re: int, n_im: int, jobs: int = 1
) -> HeatmapGrid:
    """``|S11|`` on a grid in rad/s (same layout as the Bloch heatmap)."""
    return grid_heatmap(lambda w: _s11_raw(p, w), _poles_cached(p), POLE_GUARD_RTOL * OMEGA_SCALE, window, n_re, n_im, jobs)


# --------------------------------------------------------------------------- eigenfrequencies


def reactive_matrices(p: CircuitParams, boundary: Literal["open", "ground"] = "ground"):
    """Capacitance and inverse-inductance matrices of nodes (B, Q1, Q2, Q3).

    ``"open"`` drops ``C_k`` (port branch open); ``"ground"`` puts ``C_k``
    from the bus to ground.
    """
    C = capacitance_matrix(p)[1:, 1:].copy()
    if boundary == "open":
        C[0, 0] -= p.C_k
    elif boundary != "ground":
        raise ValueError(f"boundary must be 'open' or 'ground', got {boundary!r}")
    K = np.zeros((4, 4))
    for j in range(3):
        K[1 + j, 1 + j] = 1.0 / p.L_j0[j]
    return C, K


def eigenfrequencies(p: CircuitParams, boundary: Literal["open", "ground"] = "ground") -> np.ndarray:
    """Three positive lossless eigenfrequencies (rad/s), ascending.

    Solves ``K v = omega^2 C v``; the bus node carries no inductance, which
    yields one zero-frequency mode that is discarded.
    """
    C, K = reactive_matrices(p, boundary)
    lam = eigh(K, C, eigvals_only=True)
    pos = lam[lam > 1e-9 * lam.max()]
    return np.sqrt(np.sort(pos))


@dataclass(frozen=True)
class SweepResult:
    """Eigenfrequency curves versus the swept qubit-1 bare frequency."""

    bare_omega1: np.ndarray
    L_j1: np.ndarray
    curves: np.ndarray  # (n_points, 3) rad/s, sorted per point
    boundary: str

    def gaps(self) -> np.ndarray:
        """Adjacent-curve separations, shape (n_points, 2)."""
        return np.diff(self.curves, axis=1)

    def anticrossings(self) -> list[dict]:
        """Minimum gap near each interior local minimum of each adjacent-pair gap."""
        out = []
        gaps = self.gaps()
        for k in range(gaps.shape[1]):
            gk = gaps[:, k]
            for i in range(1, len(gk) - 1):
                if gk[i] <= gk[i - 1] and gk[i] < gk[i + 1]:
                    out.append({"pair": (k + 1, k + 2), "index": i, "bare_omega1": float(self.bare_omega1[i]), "gap": float(gk[i])})
        return out


def eigenfrequency_sweep(
    p: CircuitParams,
    bare_omega1: np.ndarray,
    boundary: Literal["open", "ground"] = "ground",
) -> SweepResult:
    """Sweep qubit 1's bare frequency ``1/sqrt(L_j1 (C_1 + C_c1))`` by changing ``L_j1``."""
    w = np.asarray(bare_omega1, dtype=float)
    if np.any(w <= 0):
        raise ParameterError("swept frequencies must be positive")
    csum = p.C_j[0] + p.C_c[0]
    L1 = 1.0 / (w**2 * csum)
    curves = np.empty((len(w), 3))
    for i, L in enumerate(L1):
        q = p.with_(L_j0=(L, p.L_j0[1], p.L_j0[2]), I_c=None)
        ev = eigenfrequencies(q, boundary)
        if ev.size != 3:
            raise RootFindingError(f"sweep point {i}: found {ev.size} positive eigenfrequencies, expected 3", ev, np.array([]))
        curves[i] = ev
    return SweepResult(w, L1, curves, boundary)


def default_sweep_range(p: CircuitParams, n_points: int = 401, span: float = 0.01) -> np.ndarray:
    """Qubit-1 bare frequencies spanning all three bare frequencies with margin ``span``."""
    bare = p.bare_frequencies
    return np.linspace(min(bare) * (1 - span), max(bare) * (1 + span), n_points)


# --------------------------------------------------------------------------- transient


@njit(cache=True)
def _rk4_kernel(Cinv, gdiag, Ic, two_pi_over_phi0, Z0, vs, dt, nsteps, record_every, x0):
    nrec = nsteps // record_every + 1
    if nsteps % record_every != 0:
        nrec += 1
    X = np.zeros((nrec, 8))
    ACC = np.zeros((nrec, 3))
    Imax = np.zeros(3)
    x = x0.copy()
    acc = np.zeros(3)
    X[0] = x
    rec = 1
    k = np.zeros((4, 8))
    pw = np.zeros((4, 3))
    xs = np.zeros(8)
    r = np.zeros(5)
    fail = -1
    for n in range(nsteps):
        for stage in range(4):
            if stage == 0:
                for i in range(8):
                    xs[i] = x[i]
                v_s = vs[2 * n]
            elif stage == 3:
                for i in range(8):
                    xs[i] = x[i] + dt * k[2, i]
                v_s = vs[2 * n + 2]
            else:
                for i in range(8):
                    xs[i] = x[i] + 0.5 * dt * k[stage - 1, i]
                v_s = vs[2 * n + 1]
            for i in range(5):
                r[i] = -gdiag[i] * xs[i]
            for j in range(3):
                r[2 + j] -= Ic[j] * math.sin(two_pi_over_phi0 * xs[5 + j])
            r[0] += v_s / Z0
            for i in range(5):
                s = 0.0
                for m in range(5):
                    s += Cinv[i, m] * r[m]
                k[stage, i] = s
            for j in range(3):
                k[stage, 5 + j] = xs[2 + j]
            vp = 0.5 * v_s
            vm = xs[0] - vp
            pw[stage, 0] = vp * vp / Z0
            pw[stage, 1] = vm * vm / Z0
            d = 0.0
            for j in range(3):
                d += gdiag[2 + j] * xs[2 + j] * xs[2 + j]
            pw[stage, 2] = d
        for i in range(8):
            x[i] += dt / 6.0 * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
        for c in range(3):
            acc[c] += dt / 6.0 * (pw[0, c] + 2.0 * pw[1, c] + 2.0 * pw[2, c] + pw[3, c])
        ok = True
        for i in range(8):
            if not math.isfinite(x[i]):
                ok = False
        if not ok:
            fail = n + 1
            break
        for j in range(3):
            cur = abs(math.sin(two_pi_over_phi0 * x[5 + j]))
            if cur > Imax[j]:
                Imax[j] = cur
        if (n + 1) % record_every == 0 or n + 1 == nsteps:
            X[rec] = x
            ACC[rec] = acc
            rec += 1
    return X[:rec], ACC[:rec], Imax, fail


@dataclass
class CircuitTrace:
    """Recorded transient (SI units). Cumulative energies in J."""

    t: np.ndarray
    V: np.ndarray
    phi: np.ndarray
    vs: np.ndarray
    e_in: np.ndarray
    e_refl: np.ndarray
    e_diss: np.ndarray
    params: CircuitParams
    source: Waveform | None
    dt: float
    max_current_ratio: np.ndarray
    e_stored0: float = 0.0
    qubit_energy: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.qubit_energy = branch_energies(self.params, self.V[:, 2:], self.phi)

    @property
    def currents(self) -> np.ndarray:
        Ic = np.asarray(self.params.critical_currents)
        return Ic * np.sin(2 * np.pi * self.phi / self.params.Phi_0)

    @property
    def v_plus(self) -> np.ndarray:
        return 0.5 * self.vs

    @property
    def v_minus(self) -> np.ndarray:
        return self.V[:, 0] - self.v_plus

    def stored(self) -> np.ndarray:
        """Total network energy: capacitors plus junctions."""
        return stored_energy(self.params, self.V, self.phi)

    def residual_series(self) -> np.ndarray:
        return self.e_stored0 + self.e_in - self.e_refl - self.stored() - self.e_diss

    def index_at(self, t: float) -> int:
        return int(np.searchsorted(self.t, t * (1 + 1e-12) + 1e-18, side="right") - 1)

    def ledger(self, i: int = -1) -> dict:
        stored = float(self.stored()[i])
        return {
            "E_in": float(self.e_in[i]),
            "E_refl": float(self.e_refl[i]),
            "E_stored": stored,
            "E_qubits": [float(x) for x in self.qubit_energy[i]],
            "E_diss": float(self.e_diss[i]),
            "residual": float(self.residual_series()[i]),
            "units": "J",
        }

    def to_csv(self, path, header_comment: str | None = None) -> None:
        names = ["t_s", "V_P", "V_B", "V_Q1", "V_Q2", "V_Q3", "phi_1", "phi_2", "phi_3",
                 "I_1", "I_2", "I_3", "Vplus", "Vminus", "E_1", "E_2", "E_3", "P_diss"]
        g = 0.0 if self.params.R_shunt is None else 1.0 / self.params.R_shunt
        pd = g * np.sum(self.V[:, 2:] ** 2, axis=1)
        data = np.column_stack([self.t, self.V, self.phi, self.currents, self.v_plus, self.v_minus, self.qubit_energy, pd])
        with open(path, "w") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write(",".join(names) + "\n")
            for row in data:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def junction_energy(p: CircuitParams, phi: np.ndarray) -> np.ndarray:
    EJ = np.asarray(p.critical_currents) * p.Phi_0 / (2 * np.pi)
    return EJ * (1 - np.cos(2 * np.pi * phi / p.Phi_0))


def branch_energies(p: CircuitParams, VQ: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``E_j = C_j V_Qj^2 / 2 + E_J (1 - cos(2 pi phi_j / Phi_0))``."""
    return 0.5 * np.asarray(p.C_j) * VQ**2 + junction_energy(p, phi)


def stored_energy(p: CircuitParams, V: np.ndarray, phi: np.ndarray) -> np.ndarray:
    C = capacitance_matrix(p)
    V = np.atleast_2d(V)
    cap = 0.5 * np.einsum("ni,ij,nj->n", V, C, V)
    return cap + junction_energy(p, np.atleast_2d(phi)).sum(axis=1)


def transient(
    p: CircuitParams,
    source: Waveform | None,
    t_span: tuple[float, float],
    dt: float = 1e-12,
    *,
    record_every: int = 10,
    phi0: tuple[float, float, float] | None = None,
    check_dt: bool = True,
    warn: bool = True,
) -> CircuitTrace:
    """Fixed-step RK4 transient from rest (or from junction fluxes ``phi0``).

    The source voltage is ``Re s(t)`` of ``source`` (volts) behind ``Z_0``.

    Raises
    ------
    ParameterError
        ``dt`` above :data:`MAX_DT` while ``check_dt`` is set.
    InstabilityError
        The state became non-finite.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if check_dt and dt > MAX_DT * (1 + 1e-9):
        raise ParameterError(f"dt={dt:.3e} s exceeds {MAX_DT:.0e} s (pass check_dt=False to override)")
    t0, t1 = t_span
    nsteps = int(round((t1 - t0) / dt))
    if nsteps < 1:
        raise ParameterError("t_span shorter than one step")
    th = t0 + 0.5 * dt * np.arange(2 * nsteps + 1)
    vs = source.real_signal(th) if source is not None else np.zeros_like(th)
    Cinv = np.linalg.inv(capacitance_matrix(p))
    gdiag = conductance_diagonal(p)
    Ic = np.asarray(p.critical_currents, dtype=float)
    x0 = np.zeros(8)
    if phi0 is not None:
        x0[5:] = phi0
    X, ACC, Imax, fail = _rk4_kernel(Cinv, gdiag, Ic, 2 * np.pi / p.Phi_0, p.Z_0, vs, dt, nsteps, record_every, x0)
    if fail >= 0:
        raise InstabilityError(t0 + fail * dt, dt)
    idx = np.arange(0, nsteps + 1, record_every)
    if idx[-1] != nsteps:
        idx = np.append(idx, nsteps)
    t = t0 + idx * dt
    trace = CircuitTrace(
        t=t,
        V=X[:, :5],
        phi=X[:, 5:],
        vs=vs[2 * idx],
        e_in=ACC[:, 0],
        e_refl=ACC[:, 1],
        e_diss=ACC[:, 2],
        params=p,
        source=source,
        dt=dt,
        max_current_ratio=Imax,
        e_stored0=float(stored_energy(p, x0[:5], x0[5:])[0]),
    )
    if warn and np.max(Imax) > LINEAR_GUARD:
        warnings.warn(LinearRegimeWarning(Imax), stacklevel=2)
    return trace


# --------------------------------------------------------------------------- drive scale


def junction_current_response(p: CircuitParams, omega: complex) -> np.ndarray:
    """Phasor junction currents per volt of source ``V_s`` at complex ``omega``."""
    s = complex(-1j * as_complex(omega))
    Y = nodal_admittance(p, s)
    rhs = np.zeros(5, dtype=complex)
    rhs[0] = 1.0 / p.Z_0
    V = np.linalg.solve(Y, rhs)
    return np.array([V[2 + j] / (s * p.L_j0[j]) for j in range(3)])


def amplitude_for_current(p: CircuitParams, omega: complex, fraction: float = 0.02) -> float:
    """Peak source amplitude (V) so the largest predicted ``|I_j|`` is ``fraction * I_c``."""
    H = np.abs(junction_current_response(p, omega)) / np.asarray(p.critical_currents)
    return fraction / float(H.max())


# --------------------------------------------------------------------------- convergence


@dataclass(frozen=True)
class ConvergenceReport:
    dt: float
    compare_dt: float
    qubit_energy_change: tuple[float, float, float]
    reflected_change: float
    max_change: float
    flagged: bool
    unstable: bool = False
    threshold: float = 0.005

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "compare_dt": self.compare_dt,
            "qubit_energy_change": list(self.qubit_energy_change),
            "reflected_change": self.reflected_change,
            "max_change": self.max_change,
            "flagged": self.flagged,
            "unstable": self.unstable,
            "threshold": self.threshold,
        }


def convergence_check(
    p: CircuitParams,
    source: Waveform,
    dt: float,
    t_span: tuple[float, float] | None = None,
    compare_dt: float | None = None,
    threshold: float = 0.005,
) -> ConvergenceReport:
    """Rerun at ``compare_dt`` (default ``dt/2``) and compare end-of-run observables."""
    if dt < 0.25e-12 * (1 - 1e-9):
        raise ParameterError("dt must be >= 0.25 ps")
    if compare_dt is None:
        compare_dt = dt / 2
    if t_span is None:
        t_span = (source.t_on, source.t_off)

    def observe(step: float):
        tr = transient(p, source, t_span, step, record_every=max(1, int(round(1e-9 / step))), check_dt=False, warn=False)
        return tr.qubit_energy[-1], tr.e_refl[-1]

    try:
        e1, r1 = observe(dt)
        e2, r2 = observe(compare_dt) if compare_dt != dt else (e1, r1)
    except InstabilityError:
        inf = math.inf
        return ConvergenceReport(dt, compare_dt, (inf, inf, inf), inf, inf, True, True, threshold)
    ref = max(float(np.max(np.abs(e2))), 1e-300)
    dq = tuple(float(abs(a - b) / ref) for a, b in zip(e1, e2))
    dr = float(abs(r1 - r2) / max(abs(r2), 1e-300))
    m = max(max(dq), dr)
    return ConvergenceReport(dt, compare_dt, dq, dr, m, m > threshold, False, threshold)  # type: ignore[arg-type]
