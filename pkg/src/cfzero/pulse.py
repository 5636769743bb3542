"""Complex-frequency and Gaussian drive waveforms.

A :class:`Waveform` is a closed-form descriptor: it is evaluated analytically
wherever the integrators need it and carries its exact energy
``E = int |s(t)|^2 dt``. Time factors follow ``exp(-1j*omega*t)``.

CF pulse on ``[t_on, t_off]``::

    s(t) = b0 * w(t) * exp(-1j * omega_z * (t - t_on))

with ``w`` a raised-cosine ramp of length ``tau_ramp`` at both ends and 1 in
between. Gaussian pulse::

    s(t) = b0 * exp(-(t - t_c)**2 / (2 sigma**2)) * exp(-1j * omega_d * t)
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, replace
from typing import Literal

import numpy as np
from scipy.special import erf

from .model import ComplexFreq, ParameterError, as_complex

#: Largest allowed ``|omega_i| * (t_off - t_on)`` (envelope range e^50).
OVERFLOW_LIMIT = 50.0
#: Default CF window in envelope lifetimes ``1/|omega_i|``.
DEFAULT_LIFETIMES = 8.0
#: Default ramp length in carrier cycles.
DEFAULT_RAMP_CYCLES = 5.0


class OverflowRiskError(ParameterError):
    """CF envelope would span more than e^50 over its window."""


class TruncationWarning(UserWarning):
    """Gaussian window cuts the pulse inside +-5 sigma."""


def _exp_integral(z: complex, L: float) -> complex:
    """``int_0^L exp(-z t) dt`` without cancellation for small ``|z L|``."""
    x = z * L
    if abs(x) < 1e-4:
        return L * (1 - x / 2 + x * x / 6 - x**3 / 24)
    return -np.expm1(-x) / z


def _ramp_integral(k: float, R: float, c1_sign: float) -> float:
    """``int_0^R exp(-k t) w(t)^2 dt`` for a raised-cosine ramp.

    ``c1_sign = -1`` is the rising ramp ``(1 - cos(pi t/R))/2``, ``+1`` the
    falling one ``(1 + cos(pi t/R))/2``. Uses ``w^2 = 3/8 -+ cos/2 + cos(2x)/8``.
    """
    if R == 0:
        return 0.0
    b = math.pi / R
    total = 0.375 * _exp_integral(k, R)
    total += c1_sign * 0.5 * _exp_integral(k - 1j * b, R)
    total += 0.125 * _exp_integral(k - 2j * b, R)
    return float(np.real(total))


@dataclass(frozen=True)
class Waveform:
    """Immutable drive descriptor (CF or Gaussian).

    For ``kind="cf"`` the carrier is the complex ``omega`` and the envelope
    is anchored at ``t_on``. For ``kind="gaussian"`` ``omega`` is real and
    ``sigma``/``t_c`` set the envelope. ``energy`` is exact for the
    complex signal.
    """

    kind: Literal["cf", "gaussian"]
    b0: complex
    omega: complex
    t_on: float
    t_off: float
    tau_ramp: float = 0.0
    sigma: float = 0.0
    t_c: float = 0.0

    # ---- evaluation -------------------------------------------------------

    def envelope(self, t, omega_ref: float = 0.0) -> np.ndarray:
        """``s(t) * exp(1j * omega_ref * t)``: the signal in a frame rotating at ``omega_ref``."""
        t = np.asarray(t, dtype=float)
        inside = (t >= self.t_on) & (t <= self.t_off)
        if self.kind == "cf":
            tau = t - self.t_on
            shape = self._ramp(tau)
            phase = -1j * (self.omega - omega_ref) * tau + 1j * omega_ref * self.t_on
        else:
            shape = np.exp(-((t - self.t_c) ** 2) / (2 * self.sigma**2))
            phase = -1j * (self.omega - omega_ref) * t
        with np.errstate(over="ignore", invalid="ignore"):
            val = self.b0 * shape * np.exp(np.where(inside, phase, 0.0))
        return np.where(inside, val, 0.0)

    def __call__(self, t) -> np.ndarray:
        return self.envelope(t, 0.0)

    def real_signal(self, t, scale: float = 1.0) -> np.ndarray:
        """Physical (real) signal ``scale * Re s(t)``, used for voltage sources."""
        return scale * np.real(self(t))

    def _ramp(self, tau: np.ndarray) -> np.ndarray:
        R = self.tau_ramp
        if R <= 0:
            return np.ones_like(tau)
        T = self.t_off - self.t_on
        up = np.clip(tau / R, 0.0, 1.0)
        down = np.clip((T - tau) / R, 0.0, 1.0)
        return 0.5 * (1 - np.cos(np.pi * up)) * 0.5 * (1 - np.cos(np.pi * down))

    # ---- properties -------------------------------------------------------

    @property
    def duration(self) -> float:
        return self.t_off - self.t_on

    @property
    def energy(self) -> float:
        """Exact ``int |s|^2 dt`` over the window."""
        A2 = abs(self.b0) ** 2
        if self.kind == "cf":
            k = 2 * (-np.imag(self.omega))  # |exp(-i w t)|^2 = exp(-2 omega_i t)
            T = self.duration
            R = self.tau_ramp
            flat = float(np.real(_exp_integral(k, T - 2 * R))) * math.exp(-k * R) if T > 2 * R else 0.0
            up = _ramp_integral(k, R, -1.0)
            down = _ramp_integral(k, R, +1.0) * math.exp(-k * (T - R))
            return A2 * (up + flat + down)
        s = self.sigma
        lo = (self.t_on - self.t_c) / s
        hi = (self.t_off - self.t_c) / s
        return A2 * s * math.sqrt(math.pi) / 2 * float(erf(hi) - erf(lo))

    @property
    def carrier(self) -> float:
        return float(np.real(self.omega))

    def peak_amplitude(self) -> float:
        """``max |s(t)|`` (exact for both kinds)."""
        if self.kind == "gaussian":
            tc = min(max(self.t_c, self.t_on), self.t_off)
            return abs(self.b0) * math.exp(-((tc - self.t_c) ** 2) / (2 * self.sigma**2))
        wi = -np.imag(self.omega)
        growth = math.exp(-wi * self.duration) if wi < 0 else 1.0
        return abs(self.b0) * growth

    def descriptor(self) -> dict:
        d = asdict(self)
        d["b0"] = [float(np.real(self.b0)), float(np.imag(self.b0))]
        d["omega"] = [float(np.real(self.omega)), float(np.imag(self.omega))]
        d["energy"] = self.energy
        return d

    # ---- export -----------------------------------------------------------

    def sample(self, t) -> np.ndarray:
        """Columns ``t, Re s, Im s, |s|^2``."""
        t = np.asarray(t, dtype=float)
        s = self(t)
        return np.column_stack([t, s.real, s.imag, np.abs(s) ** 2])

    def to_csv(self, path, t) -> None:
        rows = self.sample(t)
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(self.descriptor(), sort_keys=True) + "\n")
            fh.write("t,re_s,im_s,abs_s2\n")
            for r in rows:
                fh.write(",".join(repr(float(x)) for x in r) + "\n")


def default_window(omega_z: ComplexFreq | complex, lifetimes: float = DEFAULT_LIFETIMES) -> float:
    """CF window length: ``lifetimes / |omega_i|`` capped by the overflow guard."""
    wi = abs(as_complex(omega_z).imag)
    if wi == 0:
        raise ParameterError("a real frequency has no envelope lifetime; give t_off explicitly")
    return min(lifetimes, 0.999 * OVERFLOW_LIMIT) / wi


def default_ramp(omega_z: ComplexFreq | complex, window: float | None = None) -> float:
    """Five carrier cycles, clipped to 10% of the window."""
    R = DEFAULT_RAMP_CYCLES * 2 * math.pi / abs(as_complex(omega_z).real)
    if window is not None:
        R = min(R, 0.1 * window)
    return R


def cf_waveform(
    omega_z: ComplexFreq | complex,
    b0: complex,
    t_on: float,
    t_off: float,
    tau_ramp: float = 0.0,
) -> Waveform:
    """CF pulse at complex frequency ``omega_z`` (``b0`` = amplitude at ``t_on``)."""
    w = as_complex(omega_z)
    T = t_off - t_on
    if not T > 0:
        raise ParameterError("t_off must exceed t_on")
    if tau_ramp < 0 or tau_ramp > 0.1 * T * (1 + 1e-12):
        raise ParameterError(f"tau_ramp={tau_ramp} must lie in [0, 10% of the window]")
    if abs(w.imag) * T > OVERFLOW_LIMIT:
        raise OverflowRiskError(
            f"|omega_i| * window = {abs(w.imag) * T:.1f} exceeds {OVERFLOW_LIMIT:g}; shorten the window"
        )
    return Waveform("cf", complex(b0), w, float(t_on), float(t_off), float(tau_ramp))


def gaussian_waveform(
    omega_d: float,
    b0: complex,
    sigma_i: float,
    t_c: float,
    window: tuple[float, float],
) -> Waveform:
    """Gaussian pulse; warns with :class:`TruncationWarning` if the window clips +-5 sigma."""
    if not sigma_i > 0:
        raise ParameterError("sigma_i must be positive")
    t0, t1 = window
    if not t1 > t0:
        raise ParameterError("window must have positive length")
    if t0 > t_c - 5 * sigma_i or t1 < t_c + 5 * sigma_i:
        warnings.warn("Gaussian window truncates the pulse inside +-5 sigma", TruncationWarning, stacklevel=2)
    return Waveform("gaussian", complex(b0), complex(float(np.real(omega_d))), float(t0), float(t1), 0.0, float(sigma_i), float(t_c))


def match_energy(w: Waveform, target_energy: float) -> Waveform:
    """Rescale ``b0`` so that ``w.energy == target_energy``."""
    if not target_energy > 0:
        raise ParameterError("target energy must be positive")
    E = w.energy
    if not E > 0:
        raise ParameterError("waveform has zero energy; cannot rescale")
    return replace(w, b0=w.b0 * math.sqrt(target_energy / E))


def gaussian_effective_width(sigma_i: float) -> float:
    """Width between the 1/sqrt(2) amplitude points: ``2 sigma sqrt(ln 2)``."""
    return 2 * sigma_i * math.sqrt(math.log(2))
