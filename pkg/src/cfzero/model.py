"""Physical parameters, unit conventions and derived constants.

Two fixed models share this module:

* the analytic Bloch model (hbar = 1, time in ns, angular frequency in rad/ns,
  ``|b_in|^2`` in excitations/ns), and
* the lumped three-transmon circuit (SI units throughout).

Complex frequencies follow ``omega = re - 1j * im`` with time factor
``exp(-1j * omega * t)``, so ``im > 0`` is a decaying signal and ``im < 0`` a
growing one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from scipy import constants

E_CHARGE = constants.e
PLANCK = constants.h
PHI0 = constants.h / (2 * constants.e)

#: Q = omega_c * tau_r / 2 (energy decay rate omega_c / Q).
Q_ENERGY = "energy"
#: Q = omega_c * tau_r (amplitude decay rate omega_c / Q).
Q_AMPLITUDE = "amplitude"
Q_CONVENTIONS = (Q_ENERGY, Q_AMPLITUDE)

#: Convention used by :data:`REFERENCE_BLOCH`; see README, "Q convention".
DEFAULT_Q_CONVENTION = Q_AMPLITUDE


class ParameterError(ValueError):
    """Raised when a parameter set violates a physical or consistency invariant."""


class ConfigError(ParameterError):
    """Raised for malformed configuration files (unknown keys, bad values)."""


@dataclass(frozen=True)
class ComplexFreq:
    """A point ``omega = re - 1j*im`` of the complex frequency plane."""

    re: float
    im: float

    @classmethod
    def from_complex(cls, w: complex) -> "ComplexFreq":
        w = complex(w)
        return cls(w.real, -w.imag)

    @property
    def value(self) -> complex:
        return complex(self.re, -self.im)

    @property
    def decaying(self) -> bool:
        return self.im > 0

    @property
    def growing(self) -> bool:
        return self.im < 0

    def conjugate(self) -> "ComplexFreq":
        return ComplexFreq(self.re, -self.im)

    def __complex__(self) -> complex:
        return self.value


def as_complex(omega: ComplexFreq | complex | float) -> complex:
    """Accept a ComplexFreq or a plain number and return ``omega`` as complex."""
    if isinstance(omega, ComplexFreq):
        return omega.value
    return complex(omega)


def tau_r_from_Q(omega_c: float, Q: float, convention: str = Q_ENERGY) -> float:
    """Radiative amplitude-decay time from a quality factor.

    With the default ``"energy"`` convention ``1/tau_r = omega_c / (2Q)``;
    ``"amplitude"`` gives ``1/tau_r = omega_c / Q``. ``Q = inf`` is the
    lossless limit (``tau_r = inf``).
    """
    if not Q > 0:
        raise ParameterError(f"Q must be positive, got {Q}")
    if convention == Q_ENERGY:
        return 2.0 * Q / omega_c
    if convention == Q_AMPLITUDE:
        return Q / omega_c
    raise ParameterError(f"unknown Q convention {convention!r}")


def Q_from_tau_r(omega_c: float, tau_r: float, convention: str = Q_ENERGY) -> float:
    if convention == Q_ENERGY:
        return omega_c * tau_r / 2.0
    if convention == Q_AMPLITUDE:
        return omega_c * tau_r
    raise ParameterError(f"unknown Q convention {convention!r}")


def _triple(name: str, value: Any) -> tuple[float, float, float]:
    if isinstance(value, (int, float)):
        value = (value,) * 3
    value = tuple(float(v) for v in value)
    if len(value) != 3:
        raise ParameterError(f"{name} needs 3 entries, got {len(value)}")
    return value  # type: ignore[return-value]


@dataclass(frozen=True)
class BlochParams:
    """Rates and frequencies of the resonator + three-qubit + waveguide model.

    Frequencies and rates are in rad/ns, times in ns. ``tau_i = inf`` means
    no internal resonator loss.
    """

    omega_c: float
    omega_a: tuple[float, float, float]
    g: tuple[float, float, float]
    tau_r: float
    tau_i: float = math.inf
    gamma_s: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega_a", _triple("omega_a", self.omega_a))
        object.__setattr__(self, "g", _triple("g", self.g))
        object.__setattr__(self, "gamma_s", _triple("gamma_s", self.gamma_s))
        if not self.omega_c > 0 or not all(w > 0 for w in self.omega_a):
            raise ParameterError("all frequencies must be positive")
        if any(x < 0 for x in self.g):
            raise ParameterError("couplings g_j must be >= 0")
        if any(x < 0 for x in self.gamma_s):
            raise ParameterError("spontaneous emission rates must be >= 0")
        if not self.tau_r > 0:
            raise ParameterError("tau_r must be positive")
        if not self.tau_i > 0:
            raise ParameterError("tau_i must be positive (inf for no internal loss)")

    @property
    def radiative_rate(self) -> float:
        """``1/tau_r`` (amplitude decay into the waveguide)."""
        return 1.0 / self.tau_r

    @property
    def internal_rate(self) -> float:
        return 0.0 if math.isinf(self.tau_i) else 1.0 / self.tau_i

    @property
    def k_r(self) -> float:
        return math.sqrt(2.0 / self.tau_r)

    @property
    def lossless(self) -> bool:
        """True when the only loss channel is radiation into the waveguide."""
        return self.internal_rate == 0.0 and not any(self.gamma_s)

    def with_(self, **changes: Any) -> "BlochParams":
        return replace(self, **changes)


def reference_bloch(
    Q: float = 31.0,
    convention: str = DEFAULT_Q_CONVENTION,
    gamma_s: float | tuple[float, float, float] = 0.0,
    tau_i: float = math.inf,
) -> BlochParams:
    """Three qubits at 0/1/2 % detuning from a 5.77 GHz resonator, g = omega_c/100."""
    wc = 2 * math.pi * 5.77
    return BlochParams(
        omega_c=wc,
        omega_a=(wc, 1.01 * wc, 1.02 * wc),
        g=(wc / 100,) * 3,
        tau_r=tau_r_from_Q(wc, Q, convention),
        tau_i=tau_i,
        gamma_s=_triple("gamma_s", gamma_s),
    )


REFERENCE_BLOCH = reference_bloch()


@dataclass(frozen=True)
class CircuitParams:
    """Element values of the port / bus / three-transmon network (SI units).

    ``R_shunt = None`` means no shunt resistor (lossless qubits). When ``I_c``
    is given it must match ``Phi0 / (2 pi L_j0)`` for every junction to 1e-6.
    """

    L_j0: tuple[float, float, float]
    C_j: tuple[float, float, float]
    C_c: tuple[float, float, float]
    C_k: float
    I_c: float | None = None
    R_shunt: float | None = None
    Z_0: float = 50.0
    Phi_0: float = field(default=PHI0)

    def __post_init__(self) -> None:
        for name in ("L_j0", "C_j", "C_c"):
            object.__setattr__(self, name, _triple(name, getattr(self, name)))
        if any(x <= 0 for x in self.L_j0 + self.C_j):
            raise ParameterError("junction inductances and shunt capacitances must be positive")
        if any(x < 0 for x in self.C_c) or not self.C_k > 0:
            raise ParameterError("coupling capacitances must be non-negative, C_k positive")
        if not self.Z_0 > 0:
            raise ParameterError("port impedance must be positive")
        if self.R_shunt is not None and not self.R_shunt > 0:
            raise ParameterError("R_shunt must be positive or None")
        if self.I_c is not None:
            if not self.I_c > 0:
                raise ParameterError("critical current must be positive")
            for L in self.L_j0:
                expected = self.Phi_0 / (2 * math.pi * self.I_c)
                if abs(L - expected) > 1e-6 * expected:
                    raise ParameterError(
                        f"L_j0={L:.6e} H inconsistent with I_c={self.I_c:.6e} A "
                        f"(expected {expected:.6e} H)"
                    )

    @property
    def critical_currents(self) -> tuple[float, float, float]:
        return tuple(self.Phi_0 / (2 * math.pi * L) for L in self.L_j0)  # type: ignore[return-value]

    @property
    def C_sigma(self) -> tuple[float, float, float]:
        """Total shunt capacitance per qubit, ``C_j + C_c``."""
        return tuple(a + b for a, b in zip(self.C_j, self.C_c))  # type: ignore[return-value]

    @property
    def bare_frequencies(self) -> tuple[float, float, float]:
        """``1/sqrt(L_j0 C_sigma)`` in rad/s."""
        return tuple(1 / math.sqrt(L * C) for L, C in zip(self.L_j0, self.C_sigma))  # type: ignore[return-value]

    @property
    def lossless(self) -> bool:
        return self.R_shunt is None

    def with_(self, **changes: Any) -> "CircuitParams":
        return replace(self, **changes)


def ej_ec_from_values(I_c: float, C_sigma: float, Phi_0: float = PHI0) -> float:
    """``E_J / E_C`` with ``E_J = I_c Phi_0 / 2pi`` and ``E_C = e^2 / (2 C_sigma)``."""
    if not I_c > 0 or not C_sigma > 0:
        raise ParameterError("I_c and C_sigma must be positive")
    E_J = I_c * Phi_0 / (2 * math.pi)
    E_C = E_CHARGE**2 / (2 * C_sigma)
    return E_J / E_C


def ej_ec_ratio(p: CircuitParams, qubit: int = 1) -> float:
    """E_J/E_C of one transmon (1-based index), with ``C_sigma = C_j + C_c``."""
    j = qubit - 1
    return ej_ec_from_values(p.critical_currents[j], p.C_sigma[j], p.Phi_0)


def reference_circuit(R_shunt: float | None = None, Z_0: float = 50.0) -> CircuitParams:
    """Reference three-transmon element values.

    L_j0 is derived from I_c = 0.1647 uA (1.998 nH, nominally 2 nH) so that the
    inductance/critical-current consistency check holds exactly.
    """
    I_c = 0.1647e-6
    L = PHI0 / (2 * math.pi * I_c)
    C_c1 = 10e-15
    p = CircuitParams(
        L_j0=(L, L, L),
        C_j=(0.2e-12,) * 3,
        C_c=tuple(C_c1 * 1.1**k for k in range(3)),  # type: ignore[arg-type]
        C_k=10e-12,
        I_c=I_c,
        R_shunt=R_shunt,
        Z_0=Z_0,
    )
    ratio = ej_ec_ratio(p, 1)
    if abs(ratio / 850.0 - 1) > 0.05:
        raise ParameterError(f"E_J/E_C = {ratio:.1f} not within 5% of 850")
    return p


REFERENCE_CIRCUIT = reference_circuit()
REFERENCE_CIRCUIT_LOSSY = reference_circuit(R_shunt=0.2e6)


# --------------------------------------------------------------------------- config

_HZ_TO_RAD_NS = 2 * math.pi * 1e-9

_BLOCH_KEYS = {
    "omega_c", "omega_a", "g", "Q", "q_convention", "tau_r_ns", "tau_i_ns",
    "gamma_s", "gamma_s_rad_ns",
    "omega_c_rad_ns", "omega_a_rad_ns", "g_rad_ns",
}
_CIRCUIT_KEYS = {"L_j0", "C_j", "C_c", "C_k", "I_c", "R_shunt", "Z_0"}


def _reject_unknown(section: str, data: Mapping[str, Any], allowed: set[str]) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]")


def _freq(data: Mapping[str, Any], key: str, default: Any) -> Any:
    """Frequency given in Hz under ``key`` or in rad/ns under ``key_rad_ns``."""
    if key in data and f"{key}_rad_ns" in data:
        raise ConfigError(f"both {key!r} and {key + '_rad_ns'!r} given")
    if f"{key}_rad_ns" in data:
        return data[f"{key}_rad_ns"]
    if key in data:
        v = data[key]
        if isinstance(v, (list, tuple)):
            return [x * _HZ_TO_RAD_NS for x in v]
        return v * _HZ_TO_RAD_NS
    return default


def bloch_from_dict(data: Mapping[str, Any]) -> BlochParams:
    """Build :class:`BlochParams` from a config mapping.

    Frequencies (``omega_c``, ``omega_a``, ``g``) are ordinary frequencies in
    Hz unless given with the ``_rad_ns`` suffix. ``gamma_s`` is a rate in 1/s;
    ``gamma_s_rad_ns`` in rad/ns. Missing entries default to the reference model.
    """
    _reject_unknown("bloch", data, _BLOCH_KEYS)
    base = REFERENCE_BLOCH
    try:
        wc = float(_freq(data, "omega_c", base.omega_c))
        omega_a = _freq(data, "omega_a", None)
        omega_a = base.omega_a if omega_a is None else omega_a
        if "omega_c" in data or "omega_c_rad_ns" in data:
            if "omega_a" not in data and "omega_a_rad_ns" not in data:
                omega_a = (wc, 1.01 * wc, 1.02 * wc)
        g = _freq(data, "g", None)
        g = (wc / 100,) * 3 if g is None else g
        convention = data.get("q_convention", DEFAULT_Q_CONVENTION)
        if "tau_r_ns" in data:
            if "Q" in data:
                raise ConfigError("give either 'Q' or 'tau_r_ns', not both")
            tau_r = float(data["tau_r_ns"])
        else:
            tau_r = tau_r_from_Q(wc, float(data.get("Q", 31.0)), convention)
        tau_i = float(data.get("tau_i_ns", math.inf))
        if "gamma_s_rad_ns" in data:
            gamma_s = data["gamma_s_rad_ns"]
        elif "gamma_s" in data:
            gs = data["gamma_s"]
            gamma_s = [x * 1e-9 for x in gs] if isinstance(gs, (list, tuple)) else gs * 1e-9
        else:
            gamma_s = 0.0
        return BlochParams(wc, omega_a, g, tau_r, tau_i, gamma_s)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [bloch] value: {exc}") from exc


def circuit_from_dict(data: Mapping[str, Any]) -> CircuitParams:
    """Build :class:`CircuitParams` from a config mapping in SI units."""
    _reject_unknown("circuit", data, _CIRCUIT_KEYS)
    base = REFERENCE_CIRCUIT
    kwargs: dict[str, Any] = {
        "L_j0": base.L_j0, "C_j": base.C_j, "C_c": base.C_c, "C_k": base.C_k,
        "I_c": base.I_c, "R_shunt": base.R_shunt, "Z_0": base.Z_0,
    }
    if "L_j0" in data and "I_c" not in data:
        kwargs["I_c"] = None
    kwargs.update(data)
    try:
        return CircuitParams(**kwargs)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [circuit] value: {exc}") from exc


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a JSON config file; returns the raw mapping (sections validated lazily)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data
