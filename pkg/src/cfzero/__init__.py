"""Complex-frequency pulses that excite one qubit among several.

Two models share one interface:

* an analytic Bloch model (resonator, three two-level systems, waveguide),
  in rad/ns and ns;
* a lumped three-transmon circuit, in SI units.

Both expose reflection poles and zeros as :class:`SpectralFeature` records
labeled by the dominant qubit, transient integrators with energy ledgers,
and the efficiency, selectivity and crosstalk metrics in :mod:`cfzero.metrics`.
"""
from .model import (
    REFERENCE_BLOCH,
    REFERENCE_CIRCUIT,
    REFERENCE_CIRCUIT_LOSSY,
    BlochParams,
    CircuitParams,
    ComplexFreq,
    ConfigError,
    ParameterError,
    ej_ec_ratio,
    reference_bloch,
    reference_circuit,
    tau_r_from_Q,
)
from .pulse import Waveform, cf_waveform, gaussian_waveform, match_energy
from .response import SpectralFeature, features, heatmap, reflection, reflection_array
from .roots import polyroots
from .bloch import integrate, reflected_fraction
from .circuit import (
    convergence_check,
    eigenfrequency_sweep,
    find_circuit_features,
    small_signal_s11,
    transient,
)
from .metrics import crosstalk_ratio, report, selectivity
from .experiments import DriveSpec, comparison, run_strategy

__version__ = "0.1.0"

__all__ = [
    "REFERENCE_BLOCH",
    "REFERENCE_CIRCUIT",
    "REFERENCE_CIRCUIT_LOSSY",
    "BlochParams",
    "CircuitParams",
    "ComplexFreq",
    "ConfigError",
    "ParameterError",
    "ej_ec_ratio",
    "reference_bloch",
    "reference_circuit",
    "tau_r_from_Q",
    "Waveform",
    "cf_waveform",
    "gaussian_waveform",
    "match_energy",
    "SpectralFeature",
    "features",
    "heatmap",
    "reflection",
    "reflection_array",
    "polyroots",
    "integrate",
    "reflected_fraction",
    "convergence_check",
    "eigenfrequency_sweep",
    "find_circuit_features",
    "small_signal_s11",
    "transient",
    "crosstalk_ratio",
    "report",
    "selectivity",
    "DriveSpec",
    "comparison",
    "run_strategy",
]
