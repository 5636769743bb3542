import json
import math

import pytest
from hypothesis import given, strategies as st

from cfzero.model import (
    PHI0,
    REFERENCE_BLOCH,
    REFERENCE_CIRCUIT,
    REFERENCE_CIRCUIT_LOSSY,
    BlochParams,
    CircuitParams,
    ComplexFreq,
    ConfigError,
    ParameterError,
    Q_from_tau_r,
    as_complex,
    bloch_from_dict,
    circuit_from_dict,
    ej_ec_from_values,
    ej_ec_ratio,
    load_config,
    reference_bloch,
    tau_r_from_Q,
)

WC = 2 * math.pi * 5.77


def test_complex_freq_sign_convention():
    w = ComplexFreq(1.0, 0.5)
    assert w.value == complex(1.0, -0.5)
    assert w.decaying and not w.growing
    assert w.conjugate().growing
    assert complex(w) == w.value
    assert ComplexFreq.from_complex(w.value) == w
    assert as_complex(w) == as_complex(w.value)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_complex_freq_roundtrip(re, im):
    w = ComplexFreq(re, im)
    assert ComplexFreq.from_complex(w.value) == w
    assert w.conjugate().conjugate() == w


def test_tau_r_conventions():
    assert tau_r_from_Q(WC, 31, "energy") == pytest.approx(2 * 31 / WC)
    assert tau_r_from_Q(WC, 31, "amplitude") == pytest.approx(31 / WC)
    with pytest.raises(ParameterError):
        tau_r_from_Q(WC, 31, "power")
    with pytest.raises(ParameterError):
        tau_r_from_Q(WC, -1)


@given(st.floats(1.0, 1e3), st.floats(1.0, 1e4), st.sampled_from(["energy", "amplitude"]))
def test_q_roundtrip(wc, Q, conv):
    assert Q_from_tau_r(wc, tau_r_from_Q(wc, Q, conv), conv) == pytest.approx(Q)


def test_reference_bloch_values():
    p = REFERENCE_BLOCH
    assert p.omega_c == pytest.approx(36.2540, rel=1e-5)
    assert p.omega_a == pytest.approx((WC, 1.01 * WC, 1.02 * WC))
    assert p.g == pytest.approx((WC / 100,) * 3)
    # amplitude convention: 1/tau_r = omega_c / Q
    assert p.radiative_rate == pytest.approx(WC / 31)
    assert p.k_r == pytest.approx(math.sqrt(2 / p.tau_r))
    assert p.lossless
    assert not reference_bloch(gamma_s=0.01).lossless


def test_bloch_validation():
    with pytest.raises(ParameterError):
        BlochParams(-1.0, (1, 1, 1), (0.1,) * 3, 1.0)
    with pytest.raises(ParameterError):
        BlochParams(1.0, (1, 1, 1), (-0.1, 0.1, 0.1), 1.0)
    with pytest.raises(ParameterError):
        BlochParams(1.0, (1, 1), (0.1,) * 3, 1.0)
    with pytest.raises(ParameterError):
        REFERENCE_BLOCH.with_(tau_r=0.0)


def test_reference_circuit_values():
    p = REFERENCE_CIRCUIT
    # L_j0 = Phi0 / (2 pi I_c), I_c = 0.1647 uA
    assert p.L_j0[0] == pytest.approx(1.99821e-9, rel=1e-5)
    assert p.critical_currents == pytest.approx((0.1647e-6,) * 3)
    assert p.C_c == pytest.approx((10e-15, 11e-15, 12.1e-15))
    assert p.C_sigma[0] == pytest.approx(0.21e-12)
    assert p.lossless and not REFERENCE_CIRCUIT_LOSSY.lossless
    assert REFERENCE_CIRCUIT_LOSSY.R_shunt == 0.2e6


def test_ej_ec_oracle():
    # E_J = I_c Phi0 / 2pi, E_C = e^2 / 2C; frozen independent evaluation
    assert ej_ec_from_values(0.1647e-6, 0.2e-12) == pytest.approx(844.634, rel=1e-5)
    assert ej_ec_ratio(REFERENCE_CIRCUIT, 1) == pytest.approx(886.866, rel=1e-5)
    with pytest.raises(ParameterError):
        ej_ec_from_values(0.0, 1e-12)


def test_circuit_ic_consistency():
    with pytest.raises(ParameterError, match="inconsistent"):
        REFERENCE_CIRCUIT.with_(L_j0=(2.1e-9,) * 3)
    p = REFERENCE_CIRCUIT.with_(L_j0=(2.1e-9,) * 3, I_c=None)
    assert p.critical_currents[0] == pytest.approx(PHI0 / (2 * math.pi * 2.1e-9))
    with pytest.raises(ParameterError):
        REFERENCE_CIRCUIT.with_(R_shunt=-1.0)


def test_bloch_from_dict_units():
    p = bloch_from_dict({"omega_c": 5.77e9, "Q": 31})
    assert p.omega_c == pytest.approx(WC)
    assert p.omega_a == pytest.approx(REFERENCE_BLOCH.omega_a)
    q = bloch_from_dict({"omega_c_rad_ns": WC, "tau_r_ns": 2.0, "gamma_s": 1e6})
    assert q.tau_r == 2.0
    assert q.gamma_s == pytest.approx((1e-3,) * 3)
    assert bloch_from_dict({}) == REFERENCE_BLOCH


@pytest.mark.parametrize(
    "bad, key",
    [
        ({"omeg_c": 1.0}, "omeg_c"),
        ({"omega_c": 1.0, "omega_c_rad_ns": 1.0}, "omega_c"),
        ({"Q": 31, "tau_r_ns": 1.0}, "tau_r_ns"),
    ],
)
def test_bloch_from_dict_errors_name_key(bad, key):
    with pytest.raises(ConfigError, match=key):
        bloch_from_dict(bad)


def test_circuit_from_dict():
    p = circuit_from_dict({"R_shunt": 0.2e6})
    assert p == REFERENCE_CIRCUIT_LOSSY
    q = circuit_from_dict({"L_j0": [2e-9, 2e-9, 2e-9]})
    assert q.I_c is None
    with pytest.raises(ConfigError, match="C_x"):
        circuit_from_dict({"C_x": 1.0})
    with pytest.raises(ConfigError):
        circuit_from_dict({"C_k": -1.0})


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"bloch": {"Q": 20}}))
    assert load_config(path) == {"bloch": {"Q": 20}}
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(path)
