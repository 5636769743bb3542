import warnings
from dataclasses import replace

import numpy as np
import pytest

from cfzero import circuit
from cfzero.circuit import (
    InstabilityError,
    LinearRegimeWarning,
    amplitude_for_current,
    capacitance_matrix,
    circuit_rational,
    convergence_check,
    eigenfrequencies,
    eigenfrequency_sweep,
    find_circuit_features,
    input_impedance,
    small_signal_s11,
    transient,
)
from cfzero.model import REFERENCE_CIRCUIT, REFERENCE_CIRCUIT_LOSSY, ParameterError
from cfzero.pulse import cf_waveform
from cfzero.roots import match_roots

# Frozen qubit zeros (rad/s): lossless and R_shunt = 0.2 MOhm, targets 3, 2, 1.
ZEROS_LOSSLESS = np.array([4.859477972e10 + 3.3766835e7j, 4.870350301e10 + 4.0952186e7j, 4.880588911e10 + 2.7170726e7j])
ZEROS_LOSSY = np.array([4.859479966e10 + 2.1961070e7j, 4.870353582e10 + 2.9101659e7j, 4.880590612e10 + 1.5277623e7j])


def _qubit_roots(p, kind):
    feats = [f for f in find_circuit_features(p, kind) if isinstance(f.dominant, int)]
    return np.array([f.omega for f in feats]), [f.dominant for f in feats]


def test_capacitance_matrix_spd():
    C = capacitance_matrix(REFERENCE_CIRCUIT)
    assert C.shape == (5, 5)
    assert np.allclose(C, C.T)
    assert np.all(np.linalg.eigvalsh(C) > 0)


def test_s11_from_impedance():
    w = np.linspace(4.7e10, 5.0e10, 50)
    Z = input_impedance(REFERENCE_CIRCUIT_LOSSY, w)
    assert np.allclose(small_signal_s11(REFERENCE_CIRCUIT_LOSSY, w), (Z - 50) / (Z + 50), rtol=1e-12)


@pytest.mark.parametrize("p", [REFERENCE_CIRCUIT, REFERENCE_CIRCUIT_LOSSY])
def test_rational_matches_nodal_solution(p):
    rat = circuit_rational(p)
    w = np.linspace(4.80e10, 4.92e10, 300) + 1e7j
    # the expanded degree-8 form is conditioning-limited near resonance
    assert np.allclose(rat(w), small_signal_s11(p, w), rtol=0, atol=1e-7)
    # the s = 0 pair from the floating bus cancels
    assert len(rat.cancelled) == 1 and abs(rat.cancelled[0]) < 1.0


def test_unitarity_lossless():
    w = np.linspace(4.7e10, 5.0e10, 1000)
    assert np.max(np.abs(np.abs(small_signal_s11(REFERENCE_CIRCUIT, w)) - 1)) < 1e-12
    assert np.all(np.abs(small_signal_s11(REFERENCE_CIRCUIT_LOSSY, w)) < 1)


def test_frozen_zeros_and_labels():
    z, labels = _qubit_roots(REFERENCE_CIRCUIT, "zero")
    assert labels == [3, 2, 1]
    assert np.allclose(z, ZEROS_LOSSLESS, rtol=1e-8)
    zl, labels_l = _qubit_roots(REFERENCE_CIRCUIT_LOSSY, "zero")
    assert labels_l == [3, 2, 1]
    assert np.allclose(zl, ZEROS_LOSSY, rtol=1e-8)


def test_lossless_conjugate_symmetry():
    z, _ = _qubit_roots(REFERENCE_CIRCUIT, "zero")
    p, _ = _qubit_roots(REFERENCE_CIRCUIT, "pole")
    assert np.max(np.abs(z - match_roots(z, np.conj(p)))) < 1e-9 * np.abs(z).max()


def test_loss_moves_zero_toward_real_axis():
    z, _ = _qubit_roots(REFERENCE_CIRCUIT, "zero")
    zl, _ = _qubit_roots(REFERENCE_CIRCUIT_LOSSY, "zero")
    assert np.all(zl.imag < z.imag)


def test_port_root_is_labeled():
    feats = find_circuit_features(REFERENCE_CIRCUIT, "pole")
    port = [f for f in feats if f.dominant == "port"]
    assert len(port) == 1 and port[0].location.re == 0 and port[0].location.decaying


def test_zeros_are_zeros():
    for p in (REFERENCE_CIRCUIT, REFERENCE_CIRCUIT_LOSSY):
        z, _ = _qubit_roots(p, "zero")
        assert np.all(np.abs(small_signal_s11(p, z, guard=False)) < 1e-8)


def test_decoupled_eigenfrequencies_are_bare():
    p = REFERENCE_CIRCUIT.with_(C_c=(0.0, 0.0, 0.0))
    ev = eigenfrequencies(p)
    bare = np.sort(1 / np.sqrt(np.asarray(p.L_j0) * np.asarray(p.C_j)))
    assert np.allclose(ev, bare, rtol=1e-12)


def test_sweep_anticrossings():
    p = REFERENCE_CIRCUIT
    res = eigenfrequency_sweep(p, circuit.default_sweep_range(p, 201))
    assert res.curves.shape == (201, 3)
    assert np.all(res.gaps() > 0)
    ac = res.anticrossings()
    assert {a["pair"] for a in ac} == {(1, 2), (2, 3)}
    assert all(a["gap"] > 1e6 for a in ac)
    with pytest.raises(ParameterError):
        eigenfrequency_sweep(p, np.array([-1.0]))


def test_open_boundary_has_bright_bus_mode():
    ev = eigenfrequencies(REFERENCE_CIRCUIT, "open")
    assert ev[-1] > 1.02 * max(REFERENCE_CIRCUIT.bare_frequencies)
    with pytest.raises(ValueError):
        eigenfrequencies(REFERENCE_CIRCUIT, "short")


def test_undriven_energy_conserved():
    p = REFERENCE_CIRCUIT
    phi0 = (0.005 * p.Phi_0, 0.0, 0.0)
    tr = transient(p, None, (0.0, 50e-9), phi0=phi0)
    assert tr.e_stored0 > 0
    drift = np.max(np.abs(tr.stored() + tr.e_refl - tr.e_stored0)) / tr.e_stored0
    assert drift < 1e-5
    assert np.all(tr.e_diss == 0)
    assert np.max(np.abs(tr.residual_series())) < 1e-5 * tr.e_stored0


def test_steady_state_matches_s11():
    p = REFERENCE_CIRCUIT_LOSSY
    w = 4.87e10
    src = cf_waveform(w, amplitude_for_current(p, w, 0.01), 0.0, 800e-9, 20e-9)
    tr = transient(p, src, (0.0, 800e-9), record_every=1)
    sel = (tr.t > 740e-9) & (tr.t < 770e-9)  # flat top, transients decayed
    ph = np.exp(1j * w * tr.t[sel])
    ratio = np.mean(tr.v_minus[sel] * ph) / np.mean(tr.v_plus[sel] * ph)
    assert abs(ratio - small_signal_s11(p, w)) < 0.02
    i0, i1 = tr.index_at(740e-9), tr.index_at(770e-9)
    frac = (tr.e_refl[i1] - tr.e_refl[i0]) / (tr.e_in[i1] - tr.e_in[i0])
    assert frac == pytest.approx(abs(small_signal_s11(p, w)) ** 2, rel=1e-2)
    # the phasor prediction sets the peak junction current
    assert np.max(tr.max_current_ratio) == pytest.approx(0.01, rel=0.05)


def test_dissipation_ledger_lossy():
    p = REFERENCE_CIRCUIT_LOSSY
    z, _ = _qubit_roots(p, "zero")
    src = cf_waveform(z[2], 1.0, 0.0, 200e-9, 1e-9)
    src = replace(src, b0=amplitude_for_current(p, z[2]) / src.peak_amplitude())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tr = transient(p, src, (0.0, 200e-9))
    led = tr.ledger()
    assert led["E_diss"] > 0
    assert abs(led["residual"]) < 1e-3 * led["E_in"]


def test_linear_regime_warning():
    p = REFERENCE_CIRCUIT
    w = 4.88e10
    src = cf_waveform(w, amplitude_for_current(p, w, 0.2), 0.0, 30e-9, 1e-9)
    with pytest.warns(LinearRegimeWarning):
        tr = transient(p, src, (0.0, 30e-9))
    assert np.max(tr.max_current_ratio) > circuit.LINEAR_GUARD
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        transient(p, src, (0.0, 30e-9), warn=False)


def test_dt_limits():
    p = REFERENCE_CIRCUIT
    with pytest.raises(ParameterError):
        transient(p, None, (0.0, 1e-9), dt=5e-12)
    with pytest.raises(ParameterError):
        transient(p, None, (0.0, 1e-9), dt=0.0)
    src = cf_waveform(4.88e10, 1e-6, 0.0, 20e-9)
    with pytest.raises(InstabilityError):
        transient(p, src, (0.0, 20e-9), dt=10e-12, check_dt=False)


def test_convergence_check():
    p = REFERENCE_CIRCUIT
    z, _ = _qubit_roots(p, "zero")
    src = cf_waveform(z[1], 1.0, 0.0, 100e-9, 1e-9)
    src = replace(src, b0=amplitude_for_current(p, z[1]) / src.peak_amplitude())
    ok = convergence_check(p, src, 1e-12)
    assert not ok.flagged and ok.max_change < 5e-3 and ok.compare_dt == 0.5e-12
    bad = convergence_check(p, src, 10e-12)
    assert bad.flagged and bad.unstable
    assert bad.to_dict()["unstable"] is True
    with pytest.raises(ParameterError):
        convergence_check(p, src, 0.1e-12)


def test_trace_csv(tmp_path):
    src = cf_waveform(4.88e10, 1e-8, 0.0, 2e-9)
    tr = transient(REFERENCE_CIRCUIT, src, (0.0, 2e-9), record_every=100)
    tr.to_csv(tmp_path / "c.csv", "h")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "# h" and lines[1].startswith("t_s,V_P")
    assert len(lines) == 2 + len(tr.t) == 2 + 21
