import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from cfzero.model import ParameterError
from cfzero.pulse import (
    OVERFLOW_LIMIT,
    OverflowRiskError,
    TruncationWarning,
    cf_waveform,
    default_ramp,
    default_window,
    gaussian_effective_width,
    gaussian_waveform,
    match_energy,
)

Z = 36.32 + 0.0934j  # a growing drive (decay component -0.0934)


def _quad_energy(w):
    f = lambda t: abs(complex(w(np.array([t]))[0])) ** 2  # noqa: E731
    edges = [w.t_on, w.t_on + w.tau_ramp, w.t_off - w.tau_ramp, w.t_off] if w.kind == "cf" else [w.t_on, w.t_off]
    return sum(quad(f, a, b, limit=400, epsabs=0, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:]) if b > a)


def test_cf_signal_shape():
    w = cf_waveform(Z, 2.0, 1.0, 11.0)
    t = np.array([0.5, 1.0, 6.0, 11.0, 11.5])
    s = w(t)
    assert s[0] == 0 and s[-1] == 0
    assert s[1] == pytest.approx(2.0)
    assert s[2] == pytest.approx(2.0 * np.exp(-1j * Z * 5.0))
    # growing envelope: |s| rises as exp(0.0934 t)
    assert abs(s[3]) / abs(s[1]) == pytest.approx(math.exp(0.0934 * 10))


def test_envelope_rotating_frame():
    w = cf_waveform(Z, 1.0, 0.0, 10.0, 1.0)
    t = np.linspace(0, 10, 50)
    assert np.allclose(w.envelope(t, 36.0) * np.exp(-1j * 36.0 * t), w(t))


@pytest.mark.parametrize("ramp", [0.0, 0.5, 1.0])
def test_cf_energy_closed_form(ramp):
    w = cf_waveform(Z, 0.7, 0.0, 10.0, ramp)
    assert w.energy == pytest.approx(_quad_energy(w), rel=1e-10)


def test_gaussian_energy_closed_form():
    w = gaussian_waveform(36.3, 1.3, 2.5, 12.5, (0.0, 25.0))
    assert w.energy == pytest.approx(_quad_energy(w), rel=1e-10)
    assert w.energy == pytest.approx(1.3**2 * 2.5 * math.sqrt(math.pi), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(-0.5, 0.5), st.floats(1.0, 40.0))
def test_match_energy(target, wi, T):
    if abs(wi) * T > OVERFLOW_LIMIT:
        return
    w = match_energy(cf_waveform(complex(36.0, wi), 1.0, 0.0, T, 0.05 * T), target)
    assert w.energy == pytest.approx(target, rel=1e-10)


def test_match_energy_rejects_nonpositive():
    with pytest.raises(ParameterError):
        match_energy(cf_waveform(Z, 1.0, 0.0, 1.0), 0.0)


def test_overflow_guard():
    with pytest.raises(OverflowRiskError):
        cf_waveform(Z, 1.0, 0.0, 1.01 * OVERFLOW_LIMIT / 0.0934)


def test_ramp_bounds():
    with pytest.raises(ParameterError):
        cf_waveform(Z, 1.0, 0.0, 10.0, 1.5)
    with pytest.raises(ParameterError):
        cf_waveform(Z, 1.0, 5.0, 5.0)


def test_default_window_and_ramp():
    T = default_window(Z)
    assert T == pytest.approx(8 / 0.0934)
    R = default_ramp(Z, T)
    assert R == pytest.approx(5 * 2 * math.pi / 36.32)
    assert default_ramp(Z, 1.0) == pytest.approx(0.1)
    with pytest.raises(ParameterError):
        default_window(36.0)


def test_gaussian_truncation_warning():
    with pytest.warns(TruncationWarning):
        gaussian_waveform(36.0, 1.0, 2.0, 5.0, (0.0, 10.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gaussian_waveform(36.0, 1.0, 2.0, 10.0, (0.0, 20.0))


def test_gaussian_effective_width():
    sigma = 2.0
    w = gaussian_effective_width(sigma)
    # amplitude at +-w/2 is 1/sqrt(2) of the peak
    assert math.exp(-((w / 2) ** 2) / (2 * sigma**2)) == pytest.approx(1 / math.sqrt(2))


def test_peak_amplitude():
    w = cf_waveform(Z, 1.0, 0.0, 10.0)
    assert w.peak_amplitude() == pytest.approx(math.exp(0.0934 * 10))
    g = gaussian_waveform(36.0, 2.0, 1.0, 5.0, (0.0, 10.0))
    assert g.peak_amplitude() == pytest.approx(2.0)


def test_real_signal():
    w = cf_waveform(Z, 1.0, 0.0, 10.0)
    t = np.linspace(0, 10, 11)
    assert np.allclose(w.real_signal(t, 3.0), 3.0 * np.real(w(t)))


def test_csv_export(tmp_path):
    w = cf_waveform(Z, 1.0, 0.0, 10.0, 1.0)
    w.to_csv(tmp_path / "p.csv", np.linspace(0, 10, 5))
    lines = (tmp_path / "p.csv").read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["kind"] == "cf" and header["omega"] == [36.32, 0.0934]
    assert lines[1] == "t,re_s,im_s,abs_s2" and len(lines) == 7
