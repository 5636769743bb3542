import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfzero.bloch import integrate
from cfzero.metrics import (
    ComparisonTable,
    MetricsError,
    MetricsReport,
    comparison_table,
    crosstalk_ratio,
    default_t_eval,
    efficiency_curves,
    relative_excitation,
    report,
    selectivity,
    table_row,
)
from cfzero.model import REFERENCE_BLOCH
from cfzero.pulse import cf_waveform, default_window, match_energy
from cfzero.response import features

eta_strategy = st.tuples(*(st.floats(0.0, 100.0) for _ in range(3)))


def test_selectivity_and_crosstalk_examples():
    S_t, S = selectivity((85, 6.5, 1.7), 1)
    assert S_t == pytest.approx(85 / 93.2, abs=1e-12)
    assert S.sum() == pytest.approx(1.0)
    assert crosstalk_ratio((85, 6.5, 1.7), 1) == pytest.approx(13.0769, abs=1e-4)
    assert relative_excitation((56.6, 6.7, 2.1), 1) == pytest.approx([8.4478, 0.11837, 0.0371], abs=1e-4)


def test_crosstalk_infinite_and_errors():
    assert math.isinf(crosstalk_ratio((10, 0, 0), 1))
    with pytest.raises(MetricsError):
        selectivity((0, 0, 0), 1)
    with pytest.raises(MetricsError):
        relative_excitation((0, 1, 1), 1)


@given(eta_strategy, st.integers(1, 3))
def test_selectivity_properties(eta, target):
    if sum(eta) <= 0:
        return
    S_t, S = selectivity(eta, target)
    assert S.sum() == pytest.approx(1.0)
    assert 0 <= S_t <= 1


@given(eta_strategy, st.integers(1, 3), st.floats(0.01, 100))
def test_metrics_scale_invariant(eta, target, k):
    if min(eta) <= 1e-6:
        return
    scaled = tuple(k * x for x in eta)
    assert crosstalk_ratio(scaled, target) == pytest.approx(crosstalk_ratio(eta, target))
    assert selectivity(scaled, target)[0] == pytest.approx(selectivity(eta, target)[0])


@given(eta_strategy, st.integers(1, 3))
def test_crosstalk_above_one_iff_target_dominates(eta, target):
    e = np.asarray(eta)
    others = np.delete(e, target - 1)
    if others.max() <= 0 or e[target - 1] == others.max():
        return
    assert (crosstalk_ratio(e, target) > 1) == (e[target - 1] > others.max())


@pytest.fixture(scope="module")
def bloch_run():
    p = REFERENCE_BLOCH
    z = [f for f in features(p, "zero") if f.dominant == 2][0]
    T = default_window(z.omega)
    w = match_energy(cf_waveform(z.omega, 1.0, 0.0, T, 1.0), 0.5)
    return integrate(p, w, (0.0, T + 5.0))


def test_report_on_run(bloch_run):
    rep = report(bloch_run, 2)
    assert rep.t_eval == pytest.approx(bloch_run.drive.t_off)
    assert default_t_eval(bloch_run) == pytest.approx(bloch_run.drive.t_off)
    i = bloch_run.index_at(rep.t_eval)
    expected = 100 * bloch_run.qubit_excitation()[i] / bloch_run.e_in[i]
    assert rep.eta == pytest.approx(tuple(expected))
    assert rep.S_target > 0.75
    assert 0 <= rep.reflected_fraction < 0.05
    d = rep.to_dict()
    assert d["S_target"] == rep.S_target and d["C_infinite"] is False


def test_peak_evaluation_dominates_end(bloch_run):
    end = report(bloch_run, 2, evaluation="end")
    peak = report(bloch_run, 2, evaluation="peak")
    assert all(p >= e - 1e-12 for p, e in zip(peak.eta, end.eta))
    with pytest.raises(MetricsError):
        report(bloch_run, 2, evaluation="mean")
    with pytest.raises(MetricsError):
        report(bloch_run, 4)
    with pytest.raises(MetricsError):
        report(bloch_run, 2, t_eval=-1.0)


def test_efficiency_curves(bloch_run):
    c = efficiency_curves(bloch_run)
    assert c.eta.shape == (len(bloch_run.t), 3)
    assert np.isnan(c.eta[0]).all()
    i = bloch_run.index_at(bloch_run.drive.t_off)
    assert c.eta[i] == pytest.approx(report(bloch_run, 2).eta)


def _rep(eta, target, evaluation="end", protocol="p"):
    e = tuple(float(x) for x in eta)
    return MetricsReport(target, e, tuple(selectivity(e, target)[1]), crosstalk_ratio(e, target), 0.0, 0.0, 1.0,
                         evaluation, extra={"protocol": protocol})


def test_comparison_table_layout():
    runs = [("CF (zero)", _rep(eta, t)) for t, eta in ((3, (2.3, 11.4, 80.7)), (2, (9.2, 77, 8.4)), (1, (85, 6.5, 1.7)))]
    table = comparison_table(runs)
    assert isinstance(table, ComparisonTable)
    assert [r.row_name for r in table.rows] == ["Leftmost zero", "Middle zero", "Rightmost zero"]
    assert table.rows[2].C_row == pytest.approx((13.0769, 0.0765, 0.02), abs=1e-3)
    csv = table.to_csv().splitlines()
    assert csv[0].startswith("strategy,row,target") and len(csv) == 4
    text = table.to_text()
    assert "Crosstalk suppression" in text and "13.08" in text


def test_comparison_table_rejects_mixed_protocols():
    runs = [("a", _rep((1, 2, 3), 3)), ("a", _rep((3, 2, 1), 1, evaluation="peak"))]
    with pytest.raises(MetricsError):
        comparison_table(runs)
    with pytest.raises(MetricsError):
        comparison_table([])


def test_table_row_custom_name():
    row = table_row("Gaussian", (50.8, 32.7, 2.4), 1, "Qubit 1")
    assert row.row_name == "Qubit 1" and row.S[0] == pytest.approx(0.5914, abs=1e-4)
