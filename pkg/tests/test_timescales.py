import math

import numpy as np
import pytest

from logic.timescales import (
    TERMINATION_FIRST,
    TRANSITION_FIRST,
    TimescaleError,
    fold_spacing,
    folding_time,
    l_classical,
    l_quantum,
    scan_timescales,
    t_qc,
    t_star,
    timescale_report,
)


def test_reference_t_star_values(duffing_params):
    exact, approx, x0 = t_star(duffing_params)
    assert exact == pytest.approx(15.02, rel=1e-2)
    assert x0 == pytest.approx(19.98, abs=0.01)
    assert approx == pytest.approx(exact, rel=1e-2)

    exact_hi, _, _ = t_star(duffing_params.with_(D=1e-2))
    assert exact_hi == pytest.approx(13.1, rel=1e-2)


def test_t_star_solves_the_defining_equation(duffing_params):
    exact, _, _ = t_star(duffing_params)
    assert l_classical(exact, duffing_params) == pytest.approx(fold_spacing(exact, duffing_params), abs=1e-8)


def test_reference_t_qc_values(duffing_params):
    assert t_qc(duffing_params) == pytest.approx(57.0, rel=1e-12)
    assert t_qc(duffing_params.with_(D=1e-2)) == pytest.approx(5.7, rel=1e-12)
    assert t_qc(duffing_params.with_(D=1e-5)) == pytest.approx(5700.0, rel=1e-12)


def test_scales_cross_at_t_qc(duffing_params):
    t = t_qc(duffing_params)
    assert l_classical(t, duffing_params) ** 2 == pytest.approx(duffing_params.hbar, rel=1e-12)
    assert l_quantum(t, duffing_params) ** 2 == pytest.approx(duffing_params.hbar, rel=1e-12)
    assert l_classical(57.0, duffing_params) == pytest.approx(math.sqrt(0.1), rel=1e-12)


def test_quantum_scale_carries_the_lyapunov_factor(duffing_params):
    # hbar sqrt(m lambda_bar / (D t)) rather than hbar / sqrt(D t)
    assert l_quantum(5.7, duffing_params) == pytest.approx(1.0, rel=1e-12)
    bare = duffing_params.hbar / math.sqrt(duffing_params.D * 5.7)
    assert l_quantum(5.7, duffing_params) == pytest.approx(bare * math.sqrt(0.57), rel=1e-12)


def test_scale_edge_cases(duffing_params):
    assert l_classical(0.0, duffing_params) == 0.0
    with pytest.raises(TimescaleError):
        l_quantum(0.0, duffing_params)
    with pytest.raises(TimescaleError):
        l_quantum(1.0, duffing_params.with_(D=0.0))
    with pytest.raises(TimescaleError):
        t_star(duffing_params.with_(D=0.0))
    doubled = duffing_params.with_(D=2e-3)
    assert l_classical(3.0, doubled) ** 2 == pytest.approx(2 * l_classical(3.0, duffing_params) ** 2)


def test_fold_spacing_e_folds(duffing_params):
    lam = duffing_params.lambda_bar
    assert fold_spacing(10.0 + 1 / lam, duffing_params) / fold_spacing(10.0, duffing_params) == pytest.approx(
        math.exp(-1.0))
    assert fold_spacing(15.02, duffing_params) == pytest.approx(0.165, rel=2e-2)


def test_fold_spacing_warns_before_folding(duffing_params, caplog):
    assert folding_time(duffing_params) == pytest.approx(math.log(2700) / 1.14)
    with caplog.at_level("WARNING"):
        fold_spacing(0.0, duffing_params)
    assert "folding onset" in caplog.text


def test_report_regimes(duffing_params):
    slow = timescale_report(duffing_params)
    assert slow.regime == TERMINATION_FIRST
    assert slow.self_consistent
    fast = timescale_report(duffing_params.with_(D=1e-2))
    assert fast.regime == TRANSITION_FIRST
    assert fast.as_row()["t_qc"] == pytest.approx(5.7)


def test_scan_scalings(duffing_params):
    d_values = np.logspace(-6, -1, 6)
    table = scan_timescales(duffing_params, d_values)
    assert list(table["D"]) == pytest.approx(list(d_values))
    # t_qc ~ 1/D exactly
    np.testing.assert_allclose(table["t_qc"] * table["D"], 0.057, rtol=1e-12)
    # t* ~ ln(1/D)
    slope = np.polyfit(np.log(1 / d_values), table["t_star"], 1)[0]
    assert slope == pytest.approx(1 / (2 * duffing_params.lambda_bar), rel=0.1)
