import numpy as np
import pytest

from logic import diagnostics
from logic.diagnostics import DiagnosticsError
from logic.grid import Field, make_grid
from logic.model import ModelParams
from logic.states import GaussianSpec, gaussian_wigner


@pytest.fixture
def blob(small_grid, duffing_params):
    return gaussian_wigner(GaussianSpec((0.5, -1.0), (0.3, 0.4)), small_grid, duffing_params)


def test_moments_of_a_gaussian(blob):
    assert diagnostics.moment(blob, 0, 0) == pytest.approx(1.0, abs=1e-14)
    assert diagnostics.moment(blob, 1, 1) == pytest.approx(-0.5, abs=1e-12)
    assert diagnostics.moment(blob, 0, 4) == pytest.approx(1 + 6 * 0.16 + 3 * 0.16 ** 2, rel=1e-10)
    with pytest.raises(DiagnosticsError):
        diagnostics.moment(blob, 4, 3)
    with pytest.raises(DiagnosticsError):
        diagnostics.moment(blob, -1, 0)


def test_energy_without_drive(small_grid):
    params = ModelParams(A_coef=-0.5, B_coef=0.0, Lambda=0.0)
    f = gaussian_wigner(GaussianSpec((0.0, 0.0), (0.3, 0.4)), small_grid, params)
    assert diagnostics.energy(f, params) == pytest.approx(0.5 * 0.16 + 0.5 * 0.09, rel=1e-10)


def test_marginals_integrate_to_one(blob):
    mq = diagnostics.marginal_q(blob)
    mp = diagnostics.marginal_p(blob)
    assert mq.shape == (128,) and mp.shape == (128,)
    assert mq.sum() * blob.grid.dq == pytest.approx(1.0, abs=1e-12)
    assert mp.sum() * blob.grid.dp == pytest.approx(1.0, abs=1e-12)
    assert blob.grid.q[np.argmax(mq)] == pytest.approx(0.5, abs=blob.grid.dq)


def test_negativity_of_a_positive_field(blob):
    assert diagnostics.negativity(blob) == 0.0
    assert diagnostics.negativity(-blob) == pytest.approx(1.0, abs=1e-14)
    assert diagnostics.min_value(-blob) < 0


def test_distance(blob, small_grid, duffing_params):
    assert diagnostics.distance(blob, blob) == 0.0
    assert diagnostics.distance(blob, -blob, "L1") == pytest.approx(2.0, abs=1e-12)
    assert diagnostics.distance(blob, -blob, "l2") == pytest.approx(
        2.0 * np.sqrt(diagnostics.purity(blob, duffing_params.hbar) / (2 * np.pi * duffing_params.hbar)))
    with pytest.raises(DiagnosticsError):
        diagnostics.distance(blob, blob, "Linf")
    other = make_grid(64, 64, (-4.0, 4.0), (-4.0, 4.0))
    with pytest.raises(DiagnosticsError):
        diagnostics.distance(blob, Field(other, np.zeros(other.shape)))


def test_slice_on_a_grid_row(blob):
    grid = blob.grid
    j = 40
    table = diagnostics.take_slice(blob, grid.p[j])
    assert list(table.columns) == ["q", "value"]
    np.testing.assert_allclose(table["value"], blob.real[:, j], atol=1e-12)
    assert table.attrs["row"] == j


def test_slice_between_rows_blends(blob):
    grid = blob.grid
    p0 = 0.5 * (grid.p[40] + grid.p[41])
    table = diagnostics.take_slice(blob, p0)
    np.testing.assert_allclose(table["value"], 0.5 * (blob.real[:, 40] + blob.real[:, 41]), atol=1e-12)
    with pytest.raises(DiagnosticsError):
        diagnostics.take_slice(blob, 9.0)


def test_boundary_mass(small_grid, duffing_params):
    centered = gaussian_wigner(GaussianSpec((0.0, 0.0), (0.25, 0.25)), small_grid, duffing_params)
    assert diagnostics.boundary_mass(centered) < 1e-12
    values = np.zeros(small_grid.shape)
    values[0, 64] = 1.0 / small_grid.cell_area
    edge = Field(small_grid, values)
    assert diagnostics.boundary_mass(edge) == pytest.approx(1.0)
    with pytest.raises(DiagnosticsError):
        diagnostics.boundary_mass(edge, 0.5)


def test_manifold_overlap(small_grid, duffing_params):
    f = gaussian_wigner(GaussianSpec.coherent(1.0, 0.0, duffing_params.hbar), small_grid, duffing_params)
    through = np.array([[-3.0, 0.0], [3.0, 0.0]])
    far = np.array([[-3.0, 3.0], [3.0, 3.0]])
    assert diagnostics.manifold_overlap(f, through, width=1.0) == pytest.approx(1.0, abs=1e-4)
    assert diagnostics.manifold_overlap(f, far, width=1.0) == 0.0
    with pytest.raises(DiagnosticsError):
        diagnostics.manifold_overlap(f, np.zeros((3, 3)), width=0.5)


def test_record_row(blob, duffing_params):
    rec = diagnostics.record(blob, duffing_params, twin=blob)
    row = rec.as_row()
    assert list(row) == diagnostics.DIAGNOSTIC_COLUMNS
    assert row["norm"] == pytest.approx(1.0)
    assert row["l1"] == 0.0
    frame = diagnostics.records_frame([rec, diagnostics.record(blob, duffing_params)])
    assert frame["l1"].isna().tolist() == [False, True]


def test_norm_drift_is_logged(blob, duffing_params, caplog):
    with caplog.at_level("WARNING"):
        diagnostics.record(blob * 2.0, duffing_params)
    assert "norm drifted" in caplog.text


def test_threshold_calibration():
    agreeing = [1.0, 0.5, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1]
    control = [1.0, 0.9, 0.8, 0.7, 0.7, 0.7, 0.7, 0.7]
    assert diagnostics.plateau(agreeing) == pytest.approx(0.1)
    theta = diagnostics.calibrate_threshold(agreeing, control)
    assert theta == pytest.approx(0.4)

    times = np.arange(8.0)
    assert diagnostics.agreement_time(times, agreeing, theta) == 2.0
    assert diagnostics.agreement_time(times, control, theta) is None
    assert diagnostics.agreement_time(times, [0.5, 0.1, 0.5, 0.1], 0.3) == 3.0
    with pytest.raises(DiagnosticsError):
        diagnostics.plateau([])
