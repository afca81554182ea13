import math

import numpy as np
import pytest

from logic import diagnostics
from logic.grid import make_grid
from logic.model import ModelParams
from logic.states import (
    GaussianSpec,
    StateError,
    cat_state_wigner,
    check_uncertainty,
    default_cat,
    gaussian_wigner,
)


def test_gaussian_is_normalized_with_expected_moments(small_grid, duffing_params):
    spec = GaussianSpec((0.5, -0.25), (0.3, 0.4))
    f = gaussian_wigner(spec, small_grid, duffing_params)
    assert f.norm() == pytest.approx(1.0, abs=1e-14)
    assert diagnostics.moment(f, 1, 0) == pytest.approx(0.5, abs=1e-12)
    assert diagnostics.moment(f, 0, 1) == pytest.approx(-0.25, abs=1e-12)
    assert diagnostics.moment(f, 2, 0) == pytest.approx(0.25 + 0.09, abs=1e-12)
    assert diagnostics.moment(f, 0, 2) == pytest.approx(0.0625 + 0.16, abs=1e-12)


def test_coherent_state_is_pure(small_grid, duffing_params):
    spec = GaussianSpec.coherent(0.0, 0.0, duffing_params.hbar)
    assert spec.is_minimum_uncertainty(duffing_params.hbar)
    f = gaussian_wigner(spec, small_grid, duffing_params)
    assert diagnostics.purity(f, duffing_params.hbar) == pytest.approx(1.0, rel=1e-10)
    assert f.real.max() == pytest.approx(1.0 / (math.pi * duffing_params.hbar), rel=1e-3)


def test_gaussian_outside_box_is_rejected(small_grid, duffing_params):
    with pytest.raises(StateError):
        gaussian_wigner(GaussianSpec((3.5, 0.0), (0.3, 0.3)), small_grid, duffing_params)
    with pytest.raises(StateError):
        GaussianSpec((0.0, 0.0), (0.0, 0.3))


def test_cat_state_interference_reaches_the_bound(duffing_params):
    hbar = duffing_params.hbar
    sigma = math.sqrt(hbar / 2.0)
    grid = make_grid(256, 256, (-4.0, 4.0), (-3.0, 3.0))
    a = GaussianSpec.coherent(-10 * sigma, 0.0, hbar)
    b = GaussianSpec.coherent(10 * sigma, 0.0, hbar)
    f = cat_state_wigner(a, b, grid, duffing_params)

    assert f.norm() == pytest.approx(1.0, abs=1e-12)
    bound = 1.0 / (math.pi * hbar)
    assert abs(diagnostics.min_value(f)) == pytest.approx(bound, rel=0.1)
    assert f.real.max() <= bound * (1 + 1e-3)
    assert diagnostics.negativity(f) > 0.1


def test_negativity_identity(duffing_params):
    grid = make_grid(128, 128, (-4.0, 4.0), (-4.0, 4.0))
    f = cat_state_wigner(*default_cat(duffing_params), grid, duffing_params)
    lhs = diagnostics.negativity(-f) - diagnostics.negativity(f)
    assert lhs == pytest.approx(f.norm(), abs=1e-12)


def test_cat_state_needs_equal_widths(small_grid, duffing_params):
    a = GaussianSpec((-1.0, 0.0), (0.2, 0.25))
    b = GaussianSpec((1.0, 0.0), (0.25, 0.2))
    with pytest.raises(StateError):
        cat_state_wigner(a, b, small_grid, duffing_params)


def test_cat_state_needs_hbar(small_grid):
    classical = ModelParams(hbar=0.0)
    a, b = GaussianSpec((-1.0, 0.0), (0.2, 0.2)), GaussianSpec((1.0, 0.0), (0.2, 0.2))
    with pytest.raises(StateError):
        cat_state_wigner(a, b, small_grid, classical)


def test_cat_state_needs_minimum_uncertainty_lobes(small_grid, duffing_params):
    a, b = GaussianSpec((-1.0, 0.0), (0.3, 0.3)), GaussianSpec((1.0, 0.0), (0.3, 0.3))
    with pytest.raises(StateError, match="minimum-uncertainty"):
        cat_state_wigner(a, b, small_grid, duffing_params)


def test_uncertainty_limit(duffing_params):
    hbar = duffing_params.hbar
    check_uncertainty(GaussianSpec.coherent(0.0, 0.0, hbar), hbar)
    check_uncertainty(GaussianSpec((0.0, 0.0), (0.3, 0.4)), hbar)
    with pytest.raises(StateError):
        check_uncertainty(GaussianSpec((0.0, 0.0), (0.05, 0.05)), hbar)
