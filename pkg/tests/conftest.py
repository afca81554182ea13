import pytest

from logic.grid import make_grid
from logic.model import ModelParams


def pytest_addoption(parser):
    parser.addoption("--run-acceptance", action="store_true", default=False,
                     help="run desk-scale acceptance simulations")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-acceptance"):
        return
    skip = pytest.mark.skip(reason="needs --run-acceptance")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def duffing_params():
    return ModelParams()


@pytest.fixture
def harmonic_params():
    # V = q^2 / 2, unit frequency
    return ModelParams(hbar=1.0, D=0.0, A_coef=-0.5, B_coef=0.0, Lambda=0.0)


@pytest.fixture
def free_params():
    return ModelParams(hbar=0.1, D=1e-2, A_coef=0.0, B_coef=0.0, Lambda=0.0)


@pytest.fixture
def small_grid():
    return make_grid(128, 128, (-4.0, 4.0), (-4.0, 4.0))


@pytest.fixture
def duffing_grid():
    return make_grid(256, 256, (-4.0, 4.0), (-8.0, 8.0))


MINIMAL_CONFIG = """\
[run]
output_dir = {out}
"""


@pytest.fixture
def minimal_config_text(tmp_path):
    return MINIMAL_CONFIG.format(out=(tmp_path / "out").as_posix())
