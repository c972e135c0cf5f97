import pytest

from qzeno.params import ideal_params as _ideal_params
from qzeno.params import realistic_params as _realistic_params


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def ideal_params():
    return _ideal_params()


@pytest.fixture
def realistic_params():
    return _realistic_params()


@pytest.fixture
def tmp_run_dir(tmp_path, monkeypatch):
    """Output root under tmp_path with a fixed RUN_ID; returns the run directory."""
    for name in ("QZENO_SEED", "QZENO_THREADS", "SEEDS"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("RUN_ID", "test_run")
    monkeypatch.setenv("QZENO_OUT_ROOT", str(tmp_path / "outputs"))
    monkeypatch.chdir(tmp_path)
    return tmp_path / "outputs" / "test_run"
