from pathlib import Path

import numpy as np
import pytest

from wdmqkd.config import load_config

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
PAPER_CFG = CONFIGS / "paper_2ch.cfg"
DESIGN_CFG = CONFIGS / "design_8ch.cfg"


@pytest.fixture(scope="session")
def paper_cfg():
    return load_config(PAPER_CFG)


@pytest.fixture(scope="session")
def design_cfg():
    return load_config(DESIGN_CFG)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


MINIMAL_CFG = """
[scenario]
desk_duration_s = {duration}
epoch_s = 1
seed = {seed}
checkpoint_period_s = {checkpoint}

[channel.0]
wavelength_nm = 1547.72
t_rx = 0.1474

[channel.1]
wavelength_nm = 1550.92
t_rx = 0.0782
"""


def minimal_config_text(duration=10, seed=7, checkpoint=3600, extra=""):
    return MINIMAL_CFG.format(duration=duration, seed=seed, checkpoint=checkpoint) + extra


# --- acceptance verdicts -----------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line in the terminal
# summary; details come from ``record_property("detail", ...)``.

_CRITERIA = {}
_VERDICTS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _CRITERIA[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    if report.when == "call" or report.outcome != "passed":
        detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
        _VERDICTS[report.nodeid] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (n, title) in sorted(_CRITERIA.items(), key=lambda kv: kv[1][0]):
        if nodeid in _VERDICTS:
            verdict, detail = _VERDICTS[nodeid]
            terminalreporter.write_line(f"criterion {n:2d} {verdict}  {title}  [{detail}]")
