import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from lamperti.models import PRESETS, model_from_config, preset_config  # noqa: E402

PRESET_NAMES = sorted(PRESETS)


@pytest.fixture(scope="session")
def presets():
    return {name: model_from_config(preset_config(name)) for name in PRESET_NAMES}


@pytest.fixture(params=PRESET_NAMES)
def preset_spec(request, presets):
    return presets[request.param]


@pytest.fixture(scope="session")
def cir(presets):
    return presets["example-6.1"]


@pytest.fixture(scope="session")
def heston(presets):
    return presets["example-6.2"]


@pytest.fixture(scope="session")
def cev(presets):
    return presets["example-6.3"]


@pytest.fixture(scope="session")
def ait(presets):
    return presets["example-6.4"]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
