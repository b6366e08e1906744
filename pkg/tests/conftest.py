import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gptdensity.model import Dataset, standardize  # noqa: E402
from gptdensity.sampler import ModelConfig  # noqa: E402

@pytest.fixture
def small_cfg():
    return ModelConfig(G=20, iters=300, burn_in=50, seed=3)


@pytest.fixture
def normal_data():
    rng = np.random.default_rng(11)
    return standardize(Dataset(rng.normal(size=40)))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines.items()):
            terminalreporter.write_line(line)
