import os
from pathlib import Path

import numpy as np
import pytest

from fpqe.data import MissingDataError, export_mlxtend_mnist, load_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory) -> Path:
    """MNIST IDX directory: $FPQE_MNIST_DIR if set, else an export of the mlxtend sample."""
    env = os.environ.get("FPQE_MNIST_DIR")
    if env:
        return Path(env)
    try:
        return export_mlxtend_mnist(tmp_path_factory.mktemp("mnist"))
    except MissingDataError as e:
        pytest.skip(str(e))


@pytest.fixture(scope="session")
def mnist(mnist_dir):
    return load_dataset("mnist", mnist_dir, "train")


def pytest_terminal_summary(terminalreporter):
    from _report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
