import numpy as np
import pytest

from lfcodec.structure import build_sequence
from lfcodec.synthetic import textured_plane


@pytest.fixture(scope="session")
def seq8():
    return build_sequence(8, 8)


@pytest.fixture(scope="session")
def small_lf():
    """8x8 grid of 40x40 colour views of a plane at disparity 1."""
    return textured_plane(8, 8, 40, 40, disparity=1.0, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    def record(n: int, ok: bool, detail: str):
        line = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
