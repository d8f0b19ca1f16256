import numpy as np
import pytest

from attnseg import fixtures

# Populated by the acceptance suite; echoed after the run so the verdict per
# criterion stays visible under pytest's fd-level output capture.
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mini_dump_and_truth():
    return fixtures.make_fixture(fixtures.mini_spec())


@pytest.fixture(scope="session")
def mini_dump(mini_dump_and_truth):
    return mini_dump_and_truth[0]


@pytest.fixture(scope="session")
def mini_truth(mini_dump_and_truth):
    return mini_dump_and_truth[1]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_stochastic(rng, r: int) -> np.ndarray:
    """Random strictly positive (r, r, r, r) tensor with unit query rows."""
    raw = rng.random((r, r, r, r)) + 1e-3
    return raw / raw.sum(axis=(2, 3), keepdims=True)
