import numpy as np
import pytest

from gvlad import AngleModel, Codebook, DescriptorSet


def random_image(rng, n, d, spread=3.0):
    return DescriptorSet(rng.normal(0, spread, size=(n, d)), rng.uniform(0, 2 * np.pi, n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def axis_angles():
    return AngleModel([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


@pytest.fixture
def small_codebook(rng):
    return Codebook(rng.normal(0, 3.0, size=(6, 4)))


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line[1])


@pytest.fixture
def criterion(request):
    """Context-manager factory that times a block and records one PASS/FAIL line."""
    import contextlib
    import time

    @contextlib.contextmanager
    def run(number, title, limit=None):
        start = time.perf_counter()
        status, note = "PASS", ""
        try:
            yield
            elapsed = time.perf_counter() - start
            if limit is not None and elapsed >= limit:
                status, note = "FAIL", f" (over the {limit:g}s limit)"
                raise AssertionError(f"criterion {number} took {elapsed:.2f}s, limit {limit}s")
        except BaseException:
            status = "FAIL"
            raise
        finally:
            elapsed = time.perf_counter() - start
            line = f"[{status}] {number:2d}. {title} ({elapsed:.2f}s){note}"
            print(line)
            request.config.stash[ACCEPTANCE_KEY].append((number, line))

    return run
