import numpy as np
import pytest

from mustab.surface_core import analyze, build_grid, catalog

# pass/fail lines from the acceptance suite, echoed after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# analyses are pure and immutable; cache them across the whole session
_cache = {}


def cached_analysis(name, resolution, frame_kind="gram_schmidt",
                    with_christoffel=False):
    key = (name, resolution, frame_kind, with_christoffel)
    if key not in _cache:
        patch = catalog(name)
        grid = build_grid(resolution)
        if frame_kind == "preferred":
            from mustab.surface_core import preferred_frame
            frame = preferred_frame(patch, grid)
        elif frame_kind == "parallel":
            from mustab.surface_core import parallel_frame
            frame = parallel_frame(patch, grid)
        else:
            frame = None
        _cache[key] = analyze(patch, grid, frame=frame,
                              with_christoffel=with_christoffel)
    return _cache[key]


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64)


@pytest.fixture(scope="session")
def grid96():
    return build_grid(96)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
