import numpy as np
import pytest

from gridwatch.grid_model import Plant, PlantKind, SeriesFrame, make_grid

_CRITERIA = {}


def record_criterion(number, name, passed, detail=""):
    _CRITERIA[number] = (name, bool(passed), detail)


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        name, passed, detail = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {name} {detail}".rstrip())


def small_grid(n_plants=5, n_loads=3, rated=100.0):
    plants = [Plant(f"P{i}", PlantKind.HYDRO, rated, 0.4 * rated * 8736, f"b{i}") for i in range(n_plants)]
    return make_grid("fixture", [f"L{i}" for i in range(n_loads)], plants)


def random_frame(grid, n_steps, seed=0):
    rng = np.random.default_rng(seed)
    loads = rng.uniform(10.0, 50.0, size=(n_steps, grid.n_loads))
    gen = np.column_stack([rng.uniform(0.0, p.rated_power, size=n_steps) for p in grid.plants])
    return SeriesFrame(0, grid.column_ids, np.hstack([loads, gen]))


@pytest.fixture
def grid5():
    return small_grid()


@pytest.fixture
def frame5(grid5):
    return random_frame(grid5, 200, seed=1)


@pytest.fixture(scope="session")
def tiny():
    """Four-plant synthetic grid, one year, attacks on H01."""
    from gridwatch.attacks import inject_attacks
    from gridwatch.datagen import DispatchParams, generate, synthetic_grid
    from gridwatch.evaluation import make_split

    grid, params = synthetic_grid(n_hydro=3, n_gas=1, n_coal=0, n_nuclear=0, n_loads=4, seed=2)
    frame = generate(grid, 1, params, DispatchParams(seed=2))
    ds = inject_attacks(frame, "H01", grid, seed=1)
    return {"grid": grid, "frame": frame, "dataset": ds, "split": make_split(frame.n_steps, seed=0)}
