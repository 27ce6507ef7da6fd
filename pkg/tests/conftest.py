import numpy as np
import pytest

from fracpme.field import Field, FieldKind, Grid, ModelParams


def box_datum(grid: Grid, half_width: float = 1.0, total_mass: float = 1.0) -> Field:
    vals = np.where(np.abs(grid.x) <= half_width, total_mass / (2.0 * half_width), 0.0)
    vals[0] = vals[-1] = 0.0
    return Field(grid, vals, FieldKind.DENSITY)


def parabola_datum(grid: Grid, a: float = 0.5, b: float = 1.0) -> Field:
    vals = a * np.maximum(b - np.abs(grid.x), 0.0) ** 2
    vals[0] = vals[-1] = 0.0
    return Field(grid, vals, FieldKind.DENSITY)


@pytest.fixture(scope="session")
def bench_run():
    """m=1.5, s=0.25 box benchmark at moderate resolution, shared across tests."""
    from fracpme.solver import run

    grid = Grid.centered(2**11, 50.0)
    params = ModelParams(m=1.5, s=0.25, R=50.0)
    return run(params, box_datum(grid), 1.0, np.linspace(0.0, 1.0, 11))
