import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svdeconv.tiling import build_grid, synthesize_object


def raw_tent(shape, center, lengths):
    """Direct evaluation of the bilinear interpolation mask."""
    m, n = shape
    rows = np.maximum(1.0 - np.abs(center[0] - np.arange(m)) / (lengths[0] / 2.0), 0.0)
    cols = np.maximum(1.0 - np.abs(center[1] - np.arange(n)) / (lengths[1] / 2.0), 0.0)
    return rows[:, None] * cols[None, :]


PARTITION_CASES = [(64, 64, 2, 2), (256, 256, 7, 7), (250, 254, 7, 7), (255, 255, 5, 3)]


@pytest.mark.parametrize("m,n,p,q", PARTITION_CASES)
def test_partition_of_unity(m, n, p, q):
    grid = build_grid(m, n, p, q)
    total = grid.windows.sum(axis=(0, 1))
    assert np.abs(total - 1.0).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(
    m=st.integers(16, 96),
    n=st.integers(16, 96),
    p=st.integers(2, 5),
    q=st.integers(2, 5),
)
def test_partition_of_unity_random_geometry(m, n, p, q):
    grid = build_grid(m, n, p, q)
    total = grid.windows.sum(axis=(0, 1))
    assert np.abs(total - 1.0).max() < 1e-12


def test_windows_bounded():
    grid = build_grid(96, 80, 3, 4)
    assert (grid.windows >= 0.0).all()
    assert (grid.windows <= 1.0 + 1e-15).all()


def test_geometry_64_2x2():
    grid = build_grid(64, 64, 2, 2)
    assert grid.n_tiles == 4
    assert grid.tile_length == (64.0, 64.0)
    assert grid.center(0, 0) == (16, 16)
    assert grid.center(1, 1) == (48, 48)
    # interior tent: 1 at its own center, 0 one half-length away
    w = grid.window(0, 0)
    assert w[16, 16] == pytest.approx(1.0)
    assert w[48, 16] == pytest.approx(0.0)
    assert w[16, 48] == pytest.approx(0.0)


def test_paper_scale_grid_has_49_tiles():
    grid = build_grid(256, 256, 7, 7)
    assert grid.n_tiles == 49


def test_corner_window_is_normalized_raw_tent():
    grid = build_grid(64, 64, 2, 2)
    shape = (64, 64)
    raw = {
        (p, q): raw_tent(shape, grid.center(p, q), grid.tile_length)
        for p in range(2)
        for q in range(2)
    }
    total = sum(raw.values())
    assert np.abs(grid.window(0, 0) - raw[(0, 0)] / total).max() < 1e-12


def test_single_contributor_pixel_gets_full_weight():
    grid = build_grid(64, 64, 2, 2)
    # (0, 0) is reached only by tile (0, 0): all other tents vanish there
    assert grid.window(0, 0)[0, 0] == pytest.approx(1.0)
    for p, q in [(0, 1), (1, 0), (1, 1)]:
        assert grid.window(p, q)[0, 0] == 0.0


def test_midpoint_between_adjacent_centers_splits_evenly():
    grid = build_grid(64, 64, 2, 2)
    row, mid = 16, 32  # same row as the centers, halfway between columns 16 and 48
    assert grid.window(0, 0)[row, mid] == pytest.approx(0.5)
    assert grid.window(0, 1)[row, mid] == pytest.approx(0.5)


def test_index_out_of_range():
    grid = build_grid(64, 64, 2, 2)
    with pytest.raises(IndexError):
        grid.window(2, 0)
    with pytest.raises(IndexError):
        grid.center(0, -1)


def test_rejects_too_many_tiles():
    with pytest.raises(ValueError, match="too small"):
        build_grid(10, 10, 6, 6)
    with pytest.raises(ValueError, match="at least 1"):
        build_grid(64, 64, 0, 4)


def test_single_tile_degenerate_grid():
    grid = build_grid(32, 48, 1, 1)
    assert grid.n_tiles == 1
    assert np.abs(grid.window(0, 0) - 1.0).max() < 1e-15
    x = np.arange(32 * 48, dtype=float).reshape(32, 48)
    assert np.abs(synthesize_object(x[None, None], grid) - x).max() < 1e-12


class TestSynthesize:
    def test_identical_locals_reproduce_input(self):
        rng = np.random.default_rng(0)
        grid = build_grid(48, 40, 3, 2)
        x = rng.random((48, 40))
        locals_ = np.broadcast_to(x, (3, 2, 48, 40))
        out = synthesize_object(locals_, grid)
        assert np.abs(out - x).max() < 1e-12

    def test_constant_locals_give_window_interpolation(self):
        grid = build_grid(32, 32, 2, 2)
        locals_ = np.empty((2, 2, 32, 32))
        for p in range(2):
            for q in range(2):
                locals_[p, q] = p * 2 + q
        out = synthesize_object(locals_, grid)
        expected = sum(
            (p * 2 + q) * grid.window(p, q) for p in range(2) for q in range(2)
        )
        assert np.abs(out - expected).max() < 1e-12

    def test_indicator_local_recovers_window_from_direct_masks(self):
        grid = build_grid(64, 64, 2, 2)
        locals_ = np.zeros((2, 2, 64, 64))
        locals_[1, 1] = 1.0
        out = synthesize_object(locals_, grid)
        raw = {
            (p, q): raw_tent((64, 64), grid.center(p, q), grid.tile_length)
            for p in range(2)
            for q in range(2)
        }
        expected = raw[(1, 1)] / sum(raw.values())
        assert np.abs(out - expected).max() < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(1)
        grid = build_grid(32, 32, 2, 3)
        a = rng.random((2, 3, 32, 32))
        b = rng.random((2, 3, 32, 32))
        lhs = synthesize_object(1.5 * a + 0.25 * b, grid)
        rhs = 1.5 * synthesize_object(a, grid) + 0.25 * synthesize_object(b, grid)
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_shape_mismatch(self):
        grid = build_grid(32, 32, 2, 2)
        with pytest.raises(ValueError, match="shape"):
            synthesize_object(np.ones((2, 2, 16, 16)), grid)
