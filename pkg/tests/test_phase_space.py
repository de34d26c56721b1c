import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisedyn import (
    CLAMP,
    PERIODIC,
    GridSpec,
    PhaseBox,
    canonicalize,
    cell_centers,
    cell_geometry,
    cell_rect,
    distance,
    locate,
    wrap_displacement,
)


def circle():
    return PhaseBox([0.0], [1.0], [PERIODIC])


def segment():
    return PhaseBox([-1.0], [1.0], [CLAMP])


def cylinder():
    return PhaseBox([0.0, -1.0], [1.0, 1.0], [PERIODIC, CLAMP])


class TestPhaseBox:
    def test_validation(self):
        with pytest.raises(ValueError):
            PhaseBox([0.0], [0.0], [PERIODIC])
        with pytest.raises(ValueError):
            PhaseBox([1.0], [0.0], [CLAMP])
        with pytest.raises(ValueError):
            PhaseBox([0.0], [1.0], ["reflect"])
        with pytest.raises(ValueError):
            PhaseBox([0.0, 0.0], [1.0, 1.0], [PERIODIC])

    def test_mode_broadcast(self):
        box = PhaseBox([0.0, 0.0], [1.0, 2.0], PERIODIC)
        assert box.modes == (PERIODIC, PERIODIC)
        assert box.dim == 2
        assert np.allclose(box.lengths, [1.0, 2.0])


class TestGridSpec:
    def test_scalar_promotes_to_one_axis(self):
        grid = GridSpec(8)
        assert grid.shape == (8,)
        assert grid.total == 8

    def test_total(self):
        assert GridSpec([4, 8]).total == 32

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec([0])


class TestCanonicalize:
    def test_periodic_wrap(self):
        box = circle()
        assert canonicalize(box, [1.25])[0] == pytest.approx(0.25)
        assert canonicalize(box, [-0.25])[0] == pytest.approx(0.75)
        assert canonicalize(box, [1.0])[0] == 0.0

    def test_periodic_float_mod_edge(self):
        # (-1e-18) mod 1.0 rounds to exactly 1.0 in IEEE double; the
        # result must still be a canonical coordinate strictly below 1.
        out = canonicalize(circle(), [-1e-18])
        assert out[0] == 0.0

    def test_clamp(self):
        box = segment()
        assert canonicalize(box, [3.0])[0] == 1.0
        assert canonicalize(box, [-3.0])[0] == -1.0
        assert canonicalize(box, [0.5])[0] == 0.5

    def test_batch_and_mixed_modes(self):
        out = canonicalize(cylinder(), [[1.25, 2.0], [-0.5, -2.0]])
        assert np.allclose(out, [[0.25, 1.0], [0.5, -1.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            canonicalize(circle(), [0.1, 0.2])

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
    @settings(max_examples=60, deadline=None)
    def test_idempotent_and_in_box(self, x, y):
        box = cylinder()
        q = canonicalize(box, [x, y])
        assert 0.0 <= q[0] < 1.0
        assert -1.0 <= q[1] <= 1.0
        assert np.allclose(canonicalize(box, q), q)


class TestLocate:
    def test_interior_boundary_goes_up(self):
        # a point exactly on the shared edge belongs to the upper cell
        assert locate(circle(), GridSpec([2]), [0.5]) == 1

    def test_clamp_upper_edge_last_cell(self):
        assert locate(segment(), GridSpec([4]), [1.0]) == 3

    def test_c_order_2d(self):
        box = PhaseBox([0.0, 0.0], [1.0, 1.0], PERIODIC)
        # axis 0 is the slow index: (row 1, col 0) -> flat 2 on a 2x2 grid
        assert locate(box, GridSpec([2, 2]), [0.7, 0.2]) == 2

    def test_batch_returns_array(self):
        out = locate(circle(), GridSpec([4]), [[0.1], [0.9]])
        assert out.tolist() == [0, 3]

    def test_single_returns_int(self):
        assert isinstance(locate(circle(), GridSpec([4]), [0.1]), int)


class TestCellGeometry:
    def test_volumes_normalized(self):
        box = cylinder()
        grid = GridSpec([8, 4])
        vols = [cell_geometry(box, grid, c)[1] for c in range(grid.total)]
        assert np.allclose(vols, 1.0 / grid.total)
        assert sum(vols) == pytest.approx(1.0)

    def test_center_locates_to_own_cell(self):
        box = cylinder()
        grid = GridSpec([8, 4])
        centers = cell_centers(box, grid)
        assert locate(box, grid, centers).tolist() == list(range(grid.total))

    def test_cell_rect_matches_geometry(self):
        box = segment()
        grid = GridSpec([4])
        lowers, widths = cell_rect(box, grid, [0, 3])
        assert np.allclose(lowers[:, 0], [-1.0, 0.5])
        assert np.allclose(widths, 0.5)


class TestMetric:
    def test_wrap_displacement(self):
        assert wrap_displacement(circle(), [0.8])[0] == pytest.approx(-0.2)
        assert wrap_displacement(circle(), [-0.8])[0] == pytest.approx(0.2)
        assert wrap_displacement(segment(), [0.8])[0] == pytest.approx(0.8)

    def test_distance_wraps(self):
        assert distance(circle(), [0.95], [0.05]) == pytest.approx(0.1)
        assert distance(cylinder(), [0.95, 0.5], [0.05, 0.5]) == pytest.approx(0.1)

    def test_distance_clamp_axis_plain(self):
        assert distance(segment(), [0.9], [-0.9]) == pytest.approx(1.8)

    @given(st.floats(0, 0.999), st.floats(0, 0.999))
    @settings(max_examples=60, deadline=None)
    def test_distance_symmetric_and_bounded(self, a, b):
        box = circle()
        d1 = float(distance(box, [a], [b]))
        d2 = float(distance(box, [b], [a]))
        assert d1 == pytest.approx(d2)
        assert d1 <= 0.5 + 1e-12
