import numpy as np
import pytest

from refsafe import (
    HalfSpace,
    InputError,
    Polytope,
    RegionKind,
    contains,
    normalize,
    signed_distance,
)


def unit_box():
    return Polytope.box([0.0, 0.0], [1.0, 1.0], RegionKind.REFERENCE)


class TestNormalize:
    def test_scaling(self):
        h = normalize([2.0, 0.0], -4.0)
        assert np.allclose(h.normal, [1.0, 0.0])
        assert h.offset == -2.0

    def test_zero_normal_rejected(self):
        with pytest.raises(InputError):
            normalize([0.0, 0.0], 1.0)

    def test_unit_diagonal(self):
        h = normalize([1.0, 1.0], 0.0)
        assert np.allclose(h.normal, [1.0 / np.sqrt(2.0)] * 2)
        assert h.offset == 0.0

    def test_set_identity_under_normalization(self, rng):
        # sign of the constraint value is preserved for random points
        for _ in range(200):
            raw = rng.standard_normal(4)
            while np.linalg.norm(raw) < 1e-6:
                raw = rng.standard_normal(4)
            off = float(rng.standard_normal())
            h = normalize(raw, off)
            x = 3.0 * rng.standard_normal(4)
            assert np.sign(raw @ x + off) == np.sign(np.sign(h.normal @ x + h.offset))

    def test_direct_construction_requires_unit_normal(self):
        with pytest.raises(InputError):
            HalfSpace(np.array([2.0, 0.0]), -4.0)


class TestSignedDistance:
    def test_axis_distance(self):
        h = normalize([1.0, 0.0], -2.0)  # x1 <= 2
        assert signed_distance(h, [0.0, 0.0]) == -2.0

    def test_on_hyperplane(self):
        h = normalize([1.0, 0.0], -2.0)
        assert signed_distance(h, [2.0, 5.0]) == 0.0

    def test_raw_ingestion_three_four(self):
        # raw normal (3, 4), offset -10: stored as (0.6, 0.8), -2;
        # hand check: |(3,4)| = 5, and 0.6*0 + 0.8*0 - 2 = -2
        h = normalize([3.0, 4.0], -10.0)
        assert np.allclose(h.normal, [0.6, 0.8])
        assert h.offset == pytest.approx(-2.0)
        assert signed_distance(h, [0.0, 0.0]) == pytest.approx(-2.0)

    def test_dimension_mismatch(self):
        h = normalize([1.0, 0.0], 0.0)
        with pytest.raises(InputError):
            signed_distance(h, [1.0, 2.0, 3.0])


class TestContains:
    def test_interior(self):
        rep = contains(unit_box(), [0.5, 0.5], tol=0.0)
        assert rep.feasible
        assert rep.worst_violation == pytest.approx(-0.5)
        assert rep.violating_index is None

    def test_exterior(self):
        rep = contains(unit_box(), [2.0, 0.5])
        assert not rep.feasible
        assert rep.worst_violation == pytest.approx(1.0)
        # first constraint of the box is x1 <= 1
        assert rep.violating_index == 0

    def test_boundary(self):
        rep = contains(unit_box(), [1.0, 1.0], tol=1e-12)
        assert rep.feasible
        assert rep.worst_violation == pytest.approx(0.0, abs=1e-15)

    def test_monotone_in_tol(self, rng):
        box = unit_box()
        for _ in range(100):
            x = rng.uniform(-1.5, 2.5, 2)
            t1, t2 = sorted(rng.uniform(0.0, 0.5, 2))
            if contains(box, x, t1).feasible:
                assert contains(box, x, t2).feasible


class TestPolytope:
    def test_bounded_operational_accepted(self):
        poly = Polytope.box([-2.0, -2.0], [2.0, 2.0], RegionKind.OPERATIONAL)
        lo, hi = poly.bounding_box()
        assert np.allclose(lo, [-2.0, -2.0], atol=1e-7)
        assert np.allclose(hi, [2.0, 2.0], atol=1e-7)

    def test_unbounded_operational_rejected(self):
        rows = [([1.0, 0.0], -1.0), ([-1.0, 0.0], -1.0), ([0.0, 1.0], -1.0)]  # open below
        with pytest.raises(InputError, match="unbounded"):
            Polytope.from_raw(rows, RegionKind.OPERATIONAL)

    def test_empty_operational_rejected(self):
        rows = [([1.0, 0.0], 2.0), ([-1.0, 0.0], 2.0), ([0.0, 1.0], -1.0), ([0.0, -1.0], -1.0)]
        with pytest.raises(InputError, match="empty"):
            Polytope.from_raw(rows, RegionKind.OPERATIONAL)

    def test_unbounded_reference_allowed(self):
        rows = [([1.0, 0.0], -1.0)]
        poly = Polytope.from_raw(rows, RegionKind.REFERENCE)
        assert poly.n_constraints == 1

    def test_empty_halfspace_list_rejected(self):
        with pytest.raises(InputError):
            Polytope([], RegionKind.REFERENCE)

    def test_recenter_preserves_the_set(self, rng):
        box = unit_box()
        origin = np.array([0.3, -0.7])
        moved = box.recenter(origin)
        for _ in range(50):
            x = rng.uniform(-1.0, 2.0, 2)
            assert contains(box, x).feasible == contains(moved, x - origin).feasible

    def test_boundedness_probe_is_finite(self, rng):
        # every accepted operational polytope has a finite bounding box
        from conftest import random_bounded_polytope

        for k in range(10):
            poly = random_bounded_polytope(np.random.default_rng(k), 3, 6, RegionKind.OPERATIONAL)
            lo, hi = poly.bounding_box()
            assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
            assert np.all(hi >= lo)
