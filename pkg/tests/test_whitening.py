import math

import numpy as np
import pytest

from conftest import random_spd
from refsafe import Polytope, RegionKind, SpdMatrix, contains, ellipsoid_volume
from refsafe.lyapunov import Ellipsoid, unit_ball_volume
from refsafe.whitening import from_spd, transform_problem, unwhiten, whiten


class TestFromSpd:
    def test_identity(self):
        t = from_spd(SpdMatrix(np.eye(3)))
        assert np.allclose(t.lam, 1.0)
        assert np.allclose(np.abs(t.u) @ np.ones(3), 1.0)  # signed permutation of I

    def test_diagonal(self):
        t = from_spd(SpdMatrix(np.diag([4.0, 1.0])))
        assert np.allclose(t.lam, [4.0, 1.0])
        assert np.allclose(np.abs(t.u), np.eye(2))

    def test_two_by_two(self):
        p = SpdMatrix([[2.0, 1.0], [1.0, 2.0]])
        t = from_spd(p)
        assert np.allclose(t.lam, [3.0, 1.0])
        expect = np.array([1.0, 1.0]) / math.sqrt(2.0)
        assert np.allclose(np.abs(t.u[:, 0]), expect)
        rebuilt = (t.u * t.lam) @ t.u.T
        assert np.linalg.norm(rebuilt - p.dense) < 1e-10


class TestRoundTrip:
    def test_forward_backward_identity(self, rng):
        for _ in range(50):
            p = SpdMatrix(random_spd(rng, 4))
            t = from_spd(p)
            x = 3.0 * rng.standard_normal(4)
            assert np.allclose(unwhiten(t, whiten(t, x)), x, atol=1e-12)
            assert np.allclose(whiten(t, unwhiten(t, x)), x, atol=1e-12)

    def test_diagonal_forward(self):
        t = from_spd(SpdMatrix(np.diag([4.0, 1.0])))
        y = whiten(t, [1.0, 1.0])
        assert np.allclose(np.abs(y), [2.0, 1.0])

    def test_identity_is_identity(self, rng):
        t = from_spd(SpdMatrix(np.eye(3)))
        x = rng.standard_normal(3)
        assert np.allclose(np.abs(whiten(t, x)), np.abs(x))


class TestSphereization:
    def test_image_of_ellipsoid_is_sphere(self, rng):
        # boundary points of {x^T P x <= v} map onto the sphere of radius sqrt(v)
        for _ in range(10):
            p = SpdMatrix(random_spd(rng, 3))
            t = from_spd(p)
            v = float(rng.uniform(0.5, 4.0))
            u = rng.standard_normal((200, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            back = p.eigenvectors * (1.0 / np.sqrt(p.eigenvalues))
            boundary = math.sqrt(v) * u @ back.T
            images = np.array([whiten(t, b) for b in boundary])
            radii = np.linalg.norm(images, axis=1)
            assert np.allclose(radii, math.sqrt(v), atol=1e-9)

    def test_volume_relation(self, rng):
        # vol(original ellipsoid) = |det back-map| * vol(whitened sphere)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            p = SpdMatrix(random_spd(rng, n))
            t = from_spd(p)
            level = float(rng.uniform(0.5, 3.0))
            e = Ellipsoid(np.zeros(n), p, level)
            sphere_vol = unit_ball_volume(n) * level ** (n / 2.0)
            assert ellipsoid_volume(e) == pytest.approx(abs(t.det_back) * sphere_vol, rel=1e-8)

    def test_monotone_volume_link(self, rng):
        # larger whitened squared distance <=> larger original volume
        p = SpdMatrix(random_spd(rng, 3))
        t = from_spd(p)
        xp2 = whiten(t, rng.standard_normal(3))
        c1 = xp2 + rng.standard_normal(3)
        c2 = xp2 + 2.5 * rng.standard_normal(3)
        d1, d2 = np.sum((c1 - xp2) ** 2), np.sum((c2 - xp2) ** 2)
        e1 = Ellipsoid(unwhiten(t, c1), p, float(np.sum((whiten(t, unwhiten(t, c1)) - xp2) ** 2)))
        e2 = Ellipsoid(unwhiten(t, c2), p, float(np.sum((whiten(t, unwhiten(t, c2)) - xp2) ** 2)))
        assert (d1 < d2) == (ellipsoid_volume(e1) < ellipsoid_volume(e2))


class TestTransformProblem:
    def test_identity_matrix_is_noop(self, rng):
        p = SpdMatrix(np.eye(2))
        t = from_spd(p)
        ref = Polytope.box([0.0, 0.0], [1.0, 1.0], RegionKind.REFERENCE)
        op = Polytope.box([-2.0, -2.0], [2.0, 2.0], RegionKind.OPERATIONAL)
        ref2, op2, xp2, metric = transform_problem(t, ref, op, [0.5, 0.25])
        assert np.allclose(np.abs(metric), np.eye(2))
        for _ in range(20):
            x = rng.uniform(-3.0, 3.0, 2)
            assert contains(ref, x).feasible == contains(ref2, whiten(t, x)).feasible
            assert contains(op, x).feasible == contains(op2, whiten(t, x)).feasible

    def test_diagonal_constraint_rescaled(self):
        # P = diag(4, 1): x1 <= 1 becomes (1/2) y1 <= 1, i.e. y1 <= 2 after
        # re-normalization to a unit normal
        p = SpdMatrix(np.diag([4.0, 1.0]))
        t = from_spd(p)
        ref = Polytope.from_raw([([1.0, 0.0], -1.0)], RegionKind.REFERENCE)
        ref2, _, _, _ = transform_problem(
            t, ref, Polytope.box([-9, -9], [9, 9], RegionKind.OPERATIONAL), [0.0, 0.0]
        )
        h = ref2.halfspaces[0]
        assert np.allclose(np.abs(h.normal), [1.0, 0.0])
        assert h.offset == pytest.approx(-2.0)

    def test_set_consistency_random(self, rng):
        # membership is preserved for 1000 random points
        p = SpdMatrix(random_spd(rng, 3))
        t = from_spd(p)
        ref = Polytope.box([-1.0, -0.5, 0.0], [1.0, 1.5, 2.0], RegionKind.REFERENCE)
        op = Polytope.box([-4.0] * 3, [4.0] * 3, RegionKind.OPERATIONAL)
        ref2, op2, _, _ = transform_problem(t, ref, op, np.zeros(3))
        pts = rng.uniform(-2.0, 3.0, size=(1000, 3))
        for x in pts:
            y = whiten(t, x)
            assert contains(ref, x, 1e-9).feasible == contains(ref2, y, 1e-7).feasible
            assert contains(op, x, 1e-9).feasible == contains(op2, y, 1e-7).feasible

    def test_metric_is_back_map(self, rng):
        p = SpdMatrix(random_spd(rng, 3))
        t = from_spd(p)
        _, _, xp2, metric = transform_problem(
            t,
            Polytope.box([-1.0] * 3, [1.0] * 3, RegionKind.REFERENCE),
            Polytope.box([-4.0] * 3, [4.0] * 3, RegionKind.OPERATIONAL),
            np.ones(3),
        )
        assert np.allclose(xp2, whiten(t, np.ones(3)))
        x = rng.standard_normal(3)
        assert np.allclose(metric @ x, unwhiten(t, x), atol=1e-12)
