import math

import numpy as np
import pytest
from scipy.linalg import solve_continuous_lyapunov

from conftest import random_hurwitz, random_spd
from refsafe import (
    Ellipsoid,
    InputError,
    PlantModel,
    Polytope,
    RegionKind,
    SpdMatrix,
    StabilityError,
    ellipsoid_in_region,
    ellipsoid_through,
    ellipsoid_volume,
    lyap_value,
    solve_lyapunov,
)


def residual(a_cl, p, q):
    return np.linalg.norm(a_cl.T @ p + p @ a_cl + q) / np.linalg.norm(q)


class TestSolveLyapunov:
    def test_diagonal_case(self):
        # 2 p_ii a_ii = -q_ii gives P = I here
        p = solve_lyapunov(np.diag([-1.0, -2.0]), np.diag([2.0, 4.0]))
        assert np.allclose(p.dense, np.eye(2), atol=1e-12)

    def test_identity_case(self):
        p = solve_lyapunov(-np.eye(2), 2.0 * np.eye(2))
        assert np.allclose(p.dense, np.eye(2), atol=1e-12)

    def test_companion_system_residual(self):
        a = np.array([[0.0, 1.0], [-2.0, -3.0]])
        q = np.eye(2)
        p = solve_lyapunov(a, q)
        assert residual(a, p.dense, q) < 1e-10
        assert np.all(p.eigenvalues > 0.0)

    def test_non_hurwitz_rejected(self):
        with pytest.raises(StabilityError):
            solve_lyapunov(np.diag([1.0, -1.0]), np.eye(2))

    def test_dimension_cap(self):
        a = -np.eye(31)
        with pytest.raises(InputError):
            solve_lyapunov(a, np.eye(31))

    def test_matches_scipy_on_random_systems(self):
        # independent route: scipy solves a x + x a^T = q, so map arguments
        for k in range(20):
            gen = np.random.default_rng(1000 + k)
            n = int(gen.integers(2, 9))
            a = random_hurwitz(gen, n)
            q = random_spd(gen, n)
            ours = solve_lyapunov(a, q).dense
            ref = solve_continuous_lyapunov(a.T, -q)
            assert np.allclose(ours, ref, rtol=1e-8, atol=1e-10)

    def test_residual_property(self):
        for k in range(30):
            gen = np.random.default_rng(2000 + k)
            n = int(gen.integers(2, 11))
            a = random_hurwitz(gen, n)
            q = random_spd(gen, n)
            p = solve_lyapunov(a, q)
            assert residual(a, p.dense, q) <= 1e-10


class TestSpdMatrix:
    def test_asymmetric_rejected(self):
        with pytest.raises(InputError):
            SpdMatrix([[1.0, 0.5], [0.0, 1.0]])

    def test_indefinite_rejected(self):
        with pytest.raises(InputError):
            SpdMatrix(np.diag([1.0, -1.0]))

    def test_factors_reconstruct(self, rng):
        for _ in range(20):
            m = random_spd(rng, 5)
            p = SpdMatrix(m)
            rebuilt = (p.eigenvectors * p.eigenvalues) @ p.eigenvectors.T
            assert np.allclose(rebuilt, p.dense, rtol=1e-10)
            assert np.all(np.diff(p.eigenvalues) <= 1e-12)  # descending


class TestLyapValue:
    def test_identity(self):
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.eye(2)), 1.0)
        assert lyap_value(e, [1.0, 0.0]) == pytest.approx(1.0)

    def test_weighted(self):
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.diag([4.0, 1.0])), 1.0)
        assert lyap_value(e, [1.0, 1.0]) == pytest.approx(5.0)

    def test_zero_only_at_center(self, rng):
        p = SpdMatrix(random_spd(rng, 3))
        center = rng.standard_normal(3)
        e = Ellipsoid(center, p, 1.0)
        assert lyap_value(e, center) == pytest.approx(0.0, abs=1e-15)
        for _ in range(50):
            x = center + rng.standard_normal(3)
            v = lyap_value(e, x)
            assert v >= 0.0
            if np.linalg.norm(x - center) > 1e-6:
                assert v > 0.0


class TestEllipsoidThrough:
    def test_unit_disk(self):
        e = ellipsoid_through([0.0, 0.0], SpdMatrix(np.eye(2)), [1.0, 0.0])
        assert e.level == pytest.approx(1.0)

    def test_degenerate(self):
        e = ellipsoid_through([0.5, 0.5], SpdMatrix(np.eye(2)), [0.5, 0.5])
        assert e.level == 0.0

    def test_weighted(self):
        e = ellipsoid_through([1.0, 1.0], SpdMatrix(np.diag([4.0, 1.0])), [2.0, 1.0])
        assert e.level == pytest.approx(4.0)


class TestEllipsoidVolume:
    def test_unit_disk_area(self):
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.eye(2)), 1.0)
        assert ellipsoid_volume(e) == pytest.approx(math.pi)

    def test_degenerate_is_zero(self):
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.eye(2)), 0.0)
        assert ellipsoid_volume(e) == 0.0

    def test_semi_axes_area_and_monte_carlo(self):
        # P = diag(4, 1), level 4: semi-axes sqrt(level/lambda) = (1, 2), area 2 pi
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.diag([4.0, 1.0])), 4.0)
        vol = ellipsoid_volume(e)
        assert vol == pytest.approx(2.0 * math.pi, rel=1e-12)
        gen = np.random.default_rng(7)
        pts = gen.uniform([-1.0, -2.0], [1.0, 2.0], size=(200_000, 2))
        inside = np.einsum("ij,jk,ik->i", pts, e.shape.dense, pts) <= e.level
        mc = inside.mean() * 8.0  # sampling box area
        assert abs(mc - vol) / vol < 0.02


class TestEllipsoidInRegion:
    def region(self, rows):
        return Polytope.from_raw(rows, RegionKind.REFERENCE)

    def test_unit_disk_clears_wide_halfplane(self):
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.eye(2)), 1.0)
        rep = ellipsoid_in_region(e, self.region([([1.0, 0.0], -2.0)]))
        assert rep.feasible
        assert rep.worst_violation == pytest.approx(-1.0)

    def test_unit_disk_pokes_out(self):
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.eye(2)), 1.0)
        rep = ellipsoid_in_region(e, self.region([([1.0, 0.0], -0.5)]))
        assert not rep.feasible
        assert rep.worst_violation == pytest.approx(0.5)

    def test_boundary_touch(self):
        # semi-axis along x2 is sqrt(4/1) = 2, face at x2 = 2: support value 0
        e = Ellipsoid(np.zeros(2), SpdMatrix(np.diag([4.0, 1.0])), 4.0)
        rep = ellipsoid_in_region(e, self.region([([0.0, 1.0], -2.0)]), tol=1e-12)
        assert rep.feasible
        assert rep.worst_violation == pytest.approx(0.0, abs=1e-12)

    def test_center_outside_reported_not_raised(self):
        e = Ellipsoid(np.array([5.0, 0.0]), SpdMatrix(np.eye(2)), 1.0)
        rep = ellipsoid_in_region(e, self.region([([1.0, 0.0], -2.0)]))
        assert not rep.feasible
        assert rep.worst_violation == pytest.approx(3.0)

    def test_support_matches_boundary_sampling(self, rng):
        # closed form vs max over 1e4 sampled boundary points (2-D)
        p = SpdMatrix(random_spd(rng, 2, cond_cap=10.0))
        center = rng.standard_normal(2)
        level = 2.5
        e = Ellipsoid(center, p, level)
        theta = np.linspace(0.0, 2.0 * np.pi, 10_000, endpoint=False)
        circle = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        # boundary = center + sqrt(level) * U diag(1/sqrt(lam)) u
        back = e.shape.eigenvectors * (1.0 / np.sqrt(e.shape.eigenvalues))
        boundary = center + math.sqrt(level) * circle @ back.T
        for _ in range(10):
            raw = rng.standard_normal(2)
            nu = raw / np.linalg.norm(raw)
            beta = float(rng.standard_normal())
            region = self.region([(nu, beta)])
            closed = ellipsoid_in_region(e, region, tol=np.inf).worst_violation
            sampled = float(np.max(boundary @ nu + beta))
            assert closed == pytest.approx(sampled, rel=1e-6, abs=1e-9)


class TestPlantModel:
    def test_hurwitz_enforced(self):
        a = np.array([[0.0, 1.0], [0.0, 0.0]])  # double integrator, K = 0
        with pytest.raises(StabilityError):
            PlantModel(a, np.array([[0.0], [1.0]]), np.zeros((1, 2)))

    def test_closed_loop(self):
        a = np.array([[0.0, 1.0], [0.0, 0.0]])
        b = np.array([[0.0], [1.0]])
        k = np.array([[2.0, 3.0]])
        plant = PlantModel(a, b, k)
        assert np.allclose(plant.a_cl, a - b @ k)
        assert plant.dim == 2 and plant.n_inputs == 1
