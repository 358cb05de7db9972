"""Shared helpers for the test suite."""

import numpy as np
import pytest

from refsafe import Polytope, RegionKind, contains


def simplex_normals(n: int) -> np.ndarray:
    """n+1 directions that positively span R^n (so the polytope is bounded)."""
    rows = list(np.eye(n))
    rows.append(-np.ones(n) / np.sqrt(n))
    return np.array(rows)


def random_bounded_polytope(rng, n: int, r: int, kind=RegionKind.REFERENCE) -> Polytope:
    """Random bounded polytope containing the origin strictly.

    The first n+1 normals are perturbed positive-spanning directions,
    which keeps the region bounded; extra rows are fully random.  Offsets
    put every boundary at distance 0.5..2 from the origin.
    """
    assert r >= n + 1, "boundedness needs at least n+1 constraints"
    base = simplex_normals(n)
    rows = []
    for i in range(r):
        if i < n + 1:
            # norm-capped perturbation (0.3 < 1/sqrt(6)) keeps the positive span
            noise = rng.standard_normal(n)
            noise *= 0.3 * rng.uniform() / np.linalg.norm(noise)
            raw = base[i] + noise
        else:
            raw = rng.standard_normal(n)
            while np.linalg.norm(raw) < 1e-6:
                raw = rng.standard_normal(n)
        rows.append((raw, -float(rng.uniform(0.5, 2.0))))
    return Polytope.from_raw(rows, kind)


def exterior_point(rng, poly: Polytope, attempts: int = 100) -> np.ndarray:
    """A random point outside the polytope (scaled along a random ray)."""
    n = poly.dim
    for _ in range(attempts):
        direction = rng.standard_normal(n)
        nrm = np.linalg.norm(direction)
        if nrm < 1e-9:
            continue
        direction /= nrm
        scale = 1.0
        for _ in range(60):
            pt = scale * direction
            if not contains(poly, pt, 0.0).feasible:
                return pt + 0.05 * rng.standard_normal(n) * 0  # deterministic: no extra noise
            scale *= 1.7
    raise AssertionError("could not find an exterior point")


def random_hurwitz(rng, n: int) -> np.ndarray:
    """Random Hurwitz matrix: shift a random matrix left of the imaginary axis."""
    m = rng.standard_normal((n, n))
    shift = float(np.max(np.linalg.eigvals(m).real)) + float(rng.uniform(0.3, 2.0))
    return m - shift * np.eye(n)


def random_spd(rng, n: int, cond_cap: float = 50.0) -> np.ndarray:
    """Random SPD matrix with bounded condition number."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    evals = rng.uniform(1.0, cond_cap, n)
    return (q * evals) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
