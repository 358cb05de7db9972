"""Coordinate transforms that turn a Lyapunov ellipsoid into a sphere.

From the spectral factorization ``P = U diag(lam) U^T`` (descending
``lam > 0``), the forward map ``y = diag(sqrt(lam)) U^T x`` sends the
ellipsoid ``{x : x^T P x <= v}`` to the sphere ``{y : |y|^2 <= v}``; the
backward map is ``x = U diag(1/sqrt(lam)) y``.  Volumes pick up the
constant factor ``|det(U diag(1/sqrt(lam)))| = 1/sqrt(det P)``.

Transforming a half-space ``w . x + b <= 0`` gives the raw constraint
``(diag(1/sqrt(lam)) U^T w) . y + b <= 0``, which is re-normalized to a
unit normal (offset rescaled by the same positive factor, so the set is
unchanged) to preserve the package-wide unit-normal convention.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .errors import InputError
from .geometry import HalfSpace, Polytope, as_vector, normalize
from .lyapunov import SpdMatrix


class WhitenTransform:
    """Forward/backward whitening maps derived from an SPD matrix."""

    __slots__ = ("u", "lam", "sqrt_lam", "inv_sqrt_lam", "det_back")

    def __init__(self, u: np.ndarray, lam: np.ndarray):
        self.u = u
        self.lam = lam
        self.sqrt_lam = np.sqrt(lam)
        self.inv_sqrt_lam = 1.0 / self.sqrt_lam
        self.det_back = float(np.linalg.det(u) * np.prod(self.inv_sqrt_lam))

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    def back_matrix(self) -> np.ndarray:
        """The backward map ``U diag(1/sqrt(lam))`` as a dense matrix."""
        return self.u * self.inv_sqrt_lam  # scales columns


def from_spd(p: SpdMatrix) -> WhitenTransform:
    """Build the transform from an SPD matrix's cached factors."""
    return WhitenTransform(p.eigenvectors, p.eigenvalues)


def whiten(t: WhitenTransform, x) -> np.ndarray:
    """Forward map ``diag(sqrt(lam)) U^T x``."""
    xv = as_vector(x, t.dim, "point")
    return t.sqrt_lam * (t.u.T @ xv)


def unwhiten(t: WhitenTransform, y) -> np.ndarray:
    """Backward map ``U diag(1/sqrt(lam)) y`` (exact inverse of :func:`whiten`)."""
    yv = as_vector(y, t.dim, "point")
    return t.u @ (t.inv_sqrt_lam * yv)


def whiten_halfspace(t: WhitenTransform, h: HalfSpace) -> HalfSpace:
    raw = t.inv_sqrt_lam * (t.u.T @ h.normal)
    nrm = float(np.linalg.norm(raw))
    if nrm <= 0.0:
        raise InputError("half-space normal vanished under whitening")
    return normalize(raw, h.offset)


def whiten_polytope(t: WhitenTransform, poly: Polytope) -> Polytope:
    transformed = [whiten_halfspace(t, h) for h in poly.halfspaces]
    out = Polytope.__new__(Polytope)
    out.halfspaces = tuple(transformed)
    out.kind = poly.kind
    out.normals = np.array([h.normal for h in transformed])
    out.offsets = np.array([h.offset for h in transformed])
    out._bbox = None  # boundedness was checked in the original coordinates
    return out


def transform_problem(
    t: WhitenTransform, ref_region: Polytope, op_region: Polytope, xp
) -> Tuple[Polytope, Polytope, np.ndarray, np.ndarray]:
    """Express the reference-selection problem data in whitened coordinates.

    Returns the transformed reference region, transformed operational
    region (both with re-normalized unit normals), the transformed current
    state, and the backward-map matrix ``M = U diag(1/sqrt(lam))`` whose
    Gram matrix carries the only remnant of the original metric.

    A point satisfies the original constraints iff its image satisfies the
    transformed ones.
    """
    xpv = as_vector(xp, t.dim, "current state")
    return (
        whiten_polytope(t, ref_region),
        whiten_polytope(t, op_region),
        whiten(t, xpv),
        t.back_matrix(),
    )
