"""Model-independent dilatation-structure interface and derived zoom operators.

A dilatation structure is a metric space together with a family of based
contractions ``delta(x, eps, .)``: each map fixes the base point ``x`` and
pulls every other point toward it by the coefficient ``eps``.  Coefficients
live in the multiplicative group of positive reals; values above 1 denote the
inverse (expanding) maps.

Everything here works through the :class:`DilatationStructure` interface.
Concrete spaces live in :mod:`dilatox.models`.  All point arguments accept
numpy arrays of shape ``(..., dim)`` and broadcast over leading axes; the
coefficient may be a scalar or an array broadcastable against those axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainViolation,
    NonFiniteInput,
    NonPositiveScalar,
)

#: Default absolute+relative comparison tolerance for derived checks.
DEFAULT_TOL = 1e-9

LINEARITY_EXACT = "exact"
LINEARITY_NONE = "none"


def as_coefficient(eps) -> float | np.ndarray:
    """Validate a dilatation coefficient (scalar or array), return as float(s)."""
    arr = np.asarray(eps, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("dilatation coefficient must be finite")
    if not np.all(arr > 0.0):
        raise NonPositiveScalar(f"dilatation coefficient must be positive, got {eps!r}")
    if arr.ndim == 0:
        return float(arr)
    return arr


@dataclass(frozen=True)
class ModelDomain:
    """Working-domain constants of a structure.

    ``inner`` and ``outer`` are the classical radius constants (outer bounded
    by inner, both above 1); for the group models they act as sampling radii
    rather than hard boundaries, since those dilatations are globally defined.
    ``closeness`` is the radius within which points count as "sufficiently
    closed" for the second-order operators and the solvers.
    """

    inner: float = 2.0
    outer: float = 1.5
    closeness: float = 1.0

    def __post_init__(self):
        if not (1.0 < self.outer <= self.inner):
            raise DomainViolation(
                f"domain radii must satisfy 1 < outer <= inner, got "
                f"outer={self.outer}, inner={self.inner}"
            )
        if not self.closeness > 0.0:
            raise DomainViolation("closeness radius must be positive")


@dataclass(frozen=True)
class DilatationMap:
    """The based map delta(center, coeff, .), stored by its two parameters."""

    center: tuple[float, ...]
    coeff: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "coeff", float(self.coeff))
        if not all(np.isfinite(self.center)):
            raise NonFiniteInput("dilatation center must be finite")
        as_coefficient(self.coeff)


class DilatationStructure:
    """A metric space with based dilatations.

    Subclasses provide ``dist`` and ``dilate``; the object is immutable after
    construction and all operations are pure, so instances may be shared
    across threads.  ``linearity_flag`` is "exact" when the dilatations
    commute exactly (group models) and "none" otherwise.
    """

    dimension: int
    domain: ModelDomain
    linearity_flag: str
    model: object

    def dist(self, p, q):
        """Distance between points, broadcast over leading axes."""
        raise NotImplementedError

    def dilate(self, x, eps, y):
        """Apply the dilatation based at ``x`` with coefficient ``eps`` to ``y``."""
        raise NotImplementedError

    def coord_dist(self, p, q):
        """Euclidean distance between coordinate tuples.

        Used as the comparator when two computed points should coincide.  The
        structure metric itself is unsuitable for that job on the group
        models: the gauge is Holder-1/2 in the graded coordinates, so it
        amplifies float-level coordinate noise to ~1e-8.
        """
        p = self.as_point(p)
        q = self.as_point(q)
        return np.linalg.norm(p - q, axis=-1)

    def as_point(self, p) -> np.ndarray:
        """Validate coordinates: float array of trailing length ``dimension``."""
        arr = np.asarray(p, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dimension:
            raise DimensionMismatch(
                f"expected trailing dimension {self.dimension}, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("point coordinates must be finite")
        return arr

    def identity_point(self) -> np.ndarray:
        """A canonical base point (group identity, or the chart center)."""
        raise NotImplementedError

    def sample(self, rng, n, radius=None) -> np.ndarray:
        """Draw ``n`` points within ``radius`` of the canonical base point."""
        raise NotImplementedError

    def sample_near(self, rng, x, radius, n=None) -> np.ndarray:
        """Draw points within distance ``radius`` of ``x`` (row-wise for batched x)."""
        raise NotImplementedError

    def require_group(self):
        """Return the underlying group model, or fail for non-linear structures."""
        from .errors import NotLinearModel

        raise NotLinearModel(
            f"{type(self).__name__} has no exact group structure"
        )


def cone_quotient(S: DilatationStructure, x, eps, u, v):
    """Rescaled distance of dilated points: dist(delta u, delta v) / eps.

    Constant in ``eps`` for homogeneous models; its limit as eps -> 0 is the
    tangent-space distance at ``x``.  Requires ``eps`` in (0, 1] and both
    points within the inner working radius of ``x``.
    """
    x = S.as_point(x)
    u = S.as_point(u)
    v = S.as_point(v)
    e = as_coefficient(eps)
    if np.any(np.asarray(e) > 1.0):
        raise DomainViolation("cone quotient takes contraction coefficients eps <= 1")
    _require_within(S, x, u, S.domain.inner, "u")
    _require_within(S, x, v, S.domain.inner, "v")
    return S.dist(S.dilate(x, e, u), S.dilate(x, e, v)) / e


def approx_difference(S: DilatationStructure, x, eps, u, v):
    """Second-order difference: zoom in at ``x``, read ``v`` from the dilated ``u``.

    Composes ``delta(dilate(x, eps, u), 1/eps, dilate(x, eps, v))``.  As
    eps -> 0 this converges (for strong structures) to the tangent-group
    difference of ``u`` and ``v`` based at ``x``.
    """
    x, u, v, e = _close_triple(S, x, eps, u, v)
    w1 = S.dilate(x, e, u)
    w2 = S.dilate(x, e, v)
    return S.dilate(w1, 1.0 / e, w2)


def approx_sum(S: DilatationStructure, x, eps, u, v):
    """Second-order sum: dilate ``v`` at the dilated ``u``, then zoom back out.

    Composes ``delta(x, 1/eps, delta(dilate(x, eps, u), eps, v))``.  Its
    eps -> 0 limit is the tangent-group operation with neutral element ``x``.
    """
    x, u, v, e = _close_triple(S, x, eps, u, v)
    w1 = S.dilate(x, e, u)
    return S.dilate(x, 1.0 / e, S.dilate(w1, e, v))


def approx_inverse(S: DilatationStructure, x, eps, u):
    """Approximant of the tangent-group inverse of ``u`` at ``x``."""
    return approx_difference(S, x, eps, u, x)


def _close_triple(S, x, eps, u, v):
    x = S.as_point(x)
    u = S.as_point(u)
    v = S.as_point(v)
    e = as_coefficient(eps)
    if np.any(np.asarray(e) > 1.0):
        raise DomainViolation(
            "second-order operators take contraction coefficients eps <= 1"
        )
    c = S.domain.closeness
    _require_within(S, x, u, c, "u")
    _require_within(S, x, v, c, "v")
    _require_within(S, u, v, c, "v relative to u")
    return x, u, v, e


def _require_within(S, base, p, radius, label):
    d = np.max(S.dist(base, p))
    if d > radius * (1.0 + 1e-12):
        raise DomainViolation(
            f"point {label} at distance {d:.6g} exceeds working radius {radius:.6g}"
        )
