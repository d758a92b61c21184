"""Fixed points of composed dilatations.

A composition ``dilate(x, eps, dilate(y, mu, .))`` with ``eps*mu < 1`` is a
contraction; on linear structures it is itself a dilatation, centered at the
contraction's unique fixed point ``w`` with coefficient ``eps*mu``
(the Menelaos property).  Two independent solvers find ``w``:

* :func:`menelaos_iteration` -- the two-sequence scheme
  ``y_{n+1} = dilate(x_n, eps, y_n)``, ``x_{n+1} = dilate(y_{n+1}, mu, x_n)``,
  whose pair gap contracts exactly by ``eps*mu`` per step on linear models;
* :func:`banach_iteration` -- plain Picard iteration of the composition,
  which needs no linearity and works on any model.

The two-sequence solver runs in the group representation: it tracks the
difference element ``g_n = inv(x_n) * y_n``, which the step maps exactly to
``dilation(eps*mu, g_n)``.  Tracking the difference keeps the geometric gap
law accurate to machine relative precision at arbitrarily small gaps, where
recomputing gauge distances from absolute coordinates would lose most
digits.  A cross-check against the raw two-dilatation step lives in the
tests.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .axioms import CheckReport
from .core import DilatationStructure, as_coefficient
from .errors import DomainViolation, NoConvergence, UnitCoefficient

DEFAULT_SOLVER_TOL = 1e-12
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class TraceRow:
    n: int
    x: tuple
    y: tuple
    gap: float


@dataclass(frozen=True)
class IterationTrace:
    """Recorded two-sequence iteration: rows, the fixed point, and status."""

    rows: tuple[TraceRow, ...]
    w: tuple
    iterations: int
    converged: bool

    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.rows])


def _as_tuple(p) -> tuple:
    return tuple(float(c) for c in np.asarray(p, dtype=float))


def _check_contraction(eps: float, mu: float):
    if eps * mu == 1.0:
        raise UnitCoefficient(
            "coefficient product 1 gives a translation, not a contraction"
        )
    if eps * mu > 1.0:
        raise UnitCoefficient(
            f"composition with eps*mu = {eps * mu:.6g} > 1 is not a contraction; "
            "solve the inverse composition instead"
        )


def menelaos_iteration(S: DilatationStructure, x, y, eps, mu,
                       tol: float = DEFAULT_SOLVER_TOL,
                       max_iter: int = DEFAULT_MAX_ITER) -> IterationTrace:
    """Two-sequence iteration converging to the composition's fixed point.

    Requires a linear structure, ``eps*mu < 1`` and the pair strictly within
    the closeness radius.  Stops once the pair gap falls below
    ``tol * (1 + initial gap)`` and the remaining tail of x-updates is below
    the same threshold, so ``w`` is the final x iterate.
    """
    M = S.require_group()
    eps = float(as_coefficient(eps))
    mu = float(as_coefficient(mu))
    _check_contraction(eps, mu)
    x = S.as_point(x)
    y = S.as_point(y)
    d0 = float(S.dist(x, y))
    if d0 >= S.domain.closeness:
        raise DomainViolation(
            f"pair at distance {d0:.6g} is not strictly within the closeness "
            f"radius {S.domain.closeness:.6g}"
        )

    rate = eps * mu
    threshold = tol * (1.0 + d0)
    # Once gaps stop being recorded, the x iterates still move by about
    # eps*(1+mu)/(1-rate) times the current gap; keep stepping until that
    # tail is inside the threshold too.
    tail_factor = max(1.0, eps * (1.0 + mu) / (1.0 - rate))

    g = M.left_diff(x, y)
    rows = []
    n = 0
    gap = float(M.norm(g))
    rows.append(TraceRow(0, _as_tuple(x), _as_tuple(y), gap))
    converged = gap * tail_factor <= threshold
    while not converged and n < max_iter:
        step = M.mul(g, M.dilation(mu, M.inv(g)))
        x = M.mul(x, M.dilation(eps, step))
        g = M.dilation(rate, g)
        gap = float(M.norm(g))
        n += 1
        rows.append(TraceRow(n, _as_tuple(x), _as_tuple(M.mul(x, g)), gap))
        converged = gap * tail_factor <= threshold
    if not converged:
        raise NoConvergence(f"gap {gap:.3g} above threshold after {n} iterations")
    return IterationTrace(tuple(rows), _as_tuple(x), n, True)


def banach_iteration(S: DilatationStructure, x, y, eps, mu, z0,
                     tol: float = DEFAULT_SOLVER_TOL,
                     max_iter: int = 500) -> np.ndarray:
    """Picard iteration of ``z -> dilate(x, eps, dilate(y, mu, z))``.

    Works on any model (no linearity needed) as long as ``eps*mu < 1``.
    Stops when successive iterates agree to ``tol`` in coordinates.
    """
    eps = float(as_coefficient(eps))
    mu = float(as_coefficient(mu))
    _check_contraction(eps, mu)
    x = S.as_point(x)
    y = S.as_point(y)
    z = S.as_point(z0)
    scale = 1.0 + float(np.max(np.abs(z)))
    for _ in range(max_iter):
        z_next = S.dilate(x, eps, S.dilate(y, mu, z))
        if float(S.coord_dist(z_next, z)) <= tol * scale:
            return z_next
        z = z_next
    raise NoConvergence(f"no fixed point to tolerance {tol:g} in {max_iter} iterations")


def euclidean_center_closed_form(x, y, eps, mu) -> np.ndarray:
    """Fixed point of ``z -> x + eps*(y + mu*(z-y) - x)`` in a vector space:
    ``((1-eps)*x + eps*(1-mu)*y) / (1 - eps*mu)``."""
    eps = float(as_coefficient(eps))
    mu = float(as_coefficient(mu))
    if eps * mu == 1.0:
        raise UnitCoefficient("no affine fixed point for coefficient product 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return ((1.0 - eps) * x + eps * (1.0 - mu) * y) / (1.0 - eps * mu)


def composition_center(S: DilatationStructure, x, eps, y, mu,
                       tol: float = DEFAULT_SOLVER_TOL,
                       max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Center of the dilatation ``dilate(x, eps, dilate(y, mu, .))``.

    For ``eps*mu > 1`` the inverse composition (coefficients ``1/mu, 1/eps``
    in swapped order) is the contraction; it shares the same fixed point.
    """
    eps = float(as_coefficient(eps))
    mu = float(as_coefficient(mu))
    if eps * mu == 1.0:
        raise UnitCoefficient("coefficient product 1: the composition is a translation")
    if eps * mu > 1.0:
        trace = menelaos_iteration(S, y, x, 1.0 / mu, 1.0 / eps, tol, max_iter)
    else:
        trace = menelaos_iteration(S, x, y, eps, mu, tol, max_iter)
    return np.asarray(trace.w)


def verify_menelaos(S: DilatationStructure, x, y, eps, mu, w, sample_points,
                    tol: float = 1e-9) -> CheckReport:
    """Pointwise comparison of the composition against the single dilatation
    at ``w`` with the product coefficient."""
    eps = float(as_coefficient(eps))
    mu = float(as_coefficient(mu))
    zs = S.as_point(sample_points)
    lhs = S.dilate(x, eps, S.dilate(y, mu, zs))
    rhs = S.dilate(w, eps * mu, zs)
    residuals = np.atleast_1d(S.coord_dist(lhs, rhs))
    k = int(np.argmax(residuals))
    witness = {"z": _as_tuple(np.atleast_2d(zs)[k]), "eps": eps, "mu": mu}
    return CheckReport(
        check="menelaos",
        samples=int(residuals.size),
        max_residual=float(residuals[k]),
        witness=witness,
        passed=float(residuals[k]) <= tol,
        tolerance=tol,
    )


def check_invariance(S: DilatationStructure, trace: IterationTrace, eps, mu,
                     sample_points, tol: float = 1e-9) -> CheckReport:
    """The composed map built from any iteration row equals the original:
    ``dilate(x_n, eps, dilate(y_n, mu, .))`` is constant in ``n``."""
    eps = float(as_coefficient(eps))
    mu = float(as_coefficient(mu))
    zs = np.atleast_2d(S.as_point(sample_points))
    xs = np.array([r.x for r in trace.rows])
    ys = np.array([r.y for r in trace.rows])
    composed = S.dilate(xs[:, None, :], eps, S.dilate(ys[:, None, :], mu, zs[None, :, :]))
    residuals = S.coord_dist(composed, composed[0])
    flat = residuals.reshape(-1)
    k = int(np.argmax(flat))
    row, col = divmod(k, zs.shape[0])
    witness = {"n": int(row), "z": _as_tuple(zs[col])}
    return CheckReport(
        check="invariance",
        samples=int(flat.size),
        max_residual=float(flat[k]),
        witness=witness,
        passed=float(flat[k]) <= tol,
        tolerance=tol,
    )


def trace_to_csv(trace: IterationTrace) -> str:
    """CSV rendering of a trace: columns n, x coordinates, y coordinates, gap."""
    dim = len(trace.rows[0].x)
    buf = io.StringIO()
    headers = (
        ["n"]
        + [f"x{i}" for i in range(dim)]
        + [f"y{i}" for i in range(dim)]
        + ["gap"]
    )
    buf.write(",".join(headers) + "\n")
    for r in trace.rows:
        cells = [str(r.n)] + [repr(c) for c in r.x] + [repr(c) for c in r.y] + [repr(r.gap)]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()
