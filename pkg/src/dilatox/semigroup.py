"""Normal forms in the inverse semigroup generated by dilatations.

On a linear structure every finite composition of dilatations collapses to
one of three canonical shapes: the identity, a single dilatation (when the
coefficient product differs from 1), or a left translation (when the product
is exactly 1).  This module composes canonical elements pairwise, folds
words of dilatations into canonical form, and verifies each normal form
pointwise against the factor-by-factor application of the word.

Composition convention: ``compose_canonical(a, b)`` is the map
``z -> a(b(z))``, so in ``Word.factors`` the first factor is applied first
and the fold builds ``f_last o ... o f_0``.

Centers produced by the fixed-point solvers are only accepted after a
pointwise verification at probe points; otherwise normalization aborts with
``NoConvergence`` rather than returning an unverified form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .axioms import CheckReport
from .core import DilatationMap, DilatationStructure, LINEARITY_EXACT, as_coefficient
from .errors import (
    DomainViolation,
    NoConvergence,
    NotLinearModel,
    UnitCoefficient,
)
from .menelaos import banach_iteration, composition_center

_VERIFY_TOL = 1e-9


@dataclass(frozen=True)
class Identity:
    """The identity map."""


@dataclass(frozen=True)
class Dilatation:
    """The map ``z -> dilate(center, coeff, z)`` with ``coeff != 1``."""

    center: tuple
    coeff: float


@dataclass(frozen=True)
class LeftTranslation:
    """The map ``z -> g * z`` (vector models: ``z -> g + z``)."""

    g: tuple


CanonicalElement = Identity | Dilatation | LeftTranslation


@dataclass(frozen=True)
class Word:
    """A nonempty sequence of dilatation factors, applied first-to-last."""

    factors: tuple[DilatationMap, ...]

    def __post_init__(self):
        if not self.factors:
            raise DomainViolation("a word needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    def coefficient_product(self) -> float:
        prod = 1.0
        for f in self.factors:
            prod *= f.coeff
        return prod

    def inverse(self) -> "Word":
        """The reversed word of inverted factors."""
        return Word(tuple(DilatationMap(f.center, 1.0 / f.coeff) for f in reversed(self.factors)))


def dilatation_element(center, coeff: float) -> CanonicalElement:
    """Canonical dilatation, collapsing coefficient 1 to the identity."""
    coeff = float(as_coefficient(coeff))
    if coeff == 1.0:
        return Identity()
    return Dilatation(tuple(float(c) for c in np.asarray(center, dtype=float)), coeff)


def translation_element(S: DilatationStructure, g) -> CanonicalElement:
    """Canonical left translation, collapsing the identity element."""
    g = np.asarray(g, dtype=float)
    if np.array_equal(g, S.require_group().identity()):
        return Identity()
    return LeftTranslation(tuple(float(c) for c in g))


def apply_canonical(S: DilatationStructure, e: CanonicalElement, z):
    """Evaluate a canonical element at ``z`` (batched like every other op)."""
    z = S.as_point(z)
    if isinstance(e, Identity):
        return z.copy()
    if isinstance(e, Dilatation):
        return S.dilate(np.asarray(e.center), e.coeff, z)
    if isinstance(e, LeftTranslation):
        return S.require_group().mul(np.asarray(e.g), z)
    raise TypeError(f"not a canonical element: {e!r}")


def apply_word(S: DilatationStructure, w: Word, z):
    """Factor-by-factor application of a word (first factor first)."""
    out = S.as_point(z)
    for f in w.factors:
        out = S.dilate(np.asarray(f.center), f.coeff, out)
    return out


def translation_from_pair(S: DilatationStructure, x, y, eps) -> CanonicalElement:
    """The translation equal to ``dilate(x, eps, dilate(y, 1/eps, .))``.

    Its element is ``x * dilation(eps, inv(x) y) * inv(y)``; for ``eps == 1``
    or ``x == y`` the factors cancel and the identity comes back.
    """
    M = _require_linear(S)
    eps = float(as_coefficient(eps))
    x = S.as_point(x)
    y = S.as_point(y)
    if eps == 1.0:
        return Identity()
    g = M.mul(M.mul(x, M.dilation(eps, M.left_diff(x, y))), M.inv(y))
    return translation_element(S, g)


def compose_canonical(S: DilatationStructure, a: CanonicalElement, b: CanonicalElement,
                      tol: float = _VERIFY_TOL) -> CanonicalElement:
    """Canonical form of ``z -> a(b(z))`` on a linear structure.

    Translations compose by the group product; a dilatation pair composes to
    a dilatation at the solved fixed point (or to a translation when the
    coefficient product is exactly 1); mixed pairs keep the dilatation
    coefficient and move the center to the fixed point of the composition.
    Solver-produced centers are verified pointwise before being returned.
    """
    M = _require_linear(S)
    if isinstance(a, Identity):
        return b
    if isinstance(b, Identity):
        return a

    if isinstance(a, LeftTranslation) and isinstance(b, LeftTranslation):
        return translation_element(S, M.mul(np.asarray(a.g), np.asarray(b.g)))

    if isinstance(a, Dilatation) and isinstance(b, Dilatation):
        product = a.coeff * b.coeff
        if product == 1.0:
            out = translation_from_pair(S, np.asarray(a.center), np.asarray(b.center), a.coeff)
        else:
            w = composition_center(S, np.asarray(a.center), a.coeff,
                                   np.asarray(b.center), b.coeff)
            _check_center_in_domain(S, w, (a.center, b.center))
            out = dilatation_element(w, product)
    else:
        dil = a if isinstance(a, Dilatation) else b
        w = _mixed_center(S, a, b, dil.coeff)
        _check_center_in_domain(S, w, (dil.center,))
        out = dilatation_element(w, dil.coeff)

    _verify_composition(S, a, b, out, tol)
    return out


def _mixed_center(S, a, b, coeff):
    """Fixed point of a translation-dilatation composition via Picard
    iteration of the contracting direction (the map itself for coeff < 1,
    its inverse otherwise; both share the fixed point)."""
    if coeff < 1.0:
        forward = _canonical_callable(S, a, b)
        seed = np.asarray((a if isinstance(a, Dilatation) else b).center)
        return _picard(S, forward, seed)
    inverse_pair = (_invert_element(S, b), _invert_element(S, a))
    backward = _canonical_callable(S, *inverse_pair)
    seed = np.asarray((a if isinstance(a, Dilatation) else b).center)
    return _picard(S, backward, seed)


def _canonical_callable(S, a, b):
    def call(z):
        return apply_canonical(S, a, apply_canonical(S, b, z))

    return call


def _invert_element(S, e):
    if isinstance(e, Identity):
        return e
    if isinstance(e, Dilatation):
        return Dilatation(e.center, 1.0 / e.coeff)
    return LeftTranslation(tuple(float(c) for c in S.require_group().inv(np.asarray(e.g))))


def _picard(S, call, z0, tol=1e-13, max_iter=2000):
    z = S.as_point(z0)
    scale = 1.0 + float(np.max(np.abs(z)))
    for _ in range(max_iter):
        z_next = call(z)
        if float(S.coord_dist(z_next, z)) <= tol * scale:
            return z_next
        z = z_next
    raise NoConvergence("translation-dilatation composition has no reachable fixed point")


def _check_center_in_domain(S, w, anchors):
    radius = S.domain.inner
    if all(float(S.dist(np.asarray(c), w)) > radius for c in anchors):
        raise DomainViolation(
            "composed dilatation center drifted outside the working domain"
        )


def _verify_composition(S, a, b, out, tol):
    zs = _probe_points(S, a, b, out)
    got = apply_canonical(S, out, zs)
    want = apply_canonical(S, a, apply_canonical(S, b, zs))
    residual = float(np.max(S.coord_dist(got, want)))
    if residual > tol * (1.0 + float(np.max(np.abs(zs)))):
        raise NoConvergence(
            f"composition verification failed: pointwise residual {residual:.3g}"
        )


def _probe_points(S, *elements):
    M = S.require_group()
    anchors = [np.asarray(S.identity_point(), dtype=float)]
    for e in elements:
        if isinstance(e, Dilatation):
            anchors.append(np.asarray(e.center))
    base = anchors[:1][0] if len(anchors) == 1 else np.mean(anchors, axis=0)
    h = 0.2 * S.domain.closeness
    offs = np.concatenate([np.zeros((1, S.dimension)),
                           h * np.eye(S.dimension),
                           -h * np.eye(S.dimension)])
    return M.mul(base, offs)


def normalize_word(S: DilatationStructure, w: Word, tol: float = _VERIFY_TOL) -> CanonicalElement:
    """Fold a word of dilatations into canonical form.

    Intermediate compositions must remain inside the working domain; a wild
    center aborts with ``DomainViolation`` rather than guessing at a domain
    continuation.
    """
    _require_linear(S)
    centers = np.asarray([f.center for f in w.factors], dtype=float)
    if centers.shape[-1] != S.dimension:
        raise DomainViolation("word factor centers do not match the model dimension")
    pairwise = S.dist(centers[:, None, :], centers[None, :, :])
    if float(np.max(pairwise)) > S.domain.closeness:
        raise DomainViolation("word centers are not pairwise sufficiently closed")

    out: CanonicalElement = dilatation_element(w.factors[0].center, w.factors[0].coeff)
    for f in w.factors[1:]:
        out = compose_canonical(S, dilatation_element(f.center, f.coeff), out, tol)
    return out


def verify_normal_form(S: DilatationStructure, w: Word, e: CanonicalElement,
                       sample_points, tol: float = 1e-8) -> CheckReport:
    """Pointwise residual between the word and its claimed normal form."""
    zs = S.as_point(sample_points)
    got = apply_canonical(S, e, zs)
    want = apply_word(S, w, zs)
    residuals = np.atleast_1d(S.coord_dist(got, want))
    k = int(np.argmax(residuals))
    witness = {"z": tuple(float(c) for c in np.atleast_2d(zs)[k])}
    return CheckReport(
        check="normal_form",
        samples=int(residuals.size),
        max_residual=float(residuals[k]),
        witness=witness,
        passed=float(residuals[k]) <= tol,
        tolerance=tol,
    )


def _require_linear(S: DilatationStructure):
    if S.linearity_flag != LINEARITY_EXACT:
        raise NotLinearModel("semigroup normalization needs exactly commuting dilatations")
    return S.require_group()


# -- text serialization -------------------------------------------------------

def canonical_to_text(e: CanonicalElement) -> str:
    """Render: ``I``, ``D(c0;...;ck;coeff)`` or ``T(g0;...;gk)``."""
    if isinstance(e, Identity):
        return "I"
    if isinstance(e, Dilatation):
        fields = [repr(c) for c in e.center] + [repr(e.coeff)]
        return "D(" + ";".join(fields) + ")"
    if isinstance(e, LeftTranslation):
        return "T(" + ";".join(repr(c) for c in e.g) + ")"
    raise TypeError(f"not a canonical element: {e!r}")


def canonical_from_text(text: str, dim: int) -> CanonicalElement:
    text = text.strip()
    if text == "I":
        return Identity()
    kind, fields = _parse_tagged(text)
    if kind == "D":
        if len(fields) != dim + 1:
            raise DomainViolation(f"D(...) needs {dim + 1} fields for dimension {dim}")
        return Dilatation(tuple(fields[:-1]), fields[-1])
    if kind == "T":
        if len(fields) != dim:
            raise DomainViolation(f"T(...) needs {dim} fields for dimension {dim}")
        return LeftTranslation(tuple(fields))
    raise DomainViolation(f"unknown canonical element tag {kind!r}")


def word_to_text(w: Word) -> str:
    """Factors separated by whitespace, first-applied first."""
    return " ".join(
        "D(" + ";".join([repr(c) for c in f.center] + [repr(f.coeff)]) + ")"
        for f in w.factors
    )


def word_from_text(text: str, dim: int) -> Word:
    factors = []
    for token in text.split():
        kind, fields = _parse_tagged(token)
        if kind != "D" or len(fields) != dim + 1:
            raise DomainViolation(
                f"word factors must be D(...) with {dim + 1} fields, got {token!r}"
            )
        factors.append(DilatationMap(tuple(fields[:-1]), fields[-1]))
    if not factors:
        raise DomainViolation("empty word text")
    return Word(tuple(factors))


def _parse_tagged(token: str):
    token = token.strip()
    if len(token) < 3 or token[1] != "(" or not token.endswith(")"):
        raise DomainViolation(f"malformed element text {token!r}")
    kind = token[0]
    try:
        fields = [float(part) for part in token[2:-1].split(";")]
    except ValueError as exc:
        raise DomainViolation(f"bad number in element text {token!r}") from exc
    return kind, fields
