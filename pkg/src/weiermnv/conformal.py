"""Finite and infinitesimal conformal transformations of R^3 acting on
immersed tori, and the invariance report comparing conserved functionals
before and after a transform.

Finite transforms are the primary test vehicle (no ODE error); the
infinitesimal generators are kept as independent cross-checks.  A special
conformal flow exp(eps K_e) is built exactly as inversion-translation-
inversion, which is what the finite-difference oracles differentiate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CenterOnSurface
from .immersion import Immersion, fundamental_forms, make_immersion, willmore
from .invariants import mnv_recursion
from .torus_grid import ScalarField
from .weierstrass import SpinorField, extract_potential, recover_spinor

INVERSION_SAFETY = 5.0  # centers must sit this many cell diameters off the surface


@dataclass(frozen=True)
class ConformalTransform:
    """One generator of the conformal group of R^3, or a composition.

    kind: translation | rotation | dilation | inversion | reflection | composition.
    compose(t1, t2) applies t1 first.
    """

    kind: str
    vector: np.ndarray | None = None
    matrix: np.ndarray | None = None
    factor: float = 1.0
    parts: tuple = ()

    def describe(self) -> dict:
        doc = {"kind": self.kind}
        if self.vector is not None:
            doc["vector"] = [float(v) for v in self.vector]
        if self.matrix is not None:
            doc["matrix"] = [[float(v) for v in row] for row in self.matrix]
        if self.kind == "dilation":
            doc["factor"] = self.factor
        if self.parts:
            doc["parts"] = [p.describe() for p in self.parts]
        return doc


def translation(v) -> ConformalTransform:
    return ConformalTransform("translation", vector=np.asarray(v, dtype=float))


def rotation(matrix) -> ConformalTransform:
    A = np.asarray(matrix, dtype=float)
    if A.shape != (3, 3) or np.max(np.abs(A @ A.T - np.eye(3))) > 1e-12 or np.linalg.det(A) < 0:
        raise ValueError("rotation needs an orthogonal 3x3 matrix with det +1")
    return ConformalTransform("rotation", matrix=A)


def rotation_about_axis(axis, angle: float) -> ConformalTransform:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return rotation(np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K))


def dilation(k: float) -> ConformalTransform:
    if not k > 0:
        raise ValueError("dilation factor must be positive")
    return ConformalTransform("dilation", factor=float(k))


def inversion(center) -> ConformalTransform:
    return ConformalTransform("inversion", vector=np.asarray(center, dtype=float))


def reflection(v) -> ConformalTransform:
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("reflection needs a unit vector")
    return ConformalTransform("reflection", vector=v)


def compose(*transforms: ConformalTransform) -> ConformalTransform:
    return ConformalTransform("composition", parts=tuple(transforms))


def special_conformal(direction, eps: float) -> ConformalTransform:
    """exp(eps K_e) for |direction| = 1: inversion, shift by -eps*e, inversion."""
    e = np.asarray(direction, dtype=float)
    origin = inversion([0.0, 0.0, 0.0])
    return compose(origin, translation(-eps * e), origin)


def cell_diameter(X: Immersion) -> float:
    """Largest R^3 edge of the lattice cells on the surface."""
    return float(np.max(_local_cell_size(X.points)))


def _local_cell_size(points: np.ndarray) -> np.ndarray:
    """Per-node largest edge to the forward neighbors."""
    d1 = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=-1)
    d2 = np.linalg.norm(np.roll(points, -1, axis=1) - points, axis=-1)
    return np.maximum(d1, d2)


def _flatten(t: ConformalTransform):
    if t.kind == "composition":
        for part in t.parts:
            yield from _flatten(part)
    else:
        yield t


def _apply_points(t: ConformalTransform, pts: np.ndarray) -> np.ndarray:
    if t.kind == "translation":
        return pts + t.vector
    if t.kind == "rotation":
        return pts @ t.matrix.T
    if t.kind == "dilation":
        return t.factor * pts
    if t.kind == "reflection":
        return pts - 2.0 * np.outer(pts @ t.vector, t.vector).reshape(pts.shape)
    if t.kind == "inversion":
        # sphere inversion about the center: an involution.  Differs from the
        # centered-at-origin normalization only by a translation by the center.
        rel = pts - t.vector
        dist2 = np.sum(rel**2, axis=-1)
        if np.min(dist2) == 0.0:
            raise CenterOnSurface("point sits exactly on the inversion center")
        return t.vector + rel / dist2[..., None]
    if t.kind == "composition":
        for part in t.parts:
            pts = _apply_points(part, pts)
        return pts
    raise ValueError(f"unknown transform kind {t.kind!r}")


def apply(t: ConformalTransform, X: Immersion, safety: float = INVERSION_SAFETY) -> Immersion:
    """Node-wise transformed immersion on the unchanged grid.

    Conformal maps fix the conformal coordinate up to shifts, so tau and the
    lattice are reused.  Every inversion along the chain must keep its center
    at least `safety` local cell sizes away from the current surface, node by
    node, so the conformal factor stays resolvable on the fixed grid.
    """
    pts = X.points
    for part in _flatten(t):
        if part.kind == "inversion":
            dist = np.linalg.norm(pts - part.vector, axis=-1)
            ratio = dist / _local_cell_size(pts)
            if np.min(ratio) <= safety:
                raise CenterOnSurface(
                    f"inversion center {np.min(ratio):.2f} local cells from the surface "
                    f"(required > {safety:.1f})"
                )
        pts = _apply_points(part, pts.reshape(-1, 3)).reshape(X.points.shape)
    return make_immersion(X.grid, pts)


def conformal_scale(t: ConformalTransform, p) -> np.ndarray:
    """Pointwise metric factor Lambda(p): |d(Tp)| = Lambda |dp|."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    lam = np.ones(pts.shape[0])
    chain = t.parts if t.kind == "composition" else (t,)
    for part in chain:
        if part.kind == "dilation":
            lam = lam * part.factor
        elif part.kind == "inversion":
            dist2 = np.sum((pts - part.vector) ** 2, axis=-1)
            if np.min(dist2) == 0.0:
                raise CenterOnSurface("conformal scale undefined at the inversion center")
            lam = lam / dist2
        elif part.kind == "composition":
            lam = lam * conformal_scale(part, pts)
        pts = _apply_points(part, pts)
    return lam if np.asarray(p).ndim > 1 else float(lam[0])


@dataclass(frozen=True)
class GeneratorAction:
    """Infinitesimal conformal generator: P_a, Omega_ab (a<b), D, or K_a."""

    kind: str
    a: int = 1
    b: int = 2

    def __post_init__(self):
        if self.kind not in ("P", "Omega", "D", "K"):
            raise ValueError("kind must be one of P, Omega, D, K")
        if not (1 <= self.a <= 3 and 1 <= self.b <= 3):
            raise ValueError("indices must lie in 1..3")
        if self.kind == "Omega" and not self.a < self.b:
            raise ValueError("Omega needs a < b")


def infinitesimal_deform(g: GeneratorAction, X: Immersion) -> np.ndarray:
    """delta X per node for the generator g."""
    pts = X.points
    if g.kind == "P":
        out = np.zeros_like(pts)
        out[:, :, g.a - 1] = 1.0
        return out
    if g.kind == "Omega":
        out = np.zeros_like(pts)
        out[:, :, g.b - 1] = pts[:, :, g.a - 1]
        out[:, :, g.a - 1] = -pts[:, :, g.b - 1]
        return out
    if g.kind == "D":
        return pts.copy()
    norm2 = np.sum(pts**2, axis=-1)
    out = 2.0 * pts * pts[:, :, g.a - 1][:, :, None]
    out[:, :, g.a - 1] -= norm2
    return out


def deform_potential_analytic(X: Immersion) -> tuple[ScalarField, SpinorField]:
    """Potential and spinor deformation under the -K_3 generator.

    delta U = |psi1|^2 - |psi2|^2;
    delta psi1 = -X3 psi1 + i W conj(psi2),
    delta psi2 = -X3 psi2 - i W conj(psi1),  W = X1 - i X2.
    Both are independent of rigid translations of X (a translation shifts the
    generator by rotations/dilations/translations, none of which move U).
    """
    s = recover_spinor(X)
    du = ScalarField(X.grid, (np.abs(s.psi1) ** 2 - np.abs(s.psi2) ** 2).astype(np.complex128))
    w = X.points[:, :, 0] - 1j * X.points[:, :, 1]
    x3 = X.points[:, :, 2]
    dpsi = SpinorField(
        X.grid,
        -x3 * s.psi1 + 1j * w * np.conj(s.psi2),
        -x3 * s.psi2 - 1j * w * np.conj(s.psi1),
        s.mult1,
        s.mult2,
    )
    return du, dpsi


@dataclass
class InvarianceReport:
    """Conserved functionals of an immersion before/after a conformal transform."""

    transform: dict
    h_before: list
    h_after: list
    willmore_before: float
    willmore_after: float
    meta: dict = field(default_factory=dict)

    @property
    def abs_diffs(self):
        return [abs(a - b) for a, b in zip(self.h_after, self.h_before)]

    @property
    def rel_diffs(self):
        # relative to the largest invariant of equal-or-lower order, so the
        # structural zeros of special families do not divide by noise
        scale = max(max(abs(h) for h in self.h_before), 1e-300)
        return [d / max(abs(hb), 1e-6 * scale) for d, hb in zip(self.abs_diffs, self.h_before)]

    @property
    def willmore_rel_diff(self) -> float:
        return abs(self.willmore_after - self.willmore_before) / abs(self.willmore_before)

    def to_dict(self) -> dict:
        return {
            "transform": self.transform,
            "h_before": [[h.real, h.imag] for h in self.h_before],
            "h_after": [[h.real, h.imag] for h in self.h_after],
            "abs_diff": self.abs_diffs,
            "rel_diff": self.rel_diffs,
            "willmore_before": self.willmore_before,
            "willmore_after": self.willmore_after,
            "willmore_rel_diff": self.willmore_rel_diff,
            **self.meta,
        }

    def rows(self):
        """CSV rows: k, re/im before, re/im after, abs diff, rel diff."""
        out = []
        for k, (hb, ha, ad, rd) in enumerate(
            zip(self.h_before, self.h_after, self.abs_diffs, self.rel_diffs), start=1
        ):
            out.append([k, hb.real, hb.imag, ha.real, ha.imag, ad, rd])
        return out


def invariance_report(
    X: Immersion, t: ConformalTransform, K: int, safety: float = INVERSION_SAFETY
) -> InvarianceReport:
    """Run the full geometric pipeline on X and on apply(t, X) and compare.

    The transformed potential is recomputed from the transformed points
    through forms -> H -> e^alpha -> U; no shortcut through the known
    transformation laws is taken.
    """
    u0 = ScalarField(X.grid, extract_potential(X).values.real)
    _, inv0 = mnv_recursion(u0, K)
    Y = apply(t, X, safety=safety)
    u1 = ScalarField(Y.grid, extract_potential(Y).values.real)
    _, inv1 = mnv_recursion(u1, K)
    meta = {
        "nx": X.grid.nx,
        "ny": X.grid.ny,
        "tau": [X.grid.tau.real, X.grid.tau.imag],
        "conformality_residual_before": X.conformality_residual,
        "conformality_residual_after": Y.conformality_residual,
    }
    return InvarianceReport(
        transform=t.describe(),
        h_before=inv0.h,
        h_after=inv1.h,
        willmore_before=willmore(X),
        willmore_after=willmore(Y),
        meta=meta,
    )


def random_transform(rng: np.random.Generator, X: Immersion, kind: str | None = None,
                     safety: float = INVERSION_SAFETY) -> ConformalTransform:
    """Random element of one of the five generator families.

    Inversion centers are drawn outside the surface's bounding sphere with at
    least the required safety margin.
    """
    if kind is None:
        kind = rng.choice(["translation", "rotation", "dilation", "inversion", "reflection"])
    if kind == "translation":
        return translation(rng.normal(scale=2.0, size=3))
    if kind == "rotation":
        return rotation_about_axis(rng.normal(size=3), rng.uniform(0.2, np.pi))
    if kind == "dilation":
        return dilation(float(np.exp(rng.uniform(-1.2, 1.2))))
    if kind == "reflection":
        v = rng.normal(size=3)
        return reflection(v / np.linalg.norm(v))
    if kind == "inversion":
        centroid = X.points.reshape(-1, 3).mean(axis=0)
        radius = np.max(np.linalg.norm(X.points.reshape(-1, 3) - centroid, axis=1))
        margin = safety * cell_diameter(X)
        for _ in range(100):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            center = centroid + direction * (radius + margin) * rng.uniform(1.3, 2.5)
            dist = np.min(np.linalg.norm(X.points.reshape(-1, 3) - center, axis=1))
            if dist > margin * 1.2:
                return inversion(center)
        raise CenterOnSurface("could not place an inversion center off the surface")
    raise ValueError(f"unknown transform kind {kind!r}")
