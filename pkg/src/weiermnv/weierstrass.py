"""Dirac operator, spinor representation of conformal immersions, and the
potential extraction with its energy-identity consistency check.

The operator is L = [[d_z, -U], [U, d_zbar]] with real potential U, acting on
two-component spinors that are periodic or anti-periodic over the lattice
(multipliers +-1 per direction).  A zero spinor LPsi = 0 generates a conformal
immersion through exact derivative relations; conversely a conformal immersion
determines (U, Psi) up to one global sign.

Potential extraction uses U = H e^alpha / 2, the unique node-wise formula
making 4 * Im(tau) * <<U^2>> equal the bending energy integral; the sign of U
follows the normal X_t1 x X_t2 through H.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchInconsistency,
    DiracResidualTooLarge,
    NonPeriodicImage,
    NotConformal,
)
from .immersion import (
    CONFORMAL_RTOL,
    Immersion,
    conformal_factor,
    fundamental_forms,
    make_immersion,
    willmore,
)
from .torus_grid import ScalarField, TorusGrid, average, d_z, d_zbar, twisted_derivative

DIRAC_RTOL = 1e-6


@dataclass
class SpinorField:
    """Two-component spinor on one fundamental cell.

    Values are stored on the cell; crossing a period applies the multiplier
    (mult1 along the period 1, mult2 along tau), each +1 or -1.
    """

    grid: TorusGrid
    psi1: np.ndarray = field(repr=False)
    psi2: np.ndarray = field(repr=False)
    mult1: int = 1
    mult2: int = 1

    def __post_init__(self):
        self.psi1 = np.asarray(self.psi1, dtype=np.complex128)
        self.psi2 = np.asarray(self.psi2, dtype=np.complex128)
        if self.psi1.shape != (self.grid.nx, self.grid.ny) or self.psi2.shape != self.psi1.shape:
            raise ValueError("spinor component shape does not match grid")
        if self.mult1 not in (-1, 1) or self.mult2 not in (-1, 1):
            raise ValueError("multipliers must be +1 or -1")

    @property
    def shifts(self) -> tuple[float, float]:
        """Fourier mode offsets realizing the (anti)periodicity."""
        return (0.0 if self.mult1 == 1 else 0.5, 0.0 if self.mult2 == 1 else 0.5)

    def conjugate_partner(self) -> "SpinorField":
        """(conj(psi2), -conj(psi1)): solves the same Dirac equation."""
        return SpinorField(self.grid, np.conj(self.psi2), -np.conj(self.psi1),
                           self.mult1, self.mult2)

    def rotated(self, alpha: complex, beta: complex) -> "SpinorField":
        """alpha * Psi + beta * (conj(psi2), -conj(psi1))."""
        return SpinorField(
            self.grid,
            alpha * self.psi1 + beta * np.conj(self.psi2),
            alpha * self.psi2 - beta * np.conj(self.psi1),
            self.mult1,
            self.mult2,
        )


@dataclass
class WeierstrassData:
    """Potential, spinor, and the integration constants of the representation."""

    U: ScalarField
    spinor: SpinorField
    constants: tuple[float, float, float] = (0.0, 0.0, 0.0)
    basepoint: tuple[int, int] = (0, 0)


def dirac_residual(U: ScalarField, s: SpinorField) -> float:
    """Max-norm of L Psi relative to the field scale."""
    a1, a2 = s.shifts
    dz1 = twisted_derivative(s.grid, s.psi1, a1, a2, "z")
    dzb2 = twisted_derivative(s.grid, s.psi2, a1, a2, "zbar")
    r1 = dz1 - U.values * s.psi2
    r2 = U.values * s.psi1 + dzb2
    scale = max(
        np.max(np.abs(dz1)),
        np.max(np.abs(U.values * s.psi2)),
        np.max(np.abs(U.values * s.psi1)),
        np.max(np.abs(dzb2)),
        np.max(np.abs(s.psi1) + np.abs(s.psi2)),
        1e-300,
    )
    return float(np.max(np.abs(r1) + np.abs(r2)) / scale)


def _lsq_antiderivative(grid: TorusGrid, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Zero-mean F with d_z F = p and d_zbar F = q (assumed compatible), least squares."""
    ph = np.fft.fft2(p)
    qh = np.fft.fft2(q)
    sz = grid.sym_dz
    szb = grid.sym_dzbar
    denom = np.abs(sz) ** 2 + np.abs(szb) ** 2
    denom[0, 0] = 1.0
    fh = (np.conj(sz) * ph + np.conj(szb) * qh) / denom
    fh[0, 0] = 0.0
    return np.fft.ifft2(fh)


def weierstrass_map(
    data: WeierstrassData,
    residual_tol: float = DIRAC_RTOL,
    period_rtol: float = 1e-8,
    allow_open: bool = False,
) -> Immersion:
    """Immersion generated by the spinor, by spectral antidifferentiation.

    Derivative relations (with F = X1 + i X2, W = X1 - i X2 = conj(F)):
        d_z F = i conj(psi1)^2        d_zbar F = -i conj(psi2)^2
        d_z X3 = -psi2 conj(psi1)     d_zbar X3 = -psi1 conj(psi2)
    Nonzero lattice means of the right-hand sides are translation periods of
    the image; unless allow_open is set the map must close into a torus.
    """
    U, s = data.U, data.spinor
    res = dirac_residual(U, s)
    if res > residual_tol:
        raise DiracResidualTooLarge(
            f"Dirac residual {res:.3e} exceeds {residual_tol:.1e}; integrands not closed"
        )
    grid = s.grid
    tau = grid.tau

    pf = 1j * np.conj(s.psi1) ** 2
    qf = -1j * np.conj(s.psi2) ** 2
    p3 = -s.psi2 * np.conj(s.psi1)
    q3 = -s.psi1 * np.conj(s.psi2)

    a_f, b_f = np.mean(pf), np.mean(qf)
    a_3, b_3 = np.mean(p3), np.mean(q3)
    # period vectors of the two cycles in R^3
    per1_c, per2_c = a_f + b_f, a_f * tau + b_f * np.conj(tau)
    per1_3, per2_3 = (a_3 + b_3).real, (a_3 * tau + b_3 * np.conj(tau)).real
    periods = np.array(
        [
            [per1_c.real, per1_c.imag, per1_3],
            [per2_c.real, per2_c.imag, per2_3],
        ]
    )
    scale = max(np.max(np.abs(s.psi1)), np.max(np.abs(s.psi2))) ** 2 + 1e-300
    if np.max(np.abs(periods)) > period_rtol * scale and not allow_open:
        raise NonPeriodicImage(
            f"image translates by {periods.tolist()} per cycle; not a closed torus",
            period_vectors=periods,
        )

    f_vals = _lsq_antiderivative(grid, pf - a_f, qf - b_f)
    x3_vals = _lsq_antiderivative(grid, p3 - a_3, q3 - b_3).real
    if allow_open:
        j0, k0 = data.basepoint
        dz0 = grid.z - grid.z[j0, k0]
        f_vals = f_vals + a_f * dz0 + b_f * np.conj(dz0)
        x3_vals = x3_vals + 2 * (a_3 * dz0).real

    j0, k0 = data.basepoint
    c1, c2, c3 = data.constants
    f_vals += (c1 + 1j * c2) - f_vals[j0, k0]
    x3_vals += c3 - x3_vals[j0, k0]

    points = np.stack([f_vals.real, f_vals.imag, x3_vals], axis=-1)
    return make_immersion(grid, points)


def recover_spinor(X: Immersion, rtol: float = CONFORMAL_RTOL) -> SpinorField:
    """Spinor of a conformal immersion, up to one global sign.

    Node-wise the squares are known exactly (psi1^2 = i d_zbar W,
    psi2^2 = -i d_z W, psi2 conj(psi1) = -d_z X3 with W = X1 - i X2); only a
    Z2 sign per node remains.  The sign is transported along lattice edges
    through whichever component is larger on the edge, so zero circles of one
    component are crossed through the other.  Multipliers are read off the
    wrap seams and must be unanimous.
    """
    if X.conformality_residual > rtol:
        raise NotConformal(
            f"conformality residual {X.conformality_residual:.3e} exceeds {rtol:.1e}"
        )
    grid = X.grid
    w = ScalarField(grid, X.points[:, :, 0] - 1j * X.points[:, :, 1])
    x3 = ScalarField(grid, X.points[:, :, 2].astype(np.complex128))
    A = 1j * d_zbar(w).values          # psi1^2
    B = -1j * d_z(w).values            # psi2^2
    P = -d_z(x3).values                # psi2 * conj(psi1)

    abs_a, abs_b = np.abs(A), np.abs(B)
    sq_a, sq_b = np.sqrt(A), np.sqrt(B)

    # canonical +1-sign pair at every node, built from the dominant component
    base_a = abs_a >= abs_b
    den_a = np.where(base_a & (abs_a > 0), sq_a, 1.0)
    den_b = np.where(~base_a & (abs_b > 0), sq_b, 1.0)
    q1 = np.where(base_a, sq_a, np.conj(P / den_b))
    q2 = np.where(base_a, P / np.conj(den_a), sq_b)

    def edge_sign(ju, ku, jv, kv):
        """+-1 so that sign * q at v continues the assigned value at u (vectorized)."""
        use_a = np.minimum(abs_a[ju, ku], abs_a[jv, kv]) >= np.minimum(
            abs_b[ju, ku], abs_b[jv, kv]
        )
        ref = np.where(use_a, q1[ju, ku], q2[ju, ku]) * sign[ju, ku]
        cand = np.where(use_a, q1[jv, kv], q2[jv, kv])
        return np.where(np.abs(cand - ref) <= np.abs(cand + ref), 1.0, -1.0)

    sign = np.zeros((grid.nx, grid.ny))
    sign[0, 0] = 1.0
    for j in range(1, grid.nx):
        sign[j, 0] = edge_sign(j - 1, 0, j, 0)
    all_j = np.arange(grid.nx)
    for k in range(1, grid.ny):
        sign[:, k] = edge_sign(all_j, k - 1, all_j, k)

    # wrap seams give the multipliers; votes must be unanimous
    all_k = np.arange(grid.ny)
    votes1 = edge_sign(np.full(grid.ny, grid.nx - 1), all_k, np.zeros(grid.ny, int), all_k)
    votes1 = votes1 * sign[0, :]
    votes2 = edge_sign(all_j, np.full(grid.nx, grid.ny - 1), all_j, np.zeros(grid.nx, int))
    votes2 = votes2 * sign[:, 0]
    for name, votes in (("mult1", votes1), ("mult2", votes2)):
        if not (np.all(votes == votes[0])):
            raise BranchInconsistency(
                f"{name} votes disagree across the seam ({np.sum(votes > 0)} of {votes.size} positive)"
            )
    return SpinorField(grid, sign * q1, sign * q2, int(votes1[0]), int(votes2[0]))


def extract_potential(X: Immersion, rtol: float = CONFORMAL_RTOL) -> ScalarField:
    """Real potential U = H e^alpha / 2 of a conformal immersion."""
    ea = conformal_factor(X, rtol=rtol)
    h = fundamental_forms(X).mean_curvature
    return ScalarField(X.grid, 0.5 * h * ea.values.real)


def energy_identity_check(X: Immersion, rtol: float = CONFORMAL_RTOL):
    """(T, H1, rel_err): bending energy vs 4 Im(tau) <<U^2>>.

    The Jacobian of (t1, t2) -> (x, y) is Im(tau), which bridges the lattice
    cell average and the area integral in the (x, y) chart.
    """
    t = willmore(X)
    u = extract_potential(X, rtol=rtol)
    h1 = 4.0 * X.grid.tau.imag * average(u * u).real
    rel = abs(t - h1) / abs(t) if t != 0 else abs(h1)
    return t, h1, rel


def spinor_to_dict(s: SpinorField) -> dict:
    return {
        "tau": [s.grid.tau.real, s.grid.tau.imag],
        "nx": s.grid.nx,
        "ny": s.grid.ny,
        "mult1": s.mult1,
        "mult2": s.mult2,
        "psi1": [[float(v.real), float(v.imag)] for v in s.psi1.ravel(order="F")],
        "psi2": [[float(v.real), float(v.imag)] for v in s.psi2.ravel(order="F")],
    }


def spinor_from_dict(doc: dict) -> SpinorField:
    from .torus_grid import make_grid

    grid = make_grid(complex(doc["tau"][0], doc["tau"][1]), int(doc["nx"]), int(doc["ny"]))

    def unflatten(rows):
        flat = np.array([complex(a, b) for a, b in rows], dtype=np.complex128)
        return flat.reshape((grid.nx, grid.ny), order="F")

    return SpinorField(grid, unflatten(doc["psi1"]), unflatten(doc["psi2"]),
                       int(doc["mult1"]), int(doc["mult2"]))
