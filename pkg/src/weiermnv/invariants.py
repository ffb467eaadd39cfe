"""Conserved functionals h_1, h_3, ... of a real doubly periodic Dirac potential.

The far-field Bloch multiplier exponent h(lambda) = h_1/lambda + h_2/lambda^2 + ...
is built from the jet recursion
    chi_1 = -U
    chi_k = -d_zbar chi_{k-1} - U phi_{k-1}          (k > 1)
    d_z phi_k = U chi_k - h_k - sum_{j<k} h_j phi_{k-j}
where h_k is fixed by solvability (the right-hand side must average to zero
before d_z can be inverted) and phi_k is taken zero-mean.  Even-index h_k
vanish identically; their computed size is kept as a convergence diagnostic.

Two independent closed forms are provided for cross-checking:
    h_1 = -<<U^2>>
    h_3 = -<<U U_zbzb + (U^2 + h_1) V_zb>>,  V = dz^{-1}(U^2 + h_1).
(The sign of the V-term is fixed by unrolling the recursion by hand; it is
also confirmed dynamically by fitting h(lambda) from Floquet multipliers of
one-variable potentials.)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonRealPotential, ResolutionWarning
from .torus_grid import (
    MEAN_RTOL,
    ScalarField,
    average,
    d_z_inverse,
    d_zbar,
    spectral_tail_fraction,
)

REALITY_RTOL = 1e-10
TAIL_WARN_FRACTION = 1e-8


def _require_real(U: ScalarField):
    scale = U.max_abs()
    if scale > 0 and np.max(np.abs(U.values.imag)) > REALITY_RTOL * scale:
        raise NonRealPotential(
            f"max |Im U| = {np.max(np.abs(U.values.imag)):.3e} for |U| scale {scale:.3e}"
        )


@dataclass
class JetCoefficients:
    """Asymptotic jet fields of the normalized Bloch solution."""

    phi: list[ScalarField] = field(repr=False)
    chi: list[ScalarField] = field(repr=False)


@dataclass
class InvariantVector:
    """h_1..h_K (1-based; h[k-1] holds h_k) with convergence metadata."""

    h: list[complex]
    even_residual: float
    grid_meta: dict

    def to_dict(self) -> dict:
        return {
            "K": len(self.h),
            "h": [[v.real, v.imag] for v in self.h],
            "even_residual": self.even_residual,
            **self.grid_meta,
        }


def mnv_recursion(U: ScalarField, K: int) -> tuple[JetCoefficients, InvariantVector]:
    """Run the jet recursion to depth K, extracting each h_k by solvability."""
    _require_real(U)
    if K < 1:
        raise ValueError("K must be >= 1")
    phi: list[ScalarField] = []
    chi: list[ScalarField] = []
    h: list[complex] = []
    for k in range(1, K + 1):
        if k == 1:
            chi_k = -U
        else:
            chi_k = -d_zbar(chi[-1]) - U * phi[-1]
        chi.append(chi_k)
        core = U * chi_k
        hk = average(core) - sum(h[j] * average(phi[k - 2 - j]) for j in range(k - 1))
        h.append(hk)
        rhs = core - hk
        for j in range(k - 1):
            rhs = rhs - h[j] * phi[k - 2 - j]
        # rhs is zero-mean by construction of h_k; tolerate roundoff at the
        # scale of the terms that were cancelled, not of the tiny remainder
        tol = MEAN_RTOL * max(core.max_abs(), abs(hk), 1e-300)
        phi.append(d_z_inverse(rhs, tol_mean=tol))

    if K >= 1:
        tail = spectral_tail_fraction(phi[-1])
        if tail > TAIL_WARN_FRACTION:
            warnings.warn(
                f"deepest jet carries {tail:.2e} of its energy in the top Fourier "
                "octave; double the resolution for trustworthy h_k",
                ResolutionWarning,
            )
    evens = [abs(h[k - 1]) for k in range(2, K + 1, 2)]
    meta = {"nx": U.grid.nx, "ny": U.grid.ny,
            "tau": [U.grid.tau.real, U.grid.tau.imag]}
    return JetCoefficients(phi=phi, chi=chi), InvariantVector(
        h=h, even_residual=max(evens) if evens else 0.0, grid_meta=meta
    )


def h1_direct(U: ScalarField) -> complex:
    """-<<U^2>>."""
    _require_real(U)
    return -average(U * U)


def h3_direct(U: ScalarField) -> complex:
    """Closed form for h_3 through the auxiliary antiderivative V = dz^{-1}(U^2 + h_1)."""
    _require_real(U)
    h1 = h1_direct(U)
    g = U * U + h1
    v = d_z_inverse(g, tol_mean=MEAN_RTOL * max(U.max_abs() ** 2, 1e-300))
    return -average(U * d_zbar(d_zbar(U)) + g * d_zbar(v))


def solvability_h(U: ScalarField, jets: JetCoefficients) -> list[complex]:
    """Re-extract h_k from given jets by the solvability condition alone.

    Works for jets in any normalization (phi_k need not be zero-mean), which
    is what makes this useful as the normalization-independence check.
    """
    h: list[complex] = []
    for k in range(1, len(jets.chi) + 1):
        # <<h_k + sum_{j<k} h_j phi_{k-j}>> = <<U chi_k>>
        hk = average(U * jets.chi[k - 1])
        for j in range(1, k):
            hk -= h[j - 1] * average(jets.phi[k - j - 1])
        h.append(hk)
    return h
