"""Immersed tori in conformal coordinates: surfaces of revolution, fundamental
forms, mean curvature, conformal factor, and the bending energy integral.

Surfaces of revolution are the primary ingestion path.  A closed profile
(r(s), h(s)) in the half-plane r > 0 is reparametrized by the conformal
abscissa x with dx = d(arclength)/r, which makes the induced metric
r^2 (dx^2 + dtheta^2).  The coordinate rectangle is then rescaled so the
profile period is exactly 1, giving modulus tau = 2*pi*i / Lx where Lx is
the total conformal length of the profile.  Cycle convention: the first
lattice direction (period 1) runs along the profile, the second (period tau)
along the rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateImmersion, DegenerateProfile, NotConformal
from .torus_grid import ScalarField, TorusGrid, d_z, make_grid

# Node-wise |<X_z, X_z>| / |X_z|^2 below this means "conformal coordinates".
CONFORMAL_RTOL = 1e-6
# EG - F^2 below this fraction of max(E)*max(G) counts as a degenerate metric.
DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class ProfileCurve:
    """Closed curve (r(s), h(s)) sampled uniformly in s over [0, 2*pi).

    The first sample is not repeated at the end.  Self-intersection is not
    checked.  orientation = -1 traverses the curve backwards.
    """

    r: np.ndarray
    h: np.ndarray
    orientation: int = 1

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if r.ndim != 1 or r.shape != h.shape or r.size < 4:
            raise DegenerateProfile("profile needs matching 1-D r, h arrays with >= 4 samples")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "h", h)

    @staticmethod
    def circle(big_radius: float, tube_radius: float, n: int = 256) -> "ProfileCurve":
        """Round profile r = R + rho*cos(s), h = rho*sin(s)."""
        s = 2 * np.pi * np.arange(n) / n
        return ProfileCurve(big_radius + tube_radius * np.cos(s), tube_radius * np.sin(s))

    @staticmethod
    def from_fourier(fourier_r, fourier_h, n: int = 256) -> "ProfileCurve":
        """Build samples from complex Fourier coefficients in numpy fft order."""
        cr = np.asarray(fourier_r, dtype=np.complex128)
        ch = np.asarray(fourier_h, dtype=np.complex128)
        n = max(n, 2 * max(cr.size, ch.size))

        def synth(c):
            full = np.zeros(n, dtype=np.complex128)
            half = c.size // 2
            for i, v in enumerate(c):
                m = i if i <= half else i - c.size
                full[m % n] = v
            return np.fft.ifft(full).real * n / 1.0

        return ProfileCurve(synth(cr), synth(ch))


@dataclass(frozen=True)
class Immersion:
    """Doubly periodic map of the lattice into R^3.

    points[j, k] is the image of node z = j/nx + tau*k/ny.  The cached
    conformality residual is max over nodes of |<X_z, X_z>| / |X_z|^2 with
    the complex-bilinear product; zero means isothermal coordinates.
    """

    grid: TorusGrid
    points: np.ndarray = field(repr=False)
    conformality_residual: float = 0.0


def _coordinate_fields(X: Immersion):
    return [ScalarField(X.grid, X.points[:, :, i]) for i in range(3)]


def conformality_residual(grid: TorusGrid, points: np.ndarray) -> float:
    xz = [d_z(ScalarField(grid, points[:, :, i])).values for i in range(3)]
    bilinear = sum(v * v for v in xz)
    norm2 = sum(np.abs(v) ** 2 for v in xz)
    if np.min(norm2) <= 0:
        raise DegenerateImmersion("X_z vanishes at a node")
    return float(np.max(np.abs(bilinear) / norm2))


def make_immersion(grid: TorusGrid, points: np.ndarray) -> Immersion:
    points = np.asarray(points, dtype=float)
    if points.shape != (grid.nx, grid.ny, 3):
        raise ValueError(f"points shape {points.shape} does not match grid")
    return Immersion(grid, points, conformality_residual(grid, points))


def _trig_interp(samples: np.ndarray, s_eval: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of real uniform samples on [0, 2*pi)."""
    n = samples.size
    coeff = np.fft.rfft(samples) / n
    k = np.arange(coeff.size)
    phases = np.exp(1j * np.outer(s_eval, k))
    weights = np.full(coeff.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0  # Nyquist mode enters as a pure cosine
    return np.real(phases @ (weights * coeff))


def _spectral_derivative_1d(samples: np.ndarray) -> np.ndarray:
    n = samples.size
    fh = np.fft.fft(samples)
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0  # odd derivative: drop the unpaired Nyquist mode
    return np.fft.ifft(1j * k * fh).real


def revolve(profile: ProfileCurve, ny: int, nx_hint: int = 0) -> Immersion:
    """Torus of revolution sampled in conformal coordinates.

    Rotates the profile about the h-axis.  Returns the immersion on the
    normalized grid (periods 1 and tau = 2*pi*i/Lx); nx_hint = 0 picks the
    profile resolution that balances physical node spacing in both
    directions.
    """
    r = profile.r if profile.orientation >= 0 else profile.r[::-1]
    h = profile.h if profile.orientation >= 0 else profile.h[::-1]
    if np.min(r) <= 0:
        raise DegenerateProfile(f"profile reaches r = {np.min(r):.3e} <= 0")

    # conformal abscissa: x'(s) = |gamma'(s)| / r(s) on the profile's own parameter
    rp = _spectral_derivative_1d(r)
    hp = _spectral_derivative_1d(h)
    speed = np.hypot(rp, hp)
    arc_length = 2 * np.pi * float(np.mean(speed))
    if arc_length < 1e-12 * (np.max(np.abs(r)) + np.max(np.abs(h))):
        raise DegenerateProfile("profile arc length vanishes")
    xprime = speed / r
    lx = 2 * np.pi * float(np.mean(xprime))

    # x(s) = (Lx / 2 pi) s + periodic part, via the Fourier antiderivative
    n = r.size
    osc = xprime - np.mean(xprime)
    fh = np.fft.fft(osc)
    k = np.fft.fftfreq(n, d=1.0 / n)
    sym = 1j * k.copy()
    sym[0] = 1.0
    xe = np.fft.ifft(fh / sym).real
    xe[:] -= xe[0]

    def x_of_s(s):
        return (lx / (2 * np.pi)) * s + _trig_interp(xe, s)

    def xp_of_s(s):
        return _trig_interp(xprime, s)

    if ny < 4 or ny % 2:
        raise DegenerateProfile(f"ny must be an even integer >= 4, got {ny}")
    if nx_hint <= 0:
        nx = int(round(ny * lx / (2 * np.pi) / 2)) * 2
        nx = max(nx, 4)
    else:
        nx = max(4, nx_hint + (nx_hint % 2))

    # invert the monotone map x(s) at the uniform conformal nodes
    x_targets = lx * np.arange(nx) / nx
    s_nodes = 2 * np.pi * x_targets / lx
    for _ in range(50):
        delta = (x_of_s(s_nodes) - x_targets) / xp_of_s(s_nodes)
        s_nodes = s_nodes - delta
        if np.max(np.abs(delta)) < 1e-15 * 2 * np.pi:
            break

    r_nodes = _trig_interp(r, s_nodes)
    h_nodes = _trig_interp(h, s_nodes)
    theta = 2 * np.pi * np.arange(ny) / ny

    points = np.empty((nx, ny, 3))
    points[:, :, 0] = r_nodes[:, None] * np.cos(theta)[None, :]
    points[:, :, 1] = r_nodes[:, None] * np.sin(theta)[None, :]
    points[:, :, 2] = h_nodes[:, None] + 0 * theta[None, :]

    grid = make_grid(2j * np.pi / lx, nx, ny)
    return make_immersion(grid, points)


@dataclass(frozen=True)
class FundamentalForms:
    """First/second form coefficients in lattice coordinates (t1, t2), per node."""

    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    normal: np.ndarray

    @property
    def mean_curvature(self) -> np.ndarray:
        return (self.E * self.N - 2 * self.F * self.M + self.G * self.L) / (
            2 * (self.E * self.G - self.F**2)
        )

    @property
    def area_element(self) -> np.ndarray:
        """sqrt(EG - F^2): surface measure per unit lattice cell dt1 dt2."""
        return np.sqrt(self.E * self.G - self.F**2)


def _lattice_derivative(grid: TorusGrid, values: np.ndarray, axis: int) -> np.ndarray:
    fh = np.fft.fft2(values)
    sym = 2j * np.pi * (grid.modes1 if axis == 0 else grid.modes2)
    if axis == 0:
        sym = sym.copy()
        sym[grid.nx // 2, :] = 0.0
    else:
        sym = sym.copy()
        sym[:, grid.ny // 2] = 0.0
    return np.fft.ifft2(sym * fh).real


def fundamental_forms(X: Immersion) -> FundamentalForms:
    """Spectral first and second fundamental forms, normal from X_t1 x X_t2."""
    grid = X.grid
    d1 = np.stack([_lattice_derivative(grid, X.points[:, :, i], 0) for i in range(3)], axis=-1)
    d2 = np.stack([_lattice_derivative(grid, X.points[:, :, i], 1) for i in range(3)], axis=-1)

    E = np.einsum("jki,jki->jk", d1, d1)
    F = np.einsum("jki,jki->jk", d1, d2)
    G = np.einsum("jki,jki->jk", d2, d2)
    disc = E * G - F**2
    if np.min(disc) <= DEGENERACY_RTOL * np.max(E) * np.max(G):
        raise DegenerateImmersion("EG - F^2 vanishes: not an immersion on this grid")

    normal = np.cross(d1, d2)
    normal /= np.linalg.norm(normal, axis=-1, keepdims=True)

    d11 = np.stack(
        [_lattice_derivative(grid, d1[:, :, i], 0) for i in range(3)], axis=-1
    )
    d12 = np.stack(
        [_lattice_derivative(grid, d1[:, :, i], 1) for i in range(3)], axis=-1
    )
    d22 = np.stack(
        [_lattice_derivative(grid, d2[:, :, i], 1) for i in range(3)], axis=-1
    )
    L = np.einsum("jki,jki->jk", normal, d11)
    M = np.einsum("jki,jki->jk", normal, d12)
    N = np.einsum("jki,jki->jk", normal, d22)
    return FundamentalForms(E=E, F=F, G=G, L=L, M=M, N=N, normal=normal)


def willmore(X: Immersion) -> float:
    """Integral of H^2 over the surface, by spectral quadrature on the lattice."""
    forms = fundamental_forms(X)
    return float(np.mean(forms.mean_curvature**2 * forms.area_element))


def willmore_revolution_closed_form(big_radius: float, tube_radius: float) -> float:
    """Bending energy of the round torus of revolution: pi^2 R^2 / (r sqrt(R^2 - r^2))."""
    R, r = big_radius, tube_radius
    return np.pi**2 * R**2 / (r * np.sqrt(R**2 - r**2))


def conformal_factor(X: Immersion, rtol: float = CONFORMAL_RTOL) -> ScalarField:
    """Positive field e^alpha with induced metric e^(2 alpha) |dz|^2.

    In lattice coordinates |dz/dt1| = 1, so e^(2 alpha) equals the first-form
    coefficient E.
    """
    if X.conformality_residual > rtol:
        raise NotConformal(
            f"conformality residual {X.conformality_residual:.3e} exceeds {rtol:.1e}"
        )
    forms = fundamental_forms(X)
    return ScalarField(X.grid, np.sqrt(forms.E).astype(np.complex128))


def immersion_to_dict(X: Immersion) -> dict:
    pts = np.stack([X.points[:, :, i].ravel(order="F") for i in range(3)], axis=-1)
    return {
        "tau": [X.grid.tau.real, X.grid.tau.imag],
        "nx": X.grid.nx,
        "ny": X.grid.ny,
        "points": [[float(a), float(b), float(c)] for a, b, c in pts],
        "conformality_residual": X.conformality_residual,
    }


def immersion_from_dict(doc: dict) -> Immersion:
    grid = make_grid(complex(doc["tau"][0], doc["tau"][1]), int(doc["nx"]), int(doc["ny"]))
    flat = np.asarray(doc["points"], dtype=float)
    if flat.shape != (grid.nx * grid.ny, 3):
        raise ValueError("points count does not match nx*ny")
    points = np.stack(
        [flat[:, i].reshape((grid.nx, grid.ny), order="F") for i in range(3)], axis=-1
    )
    return make_immersion(grid, points)
