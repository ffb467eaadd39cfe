"""Uniform lattice over the period parallelogram (1, tau) and its spectral calculus.

Every field in the package lives on a TorusGrid: an nx-by-ny tensor-product
lattice with node (j, k) at z = j/nx + tau*k/ny.  Derivatives, antiderivatives
and cell averages are realized through the 2-D FFT, so repeated
derivative/antiderivative cycles stay accurate to spectral precision.

Conventions (fixed once, everything downstream depends on them):
    z = x + i y,   d_z = (d_x - i d_y)/2,   d_zbar = (d_x + i d_y)/2
In lattice coordinates (t1, t2) with z = t1 + tau*t2 this reads
    d_z    = (conj(tau) d_t1 - d_t2) / (conj(tau) - tau)
    d_zbar = (-tau      d_t1 + d_t2) / (conj(tau) - tau)
and each d_t acts as the Fourier multiplier 2*pi*i*m.  With this choice
e^(lambda * zbar) is annihilated by d_z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BadResolution, NonPositiveImaginaryModulus, NonZeroMeanInput

# Relative tolerance separating a genuine nonzero mean from FFT roundoff.
MEAN_RTOL = 1e-10


@dataclass(frozen=True)
class TorusGrid:
    """Lattice over the torus with periods 1 and tau (Im tau > 0).

    Node (j, k) sits at z = j/nx + tau*k/ny, j = 0..nx-1, k = 0..ny-1.
    Field arrays are indexed [j, k]: axis 0 runs along the period 1,
    axis 1 along the period tau.
    """

    tau: complex
    nx: int
    ny: int

    @cached_property
    def t1(self) -> np.ndarray:
        return np.arange(self.nx)[:, None] / self.nx + np.zeros((1, self.ny))

    @cached_property
    def t2(self) -> np.ndarray:
        return np.zeros((self.nx, 1)) + np.arange(self.ny)[None, :] / self.ny

    @cached_property
    def z(self) -> np.ndarray:
        return self.t1 + self.tau * self.t2

    @cached_property
    def modes1(self) -> np.ndarray:
        """Integer wavenumbers along t1, broadcast to grid shape."""
        m = np.fft.fftfreq(self.nx, d=1.0 / self.nx)
        return m[:, None] + np.zeros((1, self.ny))

    @cached_property
    def modes2(self) -> np.ndarray:
        n = np.fft.fftfreq(self.ny, d=1.0 / self.ny)
        return np.zeros((self.nx, 1)) + n[None, :]

    def dz_symbol(self, shift1: complex = 0.0, shift2: complex = 0.0) -> np.ndarray:
        """Fourier symbol of d_z on modes (m + shift1, n + shift2)."""
        tb = np.conj(self.tau)
        return 2j * np.pi * (tb * (self.modes1 + shift1) - (self.modes2 + shift2)) / (tb - self.tau)

    def dzbar_symbol(self, shift1: complex = 0.0, shift2: complex = 0.0) -> np.ndarray:
        tb = np.conj(self.tau)
        return 2j * np.pi * (-self.tau * (self.modes1 + shift1) + (self.modes2 + shift2)) / (tb - self.tau)

    @cached_property
    def sym_dz(self) -> np.ndarray:
        return self.dz_symbol()

    @cached_property
    def sym_dzbar(self) -> np.ndarray:
        return self.dzbar_symbol()

    def same_lattice(self, other: "TorusGrid") -> bool:
        return (self.nx, self.ny) == (other.nx, other.ny) and np.isclose(
            complex(self.tau), complex(other.tau)
        )


def make_grid(tau: complex, nx: int, ny: int) -> TorusGrid:
    """Validated TorusGrid constructor."""
    tau = complex(tau)
    if not tau.imag > 0:
        raise NonPositiveImaginaryModulus(f"Im(tau) must be positive, got tau={tau}")
    for name, n in (("nx", nx), ("ny", ny)):
        if n < 4 or n % 2 != 0:
            raise BadResolution(f"{name} must be an even integer >= 4, got {n}")
    return TorusGrid(tau=tau, nx=int(nx), ny=int(ny))


@dataclass
class ScalarField:
    """Complex grid function, periodic in both lattice directions."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"field shape {v.shape} does not match grid ({self.grid.nx}, {self.grid.ny})")
        self.values = v

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def conj(self) -> "ScalarField":
        return ScalarField(self.grid, np.conj(self.values))

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if not self.grid.same_lattice(other.grid):
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def field_from_function(grid: TorusGrid, fn) -> ScalarField:
    """Sample fn(t1, t2) on the lattice."""
    return ScalarField(grid, np.asarray(fn(grid.t1, grid.t2), dtype=np.complex128))


def constant_field(grid: TorusGrid, value: complex) -> ScalarField:
    return ScalarField(grid, np.full((grid.nx, grid.ny), complex(value), dtype=np.complex128))


def d_z(f: ScalarField) -> ScalarField:
    """Spectral d/dz."""
    return ScalarField(f.grid, np.fft.ifft2(f.grid.sym_dz * np.fft.fft2(f.values)))


def d_zbar(f: ScalarField) -> ScalarField:
    """Spectral d/dzbar."""
    return ScalarField(f.grid, np.fft.ifft2(f.grid.sym_dzbar * np.fft.fft2(f.values)))


def average(f: ScalarField) -> complex:
    """Cell average <<f>>; on a uniform periodic grid the plain mean is spectrally exact."""
    return complex(np.mean(f.values))


def d_z_inverse(f: ScalarField, tol_mean: float | None = None) -> ScalarField:
    """Zero-mean antiderivative g with d_z(g) = f - <<f>>.

    The inversion divides Fourier coefficients by the d_z symbol; the symbol
    vanishes only at the (0,0) mode (tau is non-real), whose coefficient is
    set to zero.  Rejects inputs whose mean is above tolerance, since the
    discarded mode would then silently change the field.
    """
    mean = average(f)
    scale = f.max_abs()
    if tol_mean is None:
        tol_mean = MEAN_RTOL * scale
    if abs(mean) > tol_mean and scale > 0:
        raise NonZeroMeanInput(f"|mean| = {abs(mean):.3e} exceeds tolerance {tol_mean:.3e}")
    fh = np.fft.fft2(f.values)
    sym = f.grid.sym_dz.copy()
    sym[0, 0] = 1.0
    gh = fh / sym
    gh[0, 0] = 0.0
    return ScalarField(f.grid, np.fft.ifft2(gh))


def twisted_derivative(grid: TorusGrid, values: np.ndarray, shift1: complex, shift2: complex,
                       kind: str) -> np.ndarray:
    """d_z or d_zbar of a quasi-periodic field f = e^{2 pi i (shift1 t1 + shift2 t2)} * g.

    `values` are the samples of f itself; g is periodic.  Works for complex
    shifts, which is how Bloch twists and (anti)periodic spinor components
    are differentiated exactly.
    """
    phase = np.exp(2j * np.pi * (shift1 * grid.t1 + shift2 * grid.t2))
    g = values / phase
    if kind == "z":
        sym = grid.dz_symbol(shift1, shift2)
    elif kind == "zbar":
        sym = grid.dzbar_symbol(shift1, shift2)
    else:
        raise ValueError(f"unknown derivative kind {kind!r}")
    return phase * np.fft.ifft2(sym * np.fft.fft2(g))


def spectral_tail_fraction(f: ScalarField) -> float:
    """Energy fraction carried by the top Fourier octave (resolution diagnostic)."""
    fh = np.fft.fft2(f.values)
    power = np.abs(fh) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    m = np.abs(f.grid.modes1) / (f.grid.nx / 2)
    n = np.abs(f.grid.modes2) / (f.grid.ny / 2)
    tail = (np.maximum(m, n) > 0.5)
    return float(power[tail].sum() / total)


def field_to_dict(f: ScalarField) -> dict:
    """JSON-ready dict: values flattened row-major in (k, j)."""
    flat = f.values.ravel(order="F")
    return {
        "tau_re": f.grid.tau.real,
        "tau_im": f.grid.tau.imag,
        "nx": f.grid.nx,
        "ny": f.grid.ny,
        "values": [[float(v.real), float(v.imag)] for v in flat],
    }


def field_from_dict(doc: dict) -> ScalarField:
    grid = make_grid(complex(doc["tau_re"], doc["tau_im"]), int(doc["nx"]), int(doc["ny"]))
    flat = np.array([complex(re, im) for re, im in doc["values"]], dtype=np.complex128)
    if flat.size != grid.nx * grid.ny:
        raise ValueError("value count does not match nx*ny")
    return ScalarField(grid, flat.reshape((grid.nx, grid.ny), order="F"))
