"""Zero-energy Bloch data of the doubly periodic Dirac operator.

Two independent discretizations are kept side by side:

* floquet_monodromy - for potentials depending on one variable, the Dirac
  system reduces (via psi_j = e^{i kappa y} phi_j(x), d_z = (d_x - i d_y)/2)
  to the 2x2 system
      phi1' = 2 U phi2 - kappa phi1,
      phi2' = -2 U phi1 + kappa phi2,
  whose transfer matrix over one period has the Bloch multipliers as
  eigenvalues.  The coefficient matrix is trace free, so det = 1.

* bloch_det - for general potentials, the operator is assembled on the
  Bloch-twisted Fourier basis e^{2 pi i ((m + p1/2pi) t1 + (n + p2|tau|/2pi) t2)}
  and the normalized smallest singular value measures distance from the
  multiplier variety.  Multiplier conventions: w1 = e^{i p1}, w2 = e^{i p2 |tau|}.

They cross-validate each other on revolution potentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure, TruncationTooSmall
from .torus_grid import ScalarField, TorusGrid

ON_VARIETY_THRESHOLD = 1e-6


@dataclass
class MonodromyData:
    """Transfer matrix of the reduced system over one x-period."""

    kappa: complex
    matrix: np.ndarray
    eigenvalues: tuple

    def to_dict(self) -> dict:
        m = self.matrix
        return {
            "kappa": [self.kappa.real, self.kappa.imag],
            "matrix": [[[v.real, v.imag] for v in row] for row in m],
            "eigenvalues": [[v.real, v.imag] for v in self.eigenvalues],
            "det": [complex(np.linalg.det(m)).real, complex(np.linalg.det(m)).imag],
        }


@dataclass
class BlochPoint:
    """Multiplier pair with the determinant residual that certified it."""

    w1: complex
    w2: complex
    residual: float
    p1: complex = 0.0
    p2: complex = 0.0
    branch1: int = 0
    branch2: int = 0


def _trig_coeffs(samples: np.ndarray):
    n = samples.size
    coeff = np.fft.fft(samples) / n
    modes = np.fft.fftfreq(n, d=1.0 / n)
    return coeff, modes


def floquet_monodromy(
    u_samples: np.ndarray,
    period: float,
    kappa: complex,
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> MonodromyData:
    """Integrate the reduced 2x2 system across one period of U(x).

    u_samples are uniform over [0, period); U is evaluated inside the
    integrator by its trigonometric interpolant, so the monodromy matches the
    spectral lattice representation of the same potential.  kappa may be
    complex (needed when chasing multipliers far from the unit circle).
    """
    u_samples = np.asarray(u_samples, dtype=float)
    coeff, modes = _trig_coeffs(u_samples)
    omega = 2 * np.pi / period

    def u_at(x):
        return np.real(np.sum(coeff * np.exp(1j * modes * omega * x)))

    def rhs(x, y):
        u = u_at(x)
        phi1, phi2 = y[0:2], y[2:4]
        return np.concatenate([2 * u * phi2 - kappa * phi1, -2 * u * phi1 + kappa * phi2])

    y0 = np.array([1, 0, 0, 1], dtype=np.complex128)  # columns of the identity
    sol = solve_ivp(rhs, (0.0, period), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationFailure(f"monodromy integration failed: {sol.message}")
    yf = sol.y[:, -1]
    matrix = np.array([[yf[0], yf[2]], [yf[1], yf[3]]])
    eigs = np.linalg.eigvals(matrix)
    return MonodromyData(kappa=complex(kappa), matrix=matrix, eigenvalues=(eigs[0], eigs[1]))


class BlochOperator:
    """Dirac operator on the twisted Fourier basis at truncation order M (odd).

    The potential convolution block is precomputed; only the derivative
    diagonals depend on the quasimomenta, so repeated evaluations along a
    scan are cheap to assemble.
    """

    def __init__(self, U: ScalarField, M: int):
        if M < 3 or M % 2 == 0:
            raise ValueError("truncation order M must be odd and >= 3")
        self.grid = U.grid
        self.M = M
        half = (M - 1) // 2
        modes = np.arange(-half, half + 1)
        self.m = np.repeat(modes, M)
        self.n = np.tile(modes, M)
        self.boundary = (np.abs(self.m) == half) | (np.abs(self.n) == half)

        u = U.values
        nx, ny = self.grid.nx, self.grid.ny
        if nx <= 2 * (M - 1) or ny <= 2 * (M - 1):
            u = _spectral_upsample(u, max(nx, 2 * M), max(ny, 2 * M))
        uhat = np.fft.fft2(u) / u.size
        dm = (self.m[:, None] - self.m[None, :]) % u.shape[0]
        dn = (self.n[:, None] - self.n[None, :]) % u.shape[1]
        self.conv = uhat[dm, dn]
        self.u_conv_norm = float(np.sum(np.abs(uhat)))

    def _diagonals(self, p1: complex, p2: complex):
        tau = self.grid.tau
        tb = np.conj(tau)
        a = p1 / (2 * np.pi)
        b = p2 * abs(tau) / (2 * np.pi)
        sz = 2j * np.pi * (tb * (self.m + a) - (self.n + b)) / (tb - tau)
        szb = 2j * np.pi * (-tau * (self.m + a) + (self.n + b)) / (tb - tau)
        return sz, szb

    def assemble(self, p1: complex, p2: complex) -> np.ndarray:
        sz, szb = self._diagonals(p1, p2)
        k = self.M**2
        op = np.zeros((2 * k, 2 * k), dtype=np.complex128)
        op[:k, :k] = np.diag(sz)
        op[:k, k:] = -self.conv
        op[k:, :k] = self.conv
        op[k:, k:] = np.diag(szb)
        return op

    def kernel_mode_on_boundary(self, p1: complex, p2: complex) -> bool:
        sz, szb = self._diagonals(p1, p2)
        idx = int(np.argmin(np.minimum(np.abs(sz), np.abs(szb))))
        return bool(self.boundary[idx])

    def residual(self, p1: complex, p2: complex, check_resolved: bool = True) -> float:
        if check_resolved and self.kernel_mode_on_boundary(p1, p2):
            raise TruncationTooSmall(
                f"dominant free mode at the truncation edge for p1={p1}, p2={p2}; "
                f"increase M beyond {self.M}"
            )
        vals = np.linalg.svd(self.assemble(p1, p2), compute_uv=False)
        return float(vals[-1] / vals[0])


def _spectral_upsample(values: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Zero-padded Fourier interpolation onto a finer lattice."""
    fh = np.fft.fft2(values)
    out = np.zeros((nx, ny), dtype=np.complex128)
    mx, my = values.shape
    ix = np.fft.fftfreq(mx, d=1.0 / mx).astype(int)
    iy = np.fft.fftfreq(my, d=1.0 / my).astype(int)
    out[np.ix_(ix % nx, iy % ny)] = fh
    return np.fft.ifft2(out) * (nx * ny) / (mx * my)


def bloch_det(U: ScalarField, p1: complex, p2: complex, M: int) -> float:
    """Normalized smallest singular value of the truncated operator at (p1, p2)."""
    return BlochOperator(U, M).residual(p1, p2)


def choose_truncation(
    U: ScalarField,
    p1: complex,
    p2_extremes,
    dominance: float = 10.0,
    m_start: int = 9,
    m_cap: int = 61,
) -> int:
    """Smallest odd M whose boundary modes dominate the potential by `dominance`.

    The free-operator diagonal at the truncation boundary must exceed the
    potential's convolution norm by the given factor at every corner of the
    scan window.
    """
    for M in range(m_start, m_cap + 1, 2):
        op = BlochOperator(U, M)
        ok = True
        for p2 in p2_extremes:
            sz, szb = op._diagonals(p1, p2)
            edge = np.minimum(np.abs(sz), np.abs(szb))[op.boundary].min()
            if edge < dominance * max(op.u_conv_norm, 1e-300) or op.kernel_mode_on_boundary(p1, p2):
                ok = False
                break
        if ok:
            return M
    raise TruncationTooSmall(f"no adequate truncation below M = {m_cap}")


@dataclass
class SliceResult:
    """Roots of the Bloch determinant along a fixed-w1 slice."""

    w1: complex
    points: list
    diagnostics: dict = field(default_factory=dict)


def _golden_minimize(f, a, b, tol, max_iter=80):
    phi = (np.sqrt(5.0) - 1) / 2
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if f1 > f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = f(x1)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def dispersion_slice(
    U: ScalarField,
    w1: complex,
    window: tuple[float, float] = (-np.pi, np.pi),
    count: int = 200,
    M: int | None = None,
    threshold: float = ON_VARIETY_THRESHOLD,
    refine_tol: float = 1e-12,
) -> SliceResult:
    """Scan real p2 over the window at fixed w1 and polish determinant minima.

    Returns the on-variety points sorted by p2; an empty list (with scan
    diagnostics) means no roots in the window, which is a result rather than
    a failure.
    """
    if w1 == 0:
        raise ValueError("w1 must be nonzero")
    p1 = np.log(complex(w1)) / 1j
    lo, hi = window
    if M is None:
        M = choose_truncation(U, p1, (lo, hi))
    op = BlochOperator(U, M)
    ps = np.linspace(lo, hi, count)
    res = np.array([op.residual(p1, p, check_resolved=False) for p in ps])

    # polish every strict local scan minimum; the residual is cusp-shaped at
    # roots, so coarse samples near a root need not be small yet
    points = []
    minima = [
        i
        for i in range(1, count - 1)
        if res[i] <= res[i - 1] and res[i] <= res[i + 1]
    ]
    for i in sorted(minima, key=lambda i: res[i])[:32]:
        p_star, r_star = _golden_minimize(
            lambda p: op.residual(p1, p, check_resolved=False),
            ps[i - 1],
            ps[i + 1],
            refine_tol * max(1.0, abs(ps[i])),
        )
        if r_star < threshold:
            abstau = abs(U.grid.tau)
            points.append(
                BlochPoint(
                    w1=complex(np.exp(1j * p1)),
                    w2=complex(np.exp(1j * p_star * abstau)),
                    residual=r_star,
                    p1=complex(p1),
                    p2=complex(p_star),
                )
            )
    # merge duplicates from adjacent brackets
    merged = []
    for pt in sorted(points, key=lambda q: q.p2.real):
        if merged and abs(pt.p2 - merged[-1].p2) < 1e-6 * max(1.0, abs(pt.p2)):
            if pt.residual < merged[-1].residual:
                merged[-1] = pt
            continue
        merged.append(pt)
    diag = {
        "M": M,
        "count": count,
        "window": [lo, hi],
        "min_scan_residual": float(res.min()),
        "threshold": threshold,
    }
    if not merged:
        diag["note"] = "no roots in window"
    return SliceResult(w1=complex(w1), points=merged, diagnostics=diag)


def resonant_pairs(tau: complex, mmax: int, nmax: int):
    """Lattice of multiplier coincidences between the two free sheets.

    lambda_1^{(m,n)} = (pi m Re(tau) - pi n)/Im(tau) + i pi m, lambda_2 = conj(lambda_1).
    """
    tau = complex(tau)
    if not tau.imag > 0:
        raise ValueError("Im(tau) must be positive")
    out = []
    for m in range(-mmax, mmax + 1):
        for n in range(-nmax, nmax + 1):
            lam1 = (np.pi * m * tau.real - np.pi * n) / tau.imag + 1j * np.pi * m
            out.append((lam1, np.conj(lam1)))
    return out


def free_bloch_quasimomenta(lam: complex, tau: complex, sheet: int):
    """(p1, p2) of the free solutions e^{lam zbar} (sheet 1) or e^{lam z} (sheet 2)."""
    tau = complex(tau)
    if sheet == 1:
        return lam / 1j, lam * np.conj(tau) / (1j * abs(tau))
    if sheet == 2:
        return lam / 1j, lam * tau / (1j * abs(tau))
    raise ValueError("sheet must be 1 or 2")
