"""Surfaces of revolution, fundamental forms, and the bending energy.

Oracles: classical round-torus curvature H(s) = (R + 2r cos s)/(2r(R + r cos s))
and the closed-form revolution energy pi^2 R^2/(r sqrt(R^2 - r^2)), itself
cross-checked here by doubled-resolution quadrature.
"""

import numpy as np
import pytest

from weiermnv.errors import DegenerateImmersion, DegenerateProfile, NotConformal
from weiermnv.immersion import (
    ProfileCurve,
    conformal_factor,
    fundamental_forms,
    immersion_from_dict,
    immersion_to_dict,
    make_immersion,
    revolve,
    willmore,
    willmore_revolution_closed_form,
)
from weiermnv.torus_grid import make_grid


def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


class TestRevolve:
    def test_round_profile_is_conformal(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 256), 64, 64)
        assert X.conformality_residual < 1e-8
        assert np.isclose(X.grid.tau.imag, np.sqrt(3.0), rtol=1e-10)
        assert abs(X.grid.tau.real) < 1e-12

    def test_scale_covariance(self):
        prof = ProfileCurve.circle(2.0, 1.0, 256)
        scaled = ProfileCurve(3.0 * prof.r, 3.0 * prof.h)
        X = revolve(prof, 32, 32)
        Y = revolve(scaled, 32, 32)
        assert np.isclose(Y.grid.tau, X.grid.tau)
        np.testing.assert_allclose(Y.points, 3.0 * X.points, rtol=1e-12, atol=1e-13)

    def test_degenerate_profile_rejected(self):
        prof = ProfileCurve.circle(1.0, 1.0, 128)  # touches the axis at s = pi
        with pytest.raises(DegenerateProfile):
            revolve(prof, 32, 32)

    def test_noncircular_profile_still_conformal(self):
        s = 2 * np.pi * np.arange(512) / 512
        r = 3.0 + np.cos(s) + 0.25 * np.cos(2 * s)
        h = 1.2 * np.sin(s) - 0.15 * np.sin(2 * s)
        residuals = [
            revolve(ProfileCurve(r, h), 64, n).conformality_residual for n in (128, 256)
        ]
        assert residuals[1] < 1e-8
        assert residuals[1] < residuals[0] / 100  # spectral, not algebraic, decay

    def test_auto_nx(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 256), 64)
        # Lx = 2 pi / sqrt(3): auto nx balances node spacing, so nx < ny here
        assert 4 <= X.grid.nx < 64
        assert X.grid.ny == 64


class TestFundamentalForms:
    @pytest.mark.parametrize("R,r", [(2.0, 1.0), (np.sqrt(2.0), 1.0)])
    def test_mean_curvature_against_classical_torus(self, R, r):
        X = revolve(ProfileCurve.circle(R, r, 256), 64, 64)
        H = fundamental_forms(X).mean_curvature
        nx = X.grid.nx
        assert np.allclose(H[0, :], (R + 2 * r) / (2 * r * (R + r)), atol=1e-8)
        assert np.allclose(H[nx // 2, :], (R - 2 * r) / (2 * r * (R - r)), atol=1e-8)

    def test_rigid_rotation_fixes_coefficients(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 128), 32, 32)
        A = rotation_matrix([1.0, 2.0, 0.5], 0.7)
        Y = make_immersion(X.grid, X.points @ A.T)
        fx, fy = fundamental_forms(X), fundamental_forms(Y)
        for name in ("E", "F", "G", "L", "M", "N"):
            np.testing.assert_allclose(getattr(fy, name), getattr(fx, name), atol=1e-9)
        np.testing.assert_allclose(fy.normal, fx.normal @ A.T, atol=1e-9)

    def test_degenerate_immersion_rejected(self):
        grid = make_grid(1j, 8, 8)
        points = np.zeros((8, 8, 3))
        points[:, :, 0] = np.cos(2 * np.pi * grid.t1)  # collapses onto a segment
        with pytest.raises(DegenerateImmersion):
            fundamental_forms(make_immersion(grid, points))


class TestWillmore:
    @pytest.mark.parametrize(
        "R,r,expected",
        [(np.sqrt(2.0), 1.0, 2 * np.pi**2), (2.0, 1.0, 4 * np.pi**2 / np.sqrt(3.0))],
    )
    def test_closed_form_values(self, R, r, expected):
        assert np.isclose(willmore_revolution_closed_form(R, r), expected, rtol=1e-14)
        X = revolve(ProfileCurve.circle(R, r, 256), 128, 128)
        assert abs(willmore(X) - expected) / expected < 1e-6

    def test_doubled_resolution_quadrature_cross_check(self):
        # the closed form itself is validated by comparing quadratures at N and 2N
        R, r = 3.0, 1.0
        vals = [
            willmore(revolve(ProfileCurve.circle(R, r, 512), n, n)) for n in (64, 128)
        ]
        assert abs(vals[1] - vals[0]) < 1e-9 * vals[1]
        assert np.isclose(vals[1], willmore_revolution_closed_form(R, r), rtol=1e-10)

    def test_scale_invariance(self):
        prof = ProfileCurve.circle(2.0, 1.0, 256)
        k = 3.7
        X = revolve(prof, 48, 48)
        Y = make_immersion(X.grid, k * X.points)
        assert np.isclose(willmore(Y), willmore(X), rtol=1e-10)

    def test_spectral_convergence(self):
        R, r = 2.0, 1.0
        target = willmore_revolution_closed_form(R, r)
        errs = []
        for n in (16, 32):
            X = revolve(ProfileCurve.circle(R, r, 256), n, n)
            errs.append(abs(willmore(X) - target) / target)
        assert errs[1] < errs[0] / 10


class TestConformalFactor:
    def test_matches_profile_radius_times_lx(self):
        R, r = 2.0, 1.0
        X = revolve(ProfileCurve.circle(R, r, 256), 64, 64)
        ea = conformal_factor(X).values.real
        lx = 2 * np.pi / X.grid.tau.imag
        # e^alpha on the normalized grid is Lx * (distance from axis)
        radius = np.hypot(X.points[:, :, 0], X.points[:, :, 1])
        np.testing.assert_allclose(ea, lx * radius, rtol=1e-8)

    def test_scales_linearly(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 128), 32, 32)
        Y = make_immersion(X.grid, 2.0 * X.points)
        np.testing.assert_allclose(
            conformal_factor(Y).values, 2.0 * conformal_factor(X).values, rtol=1e-10
        )

    def test_sheared_input_rejected(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 128), 32, 32)
        sheared = X.points.copy()
        sheared[:, :, 2] *= 1.5  # breaks isothermality
        Y = make_immersion(X.grid, sheared)
        assert Y.conformality_residual > 1e-3
        with pytest.raises(NotConformal):
            conformal_factor(Y)


def test_immersion_json_roundtrip():
    X = revolve(ProfileCurve.circle(2.0, 1.0, 64), 16, 8)
    Y = immersion_from_dict(immersion_to_dict(X))
    assert Y.grid.same_lattice(X.grid)
    np.testing.assert_allclose(Y.points, X.points, atol=1e-15)
