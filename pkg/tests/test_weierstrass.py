"""Dirac residual, spinor <-> immersion round trips, potential extraction,
and the energy identity T = 4 Im(tau) <<U^2>>."""

import numpy as np
import pytest

from weiermnv.errors import NonPeriodicImage, NotConformal
from weiermnv.immersion import (
    ProfileCurve,
    conformal_factor,
    fundamental_forms,
    make_immersion,
    revolve,
    willmore,
)
from weiermnv.torus_grid import ScalarField, constant_field, make_grid
from weiermnv.weierstrass import (
    SpinorField,
    WeierstrassData,
    dirac_residual,
    energy_identity_check,
    extract_potential,
    recover_spinor,
    spinor_from_dict,
    spinor_to_dict,
    weierstrass_map,
)


def eccentric_profile(n=1024):
    s = 2 * np.pi * np.arange(n) / n
    return ProfileCurve(
        3.0 + np.cos(s) + 0.25 * np.cos(2 * s), 1.2 * np.sin(s) - 0.15 * np.sin(2 * s)
    )


def align_global_sign(psi_ref, psi):
    """Resolve the one global +- the factorization leaves."""
    corr = np.vdot(psi_ref[0], psi[0]) + np.vdot(psi_ref[1], psi[1])
    return (psi[0], psi[1]) if corr.real >= 0 else (-psi[0], -psi[1])


class TestDiracResidual:
    def test_constant_spinor_zero_potential(self):
        grid = make_grid(1j, 16, 16)
        s = SpinorField(grid, np.ones((16, 16)), np.zeros((16, 16)))
        assert dirac_residual(constant_field(grid, 0.0), s) < 1e-14

    def test_random_spinor_is_far_from_kernel(self):
        grid = make_grid(1j, 16, 16)
        rng = np.random.default_rng(0)
        s = SpinorField(grid, rng.normal(size=(16, 16)), rng.normal(size=(16, 16)))
        u = ScalarField(grid, 0.5 + 0.2 * np.cos(2 * np.pi * grid.t1))
        assert dirac_residual(u, s) > 0.1


class TestWeierstrassMap:
    def test_plane_patch_flagged_and_affine(self):
        grid = make_grid(1j, 16, 16)
        s = SpinorField(grid, np.ones((16, 16)), np.zeros((16, 16)))
        data = WeierstrassData(U=constant_field(grid, 0.0), spinor=s)
        with pytest.raises(NonPeriodicImage):
            weierstrass_map(data)
        X = weierstrass_map(data, allow_open=True)
        z0 = grid.z[0, 0]
        f = X.points[:, :, 0] + 1j * X.points[:, :, 1]
        np.testing.assert_allclose(f, 1j * (grid.z - z0), atol=1e-12)
        np.testing.assert_allclose(X.points[:, :, 2], 0.0, atol=1e-12)

    @pytest.mark.parametrize("R,r", [(2.0, 1.0), (np.sqrt(2.0), 1.0)])
    def test_round_trip_from_revolution_torus(self, R, r):
        X = revolve(ProfileCurve.circle(R, r, 256), 96, 96)
        s = recover_spinor(X)
        u = extract_potential(X)
        Y = weierstrass_map(WeierstrassData(U=u, spinor=s, basepoint=(0, 0)))
        shift = X.points[0, 0] - Y.points[0, 0]
        err = np.max(np.abs(Y.points + shift - X.points)) / np.max(np.abs(X.points))
        assert err < 1e-6
        assert Y.conformality_residual < 1e-8  # <X_z, X_z> = 0 for generated images

    def test_spinor_rotation_gives_congruent_image(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 256), 64, 64)
        s = recover_spinor(X)
        u = extract_potential(X)
        rotated = s.rotated(0.0, 1.0)
        assert dirac_residual(u, rotated) < 1e-8  # same potential solves for Psi+
        Y = weierstrass_map(WeierstrassData(U=u, spinor=rotated))
        assert np.isclose(willmore(Y), willmore(X), rtol=1e-9)
        fx, fy = fundamental_forms(X), fundamental_forms(Y)
        for name in ("E", "F", "G"):
            np.testing.assert_allclose(
                getattr(fy, name), getattr(fx, name), rtol=1e-6, atol=1e-9
            )


class TestRecoverSpinor:
    def test_forward_then_recover_matches_up_to_global_sign(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 256), 96, 96)
        s = recover_spinor(X)
        u = extract_potential(X)
        Y = weierstrass_map(WeierstrassData(U=u, spinor=s))
        s2 = recover_spinor(Y)
        assert (s2.mult1, s2.mult2) == (s.mult1, s.mult2)
        p1, p2 = align_global_sign((s.psi1, s.psi2), (s2.psi1, s2.psi2))
        scale = np.max(np.abs(s.psi1) + np.abs(s.psi2))
        assert np.max(np.abs(p1 - s.psi1) + np.abs(p2 - s.psi2)) / scale < 1e-8

    def test_metric_identity(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 256), 64, 64)
        s = recover_spinor(X)
        ea = conformal_factor(X).values.real
        metric = np.abs(s.psi1) ** 2 + np.abs(s.psi2) ** 2
        assert np.max(np.abs(metric - ea)) / np.max(ea) < 1e-6

    def test_translation_leaves_spinor_unchanged(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 128), 32, 32)
        Y = make_immersion(X.grid, X.points + np.array([0.3, -1.2, 2.0]))
        s, t = recover_spinor(X), recover_spinor(Y)
        np.testing.assert_allclose(t.psi1, s.psi1, atol=1e-12)
        np.testing.assert_allclose(t.psi2, s.psi2, atol=1e-12)

    def test_revolution_multipliers_are_antiperiodic(self):
        # one sign flip per cycle: the classical spin structure of these tori
        s = recover_spinor(revolve(ProfileCurve.circle(2.0, 1.0, 128), 48, 48))
        assert (s.mult1, s.mult2) == (-1, -1)

    def test_nonconformal_input_rejected(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 128), 32, 32)
        bad = X.points.copy()
        bad[:, :, 2] *= 1.4
        with pytest.raises(NotConformal):
            recover_spinor(make_immersion(X.grid, bad))

    def test_pipeline_dirac_residual(self):
        # extract -> recover consistency validates every sign convention at once
        for prof, ny, nx in [
            (ProfileCurve.circle(2.0, 1.0, 256), 128, 128),
            (eccentric_profile(), 128, 256),
        ]:
            X = revolve(prof, ny, nx)
            res = dirac_residual(extract_potential(X), recover_spinor(X))
            assert res < 1e-6


class TestExtractPotential:
    def test_round_torus_closed_form(self):
        R, r = 2.0, 1.0
        X = revolve(ProfileCurve.circle(R, r, 256), 64, 64)
        u = extract_potential(X).values.real
        lx = 2 * np.pi / X.grid.tau.imag
        rho = np.hypot(X.points[:, :, 0], X.points[:, :, 1])
        # (R + 2 r cos s)/(4 r) in profile coordinates, times the period rescale
        oracle = lx * (2 * rho - R) / (4 * r)
        np.testing.assert_allclose(u, oracle, atol=1e-8 * np.max(np.abs(oracle)))

    def test_dilation_leaves_potential_unchanged(self):
        X = revolve(ProfileCurve.circle(2.0, 1.0, 128), 32, 32)
        Y = make_immersion(X.grid, 2.5 * X.points)
        np.testing.assert_allclose(
            extract_potential(Y).values, extract_potential(X).values, atol=1e-10
        )

    def test_potential_is_real(self):
        X = revolve(eccentric_profile(), 64, 256)
        u = extract_potential(X)
        assert np.max(np.abs(u.values.imag)) < 1e-10 * np.max(np.abs(u.values))


class TestEnergyIdentity:
    @pytest.mark.parametrize(
        "R,r,target",
        [(np.sqrt(2.0), 1.0, 2 * np.pi**2), (2.0, 1.0, 4 * np.pi**2 / np.sqrt(3.0))],
    )
    def test_round_tori(self, R, r, target):
        X = revolve(ProfileCurve.circle(R, r, 256), 128, 128)
        t, h1, rel = energy_identity_check(X)
        assert rel < 1e-6
        assert abs(t - target) / target < 1e-6
        assert abs(h1 - target) / target < 1e-6

    def test_spectral_decay(self):
        prof = eccentric_profile()
        rels = []
        for n in (32, 64, 128):
            X = revolve(prof, n, n)
            rels.append(energy_identity_check(X, rtol=1.0)[2])
        assert rels[1] < rels[0] / 10
        assert rels[2] < rels[1] / 10


class TestRotationLawFit:
    def test_so3_rotation_corresponds_to_unit_spinor_pair(self):
        # for a rotated image, fit Psi' = alpha Psi + beta Psi+ by least squares
        from test_immersion import rotation_matrix

        X = revolve(ProfileCurve.circle(2.0, 1.0, 256), 64, 64)
        s = recover_spinor(X)
        A = rotation_matrix([0.3, -1.0, 0.8], 0.9)
        Y = make_immersion(X.grid, X.points @ A.T)
        t = recover_spinor(Y)
        plus = s.conjugate_partner()
        M = np.stack(
            [
                np.concatenate([s.psi1.ravel(), s.psi2.ravel()]),
                np.concatenate([plus.psi1.ravel(), plus.psi2.ravel()]),
            ],
            axis=1,
        )
        y = np.concatenate([t.psi1.ravel(), t.psi2.ravel()])
        coef, *_ = np.linalg.lstsq(M, y, rcond=None)
        alpha, beta = coef
        resid = np.linalg.norm(M @ coef - y) / np.linalg.norm(y)
        assert resid < 1e-6
        assert abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) < 1e-6


def test_spinor_json_roundtrip():
    X = revolve(ProfileCurve.circle(2.0, 1.0, 64), 32, 32)
    s = recover_spinor(X)
    t = spinor_from_dict(spinor_to_dict(s))
    assert (t.mult1, t.mult2) == (s.mult1, s.mult2)
    np.testing.assert_allclose(t.psi1, s.psi1, atol=1e-15)
    np.testing.assert_allclose(t.psi2, s.psi2, atol=1e-15)
