import math

import numpy as np
import pytest

from tebe.fields import (CylPoint, ExtrapolationError, FieldBuilder, ProfileInterpolant,
                         ansatz_fields, error_form_check, n_operator, higgs_cartesian,
                         pde_residual, pde_residual_fd, unitary_fields)

R, Y = np.meshgrid(np.linspace(0.5, 2, 50), np.linspace(0.5, 2, 50))
POINTS = [CylPoint(0.7, 0.9, 0.3), CylPoint(1.6, 0.4, 2.0), CylPoint(0.3, 1.8, -1.0)]


@pytest.mark.parametrize("pt", POINTS)
def test_metric_unit_determinant(k1_zeta03, pt):
    f = ansatz_fields(k1_zeta03, pt)
    assert np.linalg.det(f.H) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(f.H, f.H.conj().T)
    assert np.all(np.linalg.eigvalsh(f.H) > 0)
    # g^dag g reproduces H
    assert np.allclose(f.g.conj().T @ f.g, f.H, atol=1e-12)


@pytest.mark.parametrize("pt", POINTS)
def test_antihermitian_fields(k1_zeta03, pt):
    m = unitary_fields(k1_zeta03, pt)
    assert np.max(np.abs(m.A_zbar + m.A_z.conj().T)) < 1e-12
    assert np.max(np.abs(m.phi_zbar + m.phi_z.conj().T)) < 1e-12
    assert np.max(np.abs(m.A_y + m.A_y.conj().T)) < 1e-12
    assert np.max(np.abs(m.phi_1 + m.phi_1.conj().T)) < 1e-12


def test_n_operator_symmetric(k1_zeta03):
    m = unitary_fields(k1_zeta03, POINTS[0])
    assert np.max(np.abs(m.N - m.N.T)) < 1e-12
    assert np.all(np.linalg.eigvalsh(m.N) <= 1e-12)


def test_untwisted_higgs_diagonal(untwisted):
    pr = untwisted[1]
    pt = CylPoint(0.8, 1.1)
    m = unitary_fields(pr, pt)
    # phi_1 = (i/2) diag(d_y log Y, -d_y log Y) at zeta = 0
    fb = FieldBuilder(pr)
    Yj, _ = fb.base(np.array([pt.z]), np.array([pt.y]))
    dly = (Yj.d(2).val / Yj.val)[0].real
    assert m.phi_1[0, 0] == pytest.approx(-0.5j * dly, abs=1e-12) or \
        m.phi_1[0, 0] == pytest.approx(0.5j * dly, abs=1e-12)
    assert abs(m.phi_1[0, 1]) < 1e-14 and m.phi_1[1, 1] == pytest.approx(-m.phi_1[0, 0])


def test_sigma_near_plane(k1_zeta03):
    pr = k1_zeta03
    fb = FieldBuilder(pr)
    r, y = 0.9, 1e-3
    _, Sj = fb.base(np.array([r + 0j]), np.array([y]))
    sig = y / r
    expect = 2 * pr.p.zeta * pr.p.k * r ** pr.p.b * sig ** 2
    assert Sj.val[0].real == pytest.approx(expect, rel=1e-2)


def test_pde_residual_untwisted(untwisted):
    r1, r2 = pde_residual(untwisted[1], R, Y)
    assert np.max(np.abs(r1)) < 1e-9
    assert np.max(np.abs(r2)) < 1e-9


@pytest.mark.parametrize("zeta", [0.1, 0.25, 0.45])
def test_pde_residual_bounded_by_shooting_residual(k1_family, zeta):
    pr = k1_family[zeta]
    r1, r2 = pde_residual(pr, R[::5, ::5], Y[::5, ::5])
    assert max(np.max(np.abs(r1)), np.max(np.abs(r2))) <= 10 * pr.residual_norm


def test_fd_cross_check_second_order(k1_zeta03):
    r = np.array([0.6, 1.0, 1.5, 1.9])
    y = np.array([0.7, 1.2, 0.55, 1.8])
    r1, _ = pde_residual(k1_zeta03, r, y)
    hs = np.array([4e-3, 2e-3, 1e-3, 5e-4])
    diffs = [np.max(np.abs(pde_residual_fd(k1_zeta03, r, y, h) - r1)) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(diffs), 1)[0]
    assert abs(slope - 2) < 0.1


def test_rotation_covariance(k1_zeta03):
    """Fields at angle theta are the theta = 0 fields conjugated by a diagonal phase."""
    pr = k1_zeta03
    b = pr.p.b
    a = unitary_fields(pr, CylPoint(1.1, 0.8, 0.0))
    th = 0.9
    c = unitary_fields(pr, CylPoint(1.1, 0.8, th))
    U = np.diag([np.exp(0.5j * b * th), np.exp(-0.5j * b * th)])
    assert np.allclose(c.phi_1, U @ a.phi_1 @ U.conj().T, atol=1e-12)
    assert np.allclose(c.A_y, U @ a.A_y @ U.conj().T, atol=1e-12)


def test_interpolant_rejects_extrapolation(untwisted):
    it = ProfileInterpolant(untwisted[1])
    with pytest.raises(ExtrapolationError):
        it.tau_derivs(np.array([100.0]))


def test_error_form_trivial_at_own_twist(k1_zeta03):
    ok, dev, mag = error_form_check(k1_zeta03, 0.3)
    assert ok and mag < 1e-8


def test_error_form_structure(untwisted):
    ok, dev, mag = error_form_check(untwisted[1], 0.05)
    assert ok and dev < 1e-8
    assert 0.01 < mag < 1.0


def test_error_form_theta_independence(untwisted):
    fb = FieldBuilder(untwisted[1], zeta_fields=0.05)
    psi = np.linspace(0.3, 1.2, 7)
    z = np.sin(psi) + 0j
    out = []
    for th in (0.0, math.pi / 3):
        Om = fb.moment_unitary(z * np.exp(1j * th), np.cos(psi), 0.05)
        out.append((Om[:, 0, 0].real, (Om[:, 0, 1] * np.exp(-2j * th)).real))
    assert np.max(np.abs(np.array(out[0]) - np.array(out[1]))) < 1e-10


def test_higgs_components_antihermitian(k1_zeta03):
    fb = FieldBuilder(k1_zeta03)
    f = {k: v.val for k, v in fb.unitary(np.array([0.9 + 0.2j]), np.array([0.6])).items()
         if k not in ("Y", "Sigma", "g")}
    for P in higgs_cartesian(f, k1_zeta03.p.cos_beta):
        assert np.max(np.abs(P + np.conj(np.swapaxes(P, -1, -2)))) < 1e-12
    N = n_operator(higgs_cartesian(f, k1_zeta03.p.cos_beta), np.array([1.0]))
    assert N.shape == (1, 3, 3)
