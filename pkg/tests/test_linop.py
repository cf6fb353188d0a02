import math

import numpy as np
import pytest

from tebe.linop import (ad_matrix, assemble_phi, coefficient_limits, indicial_roots, psi_grid,
                        quadratic_form, quadratic_form_terms, random_sections,
                        smallest_singular_value)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_indicial_roots(k):
    om, ps = indicial_roots(k)
    assert np.allclose(om, [-1, 2])
    assert np.allclose(ps, [-(k + 1), 0, 0, k + 1])


def test_indicial_equator_independent_of_k():
    assert indicial_roots(1)[0] == indicial_roots(7)[0]


def test_indicial_domain():
    with pytest.raises(ValueError):
        indicial_roots(0)


def test_ad_matrix_skew_for_antihermitian():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    X = X - X.conj().T
    A = ad_matrix(X)
    assert np.allclose(A, -A.T)


def test_grid_clustered_and_bounded():
    g = psi_grid(50, 1e-3)
    assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(math.pi / 2 - 1e-3)
    h = np.diff(g)
    assert h[0] < h[len(h) // 2] and h[-1] < h[len(h) // 2]


@pytest.fixture(scope="module")
def op0(untwisted):
    return assemble_phi(untwisted[1], 200)


@pytest.fixture(scope="module")
def op3(k1_zeta03):
    return assemble_phi(k1_zeta03, 200)


def test_form_preserved(op0, op3):
    assert op0.form_defect <= 1e-10 and op3.form_defect <= 1e-10
    assert op0.matrix.shape == (400, 400)


def test_self_adjoint_untwisted(untwisted):
    # weighted symmetrisation; A_rho vanishes at zeta = 0 so no skew part remains
    a = [np.max(np.abs(S - S.T)) / np.max(np.abs(S))
         for S in (assemble_phi(untwisted[1], n).symmetrized() for n in (100, 200))]
    assert max(a) < 1e-12


def test_symmetric_part_twisted(op3):
    S = op3.symmetrized() - op3.parts["skew"]
    assert np.max(np.abs(S - S.T)) / np.max(np.abs(S)) < 1e-12


def test_quadratic_form_negative(op0, op3):
    for op in (op0, op3):
        secs = random_sections(op, 100, seed=11)
        assert all(quadratic_form(op, s) < 0 for s in secs)


def test_quadratic_form_six_terms(op3):
    s = random_sections(op3, 3, seed=5)
    for sec in s:
        terms = quadratic_form_terms(op3, sec)
        assert len(terms) == 6 and all(v <= 0 for v in terms.values())
        q = quadratic_form(op3, sec)
        assert sum(terms.values()) == pytest.approx(q, rel=1e-10)


def test_rho_term_drops_out(op3):
    s = random_sections(op3, 1, seed=2)[0]
    assert abs(op3.inner(s, op3.parts["skew"] @ s)) < 1e-10 * abs(quadratic_form(op3, s))


def test_kernel_trivial_under_refinement(untwisted):
    pr = untwisted[1]
    s = [smallest_singular_value(assemble_phi(pr, n)) for n in (100, 200, 400)]
    assert min(s) > 1.0
    assert abs(s[2] - s[1]) < abs(s[1] - s[0]) + 1e-12


def test_margin_sensitivity(op0, untwisted):
    s = smallest_singular_value(op0)
    s_half = smallest_singular_value(assemble_phi(untwisted[1], 200, margin=5e-4))
    assert abs(s_half - s) / s < 0.05


@pytest.mark.parametrize("which", ["untwisted", "twisted"])
def test_coefficient_limits(which, untwisted, k1_zeta03):
    pr = untwisted[1] if which == "untwisted" else k1_zeta03
    fits = coefficient_limits(pr)
    assert all(f.ok for f in fits), fits


def test_limits_independent_of_twist(untwisted, k1_zeta03):
    a = coefficient_limits(untwisted[1])
    b = coefficient_limits(k1_zeta03)
    for fa, fb in zip(a, b):
        if fa.expected_coefficient:
            assert fa.coefficient == pytest.approx(fb.coefficient, rel=0.01)


def test_assembly_requires_convergence(untwisted):
    import dataclasses
    bad = dataclasses.replace(untwisted[1], converged=False)
    with pytest.raises(ValueError):
        assemble_phi(bad, 50)
