import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app import group_core, quadrature, spectral
from app.exceptions import DegenerateInputError, DomainError

entry = st.floats(min_value=-2, max_value=2, allow_nan=False)
vector3 = st.lists(entry, min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1)


def test_symmetric_eigen_matches_numpy():
    rng = np.random.default_rng(7)
    M = rng.standard_normal((6, 6))
    S = M + M.T
    evals, V = spectral.symmetric_eigen(S)
    assert evals == pytest.approx(np.sort(np.linalg.eigvalsh(S))[::-1], abs=1e-10)
    assert np.allclose(S @ V, V * evals, atol=1e-9)
    assert np.allclose(V.T @ V, np.eye(6), atol=1e-12)


def test_symmetric_eigen_rejects_asymmetric():
    with pytest.raises(DomainError):
        spectral.symmetric_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_heisenberg_decomposition(h1, h2):
    dec = spectral.decompose_j(h1, [2.0])
    assert dec.b == pytest.approx([2.0])
    assert dec.r == (1,)
    assert dec.r0 == 0
    dec2 = spectral.decompose_j(h2, [-1.0])
    assert dec2.b == pytest.approx([1.0])
    assert dec2.r == (2,)
    assert np.allclose(dec2.P[0], np.eye(4))


def test_decomposition_needs_nonzero_mu(h1):
    with pytest.raises(DegenerateInputError):
        spectral.decompose_j(h1, [0.0])


def test_projections_resolve_the_identity(group43):
    dec = spectral.decompose_j(group43, [0.3, -0.4, 0.5])
    J = group_core.j_matrix(group43, [0.3, -0.4, 0.5])
    total = sum(dec.P) + dec.P0
    assert np.allclose(total, np.eye(4), atol=1e-10)
    for b, P in zip(dec.b, dec.P):
        assert np.allclose(-J @ J @ P, b * b * P, atol=1e-10)
        assert np.allclose(J @ P, P @ J, atol=1e-10)
    assert dec.gap > 0


def test_degenerate_radical_is_reported():
    spec = group_core.metivier_4_3(np.eye(3))
    dec = spectral.decompose_j(spec, [1.0, 0.0, 0.0])
    assert dec.r0 == 2
    assert dec.b == pytest.approx([2.0])


def test_su2_generators_are_orthonormal():
    basis = [spectral.jminus(e) for e in np.eye(3)] + [spectral.jplus(e) for e in np.eye(3)]
    gram = np.array([[spectral.trace_form(a, b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(6), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(vector3, vector3)
def test_so4_closed_forms_match_jacobi(xi, eta):
    xi, eta = np.array(xi), np.array(eta)
    J = spectral.jminus(xi) + spectral.jplus(eta)
    b1, b2 = spectral.so4_eigenvalues(xi, eta)
    s = np.sqrt(np.clip(spectral.symmetric_eigen(-J @ J)[0], 0.0, None))
    assert s == pytest.approx([b1, b1, b2, b2], abs=1e-6)
    if abs(b2) > 1e-3:
        P1, P2 = spectral.so4_projections(xi, eta)
        assert np.allclose(-J @ J @ P1, b1 * b1 * P1, atol=1e-8)
        assert np.allclose(-J @ J @ P2, b2 * b2 * P2, atol=1e-8)
        assert np.allclose(P1 + P2, np.eye(4), atol=1e-12)


def test_so4_projections_reject_equal_norms():
    with pytest.raises(DegenerateInputError):
        spectral.so4_projections([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])


def test_metivier43_eigen_matches_group(group43):
    xi = np.array([0.2, 0.7, -0.1])
    dec = spectral.decompose_j(group43, xi)
    assert dec.b == pytest.approx(spectral.metivier43_eigen(np.diag([0.5, 0.5, 0.0]), xi), rel=1e-10)


@pytest.mark.parametrize(
    "A, kind, v",
    [
        (np.zeros((3, 3)), "FULL", [0.0, 0.0, 1.0]),
        (np.eye(3), "ZERO", [0.0, 0.0, 1.0]),
        (np.diag([1.0, 2.0, 0.0]), "INTERMEDIATE", [0.0, 0.0, 1.0]),
    ],
)
def test_kerA_classify(A, kind, v):
    result = spectral.kerA_classify(A)
    assert result.kind == kind
    assert result.v == pytest.approx(v)


def test_derivative_bounds_for_scalar_A():
    probes = spectral.mu_derivative_bounds_probe(0.5 * np.eye(3), sphere_samples=32, alpha_set=(1, 2))
    first = probes[1]
    assert first.skipped == 0
    assert len(first.rows) == 2 * 32
    assert 0 < first.kappa_b <= 1 + 1e-5
    assert np.isfinite(first.kappa_P)
    assert np.isfinite(probes[2].kappa_b)


def test_derivative_bounds_reject_non_metivier():
    with pytest.raises(DegenerateInputError):
        spectral.mu_derivative_bounds_probe(np.eye(3), sphere_samples=8)


@pytest.mark.parametrize("angular_nodes", [4, 8, 16, 24])
def test_jacobi_converges_on_every_sphere_node(angular_nodes):
    A = np.diag([0.5, 0.5, 0.0])
    spec = group_core.metivier_4_3(A)
    omegas, _ = quadrature.sphere_rule(3, angular_nodes)
    for omega in omegas:
        dec = spectral.decompose_j(spec, omega)
        assert dec.r0 == 0
        assert dec.b == pytest.approx(spectral.metivier43_eigen(A, omega), rel=1e-10)


def test_jacobi_handles_exact_repeated_eigenvalues():
    S = np.diag([2.0, 2.0, 0.5, 0.5]) + 1e-13 * np.ones((4, 4))
    evals, V = spectral.symmetric_eigen(S)
    assert evals == pytest.approx([2.0, 2.0, 0.5, 0.5], abs=1e-12)
    assert np.allclose(V.T @ V, np.eye(4), atol=1e-12)


def test_so4_closed_forms_on_a_thousand_random_pairs():
    rng = np.random.default_rng(20)
    checked = 0
    while checked < 1000:
        xi, eta = rng.standard_normal(3), rng.standard_normal(3)
        b1, b2 = spectral.so4_eigenvalues(xi, eta)
        if b2 < 1e-3 * b1 or b1 - b2 < 1e-3 * b1:
            continue
        J = spectral.jminus(xi) + spectral.jplus(eta)
        dec = spectral.decompose_matrix(J)
        assert dec.r == (2, 2)
        assert np.max(np.abs(dec.b - [b1, b2])) <= 1e-10 * b1
        rebuilt = sum(b * b * P for b, P in zip(dec.b, dec.P))
        assert np.max(np.abs(rebuilt + J @ J)) <= 1e-9 * b1 * b1
        checked += 1


def test_derivative_bounds_stable_under_step_halving():
    A = np.diag([0.5, 0.5, 0.0])
    coarse = spectral.mu_derivative_bounds_probe(A, v=[0.0, 0.0, 1.0], sphere_samples=64, h=1e-4, seed=3)
    fine = spectral.mu_derivative_bounds_probe(A, v=[0.0, 0.0, 1.0], sphere_samples=64, h=5e-5, seed=3)
    for alpha in (1, 2):
        for kappa in ("kappa_b", "kappa_P"):
            a, b = getattr(coarse[alpha], kappa), getattr(fine[alpha], kappa)
            assert np.isfinite(a) and 0 < a < 10
            assert abs(a - b) <= 0.2 * a
        assert max(row.fd_error for row in fine[alpha].rows) < 1e-4
