from math import sqrt

import numpy as np
import pytest
from scipy.special import eval_genlaguerre

from app import laguerre
from app.exceptions import DomainError
from app.laguerre import LaguerreParams


@pytest.mark.parametrize("k, a", [(0, 0), (3, 0), (7, 2), (20, 1)])
def test_recurrence_matches_scipy(k, a):
    t = np.linspace(0.0, 30.0, 41)
    assert laguerre.laguerre_poly(k, a, t) == pytest.approx(eval_genlaguerre(k, a, t), rel=1e-9, abs=1e-9)
    table = laguerre.laguerre_poly_table(k, a, t)
    assert table[k] == pytest.approx(eval_genlaguerre(k, a, t), rel=1e-9, abs=1e-9)


def test_laguerre_function_broadcasts_and_stays_finite():
    k = np.arange(6)[:, None]
    t = np.linspace(0.0, 20.0, 9)[None, :]
    values = laguerre.laguerre_function(k, 1, t)
    expected = eval_genlaguerre(k, 1, t) * np.exp(-t / 2)
    assert values == pytest.approx(expected, rel=1e-9, abs=1e-12)
    far = laguerre.laguerre_function(400, 0, np.array([2000.0]))
    assert np.all(np.isfinite(far))


@pytest.mark.parametrize("k", [0, 1, 5, 12])
@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.5])
def test_phi_norm_matches_closed_form(k, m, lam):
    params = LaguerreParams(k, lam, m)
    assert laguerre.phi_l2_norm_sq(params) == pytest.approx(laguerre.phi_l2_norm_sq_exact(params), rel=1e-10)


@pytest.mark.parametrize("k, m", [(0, 1), (3, 1), (2, 2)])
def test_phi_is_a_hermite_eigenfunction(k, m):
    assert laguerre.hermite_residual(LaguerreParams(k, 1.3, m), grid_h=1e-3) < 1e-4


@pytest.mark.parametrize("k, m", [(3, 1), (2, 2)])
def test_hermite_residual_falls_quadratically_in_the_step(k, m):
    params = LaguerreParams(k, 1.0, m)
    coarse = laguerre.hermite_residual(params, grid_h=0.04)
    fine = laguerre.hermite_residual(params, grid_h=0.02)
    assert coarse / fine == pytest.approx(4.0, rel=0.1)


def test_subelliptic_ratio_first_moment_is_root_two():
    for k in range(0, 30, 7):
        assert laguerre.subelliptic_ratio(LaguerreParams(k, 0.7, 2), 1.0) == pytest.approx(sqrt(2.0), rel=1e-9)


@pytest.mark.parametrize("beta", [0.5, 2.0, 4.0])
def test_subelliptic_ratio_stays_bounded_in_k(beta):
    ratios = [laguerre.subelliptic_ratio(LaguerreParams(k, 1.0, 1), beta) for k in range(0, 60, 5)]
    assert laguerre.subelliptic_ratio(LaguerreParams(3, 1.0, 1), 0.0) == 1.0
    assert max(ratios) < 50.0
    assert min(ratios) > 0.0


def test_moment_matrices():
    kmax, lam, m = 8, 1.7, 2
    gram = laguerre.gram_matrix(kmax, lam, m)
    exact = [laguerre.phi_l2_norm_sq_exact(LaguerreParams(k, lam, m)) for k in range(kmax + 1)]
    assert np.diag(gram) == pytest.approx(exact, rel=1e-10)
    assert np.allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-8 * max(exact))
    first = laguerre.moment_matrix(kmax, lam, m, power=1)
    band = np.abs(np.subtract.outer(np.arange(kmax + 1), np.arange(kmax + 1))) > 1
    assert np.allclose(first[band], 0.0, atol=1e-8 * np.max(np.abs(first)))
    assert np.allclose(first, first.T)


def test_script_L_sign_and_domain():
    t = np.array([0.0, 0.4])
    assert laguerre.script_L(1, 1, t) == pytest.approx(-(1.0 - 2 * t) * np.exp(-t))
    with pytest.raises(DomainError):
        laguerre.script_L(0, 1, [-0.1])


def test_params_validation():
    with pytest.raises(DomainError):
        LaguerreParams(-1, 1.0, 1)
    with pytest.raises(DomainError):
        LaguerreParams(0, 0.0, 1)
    with pytest.raises(DomainError):
        LaguerreParams(0, 1.0, 0)


def test_profile_table_rows():
    rows = laguerre.profile_table(2, 1, 1.0, [0.0, 1.0])
    assert len(rows) == 6
    assert rows[0] == {"k": 0, "m": 1, "lam": 1.0, "rho": 0.0, "phi": 1.0, "reference": 1.0, "abs_error": 0.0}
    assert max(row["abs_error"] for row in rows) < 1e-12
