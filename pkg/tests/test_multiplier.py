from math import sqrt

import numpy as np
import pytest

from app import multiplier
from app.exceptions import DomainError, GridResolutionError


def test_psi0_support():
    assert multiplier.psi0([0.5, 2.0, 0.4, 2.5]) == pytest.approx([0.0, 0.0, 0.0, 0.0])
    assert multiplier.psi0(1.0) > 0


def test_dyadic_bumps_partition_unity():
    lam = np.geomspace(0.1, 50.0, 37)
    total = sum(multiplier.chi0(lam * 2.0**-j) for j in range(-12, 13))
    assert total == pytest.approx(np.ones_like(lam), abs=1e-12)
    assert multiplier.chi0(0.0) == 0.0


def test_chi_iota_dilates():
    assert multiplier.chi_iota(2, 4.0) == pytest.approx(multiplier.chi0(1.0))


def test_l2_and_cowling_sikora_of_constant():
    F = multiplier.constant(1.0, 2.0)
    assert multiplier.l2_norm(F) == pytest.approx(sqrt(2.0))
    assert multiplier.cowling_sikora_norm(F, 8.0) == pytest.approx(sqrt(2.0))


def test_cowling_sikora_sandwich(bump):
    l2 = multiplier.l2_norm(bump)
    coarse = multiplier.cowling_sikora_norm(bump, 4.0)
    fine = multiplier.cowling_sikora_norm(bump, 256.0)
    sup = float(np.max(np.abs(bump.values)))
    assert l2 * (1 - 1e-6) <= fine <= coarse
    assert fine == pytest.approx(l2, rel=2e-2)
    assert coarse <= sup * sqrt(bump.grid[-1] + 1 / 4.0)


def test_sobolev_zero_is_plancherel(bump):
    assert multiplier.sobolev_norm(bump, 0.0) == pytest.approx(multiplier.l2_norm(bump), rel=1e-10)


def test_sobolev_grows_with_order(bump):
    values = [multiplier.sobolev_norm(bump, s) for s in (0.0, 0.5, 1.0, 2.0)]
    assert values == sorted(values)


def test_rough_multiplier_is_flagged():
    F = multiplier.bochner_riesz(1.0, 1.0)
    with pytest.raises(GridResolutionError):
        multiplier.sobolev_norm(F, 1.75)
    assert multiplier.sobolev_norm(F, 1.75, tail_tol=None) > 0


def test_sloc_is_monotone_in_the_dilation_set(bump):
    one = multiplier.sloc_norm(bump, 0.75, [1.0])
    several = multiplier.sloc_norm(bump, 0.75, [0.5, 1.0, 2.0])
    assert 0 < one <= several
    with pytest.raises(DomainError):
        multiplier.sloc_norm(bump, 0.75, [])


def test_dilated_multiplier(bump):
    G = bump.dilated(2.0)
    lam = np.array([0.6, 1.0, 1.3])
    assert G(lam) == pytest.approx(bump(2.0 * lam), abs=1e-12)
    assert G.support == (0.5, 1.5)


def test_evaluation_outside_grid_is_zero(bump):
    assert bump(np.array([-1.0, 100.0])) == pytest.approx([0.0, 0.0])
    even = multiplier.evenize(bump)
    assert even(-2.0) == pytest.approx(bump(2.0))


def test_high_frequency_pieces_of_a_smooth_bump_are_small(bump):
    even = multiplier.evenize(bump)
    piece = multiplier.freq_localize(even, 10)
    assert multiplier.l2_norm(piece) < 1e-4 * multiplier.l2_norm(even)
    with pytest.raises(DomainError):
        multiplier.freq_localize(bump, 0)


def test_constructor_validation():
    with pytest.raises(DomainError):
        multiplier.bochner_riesz(-1.0, 1.0)
    with pytest.raises(DomainError):
        multiplier.smooth_bump(2.0, 1.0)
    with pytest.raises(DomainError):
        multiplier.SampledMultiplier(np.linspace(0, 1, 5), np.ones(5), (0.0, 2.0))


def test_labels():
    assert multiplier.bochner_riesz(1.0, 1.0).label == "br:delta=1,t=1"
    assert multiplier.smooth_bump(0.5, 2.0).label == "bump:0.5,2"
    assert multiplier.BUMP_ID == "psi0(1/2,2)"


def _random_smooth_multiplier(rng):
    grid = multiplier.make_grid(0.0, 4.0)
    bumps = []
    for _ in range(rng.integers(1, 4)):
        width = rng.uniform(0.6, 1.5)
        start = rng.uniform(0.1, 3.9 - width)
        bumps.append((rng.uniform(0.3, 1.0), start, start + width))
    lo, hi = min(b[1] for b in bumps), max(b[2] for b in bumps)

    def values(lam):
        return sum(amp * multiplier.smooth_bump_values(lam, a, b) for amp, a, b in bumps)

    return multiplier.from_function(values, (lo, hi), grid, label="random")


def test_norm_sandwich_on_random_multipliers():
    rng = np.random.default_rng(11)
    for _ in range(20):
        F = _random_smooth_multiplier(rng)
        l2 = multiplier.l2_norm(F)
        constants = []
        for M in (1, 2, 4, 8, 16, 32, 64):
            assert l2 * (1 - 1e-6) <= multiplier.cowling_sikora_norm(F, M)
            constants.append(multiplier.sandwich_constant(F, M, 0.6))
        assert max(constants) <= 2.0 * min(constants)


def test_sandwich_constant_of_zero_multiplier():
    assert multiplier.sandwich_constant(multiplier.constant(0.0, 2.0), 4.0, 0.6) == 0.0
