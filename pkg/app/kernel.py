"""
Convolution kernels of F(L) chi(2^ell U) on Metivier groups.

With mu = rho * omega (|omega| = 1) the eigenvalues are homogeneous,
b_n^mu = rho * b_n^omega, and the projections depend on omega only, so

    K(x, u) = (2 pi)^-(d2 + d1/2) int_S int_0^inf sum_k F(rho lam_k^omega) chi(2^ell rho)
              prod_n phi_{k_n}^{(rho b_n, r_n)}(|P_n x|) e^{i rho <omega, u>} rho^(d2-1) drho domega.

The Laguerre factors see x only through the block norms |P_n x|, so no
eigenvector frame is ever needed.
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import ceil, comb, fsum, pi
from typing import Callable, Iterable

import numpy as np

from . import conf
from .exceptions import DegenerateInputError, DimensionMismatchError, DomainError, QuadratureError
from .group_core import GroupSpec, Point
from .laguerre import moment_matrix, phi_radial, script_L
from .logger import get_logger
from .models import KernelResult, QuadratureSpec
from .multiplier import BUMP_HI, BUMP_LO, SampledMultiplier, chi_iota
from .quadrature import composite_legendre, sphere_points, sphere_rule
from .spectral import SpectralDecomposition, decompose_j

logger = get_logger()

PANELS_PER_WIDTH = 2
NODES_PER_PERIOD = 8


def eigenvalue_lambda(dec: SpectralDecomposition, k) -> float:
    k = np.asarray(k, dtype=int)
    if k.shape != (dec.N,):
        raise DimensionMismatchError(f"multi-index has shape {k.shape}, expected ({dec.N},)")
    return float(np.dot(2 * k + np.asarray(dec.r), dec.b))


def _box_extent(dec: SpectralDecomposition, cap: float) -> list[int]:
    ground = float(np.dot(dec.r, dec.b))
    spare = max(cap - ground, 0.0)
    return [int(np.floor(spare / (2.0 * b) * (1 + 1e-12))) for b in dec.b]


def enumerate_k(dec: SpectralDecomposition, f_support_max: float) -> list[tuple[int, ...]]:
    """All multi-indices with lam_k <= f_support_max, lexicographic."""
    if not f_support_max > 0:
        raise DomainError("eigenvalue cap must be positive")
    cap = f_support_max * (1 + 1e-12)
    extent = _box_extent(dec, cap)
    return [
        k
        for k in itertools.product(*(range(e + 1) for e in extent))
        if eigenvalue_lambda(dec, k) <= cap
    ]


def lattice(dec: SpectralDecomposition, cap: float):
    """Eigenvalues on the dense box covering lam_k <= cap, with the cap mask."""
    extent = _box_extent(dec, cap * (1 + 1e-12))
    axes = np.meshgrid(*(np.arange(e + 1) for e in extent), indexing="ij")
    lam = sum((2 * ax + r) * b for ax, r, b in zip(axes, dec.r, dec.b))
    return lam, lam <= cap * (1 + 1e-12)


def ground_energy(dec: SpectralDecomposition) -> float:
    return float(np.dot(dec.r, dec.b))


def ell0(
    spec: GroupSpec,
    f_support: tuple[float, float],
    chi_support: tuple[float, float] = (BUMP_LO, BUMP_HI),
    n_samples: int = 256,
    seed: int | None = None,
) -> int | None:
    """
    Smallest ell0 with F(L) chi(2^ell U) = 0 for every ell < -ell0, or None when
    F lives below every ground energy. Sampled over unit omega for d2 > 1.
    """
    f_lo, f_hi = f_support
    c_lo, c_hi = chi_support
    if f_lo > f_hi or c_lo > c_hi:
        raise DomainError("supports must be nonempty intervals")
    if f_hi <= 0 or c_hi <= 0:
        return None
    g_min = min(ground_energy(decompose_j(spec, w)) for w in sphere_points(spec.d2, n_samples, seed))
    ell_min = ceil(np.log2(g_min * max(c_lo, 1e-300) / f_hi) - 1e-12)
    return -ell_min


def rho_window(ell: int | None, F: SampledMultiplier, dec: SpectralDecomposition, quad: QuadratureSpec):
    """
    Radial window, unit-sphere eigenvalue lattice and cap mask; None when the integrand vanishes.

    Without a cutoff the window starts at f_hi / cap, so every node above it
    carries the complete k-sum. The stretch (0, rho_lo) is left to the endpoint
    node of radial_nodes.
    """
    f_hi = F.support[1]
    g = ground_energy(dec)
    if ell is None:
        cap = max(quad.k_energy_cap, 2.0 * g)
        rho_lo = f_hi / cap
        rho_hi = f_hi / g
    else:
        rho_lo = BUMP_LO * 2.0 ** (-ell)
        rho_hi = min(BUMP_HI * 2.0 ** (-ell), f_hi / g)
        if rho_hi <= rho_lo:
            return None
        cap = f_hi / rho_lo
    lam, mask = lattice(dec, cap)
    if rho_hi <= rho_lo or not mask.any():
        return None
    return rho_lo, rho_hi, lam, mask


def radial_rule(rho_lo, rho_hi, lam_max, width, nodes, u_norm):
    panels = max(1, ceil(PANELS_PER_WIDTH * (rho_hi - rho_lo) * lam_max / width))
    wanted = NODES_PER_PERIOD * ceil(u_norm * rho_hi)
    per_panel = max(nodes, ceil(wanted / panels))
    return composite_legendre(per_panel, rho_lo, rho_hi, panels)


def radial_nodes(ell, F: SampledMultiplier, d2: int, window, nodes: int, u_norm: float = 0.0):
    """
    Radial nodes and weights for a window. Without a cutoff the range is split
    into octaves, each resolved for its own largest active eigenvalue f_hi / a,
    and one extra node at rho_lo with weight rho_lo / d2 stands in for
    int_0^rho_lo rho^(d2-1) drho: the complete k-sum tends to its Euclidean limit there.
    """
    rho_lo, rho_hi, lam, mask = window
    width = F.support[1] - F.support[0]
    if ell is not None:
        return radial_rule(rho_lo, rho_hi, float(lam[mask].max()), width, nodes, u_norm)
    rhos, weights = [np.array([rho_lo])], [np.array([rho_lo / d2])]
    a = rho_lo
    while a < rho_hi:
        b = min(2.0 * a, rho_hi)
        rho, w = radial_rule(a, b, F.support[1] / a, width, nodes, u_norm)
        rhos.append(rho)
        weights.append(w)
        a = b
    return np.concatenate(rhos), np.concatenate(weights)


def check_metivier_ray(dec: SpectralDecomposition):
    if dec.r0:
        raise DegenerateInputError("kernel formulas need a Metivier group (trivial radical)")


def _coefficients(F, ell, rho, lam, mask, d2, weights):
    """c[node, k...] = F(rho lam_k) chi(2^ell rho) rho^(d2-1) w."""
    arg = rho.reshape((-1,) + (1,) * lam.ndim) * lam
    c = F(arg) * mask
    radial = rho ** (d2 - 1) * weights
    if ell is not None:
        radial = radial * chi_iota(-ell, rho)
    return c * radial.reshape((-1,) + (1,) * lam.ndim)


def _ray_values(spec, F, ell, X, U, quad, node_factor, omega):
    dec = decompose_j(spec, omega)
    check_metivier_ray(dec)
    window = rho_window(ell, F, dec, quad)
    if window is None:
        return np.zeros(len(X), dtype=complex), 0
    _, _, lam, mask = window
    u_norm = float(np.max(np.abs(U @ omega), initial=0.0))
    rho, w = radial_nodes(ell, F, spec.d2, window, node_factor * quad.radial_nodes, u_norm)
    c = _coefficients(F, ell, rho, lam, mask, spec.d2, w)
    block_norms = [np.linalg.norm(X @ P, axis=1) for P in dec.P]
    total = None
    for n, (b, r, norms) in enumerate(zip(dec.b, dec.r, block_norms)):
        ks = np.arange(lam.shape[n])
        factor = phi_radial(
            ks[None, None, :], (rho * b)[None, :, None], r, norms[:, None, None]
        )
        if total is None:
            total = np.einsum("nk...,pnk->pn...", c, factor)
        else:
            total = np.einsum("pnk...,pnk->pn...", total, factor)
    phase = np.exp(1j * np.outer(U @ omega, rho))
    return np.sum(total * phase, axis=1), int(mask.sum())


def kernel_values(
    spec: GroupSpec,
    F: SampledMultiplier,
    ell: int | None,
    X,
    U,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
    node_factor: int = 1,
):
    """Kernel at many points (rows of X and U); returns (values, k_terms)."""
    quad = quad or QuadratureSpec.default()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if X.shape[1] != spec.d1 or U.shape[1] != spec.d2 or len(X) != len(U):
        raise DimensionMismatchError("point arrays do not match the group dimensions")
    if ell is None and F.support[0] <= 0:
        raise DomainError("without a chi cutoff the multiplier support must stay away from 0")
    if F.is_zero():
        return np.zeros(len(X), dtype=complex), 0
    omegas, weights = sphere_rule(spec.d2, quad.angular_nodes)
    rays = list(pmap(lambda om: _ray_values(spec, F, ell, X, U, quad, node_factor, om), omegas))
    values = np.array(
        [
            complex(
                fsum(w * v[p].real for w, (v, _) in zip(weights, rays)),
                fsum(w * v[p].imag for w, (v, _) in zip(weights, rays)),
            )
            for p in range(len(X))
        ]
    )
    k_terms = max((kt for _, kt in rays), default=0)
    return values * (2 * pi) ** -(spec.d2 + spec.d1 / 2), k_terms


def _relative_change(fine, coarse) -> float:
    scale = np.max(np.abs(fine), initial=0.0)
    if scale == 0.0:
        return float(np.max(np.abs(coarse), initial=0.0))
    return float(np.max(np.abs(fine - coarse)) / scale)


def eval_kernel(
    spec: GroupSpec,
    F: SampledMultiplier,
    ell: int | None,
    point: Point,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
    check: bool = True,
) -> KernelResult:
    quad = quad or QuadratureSpec.default()
    X, U = point.x[None, :], point.u[None, :]
    coarse, _ = kernel_values(spec, F, ell, X, U, quad, pmap, 1)
    fine, k_terms = kernel_values(spec, F, ell, X, U, quad, pmap, 2)
    value = complex(fine[0])
    est = _relative_change(fine, coarse)
    if ell is None:
        wider, _ = kernel_values(spec, F, ell, X, U, quad.cap_doubled(), pmap, 2)
        est = max(est, _relative_change(wider, fine))
    if check and est > conf.QUAD_MAX_ERROR:
        raise QuadratureError(f"kernel quadrature error estimate {est:.3g} above {conf.QUAD_MAX_ERROR:g}")
    if abs(value.imag) > 1e-8 * max(abs(value), 1e-300):
        logger.warning("Kernel value has imaginary part %.3g", value.imag)
    return KernelResult(real=value.real, imag=value.imag, k_terms=k_terms, quad_error_est=est)


@lru_cache(maxsize=256)
def _unit_moments(kmax: int, m: int, power: int) -> np.ndarray:
    return moment_matrix(kmax, 1.0, m, power)


def multinomial_terms(alpha: int, blocks: int):
    """(coefficient, j) with |j| = alpha, expanding (sum_n |y_n|^2)^alpha."""
    for j in itertools.product(range(alpha + 1), repeat=blocks):
        if sum(j) == alpha:
            coeff = 1
            rest = alpha
            for jn in j:
                coeff *= comb(rest, jn)
                rest -= jn
            yield coeff, j


def contract_blocks(left, right, matrices) -> np.ndarray:
    """sum_{k,k'} left[p,k] conj(right[p,k']) prod_n M_n[k_n, k'_n] for each leading index p."""
    t = left
    for M in matrices:
        t = np.einsum("pk...,kl->p...l", t, M)
    axes = tuple(range(1, t.ndim))
    return np.sum(t * np.conj(right), axis=axes).real


def _ray_mass(spec, F, ell, alpha, quad, node_factor, omega):
    dec = decompose_j(spec, omega)
    check_metivier_ray(dec)
    window = rho_window(ell, F, dec, quad)
    if window is None:
        return 0.0, 0.0
    _, _, lam, mask = window
    rho, w = radial_nodes(ell, F, spec.d2, window, node_factor * quad.radial_nodes)
    c = _coefficients(F, ell, rho, lam, mask, 1, np.ones_like(rho))
    radial = rho ** (spec.d2 - 1) * w
    kmax = max(lam.shape) - 1
    mass = np.zeros_like(rho)
    for coeff, j in multinomial_terms(alpha, dec.N):
        mats = [_unit_moments(kmax, r, jn)[: lam.shape[n], : lam.shape[n]] for n, (r, jn) in enumerate(zip(dec.r, j))]
        scale = np.prod([(rho * b) ** (r - jn) for b, r, jn in zip(dec.b, dec.r, j)], axis=0)
        mass += coeff * scale * contract_blocks(c, c, mats)
    diag = np.zeros_like(rho)
    if alpha == 0:
        norms = np.prod(
            np.meshgrid(*(
                np.array([comb(k + r - 1, k) for k in range(lam.shape[n])], dtype=float) * (2 * pi) ** r
                for n, r in enumerate(dec.r)
            ), indexing="ij"),
            axis=0,
        )
        scale = np.prod([(rho * b) ** r for b, r in zip(dec.b, dec.r)], axis=0)
        axes = tuple(range(1, c.ndim))
        diag = scale * np.sum(np.abs(c) ** 2 * norms, axis=axes)
    return float(np.dot(radial, mass)), float(np.dot(radial, diag))


def _first_layer(spec, F, ell, alpha, quad, pmap, node_factor):
    omegas, weights = sphere_rule(spec.d2, quad.angular_nodes)
    rays = list(pmap(lambda om: _ray_mass(spec, F, ell, alpha, quad, node_factor, om), omegas))
    norm = (2 * pi) ** -(spec.d2 + spec.d1)
    mass = norm * fsum(w * m for w, (m, _) in zip(weights, rays))
    closed = norm * fsum(w * d for w, (_, d) in zip(weights, rays))
    return mass, closed


def first_layer_mass(
    spec: GroupSpec,
    F: SampledMultiplier,
    ell: int | None,
    alpha: int,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
) -> tuple[float, float]:
    """(mass, relative change under radial node doubling; without a cutoff also under cap doubling)."""
    if alpha < 0 or int(alpha) != alpha:
        raise DomainError("alpha must be a nonnegative integer")
    quad = quad or QuadratureSpec.default()
    if ell is None and F.support[0] <= 0:
        raise DomainError("without a chi cutoff the multiplier support must stay away from 0")
    if F.is_zero():
        return 0.0, 0.0
    coarse, _ = _first_layer(spec, F, ell, int(alpha), quad, pmap, 1)
    fine, _ = _first_layer(spec, F, ell, int(alpha), quad, pmap, 2)
    est = _relative_change(np.array([fine]), np.array([coarse]))
    if ell is None:
        wider, _ = _first_layer(spec, F, ell, int(alpha), quad.cap_doubled(), pmap, 2)
        est = max(est, _relative_change(np.array([wider]), np.array([fine])))
    return fine, est


def weighted_l2_mass_first_layer(
    spec: GroupSpec,
    F: SampledMultiplier,
    ell: int | None,
    alpha: int,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
) -> float:
    """int_G |x|^{2 alpha} |K(x,u)|^2 d(x,u) via Plancherel in u and block-radial moments."""
    return first_layer_mass(spec, F, ell, alpha, quad, pmap)[0]


def plancherel_closed_sum(
    spec: GroupSpec,
    F: SampledMultiplier,
    ell: int | None,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
) -> float:
    """(2 pi)^-d2 int sum_k |F(lam_k) chi|^2 prod ||(2 pi)^-r_n phi_k||^2 dmu, from the exact Laguerre norms."""
    quad = quad or QuadratureSpec.default()
    if F.is_zero():
        return 0.0
    return _first_layer(spec, F, ell, 0, quad, pmap, 2)[1]


def v_form(spec: GroupSpec, F: SampledMultiplier, ell: int | None, xi, mu) -> np.ndarray:
    """
    V(xi, mu) = 2^|r| sum_k F(lam_k^mu) chi(2^ell |mu|) prod_n scriptL_{k_n}^{(r_n-1)}(|P_n xi|^2 / b_n),
    the kernel's transform in both layers: K = (2 pi)^-(d1+d2) int int V e^{i(<xi,x> + <mu,u>)}.
    Broadcasts over rows of xi.
    """
    mu = np.asarray(mu, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    dec = decompose_j(spec, mu)
    check_metivier_ray(dec)
    psi = 1.0 if ell is None else float(chi_iota(-ell, np.linalg.norm(mu)))
    if psi == 0.0 or F.support[1] < ground_energy(dec):
        return np.zeros(len(xi))
    lam, mask = lattice(dec, F.support[1])
    coeff = F(lam) * mask * psi
    total = coeff[None, ...]
    for n, (b, r, P) in enumerate(zip(dec.b, dec.r, dec.P)):
        t = np.sum((xi @ P) * xi, axis=1) / b
        factor = script_L(np.arange(lam.shape[n])[None, :], r, np.clip(t, 0.0, None)[:, None])
        total = np.einsum("pk...,pk->p...", total, factor)
    return 2.0 ** sum(dec.r) * total


def dilation_covariance_check(
    spec: GroupSpec,
    F: SampledMultiplier,
    t: float,
    points: Iterable[Point],
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
) -> float:
    """max relative deviation of K_{F(t^2 .)}(x,u) from t^-Q K_F(x/t, u/t^2)."""
    if not t > 0:
        raise DomainError("dilation factor must be positive")
    points = list(points)
    X = np.array([p.x for p in points])
    U = np.array([p.u for p in points])
    lhs, _ = kernel_values(spec, F.dilated(t * t), None, X, U, quad, pmap)
    rhs, _ = kernel_values(spec, F, None, X / t, U / (t * t), quad, pmap)
    rhs = rhs * t ** (-spec.Q)
    scale = np.maximum(np.abs(rhs), 1e-300)
    return float(np.max(np.abs(lhs - rhs) / scale))


@dataclass(frozen=True)
class KernelTable:
    """K(|x|, u) on a rectangular grid, for groups whose kernel is radial in x (d2 = 1, one block)."""

    radii: np.ndarray
    heights: np.ndarray
    values: np.ndarray


def kernel_table(
    spec: GroupSpec,
    F: SampledMultiplier,
    ell: int | None,
    radii,
    heights,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
    chunk: int = 512,
) -> KernelTable:
    if spec.d2 != 1:
        raise DomainError("radial kernel tables need d2 = 1")
    radii = np.asarray(radii, dtype=float)
    heights = np.asarray(heights, dtype=float)
    rr, hh = np.meshgrid(radii, heights, indexing="ij")
    X = np.zeros((rr.size, spec.d1))
    X[:, 0] = rr.ravel()
    U = hh.reshape(-1, 1)
    out = np.empty(rr.size, dtype=complex)
    for start in range(0, rr.size, chunk):
        stop = start + chunk
        out[start:stop], _ = kernel_values(spec, F, ell, X[start:stop], U[start:stop], quad, pmap)
    return KernelTable(radii, heights, out.reshape(rr.shape))
