"""
Weighted Plancherel scans and the truncated restriction probe.

Scans fit log2(mass) against ell and compare the slope with 2*alpha - d2.
Two-sidedness of the power law is flagged from the fit residual, never asserted.
"""

from fractions import Fraction
from functools import lru_cache
from math import fsum, pi
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .exceptions import DegenerateInputError, DomainError, FiniteDifferenceError, GridResolutionError
from .group_core import GroupSpec, is_heisenberg_type, metivier_4_3
from .kernel import check_metivier_ray, contract_blocks, first_layer_mass, kernel_table, radial_nodes, rho_window
from .laguerre import laguerre_poly_table
from .logger import get_logger
from .models import QuadratureSpec, RestrictionRow, ScanReport, ScanRow
from .multiplier import SampledMultiplier, chi_iota, cowling_sikora_norm, l2_norm, sobolev_norm
from .numerology import stein_tomas, theta_p
from .quadrature import gauss_laguerre, sphere_area, sphere_rule
from .spectral import decompose_j, is_metivier_43, kerA_classify

logger = get_logger()

TWO_SIDED_RESIDUAL = 0.05
FD_TOLERANCE = 0.05
KERNEL_EDGE_TOL = 1e-3


def fit_scan(rows: list[ScanRow], target: float, route: str) -> ScanReport:
    rows = sorted(rows, key=lambda row: row.ell)
    if len(rows) < 2:
        raise DomainError("a slope fit needs at least two ell values")
    ells = np.array([row.ell for row in rows], dtype=float)
    masses = np.array([row.mass for row in rows])
    if np.any(masses <= 0):
        logger.warning("Zero mass in scan; slope fit skipped")
        slope, residual = float("nan"), float("nan")
    else:
        logs = np.log2(masses)
        slope, intercept = np.polyfit(ells, logs, 1)
        residual = float(np.sqrt(np.mean((logs - (slope * ells + intercept)) ** 2)))
    return ScanReport(
        route=route,
        rows=rows,
        fitted_slope=float(slope),
        slope_target=float(target),
        residual=residual,
        implied_constant=max(row.ratio for row in rows),
        two_sided=bool(residual < TWO_SIDED_RESIDUAL),
    )


def first_layer_scan(
    spec: GroupSpec,
    F: SampledMultiplier,
    alpha_set: Iterable[int],
    ell_range: Iterable[int],
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
) -> dict[int, ScanReport]:
    """One report per alpha: int |x|^{2 alpha} |K_ell|^2 against 2^{ell(2 alpha - d2)} ||F||_2^2."""
    ell_range = list(ell_range)
    norm_sq = l2_norm(F) ** 2
    reports = {}
    for alpha in alpha_set:
        rows = []
        for ell in ell_range:
            mass, est = first_layer_mass(spec, F, ell, alpha, quad, pmap)
            model = 2.0 ** (ell * (2 * alpha - spec.d2)) * norm_sq
            rows.append(
                ScanRow(ell=ell, alpha=alpha, mass=mass, model=model, ratio=mass / model if model else 0.0, error_est=est)
            )
            logger.info("First layer alpha=%d ell=%d mass=%.6g", alpha, ell, mass)
        reports[alpha] = fit_scan(rows, 2 * alpha - spec.d2, "first_layer")
    return reports


def _profiles(kmax: int, r: int, sigma) -> dict[str, np.ndarray]:
    """
    Laguerre profiles in sigma = 2t with the common factor e^{-t} stripped:
    e_k = scriptL_k, p_k = scriptL_k', d_k = t scriptL_k'.
    """
    sign = np.where(np.arange(kmax + 1) % 2 == 0, 1.0, -1.0)[:, None]
    base = laguerre_poly_table(kmax, r - 1, sigma)
    shifted = np.zeros_like(base)
    if kmax >= 1:
        shifted[1:] = laguerre_poly_table(kmax - 1, r, sigma)
    e = sign * base
    p = sign * (-2.0 * shifted - base)
    return {"e": e, "p": p, "d": 0.5 * sigma * p}


@lru_cache(maxsize=512)
def profile_gram(kmax: int, r: int, j: int, left: str, right: str) -> np.ndarray:
    """int_{R^{2r}} |y|^{2j} f_k(|y|^2) g_k'(|y|^2) dy for profile types f, g at b = 1."""
    power = r - 1 + j
    sigma, weights = gauss_laguerre(max(16, kmax + 4), power)
    prof = _profiles(kmax, r, sigma)
    scale = sphere_area(2 * r) / 2.0 * 2.0 ** -(r + j)
    return scale * (prof[left] * weights) @ prof[right].T


def _box_lambda(dec, shape) -> np.ndarray:
    axes = np.meshgrid(*(np.arange(n) for n in shape), indexing="ij")
    return sum((2 * ax + r) * b for ax, r, b in zip(axes, dec.r, dec.b))


def _amplitude(F, ell, rho, lam, omega_norm):
    arg = rho.reshape((-1,) + (1,) * lam.ndim) * lam
    cut = np.ones_like(rho) if ell is None else chi_iota(-ell, rho * omega_norm)
    return F(arg) * cut.reshape((-1,) + (1,) * lam.ndim)


def _quadratic_form(terms, r, j, shape):
    """sum over term pairs of contract_blocks with per-block profile Grams."""
    total = 0.0
    for coef_s, types_s in terms:
        for coef_t, types_t in terms:
            mats = [profile_gram(shape[n] - 1, r[n], j, types_s[n], types_t[n]) for n in range(2)]
            total = total + contract_blocks(coef_s, coef_t, mats)
    return total


def _second_layer_ray(spec, F, ell, alpha, v, quad, fd_step, node_factor, omega):
    dec = decompose_j(spec, omega)
    check_metivier_ray(dec)
    if dec.N != 2:
        logger.debug("Skipping ray with %d eigenvalue blocks", dec.N)
        return 0.0
    window = rho_window(ell, F, dec, quad)
    if window is None:
        return 0.0
    _, _, lam, mask = window
    rho, w = radial_nodes(ell, F, spec.d2, window, node_factor * quad.radial_nodes)
    shape = lam.shape
    r = dec.r
    a = _amplitude(F, ell, rho, lam, 1.0) * mask
    block_scale = [(rho * b) for b in dec.b]

    if alpha == 0:
        density = _quadratic_form([(a, "ee")], r, 0, shape)
        density = density * block_scale[0] ** r[0] * block_scale[1] ** r[1]
        return float(np.dot(rho ** (spec.d2 - 1) * w, density))

    plus = decompose_j(spec, omega + fd_step * v)
    minus = decompose_j(spec, omega - fd_step * v)
    if plus.N != 2 or minus.N != 2 or plus.r != r or minus.r != r:
        raise DegenerateInputError("block structure changes inside the finite-difference stencil")
    a_plus = _amplitude(F, ell, rho, _box_lambda(plus, shape), np.linalg.norm(omega + fd_step * v)) * mask
    a_minus = _amplitude(F, ell, rho, _box_lambda(minus, shape), np.linalg.norm(omega - fd_step * v)) * mask
    node = (-1,) + (1,) * lam.ndim
    da = (a_plus - a_minus) / (2.0 * fd_step * rho.reshape(node))
    db = (plus.b - minus.b) / (2.0 * fd_step)
    beta = [(db[n] / (rho * dec.b[n])).reshape(node) for n in range(2)]

    radial_terms = [(da, "ee"), (-a * beta[0], "de"), (-a * beta[1], "ed")]
    dens0 = _quadratic_form(radial_terms, r, 0, shape)
    dens0 = dens0 * block_scale[0] ** r[0] * block_scale[1] ** r[1]

    dP = (plus.P[0] - minus.P[0]) / (2.0 * fd_step)
    cross = dec.P[0] @ dP @ dec.P[1]
    cross_sq = float(np.sum(cross * cross)) / rho**2
    angular_terms = [
        (a / (rho * dec.b[0]).reshape(node), "pe"),
        (-a / (rho * dec.b[1]).reshape(node), "ep"),
    ]
    dens1 = _quadratic_form(angular_terms, r, 1, shape)
    dens1 = dens1 * cross_sq / (r[0] * r[1]) * block_scale[0] ** (r[0] + 1) * block_scale[1] ** (r[1] + 1)
    return float(np.dot(rho ** (spec.d2 - 1) * w, dens0 + dens1))


def second_layer_mass_43(
    A,
    F: SampledMultiplier,
    ell: int | None,
    alpha: int,
    quad: QuadratureSpec | None = None,
    fd_step: float = 1e-4,
    v=None,
    pmap: Callable = map,
    node_factor: int = 2,
) -> float:
    """
    int <u, v>^{2 alpha} |K_ell(x, u)|^2 on metivier_4_3(A), computed as the
    (xi, mu)-integral of |d_v^alpha V|^2 with the xi-integral reduced to
    per-block radial profiles.
    """
    if alpha not in (0, 1):
        raise DomainError("second-layer masses are implemented for alpha in {0, 1}")
    A = np.asarray(A, dtype=float)
    if not is_metivier_43(A):
        raise DegenerateInputError("A does not define a Metivier group")
    spec = metivier_4_3(A)
    v = np.asarray(kerA_classify(A).v if v is None else v, dtype=float)
    v = v / np.linalg.norm(v)
    quad = quad or QuadratureSpec.default()
    if F.is_zero():
        return 0.0
    if ell is None and F.support[0] <= 0:
        raise DomainError("without a chi cutoff the multiplier support must stay away from 0")
    omegas, weights = sphere_rule(spec.d2, quad.angular_nodes)
    rays = list(
        pmap(lambda om: _second_layer_ray(spec, F, ell, alpha, v, quad, fd_step, node_factor, om), omegas)
    )
    norm = (2 * pi) ** -(spec.d1 + spec.d2) * 4.0**2
    return norm * fsum(wt * m for wt, m in zip(weights, rays))


def second_layer_scan_43(
    A,
    F: SampledMultiplier,
    alpha: int,
    ell_range: Iterable[int],
    quad: QuadratureSpec | None = None,
    fd_step: float = 1e-4,
    v=None,
    pmap: Callable = map,
) -> ScanReport:
    """Second-layer scan against 2^{ell(2 alpha - 3)} ||F||^2_{L2_alpha}."""
    model_norm = sobolev_norm(F, alpha) ** 2
    rows = []
    for ell in ell_range:
        mass = second_layer_mass_43(A, F, ell, alpha, quad, fd_step, v, pmap)
        if alpha == 1:
            halved = second_layer_mass_43(A, F, ell, alpha, quad, fd_step / 2, v, pmap)
        else:
            halved = second_layer_mass_43(A, F, ell, alpha, quad, fd_step, v, pmap, node_factor=1)
        est = abs(mass - halved) / mass if mass else 0.0
        if alpha == 1 and est > FD_TOLERANCE:
            raise FiniteDifferenceError(
                f"halving the finite-difference step changed the mass by {est:.1%} at ell={ell}"
            )
        model = 2.0 ** (ell * (2 * alpha - 3)) * model_norm
        rows.append(ScanRow(ell=ell, alpha=alpha, mass=mass, model=model, ratio=mass / model if model else 0.0, error_est=est))
        logger.info("Second layer alpha=%d ell=%d mass=%.6g", alpha, ell, mass)
    return fit_scan(rows, 2 * alpha - 3, "second_layer")


def _restriction_rhs(F: SampledMultiplier, p: Fraction, ell: int, spec: GroupSpec) -> float:
    p_min = min(stein_tomas(spec.d1), stein_tomas(spec.d2))
    if p <= p_min:
        theta = float(theta_p(p, spec.d1, spec.d2))
        scale = 2.0 ** (-ell * spec.d2 * (1 / float(p) - 0.5))
        return scale * l2_norm(F) ** (1 - theta) * cowling_sikora_norm(F, 2.0**ell) ** theta
    if p == 2:
        return float(np.max(np.abs(F.values)))
    raise DomainError(f"p={p} is neither in [1, {p_min}] nor 2")


def _trial(sigma: float, nodes: int):
    xs = np.linspace(-1.5 * sigma, 1.5 * sigma, nodes)
    us = np.linspace(-2.5 * sigma**2, 2.5 * sigma**2, nodes)
    gx, gy, gu = np.meshgrid(xs, xs, us, indexing="ij")
    values = np.exp(-((gx**2 + gy**2) ** 2 + gu**2) / sigma**4)
    cell = (xs[1] - xs[0]) ** 2 * (us[1] - us[0])
    return np.stack([gx.ravel(), gy.ravel()], axis=1), gu.ravel(), values.ravel(), cell


def restriction_scaling_probe(
    spec: GroupSpec,
    F: SampledMultiplier,
    p,
    ell_range: Iterable[int],
    trial_widths: Iterable[float] = (1.0,),
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
    input_nodes: int = 9,
    out_x_nodes: int = 17,
    out_u_nodes: int = 33,
    chunk: int = 64,
) -> list[RestrictionRow]:
    """
    Lower-bound probe for ||F(L) chi(2^ell U) f||_2 / ||f||_p with Gaussian
    trial bumps exp(-(|x|^4 + u^2) / sigma^4) on the three-dimensional Heisenberg group.
    """
    if spec.d1 != 2 or spec.d2 != 1 or not is_heisenberg_type(spec):
        raise DomainError("the restriction probe runs on the three-dimensional Heisenberg group")
    p = Fraction(p)
    rows = []
    for ell in ell_range:
        rhs = _restriction_rhs(F, p, ell, spec)
        best, best_est = 0.0, 0.0
        if not F.is_zero():
            for sigma in trial_widths:
                bound, est = _restriction_ratio(spec, F, float(p), ell, sigma, quad, pmap, input_nodes, out_x_nodes, out_u_nodes, chunk)
                if bound > best:
                    best, best_est = bound, est
        rows.append(
            RestrictionRow(ell=ell, p=str(p), lower_bound=best, rhs=rhs, ratio=best / rhs if rhs else 0.0, error_est=best_est)
        )
        logger.info("Restriction probe ell=%d p=%s lower bound %.6g", ell, p, best)
    return rows


def _restriction_ratio(spec, F, p, ell, sigma, quad, pmap, input_nodes, out_x_nodes, out_u_nodes, chunk):
    x_in, u_in, f_in, cell_in = _trial(sigma, input_nodes)
    x_half = 1.5 * sigma + 8.0
    u_half = 2.5 * sigma**2 + 20.0 * 2.0**ell
    xs = np.linspace(-x_half, x_half, out_x_nodes)
    us = np.linspace(-u_half, u_half, out_u_nodes)
    gx, gy, gu = np.meshgrid(xs, xs, us, indexing="ij")
    x_out = np.stack([gx.ravel(), gy.ravel()], axis=1)
    u_out = gu.ravel()

    r_max = np.sqrt(2.0) * (x_half + 1.5 * sigma)
    u_max = u_half + 2.5 * sigma**2 + 1.5 * sigma * x_half * 2.0
    table = kernel_table(
        spec, F, ell, np.linspace(0.0, r_max, 64), np.linspace(-u_max, u_max, 129), quad, pmap
    )
    values = table.values.real
    peak = float(np.max(np.abs(values)))
    edge = max(
        float(np.max(np.abs(values[-1, :]))),
        float(np.max(np.abs(values[:, 0]))),
        float(np.max(np.abs(values[:, -1]))),
    )
    if peak > 0 and edge > KERNEL_EDGE_TOL * peak:
        raise GridResolutionError(f"kernel table edge holds {edge / peak:.2g} of its peak at ell={ell}")
    spline = RectBivariateSpline(table.radii, table.heights, values)

    form = spec.c[0]
    g = np.empty(len(x_out))
    for start in range(0, len(x_out), chunk):
        xp, up = x_out[start : start + chunk], u_out[start : start + chunk]
        dx = xp[:, None, :] - x_in[None, :, :]
        du = up[:, None] - u_in[None, :] - 0.5 * np.einsum("qi,ij,pj->pq", x_in, form, xp)
        radius = np.linalg.norm(dx, axis=2)
        kern = spline.ev(radius.ravel(), du.ravel()).reshape(radius.shape)
        g[start : start + chunk] = cell_in * (kern @ f_in)

    cell_out = (xs[1] - xs[0]) ** 2 * (us[1] - us[0])
    g_cube = g.reshape(gu.shape)
    fine = np.sqrt(np.sum(g_cube**2) * cell_out)
    coarse = np.sqrt(np.sum(g_cube[:, :, ::2] ** 2) * 2.0 * cell_out)
    f_norm = np.sum(np.abs(f_in) ** p * cell_in) ** (1.0 / p)
    est = abs(fine - coarse) / fine if fine else 0.0
    return float(fine / f_norm), float(est)
