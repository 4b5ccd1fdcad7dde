"""
Rescaled Laguerre functions phi_k^{(lambda,m)} on R^{2m} and their radial integrals.

phi_k^{(lambda,m)}(z) = lambda^m L_k^{m-1}(lambda |z|^2 / 2) exp(-lambda |z|^2 / 4)
is an eigenfunction of -Delta + lambda^2 |z|^2 / 4 with eigenvalue (2k+m) lambda.
Integrals over R^{2m} reduce to one radial integral with surface constant
2 pi^m / Gamma(m).
"""

from dataclasses import dataclass
from math import comb, gamma, pi

import numpy as np
from scipy.special import eval_genlaguerre

from .exceptions import DomainError, QuadratureError
from .logger import get_logger
from .quadrature import gauss_laguerre, sphere_area

logger = get_logger()

MAX_DEGREE = 512
NODES_START = 64
NODES_CAP = 1024
NODES_REL_TOL = 1e-11


@dataclass(frozen=True)
class LaguerreParams:
    k: int
    lam: float
    m: int

    def __post_init__(self):
        if self.k < 0 or self.k > MAX_DEGREE:
            raise DomainError(f"degree k must lie in [0, {MAX_DEGREE}], got {self.k}")
        if not self.lam > 0:
            raise DomainError(f"lambda must be positive, got {self.lam}")
        if self.m < 1:
            raise DomainError(f"m must be at least 1, got {self.m}")

    @property
    def eigenvalue(self) -> float:
        return (2 * self.k + self.m) * self.lam


def laguerre_poly(k: int, a: int, t):
    """L_k^a(t) by the three-term recurrence."""
    t = np.asarray(t, dtype=float)
    prev = np.ones_like(t)
    if k == 0:
        return prev
    cur = 1.0 + a - t
    for j in range(1, k):
        prev, cur = cur, ((2 * j + 1 + a - t) * cur - (j + a) * prev) / (j + 1)
    return cur


def laguerre_poly_table(kmax: int, a: float, t) -> np.ndarray:
    """Rows L_0^a(t), ..., L_kmax^a(t)."""
    t = np.asarray(t, dtype=float)
    table = np.empty((kmax + 1,) + t.shape)
    table[0] = 1.0
    if kmax >= 1:
        table[1] = 1.0 + a - t
    for j in range(1, kmax):
        table[j + 1] = ((2 * j + 1 + a - t) * table[j] - (j + a) * table[j - 1]) / (j + 1)
    return table


def laguerre_function(k, a: float, t):
    """
    L_k^a(t) exp(-t/2), broadcasting over integer arrays k and real arrays t.

    The exponential is spread over the recurrence steps so that large t
    neither overflows the polynomial nor underflows the weight.
    """
    k, t = np.broadcast_arrays(np.asarray(k, dtype=int), np.asarray(t, dtype=float))
    kmax = int(k.max(initial=0))
    if kmax > MAX_DEGREE:
        raise DomainError(f"degree above {MAX_DEGREE}")
    steps = np.maximum(k, 1)
    f = np.exp(-t / (2.0 * steps))
    out = np.exp(-0.5 * t) * (k == 0)
    prev = np.zeros_like(t)
    cur = np.ones_like(t)
    for j in range(kmax):
        prev, cur = cur, ((2 * j + 1 + a - t) * f * cur - (j + a) * f * f * prev) / (j + 1)
        out = np.where(k == j + 1, cur, out)
    return out


def phi_radial(k, lam, m: int, rho):
    """phi_k^{(lam,m)} as a function of rho = |z|; broadcasts over k, lam and rho."""
    lam = np.asarray(lam, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return lam**m * laguerre_function(k, m - 1, 0.5 * lam * rho * rho)


def phi(params: LaguerreParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2 * params.m:
        raise DomainError(f"points must have last axis 2m={2 * params.m}")
    return phi_radial(params.k, params.lam, params.m, np.linalg.norm(z, axis=-1))


def script_L(k, r: int, t):
    """(-1)^k L_k^{r-1}(2t) exp(-t), the profile appearing in the transformed kernel."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("script_L is defined for t >= 0")
    sign = np.where(np.asarray(k) % 2 == 0, 1.0, -1.0)
    return sign * laguerre_function(k, r - 1, 2.0 * t)


def radial_integral(integrand, m: int, power: float = 0.0, lam: float = 1.0) -> float:
    """
    Integral over R^{2m} of |z|^{2*power} g(lam |z|^2 / 2) exp(-lam |z|^2 / 2),
    where integrand(t) returns g(t). Gauss-Laguerre nodes double from 64 until
    the relative change is below 1e-11.
    """
    alpha = m - 1 + power
    prefactor = sphere_area(2 * m) / 2.0 * (2.0 / lam) ** (m + power)
    n, previous = NODES_START, None
    while n <= NODES_CAP:
        nodes, weights = gauss_laguerre(n, alpha)
        value = prefactor * float(np.dot(weights, integrand(nodes)))
        if previous is not None and abs(value - previous) <= NODES_REL_TOL * abs(value):
            return value
        previous, n = value, 2 * n
    raise QuadratureError(f"radial integral did not settle by {NODES_CAP} nodes")


def phi_l2_norm_sq(params: LaguerreParams) -> float:
    k, m, lam = params.k, params.m, params.lam
    return lam ** (2 * m) * radial_integral(
        lambda t: laguerre_poly(k, m - 1, t) ** 2, m, lam=lam
    )


def phi_l2_norm_sq_exact(params: LaguerreParams) -> float:
    """(2 pi)^m lam^m binom(k+m-1, k)."""
    return (2 * pi * params.lam) ** params.m * comb(params.k + params.m - 1, params.k)


def hermite_residual(params: LaguerreParams, grid_h: float, n_samples: int = 64) -> float:
    """
    Max relative residual of (-Delta_h + lam^2 rho^2 / 4) phi - (2k+m) lam phi on
    radial samples, with the radial Laplacian f'' + (2m-1)/rho f' by central differences.
    """
    if not grid_h > 0:
        raise DomainError("grid_h must be positive")
    k, lam, m = params.k, params.lam, params.m
    rho = np.linspace(0.5, 3.0 + np.sqrt(4 * k + 2 * m), n_samples) / np.sqrt(lam)

    def f(r):
        return phi_radial(k, lam, m, r)

    f0, fp, fm = f(rho), f(rho + grid_h), f(rho - grid_h)
    second = (fp - 2 * f0 + fm) / grid_h**2
    first = (fp - fm) / (2 * grid_h)
    lap = second + (2 * m - 1) / rho * first
    residual = -lap + 0.25 * lam**2 * rho**2 * f0 - params.eigenvalue * f0
    return float(np.max(np.abs(residual)) / np.max(np.abs(params.eigenvalue * f0)))


def subelliptic_ratio(params: LaguerreParams, beta: float) -> float:
    """|| |z|^beta phi ||_2 / (lam^{-beta} ((2k+m) lam)^{beta/2} ||phi||_2)."""
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    if beta == 0:
        return 1.0
    k, m, lam = params.k, params.m, params.lam
    weighted = lam ** (2 * m) * radial_integral(
        lambda t: laguerre_poly(k, m - 1, t) ** 2, m, power=beta, lam=lam
    )
    denominator = lam ** (-beta) * params.eigenvalue ** (beta / 2)
    return float(np.sqrt(weighted / phi_l2_norm_sq(params)) / denominator)


def moment_matrix(kmax: int, lam: float, m: int, power: int = 0) -> np.ndarray:
    """M[k, k'] = integral of |z|^{2 power} phi_k phi_k' over R^{2m}; zero for |k-k'| > power."""
    nodes, weights = gauss_laguerre(max(NODES_START, kmax + power + 2), m - 1 + power)
    table = laguerre_poly_table(kmax, m - 1, nodes)
    unit = (table * weights) @ table.T
    scale = sphere_area(2 * m) / 2.0 * 2.0 ** (m + power) * lam ** (m - power)
    return scale * unit


def gram_matrix(kmax: int, lam: float, m: int) -> np.ndarray:
    return moment_matrix(kmax, lam, m, power=0)


def profile_table(kmax: int, m: int, lam: float, radii) -> list[dict]:
    """phi_k rows from the recurrence, beside scipy's generalized Laguerre polynomial as reference."""
    radii = np.asarray(radii, dtype=float)
    t = 0.5 * lam * radii**2
    rows = []
    for k in range(kmax + 1):
        values = phi_radial(k, lam, m, radii)
        reference = lam**m * eval_genlaguerre(k, m - 1, t) * np.exp(-0.5 * t)
        rows.extend(
            {"k": k, "m": m, "lam": lam, "rho": float(r), "phi": float(v), "reference": float(e), "abs_error": float(abs(v - e))}
            for r, v, e in zip(radii, values, reference)
        )
    return rows


def gamma_ratio(k: int, a: float) -> float:
    """Gamma(k+a+1) / k!, the squared norm of L_k^a for the weight t^a e^{-t}."""
    return gamma(k + a + 1) / gamma(k + 1)
