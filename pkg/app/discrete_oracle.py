"""
Finite-difference sub-Laplacian on the three-dimensional Heisenberg group.

Fields X1 = d_x - (y/2) d_u and X2 = d_y + (x/2) d_u are left-invariant for
the group law of heisenberg(1) and bracket to +d_u. Each field uses forward
differences; L_h = X1h^T X1h + X2h^T X2h is symmetric positive semidefinite,
second-order consistent and free of odd-even null modes. The discrete bracket
is exactly (S_x + S_y)/2 D+_u with S the forward shift. The box [-B, B)^3
carries Dirichlet truncation.
"""

from dataclasses import dataclass, field
from math import pi
from typing import Callable, Iterable, NamedTuple

import numpy as np
from numpy.polynomial import chebyshev
from scipy import sparse

from .exceptions import BoundaryMassError, ChebyshevTailError, DomainError, ResourceLimitError
from .group_core import heisenberg
from .kernel import first_layer_mass, kernel_table
from .logger import get_logger
from .models import OracleLevel, OracleReport, QuadratureSpec
from .quadrature import gauss_legendre

logger = get_logger()

MAX_UNKNOWNS = 10**6
TAIL_COEFFICIENTS = 8
TABLE_CHUNK = 64
ORACLE_QUAD = QuadratureSpec(k_energy_cap=81.0)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    n: int
    h: float
    box: float
    matrix: sparse.csr_matrix = field(repr=False)
    fields: tuple = field(repr=False, default=())
    d_u: sparse.csr_matrix | None = field(repr=False, default=None)

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.h

    def coordinates(self):
        """(x, y, u) arrays of all unknowns in storage order."""
        gx, gy, gu = np.meshgrid(self.nodes, self.nodes, self.nodes, indexing="ij")
        return gx.ravel(), gy.ravel(), gu.ravel()

    @property
    def origin_index(self) -> int:
        mid = self.n // 2
        return (mid * self.n + mid) * self.n + mid

    def gershgorin_bounds(self) -> tuple[float, float]:
        A = self.matrix
        diag = A.diagonal()
        radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - radius)), float(np.max(diag + radius))


def _shift(n: int) -> sparse.csr_matrix:
    return sparse.diags([np.ones(n - 1)], [1], format="csr")


def _forward_difference(n: int, h: float) -> sparse.csr_matrix:
    return (_shift(n) - sparse.identity(n, format="csr")) / h


def _on_axis(op, axis: int, n: int) -> sparse.csr_matrix:
    eye = sparse.identity(n, format="csr")
    factors = [eye, eye, eye]
    factors[axis] = op
    return sparse.kron(sparse.kron(factors[0], factors[1]), factors[2], format="csr")


def build_sub_laplacian(n: int, B: float) -> DiscreteOperator:
    if n < 8 or n % 2:
        raise DomainError(f"grid size must be even and at least 8, got {n}")
    if not B > 0:
        raise DomainError(f"box half-width must be positive, got {B}")
    if n**3 > MAX_UNKNOWNS:
        raise ResourceLimitError(f"{n}^3 unknowns exceed the limit of {MAX_UNKNOWNS}")
    h = 2.0 * B / n
    D = _forward_difference(n, h)
    d_x, d_y, d_u = (_on_axis(D, axis, n) for axis in range(3))
    gx, gy, _ = np.meshgrid(*(((np.arange(n) - n // 2) * h,) * 3), indexing="ij")
    x1 = d_x - 0.5 * sparse.diags(gy.ravel()) @ d_u
    x2 = d_y + 0.5 * sparse.diags(gx.ravel()) @ d_u
    matrix = (x1.T @ x1 + x2.T @ x2).tocsr()
    centre = (0.5 * (_on_axis(_shift(n), 0, n) + _on_axis(_shift(n), 1, n)) @ d_u).tocsr()
    logger.debug("Assembled sub-Laplacian with %d unknowns, h=%.4g", n**3, h)
    return DiscreteOperator(n=n, h=h, box=B, matrix=matrix, fields=(x1.tocsr(), x2.tocsr()), d_u=centre)


def commutator_residual(op: DiscreteOperator, func: Callable, margin: int = 3) -> float:
    """Max interior |([X1h, X2h] - D_u) f| for a smooth f(x, y, u)."""
    x1, x2 = op.fields
    vec = func(*op.coordinates())
    residual = (x1 @ (x2 @ vec) - x2 @ (x1 @ vec) - op.d_u @ vec).reshape((op.n,) * 3)
    inner = residual[margin:-margin, margin:-margin, margin:-margin]
    return float(np.max(np.abs(inner)))


class ChebyshevResult(NamedTuple):
    values: np.ndarray
    tail: float


def chebyshev_apply(
    F: Callable,
    op: DiscreteOperator,
    vec,
    degree: int = 256,
    tail_tol: float | None = 1e-6,
    lam_max: float | None = None,
) -> ChebyshevResult:
    """
    F(L_h) vec by a Chebyshev expansion of F on [0, lam_max]; tail is relative to
    the largest coefficient. lam_max must cover the spectrum and defaults to the
    Gershgorin upper bound.
    """
    if degree < 4:
        raise DomainError(f"Chebyshev degree must be at least 4, got {degree}")
    lam_max = op.gershgorin_bounds()[1] if lam_max is None else lam_max
    vec = np.asarray(vec, dtype=float)
    if lam_max <= 0:
        return ChebyshevResult(float(F(0.0)) * vec, 0.0)
    coeffs = chebyshev.chebinterpolate(lambda s: F(0.5 * lam_max * (s + 1.0)), degree)
    scale = float(np.max(np.abs(coeffs), initial=0.0))
    tail = float(np.sum(np.abs(coeffs[-TAIL_COEFFICIENTS:]))) / scale if scale else 0.0
    if tail_tol is not None and tail > tail_tol:
        raise ChebyshevTailError(f"Chebyshev tail {tail:.3g} above {tail_tol:g} at degree {degree}")

    def mapped(v):
        return (2.0 / lam_max) * (op.matrix @ v) - v

    prev, cur = vec, mapped(vec)
    out = coeffs[0] * prev + coeffs[1] * cur
    for c in coeffs[2:]:
        prev, cur = cur, 2.0 * mapped(cur) - prev
        out = out + c * cur
    return ChebyshevResult(out, tail)


def boundary_mass_share(
    F,
    B: float,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
    radial_nodes: int = 64,
    height_nodes: int = 192,
) -> float:
    """
    Share of int |K|^2 outside the cylinder |x| <= B, |u| <= B, an upper bound for
    the share outside the box [-B, B)^3. Total from Plancherel, inside from a kernel table.
    """
    quad = quad or ORACLE_QUAD
    total, _ = first_layer_mass(heisenberg(1), F, None, 0, quad, pmap)
    if total == 0.0:
        return 0.0
    inside = spatial_l2_mass_h1(F, None, B, B, radial_nodes, height_nodes, quad, pmap)
    return max(0.0, 1.0 - inside / total)


def _grid_kernel(op: DiscreteOperator, F, quad, pmap) -> np.ndarray:
    """The kernel at every unknown; it is radial in x, so one table over distinct |x| serves the grid."""
    offsets = np.arange(op.n) - op.n // 2
    ix, iy, iu = np.meshgrid(offsets, offsets, np.arange(op.n), indexing="ij")
    keys, inverse = np.unique((ix**2 + iy**2).ravel(), return_inverse=True)
    table = kernel_table(heisenberg(1), F, None, op.h * np.sqrt(keys), op.nodes, quad, pmap, TABLE_CHUNK)
    return table.values.real[inverse.ravel(), iu.ravel()]


def kernel_oracle_compare(
    F,
    levels: Iterable[tuple[int, float]],
    degree: int = 1024,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
    boundary_tol: float = 1e-2,
    tail_tol: float | None = 1e-3,
) -> OracleReport:
    """Relative l2 distance between F(L_h) delta_0 and the kernel on each grid level."""
    quad = quad or ORACLE_QUAD
    levels = list(levels)
    rows = []
    shares = {}
    for n, B in levels:
        if not F.is_zero():
            if B not in shares:
                shares[B] = boundary_mass_share(F, B, quad, pmap)
            if shares[B] > boundary_tol:
                raise BoundaryMassError(f"{shares[B]:.2g} of the kernel mass lies outside the box B={B}")
        op = build_sub_laplacian(n, B)
        delta = np.zeros(n**3)
        delta[op.origin_index] = 1.0 / op.h**3
        discrete = chebyshev_apply(F, op, delta, degree, tail_tol)
        exact = np.zeros(n**3) if F.is_zero() else _grid_kernel(op, F, quad, pmap)
        scale = np.linalg.norm(exact)
        error = float(np.linalg.norm(discrete.values - exact) / scale) if scale else float(np.linalg.norm(discrete.values))
        rows.append(OracleLevel(n=n, box=B, h=op.h, rel_error=error, chebyshev_tail=discrete.tail))
        logger.info("Oracle level n=%d B=%g relative error %.4g", n, B, error)
    errors = [row.rel_error for row in rows]
    monotone = all(b < a for a, b in zip(errors, errors[1:])) or all(e == 0.0 for e in errors)
    if not monotone:
        logger.warning("Oracle errors are not strictly decreasing: %s", errors)
    return OracleReport(levels=rows, monotone=monotone)


def spatial_l2_mass_h1(
    F,
    ell: int | None,
    r_max: float = 12.0,
    u_max: float = 40.0,
    radial_nodes: int = 64,
    height_nodes: int = 192,
    quad: QuadratureSpec | None = None,
    pmap: Callable = map,
) -> float:
    """int |K|^2 over |x| <= r_max, |u| <= u_max on the three-dimensional Heisenberg group, from a (|x|, u) table."""
    radii, wr = gauss_legendre(radial_nodes, 0.0, r_max)
    heights, wu = gauss_legendre(height_nodes, -u_max, u_max)
    table = kernel_table(heisenberg(1), F, ell, radii, heights, quad, pmap, TABLE_CHUNK)
    density = np.abs(table.values) ** 2
    return float(2 * pi * np.einsum("i,i,ij,j->", wr, radii, density, wu))
