"""
Two-step stratified groups given by structure constants.

Sign convention: (J_mu)_{j,i} = sum_k mu_k c[k][i][j], so that
<J_mu e_i, e_j> = mu([e_i, e_j]). Every other module inherits it.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError, DomainError, GroupSpecError
from .logger import get_logger
from .models import GroupSpecDocument, MetivierVerdict, StructureConstant
from .quadrature import box_points, sphere_points

logger = get_logger()

BRACKET_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GroupSpec:
    d1: int
    d2: int
    c: np.ndarray = field(repr=False)

    @property
    def Q(self) -> int:
        return self.d1 + 2 * self.d2


@dataclass(frozen=True, eq=False)
class Point:
    x: np.ndarray
    u: np.ndarray

    @classmethod
    def of(cls, x, u) -> "Point":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise DomainError("Point coordinates must be finite")
        return cls(x, u)

    @classmethod
    def identity(cls, spec: GroupSpec) -> "Point":
        return cls(np.zeros(spec.d1), np.zeros(spec.d2))


def validate(spec: GroupSpec) -> GroupSpec:
    c = spec.c
    if c.shape != (spec.d2, spec.d1, spec.d1):
        raise DimensionMismatchError(
            f"structure constants have shape {c.shape}, expected "
            f"{(spec.d2, spec.d1, spec.d1)}"
        )
    if not np.array_equal(c, -np.transpose(c, (0, 2, 1))):
        raise GroupSpecError("structure constants are not antisymmetric in (i, j)")
    iu, ju = np.triu_indices(spec.d1, k=1)
    span = c[:, iu, ju].T
    sv = np.linalg.svd(span, compute_uv=False) if span.size else np.zeros(0)
    rank = int(np.sum(sv > BRACKET_RANK_TOL))
    if rank != spec.d2:
        raise GroupSpecError(
            f"brackets span a {rank}-dimensional space, second layer has d2={spec.d2}"
        )
    return spec


def from_document(doc: GroupSpecDocument) -> GroupSpec:
    """Build a spec from sparse 1-based triples, completing antisymmetry."""
    c = np.zeros((doc.d2, doc.d1, doc.d1))
    seen = np.zeros_like(c, dtype=bool)
    for entry in doc.c:
        k, i, j = entry.k - 1, entry.i - 1, entry.j - 1
        if i == j:
            if entry.v != 0:
                raise GroupSpecError(f"diagonal entry ({entry.k},{entry.i},{entry.j}) must be zero")
            continue
        for a, b, v in ((i, j, entry.v), (j, i, -entry.v)):
            if seen[k, a, b] and c[k, a, b] != v:
                raise GroupSpecError(
                    f"conflicting values for ({entry.k},{entry.i},{entry.j})"
                )
            c[k, a, b] = v
            seen[k, a, b] = True
    return validate(GroupSpec(doc.d1, doc.d2, c))


def to_document(spec: GroupSpec) -> GroupSpecDocument:
    entries = [
        StructureConstant(k=k + 1, i=i + 1, j=j + 1, v=float(spec.c[k, i, j]))
        for k in range(spec.d2)
        for i in range(spec.d1)
        for j in range(i + 1, spec.d1)
        if spec.c[k, i, j] != 0
    ]
    return GroupSpecDocument(d1=spec.d1, d2=spec.d2, c=entries)


def spec_sha256(spec: GroupSpec) -> str:
    return hashlib.sha256(to_document(spec).model_dump_json().encode()).hexdigest()


def _check_vector(vec, length: int, name: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (length,):
        raise DimensionMismatchError(f"{name} has shape {vec.shape}, expected ({length},)")
    return vec


def j_matrix(spec: GroupSpec, mu) -> np.ndarray:
    mu = _check_vector(mu, spec.d2, "mu")
    if not np.all(np.isfinite(mu)):
        raise DomainError("mu must be finite")
    return np.einsum("k,kij->ji", mu, spec.c)


def bracket(spec: GroupSpec, x, y) -> np.ndarray:
    x = _check_vector(x, spec.d1, "x")
    y = _check_vector(y, spec.d1, "y")
    return np.einsum("kij,i,j->k", spec.c, x, y)


def _check_point(spec: GroupSpec, p: Point):
    _check_vector(p.x, spec.d1, "x")
    _check_vector(p.u, spec.d2, "u")


def group_multiply(spec: GroupSpec, p: Point, q: Point) -> Point:
    _check_point(spec, p)
    _check_point(spec, q)
    return Point(p.x + q.x, p.u + q.u + 0.5 * bracket(spec, p.x, q.x))


def group_inverse(p: Point) -> Point:
    return Point(-p.x, -p.u)


def dilate(R: float, p: Point) -> Point:
    if not R > 0:
        raise DomainError(f"dilation factor must be positive, got {R}")
    return Point(R * p.x, R * R * p.u)


def homogeneous_norm(p: Point) -> float:
    x2 = float(np.dot(p.x, p.x))
    u2 = float(np.dot(p.u, p.u))
    return (x2 * x2 + u2) ** 0.25


def ball_volume(spec: GroupSpec, R: float = 1.0, n_samples: int = 1 << 14, seed: int | None = None) -> float:
    """
    Lebesgue volume of the homogeneous ball of radius R, estimated on a
    low-discrepancy sample of its bounding box. Scales as R**Q.
    """
    if not R > 0:
        raise DomainError(f"radius must be positive, got {R}")
    pts = box_points(spec.d1 + spec.d2, n_samples, seed)
    x = R * pts[:, : spec.d1]
    u = R * R * pts[:, spec.d1 :]
    inside = np.sum(x * x, axis=1) ** 2 + np.sum(u * u, axis=1) <= R**4
    box = (2.0 * R) ** spec.d1 * (2.0 * R * R) ** spec.d2
    return box * float(np.mean(inside))


def is_metivier(
    spec: GroupSpec, n_samples: int = 256, tol: float = 1e-8, seed: int | None = None
) -> MetivierVerdict:
    mus = sphere_points(spec.d2, n_samples, seed)
    best_sv, best_mu = np.inf, mus[0]
    for mu in mus:
        sv = np.linalg.svd(j_matrix(spec, mu), compute_uv=False)[-1]
        if sv < best_sv:
            best_sv, best_mu = sv, mu
    verdict = bool(best_sv > tol)
    if verdict:
        logger.debug("Metivier verdict is sampled over %d directions", len(mus))
    return MetivierVerdict(
        verdict=verdict,
        min_sv=float(best_sv),
        witness_mu=best_mu.tolist(),
        n_samples=len(mus),
        tol=tol,
        sampled=verdict,
    )


def is_heisenberg_type(spec: GroupSpec, tol: float = 1e-12) -> bool:
    eye = np.eye(spec.d1)
    js = [j_matrix(spec, e) for e in np.eye(spec.d2)]
    residual = 0.0
    for k, jk in enumerate(js):
        for l, jl in enumerate(js[k:], start=k):
            target = -2.0 * eye if k == l else 0.0
            residual = max(residual, float(np.max(np.abs(jk @ jl + jl @ jk - target))))
    return residual <= tol


def heisenberg(n: int) -> GroupSpec:
    if n < 1:
        raise DomainError(f"Heisenberg group needs n >= 1, got {n}")
    c = np.zeros((1, 2 * n, 2 * n))
    for i in range(n):
        c[0, i, n + i] = 1.0
        c[0, n + i, i] = -1.0
    return validate(GroupSpec(2 * n, 1, c))


def metivier_4_3(A) -> GroupSpec:
    """The (4,3) group whose J_xi is J^-(xi) + J^+(A xi)."""
    from .spectral import jminus, jplus

    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise DimensionMismatchError(f"A has shape {A.shape}, expected (3, 3)")
    blocks = [jminus(e) + jplus(A @ e) for e in np.eye(3)]
    return validate(GroupSpec(4, 3, np.stack([m.T for m in blocks])))
