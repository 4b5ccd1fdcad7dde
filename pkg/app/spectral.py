"""
Simultaneous spectral decomposition of -J_mu^2.

A cyclic Jacobi eigensolver drives the generic path; the so(4) = su(2) + su(2)
closed forms cover the (4,3) family. No eigenvector frame (rotation R_mu) is
ever exposed: consumers only see eigenvalues, ranks and projections.
"""

from dataclasses import dataclass, field
from math import inf

import numpy as np

from . import conf
from .exceptions import ConvergenceError, DegenerateInputError, DomainError
from .group_core import GroupSpec, is_metivier, j_matrix, metivier_4_3
from .logger import get_logger
from .models import BoundsProbe, BoundsRow, KerAClass
from .quadrature import sphere_points

logger = get_logger()


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    b: np.ndarray
    r: tuple[int, ...]
    P: tuple[np.ndarray, ...] = field(default=(), repr=False)
    r0: int = 0
    P0: np.ndarray | None = field(default=None, repr=False)
    gap: float = inf

    @property
    def N(self) -> int:
        return len(self.b)


def symmetric_eigen(S, tol: float | None = None, max_sweeps: int | None = None):
    """Cyclic Jacobi rotations. Returns (eigenvalues descending, V) with S V = V diag."""
    tol = conf.JACOBI_TOL if tol is None else tol
    max_sweeps = conf.JACOBI_MAX_SWEEPS if max_sweeps is None else max_sweeps
    A = np.array(S, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(1.0, scale):
        raise DomainError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    target = tol * scale

    def off_norm():
        return float(np.linalg.norm(A - np.diag(np.diag(A))))

    for sweep in range(max_sweeps):
        if off_norm() <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                g = 100.0 * abs(apq)
                app, aqq = abs(A[p, p]), abs(A[q, q])
                # negligible next to both diagonal entries
                if sweep > 3 and app + g == app and aqq + g == aqq:
                    A[p, q] = A[q, p] = 0.0
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) + g == abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                v_p, v_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    else:
        if off_norm() > target:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    evals = np.diag(A).copy()
    order = np.argsort(-evals, kind="stable")
    return evals[order], V[:, order]


def decompose_matrix(J: np.ndarray, cluster_rel_tol: float | None = None) -> SpectralDecomposition:
    """Decompose -J^2 for a real skew matrix J."""
    tol = conf.CLUSTER_REL_TOL if cluster_rel_tol is None else cluster_rel_tol
    S = -J @ J
    evals, V = symmetric_eigen(0.5 * (S + S.T))
    s = np.sqrt(np.clip(evals, 0.0, None))
    top = s[0] if len(s) else 0.0
    zero = s <= tol * top if top > 0 else np.ones(len(s), dtype=bool)

    clusters: list[list[int]] = []
    for idx in np.flatnonzero(~zero):
        if clusters and s[clusters[-1][0]] - s[idx] <= tol * s[clusters[-1][0]]:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])

    b, r, P = [], [], []
    for members in clusters:
        if len(members) % 2:
            raise DegenerateInputError(
                f"eigenvalue cluster near {s[members[0]]:.6g} has odd multiplicity "
                f"{len(members)}; cluster tolerance {tol:g} is too coarse or too fine"
            )
        vecs = V[:, members]
        b.append(float(np.mean(s[members])))
        r.append(len(members) // 2)
        P.append(vecs @ vecs.T)
    zero_vecs = V[:, zero]
    gaps = [b[n] / b[n + 1] - 1.0 for n in range(len(b) - 1)]
    return SpectralDecomposition(
        b=np.array(b),
        r=tuple(r),
        P=tuple(P),
        r0=int(np.sum(zero)),
        P0=zero_vecs @ zero_vecs.T,
        gap=min(gaps) if gaps else inf,
    )


def decompose_j(spec: GroupSpec, mu, cluster_rel_tol: float | None = None) -> SpectralDecomposition:
    mu = np.asarray(mu, dtype=float)
    J = j_matrix(spec, mu)
    if not np.any(mu):
        raise DegenerateInputError("decomposition needs mu != 0")
    return decompose_matrix(J, cluster_rel_tol)


def jminus(xi) -> np.ndarray:
    x1, x2, x3 = np.asarray(xi, dtype=float)
    return np.array(
        [
            [0.0, -x3, -x1, -x2],
            [x3, 0.0, x2, -x1],
            [x1, -x2, 0.0, x3],
            [x2, x1, -x3, 0.0],
        ]
    )


def jplus(eta) -> np.ndarray:
    y1, y2, y3 = np.asarray(eta, dtype=float)
    return np.array(
        [
            [0.0, -y3, -y1, y2],
            [y3, 0.0, y2, y1],
            [y1, -y2, 0.0, -y3],
            [-y2, -y1, y3, 0.0],
        ]
    )


def trace_form(J: np.ndarray, Jp: np.ndarray) -> float:
    """Inner product on su(2) + su(2) normalised so that J^-(e_k), J^+(e_k) are orthonormal."""
    return -0.25 * float(np.trace(J @ Jp))


def so4_eigenvalues(xi, eta) -> tuple[float, float]:
    a = float(np.linalg.norm(xi))
    c = float(np.linalg.norm(eta))
    return a + c, abs(a - c)


def so4_projections(xi, eta) -> tuple[np.ndarray, np.ndarray]:
    a = float(np.linalg.norm(xi))
    c = float(np.linalg.norm(eta))
    if a == 0.0 or c == 0.0 or a == c:
        raise DegenerateInputError(
            "so(4) projections need xi != 0, eta != 0 and |xi| != |eta|; use decompose_j"
        )
    K = (jplus(eta) / c) @ (jminus(xi) / a)
    half = 0.5 * np.eye(4)
    return half - 0.5 * K, half + 0.5 * K


def metivier43_eigen(A, xi) -> tuple[float, float]:
    return so4_eigenvalues(xi, np.asarray(A, dtype=float) @ np.asarray(xi, dtype=float))


def kerA_classify(A, tol: float = 1e-10) -> KerAClass:
    A = np.asarray(A, dtype=float)
    _, sv, vt = np.linalg.svd(A)
    fixed = [0.0, 0.0, 1.0]
    if sv[0] == 0.0:
        return KerAClass(kind="FULL", v=fixed, singular_values=sv.tolist())
    rank = int(np.sum(sv > tol * sv[0]))
    if rank == 3:
        return KerAClass(kind="ZERO", v=fixed, singular_values=sv.tolist())
    v = vt[-1] / np.linalg.norm(vt[-1])
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return KerAClass(kind="INTERMEDIATE", v=v.tolist(), singular_values=sv.tolist())


def _so4_data(A, mu):
    eta = A @ mu
    b1, b2 = so4_eigenvalues(mu, eta)
    P1, P2 = so4_projections(mu, eta)
    return np.array([b1, b2]), (P1, P2)


def _line_derivatives(values_minus, value_0, values_plus, h):
    first = (values_plus - values_minus) / (2.0 * h)
    second = (values_plus - 2.0 * value_0 + values_minus) / (h * h)
    return first, second


def _exact_b_derivatives(A, mu, v) -> dict[int, np.ndarray]:
    """Line derivatives of (|mu| + |A mu|, |mu| - |A mu|) along v, from the norms."""
    eta, w = A @ mu, A @ v
    a, c = float(np.linalg.norm(mu)), float(np.linalg.norm(eta))
    da, dc = float(np.dot(mu, v)) / a, float(np.dot(eta, w)) / c
    d2a = (float(np.dot(v, v)) - da * da) / a
    d2c = (float(np.dot(w, w)) - dc * dc) / c
    sign = 1.0 if a >= c else -1.0
    return {1: np.array([da + dc, sign * (da - dc)]), 2: np.array([d2a + d2c, sign * (d2a - d2c)])}


def mu_derivative_bounds_probe(
    A,
    v=None,
    sphere_samples: int = 256,
    h: float = 1e-4,
    alpha_set=(1, 2),
    seed: int | None = None,
    degeneracy_tol: float = 1e-8,
) -> dict[int, BoundsProbe]:
    """
    Sampled sup of |D^alpha b_n| / b_n and ||D^alpha P_n||_op with D = |mu| d_v
    on the unit sphere. First derivatives use step h*|mu|, second 10*h*|mu|.
    """
    A = np.asarray(A, dtype=float)
    v = np.asarray(kerA_classify(A).v if v is None else v, dtype=float)
    v = v / np.linalg.norm(v)
    if not is_metivier_43(A):
        raise DegenerateInputError("A does not define a Metivier group")
    probes = {alpha: BoundsProbe(alpha=alpha, kappa_b=0.0, kappa_P=0.0, skipped=0, fd_step=h) for alpha in alpha_set}
    for mu in sphere_points(3, sphere_samples, seed):
        stencil = {}
        try:
            for step_name, step in (("first", h), ("second", 10 * h)):
                pts = [mu - step * v, mu, mu + step * v]
                data = []
                for p in pts:
                    eta = A @ p
                    a, c = np.linalg.norm(p), np.linalg.norm(eta)
                    if c < degeneracy_tol or abs(a - c) < degeneracy_tol * a:
                        raise DegenerateInputError("degenerate stencil point")
                    data.append(_so4_data(A, p))
                stencil[step_name] = (data, step)
        except DegenerateInputError:
            for probe in probes.values():
                probe.skipped += 1
            continue
        norm_mu = float(np.linalg.norm(mu))
        v_dot = float(np.dot(v, mu)) / norm_mu
        (m1, z1, p1), h1 = stencil["first"]
        (m2, z2, p2), h2 = stencil["second"]
        db1, _ = _line_derivatives(m1[0], z1[0], p1[0], h1)
        _, db2 = _line_derivatives(m2[0], z2[0], p2[0], h2)
        derivs_b = {1: norm_mu * db1, 2: norm_mu**2 * db2 + norm_mu * v_dot * db1}
        e1, e2 = _exact_b_derivatives(A, mu, v).values()
        exact_b = {1: norm_mu * e1, 2: norm_mu**2 * e2 + norm_mu * v_dot * e1}
        for n in range(2):
            dP1, _ = _line_derivatives(m1[1][n], z1[1][n], p1[1][n], h1)
            _, dP2 = _line_derivatives(m2[1][n], z2[1][n], p2[1][n], h2)
            derivs_P = {1: norm_mu * dP1, 2: norm_mu**2 * dP2 + norm_mu * v_dot * dP1}
            for alpha, probe in probes.items():
                ratio = abs(derivs_b[alpha][n]) / z1[0][n]
                exact = abs(exact_b[alpha][n]) / z1[0][n]
                op = float(np.linalg.norm(derivs_P[alpha], 2))
                probe.kappa_b = max(probe.kappa_b, ratio)
                probe.kappa_P = max(probe.kappa_P, op)
                probe.rows.append(
                    BoundsRow(
                        mu=mu.tolist(),
                        alpha=alpha,
                        block=n + 1,
                        d_b_ratio=ratio,
                        d_b_exact=exact,
                        fd_error=abs(ratio - exact),
                        d_p_norm=op,
                    )
                )
    for probe in probes.values():
        if probe.skipped:
            logger.warning("Skipped %d degenerate sphere samples", probe.skipped)
    return probes


def is_metivier_43(A, n_samples: int = 128) -> bool:
    return is_metivier(metivier_4_3(A), n_samples=n_samples).verdict
