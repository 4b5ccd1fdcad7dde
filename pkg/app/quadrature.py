"""
Quadrature tables shared by the Laguerre, kernel and probe modules.
"""

from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import roots_genlaguerre, roots_legendre
from scipy.stats import norm, qmc

from .exceptions import DomainError


@lru_cache(maxsize=64)
def _legendre(n: int):
    return roots_legendre(n)


@lru_cache(maxsize=64)
def gauss_laguerre(n: int, alpha: float):
    """Nodes and weights for the weight t**alpha * exp(-t) on (0, inf)."""
    if alpha <= -1:
        raise DomainError(f"Laguerre weight exponent must exceed -1, got {alpha}")
    return roots_genlaguerre(n, alpha)


def gauss_legendre(n: int, a: float, b: float):
    nodes, weights = _legendre(n)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def composite_legendre(n: int, a: float, b: float, panels: int):
    """Composite Gauss-Legendre rule with equal panels on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = _legendre(n)
    half = 0.5 * np.diff(edges)
    pts = edges[:-1, None] + half[:, None] * (nodes[None, :] + 1.0)
    wts = half[:, None] * weights[None, :]
    return pts.ravel(), wts.ravel()


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim."""
    return 2.0 * pi ** (dim / 2) / gamma(dim / 2)


def sphere_rule(d2: int, angular_nodes: int):
    """
    Product rule on S^{d2-1}: +-1 for d2=1, a uniform circle for d2=2, and
    Gauss-Legendre in cos(theta) times a uniform azimuth for d2=3.

    The rules are symmetric under omega -> -omega.
    """
    if d2 == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d2 == 2:
        phi = 2 * pi * (np.arange(angular_nodes) + 0.5) / angular_nodes
        pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return pts, np.full(angular_nodes, 2 * pi / angular_nodes)
    if d2 == 3:
        cos_t, w_t = _legendre(angular_nodes)
        n_phi = 2 * angular_nodes
        phi = 2 * pi * (np.arange(n_phi) + 0.5) / n_phi
        sin_t = np.sqrt(1.0 - cos_t**2)
        pts = np.stack(
            [
                np.outer(sin_t, np.cos(phi)).ravel(),
                np.outer(sin_t, np.sin(phi)).ravel(),
                np.repeat(cos_t, n_phi),
            ],
            axis=1,
        )
        wts = np.outer(w_t, np.full(n_phi, 2 * pi / n_phi)).ravel()
        return pts, wts
    raise DomainError(f"No product sphere rule for d2={d2}; supported d2 <= 3")


def sphere_points(dim: int, n_samples: int, seed: int | None = None) -> np.ndarray:
    """
    Deterministic low-discrepancy points on S^{dim-1}.

    A Halton sequence pushed through the normal quantile function and
    normalised; a seed turns on scrambling.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be at least 1")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    sampler = qmc.Halton(d=dim, scramble=seed is not None, seed=seed)
    sampler.fast_forward(1)
    unit = np.clip(sampler.random(n_samples), 1e-12, 1 - 1e-12)
    gauss = norm.ppf(unit)
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def box_points(dim: int, n_samples: int, seed: int | None = None) -> np.ndarray:
    """Low-discrepancy points in [-1, 1]^dim."""
    sampler = qmc.Halton(d=dim, scramble=seed is not None, seed=seed)
    return 2.0 * sampler.random(n_samples) - 1.0
