"""
Sampled spectral multipliers, the fixed dyadic bump and the norms used on them.

One concrete bump serves every role left generic (chi, eta, psi):
psi0(t) = exp(-1/((t - 1/2)(2 - t))) on (1/2, 2), and
chi(lam) = psi0(|lam|) / sum_j psi0(2^-j |lam|), supported in [-2,-1/2] u [1/2,2].
Finite sups (over t or over cells) are lower-bound estimators.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Literal

import numpy as np
from scipy import fft
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from .exceptions import DomainError, GridResolutionError
from .logger import get_logger

logger = get_logger()

BUMP_ID = "psi0(1/2,2)"
BUMP_LO, BUMP_HI = 0.5, 2.0
DEFAULT_LOG2_NODES = 12
PADDING = 4
TAIL_FRACTION = 0.125


def psi0(t):
    t = np.asarray(t, dtype=float)
    inside = (t > BUMP_LO) & (t < BUMP_HI)
    safe = np.where(inside, t, 1.0)
    return np.where(inside, np.exp(-1.0 / ((safe - BUMP_LO) * (BUMP_HI - safe))), 0.0)


def chi0(lam):
    """The dyadic partition bump chi evaluated at lam."""
    a = np.abs(np.asarray(lam, dtype=float))
    positive = a > 0
    j0 = np.floor(np.log2(np.where(positive, a, 1.0)))
    total = sum(psi0(a * 2.0 ** -(j0 + s)) for s in range(-2, 3))
    return np.where(positive & (total > 0), psi0(a) / np.where(total > 0, total, 1.0), 0.0)


def chi_iota(iota: int, lam):
    """chi_iota(lam) = chi(lam / 2^iota)."""
    return chi0(np.asarray(lam, dtype=float) / 2.0**iota)


def smooth_bump_values(lam, a: float, b: float):
    """exp(-1/((lam-a)(b-lam))) rescaled to peak 1 at the midpoint."""
    lam = np.asarray(lam, dtype=float)
    inside = (lam > a) & (lam < b)
    safe = np.where(inside, lam, 0.5 * (a + b))
    peak = 4.0 / (b - a) ** 2
    return np.where(inside, np.exp(peak - 1.0 / ((safe - a) * (b - safe))), 0.0)


@dataclass(frozen=True, eq=False)
class SampledMultiplier:
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    support: tuple[float, float]
    parity: Literal["even", "none"] = "none"
    label: str = ""

    def __post_init__(self):
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise DomainError("grid and values must be matching 1-D arrays")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("multiplier values must be finite")
        if self.parity == "even" and self.grid[0] < 0:
            raise DomainError("even multipliers store the nonnegative half-line")
        lo, hi = self.support
        if lo > hi or lo < self.grid[0] - 1e-12 or hi > self.grid[-1] + 1e-12:
            raise DomainError(f"support {self.support} outside grid hull")

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @cached_property
    def _spline(self):
        return CubicSpline(self.grid, self.values)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.parity == "even":
            lam = np.abs(lam)
        inside = (lam >= self.grid[0]) & (lam <= self.grid[-1])
        clipped = np.clip(lam, self.grid[0], self.grid[-1])
        out = np.where(inside, self._spline(clipped), 0.0)
        return out if np.iscomplexobj(self.values) else out.real

    def dilated(self, s: float) -> "SampledMultiplier":
        """The multiplier lam -> F(s lam)."""
        if not s > 0:
            raise DomainError("dilation factor must be positive")
        lo, hi = self.support
        return replace(
            self, grid=self.grid / s, support=(lo / s, hi / s), label=f"{self.label}@{s:g}"
        )

    def is_zero(self) -> bool:
        return not np.any(self.values)


def make_grid(lo: float, hi: float, log2_nodes: int = DEFAULT_LOG2_NODES) -> np.ndarray:
    return np.linspace(lo, hi, 2**log2_nodes)


def from_function(
    func: Callable, support: tuple[float, float], grid: np.ndarray, label: str = "", parity="none"
) -> SampledMultiplier:
    return SampledMultiplier(grid, np.asarray(func(grid), dtype=float), support, parity, label)


def bochner_riesz(delta: float, t: float, grid: np.ndarray | None = None) -> SampledMultiplier:
    if not t > 0:
        raise DomainError(f"Bochner-Riesz scale t must be positive, got {t}")
    if delta < 0:
        raise DomainError(f"Bochner-Riesz order must be nonnegative, got {delta}")
    grid = make_grid(0.0, 2.0 / t) if grid is None else np.asarray(grid, dtype=float)
    base = 1.0 - t * grid
    values = np.where(base >= 0, np.clip(base, 0.0, None) ** delta, 0.0)
    return SampledMultiplier(grid, values, (0.0, min(1.0 / t, grid[-1])), "none", f"br:delta={delta:g},t={t:g}")


def smooth_bump(a: float, b: float, grid: np.ndarray | None = None) -> SampledMultiplier:
    if not 0 <= a < b:
        raise DomainError(f"bump needs 0 <= a < b, got ({a}, {b})")
    grid = make_grid(0.0, 2.0 * b) if grid is None else np.asarray(grid, dtype=float)
    return SampledMultiplier(grid, smooth_bump_values(grid, a, b), (a, b), "none", f"bump:{a:g},{b:g}")


def constant(value: float, hi: float, grid: np.ndarray | None = None) -> SampledMultiplier:
    grid = make_grid(0.0, hi) if grid is None else np.asarray(grid, dtype=float)
    return SampledMultiplier(grid, np.full(grid.shape, float(value)), (0.0, hi), "none", f"const:{value:g}")


def evenize(F: SampledMultiplier) -> SampledMultiplier:
    if F.grid[0] != 0.0:
        raise DomainError("even extension needs a grid starting at 0")
    return replace(F, parity="even", label=f"even({F.label})")


def dyadic_chi(iota: int, grid: np.ndarray | None = None) -> SampledMultiplier:
    hi = BUMP_HI * 2.0**iota
    grid = make_grid(0.0, 1.25 * hi) if grid is None else np.asarray(grid, dtype=float)
    return SampledMultiplier(
        grid, chi_iota(iota, grid), (BUMP_LO * 2.0**iota, hi), "even", f"chi_{iota}"
    )


def _full_line(F: SampledMultiplier):
    """Samples on the whole line (even extension when parity is even)."""
    if F.parity == "even":
        grid = np.concatenate([-F.grid[:0:-1], F.grid])
        values = np.concatenate([F.values[:0:-1], F.values])
        return grid, values
    return F.grid, F.values


def _spectrum(F: SampledMultiplier, padding: int = PADDING):
    """Continuous Fourier transform samples F^(tau) = int F(lam) e^{-i lam tau} dlam."""
    grid, values = _full_line(F)
    n = len(values)
    total = padding * n
    step = F.step
    offset = (total - n) // 2
    padded = np.zeros(total, dtype=complex)
    padded[offset : offset + n] = values
    tau = 2 * np.pi * fft.fftfreq(total, d=step)
    spectrum = step * fft.fft(padded)
    return tau, spectrum, padded, offset, n


def freq_filter(F: SampledMultiplier, symbol: Callable, padding: int = PADDING) -> SampledMultiplier:
    """(F^ symbol)^v restricted back to the stored grid."""
    tau, spectrum, _, offset, n = _spectrum(F, padding)
    out = fft.ifft(spectrum * symbol(tau)) / F.step
    window = out[offset : offset + n]
    if np.max(np.abs(window.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(window.real), initial=0.0)):
        logger.warning("Filtered multiplier has a non-negligible imaginary part")
    values = window.real
    if F.parity == "even":
        values = values[len(F.grid) - 1 :]
    return replace(F, values=values, label=f"filter({F.label})")


def freq_localize(F: SampledMultiplier, iota: int, padding: int = PADDING) -> SampledMultiplier:
    """F^{(iota)} = (F^ chi_iota)^v."""
    if F.parity != "even":
        raise DomainError("frequency localisation needs an even multiplier")
    out = freq_filter(F, lambda tau: chi_iota(iota, tau), padding)
    return replace(out, label=f"{F.label}^({iota})")


def l2_norm(F: SampledMultiplier) -> float:
    grid, values = _full_line(F)
    return float(np.sqrt(trapezoid(np.abs(values) ** 2, grid)))


def sobolev_norm(F: SampledMultiplier, s: float, tail_tol: float | None = 1e-8) -> float:
    """(int (1+tau^2)^s |F^(tau)|^2 dtau / 2pi)^{1/2}."""
    if s < 0:
        raise DomainError("Sobolev order must be nonnegative")
    tau, spectrum, _, _, _ = _spectrum(F)
    density = (1.0 + tau**2) ** s * np.abs(spectrum) ** 2
    dtau = abs(tau[1] - tau[0])
    total = float(np.sum(density)) * dtau / (2 * np.pi)
    if tail_tol is not None and total > 0:
        edge = (1.0 - TAIL_FRACTION) * np.max(np.abs(tau))
        tail = float(np.sum(density[np.abs(tau) >= edge])) * dtau / (2 * np.pi)
        if tail > tail_tol * total:
            raise GridResolutionError(
                f"spectral tail holds {tail / total:.3g} of the L2_{s:g} mass; "
                "refine the grid or the multiplier is not smooth enough"
            )
    return float(np.sqrt(total))


def sloc_norm(F: SampledMultiplier, s: float, t_grid, tail_tol: float | None = 1e-8) -> float:
    """max over t in t_grid of ||F(t .) eta||_{L2_s}; a lower bound for the sup over t > 0."""
    t_grid = list(t_grid)
    if not t_grid:
        raise DomainError("t_grid must not be empty")
    grid = make_grid(0.0, 2.0 * BUMP_HI)
    eta = psi_eta(grid)
    best = 0.0
    for t in t_grid:
        piece = SampledMultiplier(grid, F(t * grid) * eta, (BUMP_LO, BUMP_HI), "none")
        best = max(best, sobolev_norm(piece, s, tail_tol))
    logger.debug("sloc norm over %d dilations is a lower-bound estimate", len(t_grid))
    return best


def psi_eta(lam):
    """eta: the dyadic bump restricted to (0, inf)."""
    lam = np.asarray(lam, dtype=float)
    return np.where(lam > 0, chi0(lam), 0.0)


def cowling_sikora_norm(F: SampledMultiplier, M: float, samples_per_cell: int = 32) -> float:
    """(1/M sum_K sup_{[(K-1)/M, K/M)} |F|^2)^{1/2}, sampled; converges from below."""
    if not M > 0:
        raise DomainError(f"M must be positive, got {M}")
    grid, values = _full_line(F)
    magnitude = np.abs(values)
    first = int(np.floor(grid[0] * M)) + 1
    last = int(np.ceil(grid[-1] * M))
    offsets = np.arange(samples_per_cell) / samples_per_cell
    total = 0.0
    for K in range(first, last + 1):
        pts = (K - 1 + offsets) / M
        total += float(np.max(np.interp(pts, grid, magnitude, left=0.0, right=0.0))) ** 2
    return float(np.sqrt(total / M))


def sandwich_constant(F: SampledMultiplier, M: float, s: float) -> float:
    """||F||_{M,2} / (||F||_2 + M^-s ||F||_{L2_s}), the constant the upper sandwich bound needs at M."""
    if F.is_zero():
        return 0.0
    return cowling_sikora_norm(F, M) / (l2_norm(F) + M**-s * sobolev_norm(F, s))
