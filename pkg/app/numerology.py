"""
Exact dimension and exponent formulas. All results are integers or Fractions.
"""

from fractions import Fraction

from .exceptions import DomainError, InadmissiblePairError
from .models import NumerologyRow, ThetaRow

EXCEPTIONAL_PAIRS = frozenset({(4, 3), (8, 6), (8, 7)})
P_THRESHOLD_OVERRIDES = {(8, 6): Fraction(17, 12), (8, 7): Fraction(14, 11)}
BAR_P_OVERRIDES = {
    (4, 3): Fraction(6, 5),
    (8, 6): Fraction(17, 12),
    (8, 7): Fraction(14, 11),
}


def radon_hurwitz(n: int) -> int:
    if n < 1:
        raise DomainError(f"Radon-Hurwitz number needs n >= 1, got {n}")
    b = (n & -n).bit_length() - 1
    q, r = divmod(b, 4)
    return 2**r + 8 * q


def admissible(d1: int, d2: int) -> bool:
    if d1 < 1 or d2 < 1:
        raise DomainError(f"dimensions must be positive, got ({d1}, {d2})")
    return d2 < radon_hurwitz(d1)


def _require_admissible(d1: int, d2: int):
    if not admissible(d1, d2):
        raise InadmissiblePairError(
            f"({d1}, {d2}) is not admissible: d2 must be below rho_RH({d1}) = {radon_hurwitz(d1)}"
        )


def is_exceptional(d1: int, d2: int) -> bool:
    _require_admissible(d1, d2)
    return (d1, d2) in EXCEPTIONAL_PAIRS


def three_halves_holds(d1: int, d2: int) -> bool:
    _require_admissible(d1, d2)
    return 2 * d1 > 3 * d2


def stein_tomas(n: int) -> Fraction:
    if n < 1:
        raise DomainError(f"Stein-Tomas exponent needs n >= 1, got {n}")
    return Fraction(2 * (n + 1), n + 3)


def p_threshold(d1: int, d2: int) -> Fraction:
    _require_admissible(d1, d2)
    return P_THRESHOLD_OVERRIDES.get((d1, d2), stein_tomas(d2))


def bar_p_threshold(d1: int, d2: int) -> Fraction:
    _require_admissible(d1, d2)
    return BAR_P_OVERRIDES.get((d1, d2), stein_tomas(d2))


def dual_exponent(p: Fraction) -> Fraction:
    p = Fraction(p)
    if p <= 1:
        raise DomainError(f"dual exponent needs p > 1, got {p}")
    return p / (p - 1)


def theta_p(p: Fraction, d1: int, d2: int) -> Fraction:
    p = Fraction(p)
    p_min = min(stein_tomas(d1), stein_tomas(d2))
    if not 1 <= p <= p_min:
        raise DomainError(f"p={p} outside [1, {p_min}]")
    if p == 1:
        return Fraction(0)
    return (1 - 1 / p) / (1 - 1 / p_min)


def regularity_threshold(p: Fraction, d: int) -> Fraction:
    p = Fraction(p)
    if p < 1 or d < 1:
        raise DomainError(f"need p >= 1 and d >= 1, got p={p}, d={d}")
    return d * (1 / p - Fraction(1, 2))


def condition_iii_threshold(d1: int, d2: int) -> Fraction:
    if d2 < 2:
        raise DomainError("condition (iii) uses the dual Stein-Tomas exponent, undefined for d2=1")
    _require_admissible(d1, d2)
    pd = dual_exponent(stein_tomas(d2))
    return (pd + 2 * (d1 - d2)) / (pd + d1 - d2)


def exceptional_pairs(d1_max: int) -> list[tuple[int, int]]:
    """Admissible pairs with d1 <= d1_max on which 2*d1 > 3*d2 fails."""
    return [
        (d1, d2)
        for d1 in range(1, d1_max + 1)
        for d2 in range(1, radon_hurwitz(d1))
        if not three_halves_holds(d1, d2)
    ]


def numerology_row(d1: int, d2: int) -> NumerologyRow:
    rho = radon_hurwitz(d1)
    if d2 >= rho:
        return NumerologyRow(d1=d1, d2=d2, rho_rh=rho, admissible=False)
    return NumerologyRow(
        d1=d1,
        d2=d2,
        rho_rh=rho,
        admissible=True,
        exceptional=is_exceptional(d1, d2),
        three_halves=three_halves_holds(d1, d2),
        p_threshold=str(p_threshold(d1, d2)),
        bar_p=str(bar_p_threshold(d1, d2)),
        condition_iii=str(condition_iii_threshold(d1, d2)) if d2 >= 2 else None,
    )


def numerology_table(d1_max: int) -> list[NumerologyRow]:
    return [
        numerology_row(d1, d2)
        for d1 in range(1, d1_max + 1)
        for d2 in range(1, radon_hurwitz(d1))
    ]


def theta_table(d1: int, d2: int) -> list[ThetaRow]:
    _require_admissible(d1, d2)
    p_min = min(stein_tomas(d1), stein_tomas(d2))
    d = d1 + d2
    points = sorted({Fraction(1), min(bar_p_threshold(d1, d2), p_min), p_min})
    return [
        ThetaRow(
            p=str(p),
            theta=str(theta_p(p, d1, d2)),
            regularity=str(regularity_threshold(p, d)),
        )
        for p in points
    ]
