"""
Padé rational approximants of truncated power series.
"""
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import toeplitz

from src.errors import PadeDegenerateError, PreconditionError


def pade_approximant(
    coeffs: Sequence[float], num_deg: int, den_deg: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    [num_deg/den_deg] Padé approximant of ``sum_i coeffs[i] x^i``.

    Solves the standard linear system for the denominator (normalized to
    ``b_0 = 1``) and then reads off the numerator. Coefficients missing beyond
    ``len(coeffs)`` are taken as zero.

    Args:
        coeffs: Series coefficients, constant term first
        num_deg: Numerator degree m
        den_deg: Denominator degree n

    Returns:
        (numerator, denominator) coefficient arrays, constant term first

    Raises:
        PadeDegenerateError: If the denominator system is rank deficient
    """
    if num_deg < 0 or den_deg < 0:
        raise PreconditionError("Padé degrees must be non-negative")

    m, n = num_deg, den_deg
    c = np.zeros(m + n + 1, dtype=float)
    given = np.asarray(coeffs, dtype=float)[: m + n + 1]
    c[: given.size] = given

    if not np.any(c):
        return np.zeros(1), np.ones(1)

    if n == 0:
        return c[: m + 1].copy(), np.ones(1)

    # Row k (k = m+1..m+n): sum_{j=0..n} b_j c_{k-j} = 0 with b_0 = 1.
    col = c[m : m + n]
    row = np.array([c[m - j] if m - j >= 0 else 0.0 for j in range(n)])
    system = toeplitz(col, row)
    rhs = -c[m + 1 : m + n + 1]

    if np.linalg.matrix_rank(system) < n:
        raise PadeDegenerateError(f"Padé [{m}/{n}] system is singular")

    b = np.concatenate(([1.0], np.linalg.solve(system, rhs)))
    a = np.array([
        sum(b[j] * c[i - j] for j in range(min(i, n) + 1))
        for i in range(m + 1)
    ])
    return a, b


def evaluate_pade(numerator: np.ndarray, denominator: np.ndarray, x: float) -> float:
    """Evaluate the rational function at ``x``; a vanishing denominator is degenerate."""
    num = float(P.polyval(x, numerator))
    den = float(P.polyval(x, denominator))
    scale = float(np.sum(np.abs(denominator) * np.abs(x) ** np.arange(denominator.size)))
    if den == 0.0 or abs(den) <= 1e-12 * scale:
        raise PadeDegenerateError(f"Padé denominator vanishes at x={x}")
    value = num / den
    if not np.isfinite(value):
        raise PadeDegenerateError(f"Padé evaluation is not finite at x={x}")
    return value


def evaluate_without_constant(
    coeffs: Sequence[float], num_deg: int, den_deg: int, x: float
) -> float:
    """
    Padé value of ``sum_{i>=1} coeffs[i-1] x^i``.

    The series has no constant term, so the approximant is built for the series
    divided by ``x`` and multiplied back.
    """
    numerator, denominator = pade_approximant(coeffs, num_deg, den_deg)
    return x * evaluate_pade(numerator, denominator, x)
