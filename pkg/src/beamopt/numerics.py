"""Shared numerical primitives: Hermitian solves, normal PDF/CDF, seeded RNG streams.

Everything here is deterministic given its inputs; randomness enters only
through explicitly passed ``numpy.random.Generator`` objects.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky as _cholesky
from scipy.linalg import solve_triangular
from scipy.special import ndtr

__all__ = [
    "NotPositiveDefinite",
    "cholesky_factor",
    "hermitian_solve",
    "std_normal_pdf",
    "std_normal_cdf",
    "sample_complex_gaussian",
    "rng_stream",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Hermitian symmetry tolerance for debug checks.
_HERMITIAN_TOL = 1e-12


class NotPositiveDefinite(Exception):
    """A Cholesky-style factorization hit a nonpositive pivot.

    Callers typically respond by increasing diagonal jitter and retrying.
    """


def cholesky_factor(a: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.

    Raises :class:`NotPositiveDefinite` when the factorization fails, which
    signals the caller to add diagonal jitter.
    """
    a = np.asarray(a)
    if __debug__ and a.shape[0] <= 512:
        asym = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
        assert asym < _HERMITIAN_TOL, f"matrix not Hermitian (max asymmetry {asym:.3e})"
    try:
        return _cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def hermitian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for Hermitian positive-definite ``a``.

    Uses a triangular factorization (never an explicit inverse); accepts a
    vector or a matrix of right-hand sides.
    """
    lo = cholesky_factor(a)
    z = solve_triangular(lo, b, lower=True, check_finite=False)
    return solve_triangular(lo.conj().T, z, lower=False, check_finite=False)


def std_normal_pdf(x):
    """Standard normal density, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):  # x*x may overflow to inf; exp(-inf) = 0 is right
        return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def std_normal_cdf(x):
    """Standard normal CDF via the erf-based ``ndtr``, elementwise."""
    return ndtr(np.asarray(x, dtype=np.float64))


def sample_complex_gaussian(rng: np.random.Generator, n: int, variance: float) -> np.ndarray:
    """Draw ``n`` i.i.d. circularly-symmetric complex Gaussians with E|x|^2 = variance.

    Real and imaginary parts are each N(0, variance/2). Stream values are
    consumed per sample (re, im), so the first k entries of a size-n draw
    equal a size-k draw from the same stream state; batch sizes never shift
    earlier samples.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    parts = rng.standard_normal((n, 2))
    scale = np.sqrt(variance / 2.0)
    return scale * (parts[:, 0] + 1j * parts[:, 1])


def rng_stream(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator derived deterministically from a master seed and keys.

    Distinct key tuples give statistically independent streams; the same tuple
    always reproduces the same stream. No global state is involved.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))
