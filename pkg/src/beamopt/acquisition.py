"""Expected improvement and its candidate-set maximizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import HALF_PI, BeamPair
from .numerics import std_normal_cdf, std_normal_pdf

__all__ = ["AcquisitionState", "expected_improvement", "maximize_acquisition"]

BEAM_DOMAIN = ((-HALF_PI, HALF_PI), (-HALF_PI, HALF_PI))


@dataclass(frozen=True)
class AcquisitionState:
    """Inputs to the acquisition maximizer beyond the surrogate itself.

    ``f_best`` is the incumbent (max observed RSS). ``grid`` optionally lists
    codebook cross-points, shape (g, 2), appended to the random candidates so
    the discrete sweep grid is always in contention.
    """

    f_best: float
    domain: tuple = BEAM_DOMAIN
    grid: np.ndarray | None = None


def expected_improvement(mu, sigma, f_best: float):
    """Closed-form E[max(0, X - f_best)] for X ~ N(mu, sigma^2); 0 when sigma = 0.

    Vectorized over ``mu`` and ``sigma``; scalar inputs give a scalar back.
    """
    mu_arr = np.asarray(mu, dtype=np.float64)
    sigma_arr = np.asarray(sigma, dtype=np.float64)
    scalar = mu_arr.ndim == 0 and sigma_arr.ndim == 0
    mu_arr, sigma_arr = np.atleast_1d(mu_arr), np.atleast_1d(sigma_arr)
    if np.any(sigma_arr < 0):
        raise ValueError("sigma must be >= 0")
    diff = mu_arr - f_best
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma_arr > 0, diff / np.where(sigma_arr > 0, sigma_arr, 1.0), 0.0)
    ei = diff * std_normal_cdf(z) + sigma_arr * std_normal_pdf(z)
    ei = np.where(sigma_arr > 0, np.maximum(ei, 0.0), 0.0)
    return float(ei[0]) if scalar else ei


def maximize_acquisition(
    surrogate,
    state: AcquisitionState,
    rng: np.random.Generator,
    n_candidates: int = 5000,
) -> BeamPair:
    """Pick the EI-maximizing beam pair over a random candidate set.

    Evaluates EI at ``n_candidates`` uniform points in the domain plus the
    cross-grid points in ``state.grid`` (when given); ties resolve to the
    lowest candidate index, so the result is deterministic given the seed.
    Candidate-set search is used because tree surrogates make EI piecewise
    constant, where gradient ascent does not apply.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    (t_lo, t_hi), (p_lo, p_hi) = state.domain
    candidates = np.column_stack(
        [
            rng.uniform(t_lo, t_hi, n_candidates),
            rng.uniform(p_lo, p_hi, n_candidates),
        ]
    )
    if state.grid is not None and len(state.grid):
        candidates = np.vstack([candidates, state.grid])
    mu, sigma = surrogate.predict_many(candidates)
    ei = expected_improvement(mu, sigma, state.f_best)
    best = int(np.argmax(ei))
    return BeamPair(theta=float(candidates[best, 0]), phi=float(candidates[best, 1]))
