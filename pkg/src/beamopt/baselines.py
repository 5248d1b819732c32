"""Comparison methods: full codebook sweep, OMP sparse recovery, Gaussian TS bandit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    BeamPair,
    ChannelParams,
    ChannelRealization,
    Codebook,
    grid_signal_matrix,
)
from .numerics import sample_complex_gaussian
from .optimizer import RunTrace

__all__ = [
    "BudgetTooSmall",
    "ArmStats",
    "SensingSystem",
    "TsMabConfig",
    "exhaustive_search",
    "build_sensing_system",
    "omp_greedy",
    "omp_align",
    "gaussian_thompson",
    "ts_mab_align",
    "ts_mab_with_checkpoints",
]


class BudgetTooSmall(Exception):
    """Measurement budget below what the method minimally needs."""


def _pair_from_grid(tx_codebook: Codebook, rx_codebook: Codebook, t: int, r: int) -> BeamPair:
    return BeamPair(
        theta=float(tx_codebook.angles[t]),
        phi=float(rx_codebook.angles[r]),
    )


def exhaustive_search(
    channel: ChannelRealization,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    params: ChannelParams,
    rng: np.random.Generator,
) -> tuple[BeamPair, int]:
    """Measure every codebook pair once and return the noisy argmax.

    Costs g_tx * g_rx measurements; with zero noise this is exactly the grid
    gain argmax. The combined per-measurement noise is CN(0, sigma_n_sq)
    because every combining vector has unit norm.
    """
    s = grid_signal_matrix(channel, tx_codebook, rx_codebook, params)  # (g_rx, g_tx)
    noise = sample_complex_gaussian(rng, s.size, params.sigma_n_sq).reshape(s.shape)
    rss = np.abs(s + noise) ** 2
    r, t = np.unravel_index(int(np.argmax(rss)), rss.shape)
    return _pair_from_grid(tx_codebook, rx_codebook, t, r), s.size


@dataclass(frozen=True)
class SensingSystem:
    """Linear model y = matrix @ x for the vectorized virtual channel.

    ``x`` has g_rx * g_tx entries in TX-major layout (flat index t * g_rx + r).
    Row i corresponds to the probed pair ``(t_sel[i], r_sel[i])`` and equals
    sqrt(p_t) * kron(GramT[:, t_i], GramR[r_i, :]).
    """

    matrix: np.ndarray  # (budget, g_rx * g_tx) complex
    observations: np.ndarray  # (budget,) complex
    g_rx: int
    g_tx: int
    t_sel: np.ndarray
    r_sel: np.ndarray


def build_sensing_system(
    channel: ChannelRealization,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    budget: int,
    params: ChannelParams,
    rng: np.random.Generator,
) -> SensingSystem:
    """Probe ``budget`` distinct random codebook pairs and assemble y = M x."""
    g_rx, g_tx = rx_codebook.g, tx_codebook.g
    total = g_rx * g_tx
    if budget > total:
        raise BudgetTooSmall(f"budget {budget} exceeds the {total} distinct codebook pairs")
    # permutation prefix: a budget-k system is the first k rows of a budget-n one
    flat = rng.permutation(total)[:budget]
    t_sel = flat // g_rx
    r_sel = flat % g_rx
    s = grid_signal_matrix(channel, tx_codebook, rx_codebook, params)
    noise = sample_complex_gaussian(rng, budget, params.sigma_n_sq)
    y = s[r_sel, t_sel] + noise

    gram_t = tx_codebook.columns.conj().T @ tx_codebook.columns  # (g_tx, g_tx)
    gram_r = rx_codebook.columns.conj().T @ rx_codebook.columns  # (g_rx, g_rx)
    # row i = kron(gram_t[:, t_i], gram_r[r_i, :]) scaled by sqrt(p_t)
    m = (gram_t.T[t_sel][:, :, None] * gram_r[r_sel][:, None, :]).reshape(budget, total)
    return SensingSystem(
        matrix=math.sqrt(params.p_t) * m,
        observations=y,
        g_rx=g_rx,
        g_tx=g_tx,
        t_sel=t_sel,
        r_sel=r_sel,
    )


def omp_greedy(
    matrix: np.ndarray, y: np.ndarray, sparsity: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthogonal matching pursuit for exactly ``sparsity`` iterations.

    Greedy column selection by norm-weighted correlation with the residual,
    least-squares coefficient refresh each round. Returns (coefficients over
    the support, support indices, residual norms after each iteration).
    """
    norms = np.linalg.norm(matrix, axis=0)
    # columns at rounding-noise level would dominate after normalization
    eligible = norms > 1e-9 * (norms.max() if norms.size else 0.0)
    safe_norms = np.where(eligible, norms, 1.0)
    residual = y.astype(np.complex128, copy=True)
    support: list[int] = []
    res_norms = np.empty(sparsity)
    coef = np.zeros(0, dtype=np.complex128)
    for it in range(sparsity):
        corr = np.abs(matrix.conj().T @ residual) / safe_norms
        corr[~eligible] = -1.0
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        cols = matrix[:, support]
        coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
        residual = y - cols @ coef
        res_norms[it] = np.linalg.norm(residual)
    return coef, np.array(support), res_norms


def omp_align(
    channel: ChannelRealization,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    budget: int,
    sparsity: int,
    params: ChannelParams,
    rng: np.random.Generator,
) -> BeamPair:
    """Sparse-recovery alignment: probe random pairs, recover the virtual
    channel by OMP, return the grid pair under the largest coefficient."""
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    if budget < sparsity:
        raise BudgetTooSmall(f"budget {budget} < sparsity {sparsity}")
    system = build_sensing_system(channel, tx_codebook, rx_codebook, budget, params, rng)
    coef, support, _ = omp_greedy(system.matrix, system.observations, sparsity)
    j = int(support[int(np.argmax(np.abs(coef)))])
    return _pair_from_grid(tx_codebook, rx_codebook, j // system.g_rx, j % system.g_rx)


@dataclass(frozen=True)
class TsMabConfig:
    """Gaussian Thompson sampling model: known observation variance, conjugate
    normal prior per arm. ``obs_var=None`` defaults to sigma_n_sq + p_t."""

    prior_mean: float = 0.0
    prior_var: float = 1e6
    obs_var: float | None = None


@dataclass
class ArmStats:
    """Posterior state over the arms after a bandit run."""

    counts: np.ndarray
    reward_sums: np.ndarray
    post_mean: np.ndarray
    post_var: np.ndarray


def gaussian_thompson(
    n_arms: int,
    draw_reward,
    budget: int,
    config: TsMabConfig,
    rng: np.random.Generator,
    obs_var: float,
    checkpoints: tuple[int, ...] = (),
) -> tuple[int, np.ndarray, np.ndarray, ArmStats, dict[int, int]]:
    """Core Thompson-sampling loop over ``n_arms`` with rewards from ``draw_reward``.

    Per round: sample every arm's posterior, pull the argmax, observe, update.
    Returns (recommended arm, pulled-arm sequence, reward sequence, final arm
    stats, checkpoint recommendations keyed by pull count).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if obs_var <= 0:
        raise ValueError("observation variance must be > 0")
    cfg = config
    counts = np.zeros(n_arms)
    sums = np.zeros(n_arms)
    pulls = np.empty(budget, dtype=np.int64)
    rewards = np.empty(budget)
    marks = set(checkpoints)
    at_checkpoint: dict[int, int] = {}
    prior_prec = 1.0 / cfg.prior_var

    def posterior():
        var = 1.0 / (prior_prec + counts / obs_var)
        mean = var * (cfg.prior_mean * prior_prec + sums / obs_var)
        return mean, var

    for k in range(budget):
        mean, var = posterior()
        sampled = mean + np.sqrt(var) * rng.standard_normal(n_arms)
        arm = int(np.argmax(sampled))
        reward = float(draw_reward(arm))
        counts[arm] += 1
        sums[arm] += reward
        pulls[k] = arm
        rewards[k] = reward
        if k + 1 in marks:
            mean, _ = posterior()
            at_checkpoint[k + 1] = int(np.argmax(mean))

    mean, var = posterior()
    stats = ArmStats(counts=counts, reward_sums=sums, post_mean=mean, post_var=var)
    return int(np.argmax(mean)), pulls, rewards, stats, at_checkpoint


def _arm_pair(tx_codebook: Codebook, rx_codebook: Codebook, arm: int, g_rx: int) -> BeamPair:
    return _pair_from_grid(tx_codebook, rx_codebook, arm // g_rx, arm % g_rx)


def ts_mab_with_checkpoints(
    channel: ChannelRealization,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    budget: int,
    params: ChannelParams,
    rng: np.random.Generator,
    config: TsMabConfig = TsMabConfig(),
    checkpoints: tuple[int, ...] = (),
) -> tuple[BeamPair, RunTrace, dict[int, BeamPair], ArmStats]:
    """Thompson-sampling bandit over all codebook pairs as arms.

    Also reports the recommendation (highest posterior mean) the bandit would
    have made at each checkpoint pull count, so one run serves every budget.
    """
    g_rx = rx_codebook.g
    n_arms = g_rx * tx_codebook.g
    s_flat = grid_signal_matrix(channel, tx_codebook, rx_codebook, params).T.ravel()  # TX-major
    obs_var = config.obs_var if config.obs_var is not None else params.sigma_n_sq + params.p_t

    def draw_reward(arm: int) -> float:
        noise = sample_complex_gaussian(rng, 1, params.sigma_n_sq)[0]
        return float(abs(s_flat[arm] + noise) ** 2)

    rec_arm, pulls, rewards, stats, marks = gaussian_thompson(
        n_arms, draw_reward, budget, config, rng, obs_var, checkpoints
    )
    pairs = [_arm_pair(tx_codebook, rx_codebook, a, g_rx) for a in pulls]
    trace = RunTrace.from_measurements(
        [p.theta for p in pairs], [p.phi for p in pairs], rewards
    )
    rec = _arm_pair(tx_codebook, rx_codebook, rec_arm, g_rx)
    rec_marks = {k: _arm_pair(tx_codebook, rx_codebook, a, g_rx) for k, a in marks.items()}
    return rec, trace, rec_marks, stats


def ts_mab_align(
    channel: ChannelRealization,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    budget: int,
    params: ChannelParams,
    rng: np.random.Generator,
    config: TsMabConfig = TsMabConfig(),
) -> tuple[BeamPair, RunTrace]:
    """Bandit alignment: pull ``budget`` arms, return the highest-posterior-mean pair."""
    rec, trace, _, _ = ts_mab_with_checkpoints(
        channel, tx_codebook, rx_codebook, budget, params, rng, config
    )
    return rec, trace
