"""Sequential model-based beam search: random codebook seeding, then fit/acquire/measure."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acquisition import AcquisitionState, expected_improvement, maximize_acquisition
from .channel import (
    BeamPair,
    ChannelParams,
    ChannelRealization,
    Codebook,
    RssMeter,
    build_codebook,
)
from .surrogates import (
    Dataset,
    GaussianProcessSurrogate,
    GbrtConfig,
    GpConfig,
    GradientBoostedSurrogate,
    RandomForestSurrogate,
    RfConfig,
)

__all__ = ["BoConfig", "RunTrace", "run_bo", "final_alignment", "make_surrogate", "cross_grid"]

SURROGATE_KINDS = ("GP", "GBRT", "RF")


@dataclass(frozen=True)
class BoConfig:
    """Knobs for one optimization episode.

    ``m_init`` beam pairs are seeded uniformly without replacement from the
    codebook cross-grid, then ``n_iters`` guided rounds follow; total
    measurements = m_init + n_iters. Queries are continuous by default
    (``continuous_queries=False`` restricts candidates to the grid).
    """

    m_init: int = 16
    n_iters: int = 144
    surrogate: str = "GP"
    n_candidates: int = 5000
    continuous_queries: bool = True
    recommend_by_surrogate: bool = False
    gp: GpConfig = field(default_factory=GpConfig)
    gbrt: GbrtConfig = field(default_factory=GbrtConfig)
    rf: RfConfig = field(default_factory=RfConfig)

    def __post_init__(self):
        if self.m_init < 1:
            raise ValueError("m_init must be >= 1")
        if self.n_iters < 0:
            raise ValueError("n_iters must be >= 0")
        if self.surrogate not in SURROGATE_KINDS:
            raise ValueError(f"surrogate must be one of {SURROGATE_KINDS}")

    @property
    def total_measurements(self) -> int:
        return self.m_init + self.n_iters


@dataclass
class RunTrace:
    """Per-measurement history of one alignment episode.

    ``best_rss``/``best_theta``/``best_phi`` track the running noisy argmax;
    ties keep the earliest pair. ``surrogate_pick`` is only populated when the
    episode was configured to also report the surrogate's own favorite.
    """

    theta: np.ndarray
    phi: np.ndarray
    rss: np.ndarray
    best_rss: np.ndarray
    best_theta: np.ndarray
    best_phi: np.ndarray
    surrogate_pick: BeamPair | None = None

    def __len__(self) -> int:
        return len(self.rss)

    @classmethod
    def from_measurements(cls, theta, phi, rss) -> "RunTrace":
        theta = np.asarray(theta, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        rss = np.asarray(rss, dtype=np.float64)
        n = len(rss)
        best_rss = np.empty(n)
        best_theta = np.empty(n)
        best_phi = np.empty(n)
        bi = 0
        for i in range(n):
            if rss[i] > rss[bi]:
                bi = i
            best_rss[i] = rss[bi]
            best_theta[i] = theta[bi]
            best_phi[i] = phi[bi]
        return cls(theta, phi, rss, best_rss, best_theta, best_phi)

    def best_pair_after(self, n_measurements: int) -> BeamPair:
        """Best observed pair using only the first ``n_measurements`` entries."""
        i = n_measurements - 1
        return BeamPair(theta=float(self.best_theta[i]), phi=float(self.best_phi[i]))


def make_surrogate(config: BoConfig):
    if config.surrogate == "GP":
        return GaussianProcessSurrogate(config.gp)
    if config.surrogate == "GBRT":
        return GradientBoostedSurrogate(config.gbrt)
    return RandomForestSurrogate(config.rf)


def cross_grid(tx_codebook: Codebook, rx_codebook: Codebook) -> np.ndarray:
    """All (theta, phi) codebook cross-points, shape (g_tx * g_rx, 2), TX-major."""
    t = tx_codebook.angles
    p = rx_codebook.angles
    tt, pp = np.meshgrid(t, p, indexing="ij")
    return np.column_stack([tt.ravel(), pp.ravel()])


def run_bo(
    channel: ChannelRealization,
    params: ChannelParams,
    config: BoConfig,
    rng: np.random.Generator,
    tx_codebook: Codebook | None = None,
    rx_codebook: Codebook | None = None,
) -> RunTrace:
    """One full alignment episode against a fixed channel.

    Seeds with ``m_init`` distinct random codebook pairs, then repeats: fit the
    surrogate on everything observed, maximize expected improvement over the
    candidate set (random points plus the full cross-grid), measure the winner,
    append. Identical seed, channel and config reproduce the trace bit-exactly.
    """
    if tx_codebook is None:
        tx_codebook = build_codebook(params.n_tx, params.n_tx, params.d_over_lambda)
    if rx_codebook is None:
        rx_codebook = build_codebook(params.n_rx, params.n_rx, params.d_over_lambda)
    grid = cross_grid(tx_codebook, rx_codebook)
    if config.m_init > len(grid):
        raise ValueError(
            f"m_init={config.m_init} exceeds the {len(grid)} codebook cross-grid pairs"
        )
    meter = RssMeter(channel, params, rng)

    seed_idx = rng.choice(len(grid), size=config.m_init, replace=False)
    thetas = [float(grid[i, 0]) for i in seed_idx]
    phis = [float(grid[i, 1]) for i in seed_idx]
    values = [meter.measure(BeamPair(t, p)) for t, p in zip(thetas, phis)]

    surrogate = None
    for _ in range(config.n_iters):
        data = Dataset(z=np.column_stack([thetas, phis]), y=np.array(values))
        surrogate = make_surrogate(config).fit(data, rng)
        f_best = float(max(values))
        if config.continuous_queries:
            state = AcquisitionState(f_best=f_best, grid=grid)
            pair = maximize_acquisition(surrogate, state, rng, config.n_candidates)
        else:
            mu, sigma = surrogate.predict_many(grid)
            k = int(np.argmax(expected_improvement(mu, sigma, f_best)))
            pair = BeamPair(theta=float(grid[k, 0]), phi=float(grid[k, 1]))
        thetas.append(pair.theta)
        phis.append(pair.phi)
        values.append(meter.measure(pair))

    trace = RunTrace.from_measurements(thetas, phis, values)
    if config.recommend_by_surrogate and surrogate is not None:
        mu, _ = surrogate.predict_many(grid)
        k = int(np.argmax(mu))
        trace.surrogate_pick = BeamPair(theta=float(grid[k, 0]), phi=float(grid[k, 1]))
    return trace


def final_alignment(trace: RunTrace) -> BeamPair:
    """The beam pair with the highest observed RSS; ties go to the earliest."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    i = int(np.argmax(trace.rss))
    return BeamPair(theta=float(trace.theta[i]), phi=float(trace.phi[i]))
