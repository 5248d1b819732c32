"""Multipath mmWave channel simulator: steering vectors, DFT codebooks, noisy RSS.

The propagation model is a geometric multipath (Saleh-Valenzuela style) channel
between two uniform linear arrays. A single-antenna-port measurement at beam
pair (theta, phi) observes

    y = sqrt(P_t) * u(phi)^H H v(theta) + u(phi)^H w,    w ~ CN(0, sigma_n^2 I),

and the received signal strength is |y|^2. Steering vectors carry a 1/sqrt(N)
prefactor so every beamforming vector has unit l2 norm; all closed-form
expectations in the tests assume this normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import sample_complex_gaussian

__all__ = [
    "ChannelParams",
    "ChannelRealization",
    "BeamPair",
    "Codebook",
    "RssMeter",
    "steering_vector",
    "draw_channel",
    "build_codebook",
    "measure_signal",
    "measure_rss",
    "beamforming_gain",
    "spectral_efficiency",
    "grid_signal_matrix",
    "grid_gain_matrix",
]

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class ChannelParams:
    """Array geometry, multipath statistics, and link budget.

    Linear SNR is ``p_t * sigma_a_sq / sigma_n_sq``.
    """

    n_tx: int = 64
    n_rx: int = 16
    n_paths: int = 5
    d_over_lambda: float = 0.5
    sigma_a_sq: float = 1.0
    p_t: float = 1.0
    sigma_n_sq: float = 1.0

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1 or self.n_paths < 1:
            raise ValueError("antenna and path counts must be >= 1")
        if self.d_over_lambda <= 0 or self.sigma_a_sq <= 0 or self.p_t <= 0:
            raise ValueError("d_over_lambda, sigma_a_sq and p_t must be > 0")
        if self.sigma_n_sq < 0:
            raise ValueError("sigma_n_sq must be >= 0")

    @property
    def snr_linear(self) -> float:
        if self.sigma_n_sq == 0:
            return math.inf
        return self.p_t * self.sigma_a_sq / self.sigma_n_sq

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr_linear)


@dataclass(frozen=True)
class BeamPair:
    """A transmit/receive pointing pair (departure angle, arrival angle), radians."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (-HALF_PI <= self.theta <= HALF_PI and -HALF_PI <= self.phi <= HALF_PI):
            raise ValueError(f"beam angles must lie in [-pi/2, pi/2], got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.phi])


@dataclass(frozen=True)
class ChannelRealization:
    """One block-static channel matrix plus the path parameters that built it."""

    h: np.ndarray  # (n_rx, n_tx) complex
    alphas: np.ndarray  # (n_paths,) complex path gains
    thetas: np.ndarray  # (n_paths,) departure angles, radians
    phis: np.ndarray  # (n_paths,) arrival angles, radians

    @property
    def n_rx(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]


@dataclass(frozen=True)
class Codebook:
    """Steering vectors on a uniform spatial-frequency (sine-domain) grid.

    Grid point i sits at spatial angle -1 + 2i/g; column i is the steering
    vector at the physical angle arcsin of that value. At d/lambda = 1/2 and
    g = n the columns form an orthonormal (DFT) family.
    """

    n_antennas: int
    g: int
    spatial_angles: np.ndarray = field(repr=False)  # (g,), strictly increasing in [-1, 1)
    columns: np.ndarray = field(repr=False)  # (n_antennas, g) complex

    @property
    def angles(self) -> np.ndarray:
        """Physical beam angles (radians) of the grid columns."""
        return np.arcsin(self.spatial_angles)


def steering_vector(n: int, angle: float, d_over_lambda: float = 0.5) -> np.ndarray:
    """Unit-norm array response of an n-element ULA pointed at ``angle`` radians.

    Entry k is exp(j * 2*pi * d/lambda * k * sin(angle)) / sqrt(n).
    """
    k = np.arange(n)
    return np.exp(2j * math.pi * d_over_lambda * k * math.sin(angle)) / math.sqrt(n)


def _steering_matrix(n: int, sin_angles: np.ndarray, d_over_lambda: float) -> np.ndarray:
    k = np.arange(n)[:, None]
    return np.exp(2j * math.pi * d_over_lambda * k * np.asarray(sin_angles)[None, :]) / math.sqrt(n)


def draw_channel(rng: np.random.Generator, params: ChannelParams) -> ChannelRealization:
    """Sample one multipath realization.

    Path gains are CN(0, sigma_a_sq); departure/arrival angles are uniform on
    [-pi/2, pi/2]. The matrix is

        H = sqrt(n_tx * n_rx / L) * sum_l alpha_l a_r(phi_l) a_t(theta_l)^H.
    """
    lp = params.n_paths
    thetas = rng.uniform(-HALF_PI, HALF_PI, lp)
    phis = rng.uniform(-HALF_PI, HALF_PI, lp)
    alphas = sample_complex_gaussian(rng, lp, params.sigma_a_sq)
    a_t = _steering_matrix(params.n_tx, np.sin(thetas), params.d_over_lambda)
    a_r = _steering_matrix(params.n_rx, np.sin(phis), params.d_over_lambda)
    scale = math.sqrt(params.n_tx * params.n_rx / lp)
    h = scale * (a_r * alphas[None, :]) @ a_t.conj().T
    return ChannelRealization(h=h, alphas=alphas, thetas=thetas, phis=phis)


def build_codebook(n: int, g: int, d_over_lambda: float = 0.5) -> Codebook:
    """Codebook of g steering vectors at spatial angles -1 + 2i/g, i = 0..g-1."""
    if g < 1:
        raise ValueError("grid size must be >= 1")
    spatial = -1.0 + 2.0 * np.arange(g) / g
    return Codebook(
        n_antennas=n,
        g=g,
        spatial_angles=spatial,
        columns=_steering_matrix(n, spatial, d_over_lambda),
    )


def measure_signal(
    channel: ChannelRealization,
    pair: BeamPair,
    params: ChannelParams,
    rng: np.random.Generator,
) -> complex:
    """One noisy complex baseband observation at ``pair`` (unit pilot symbol)."""
    u = steering_vector(params.n_rx, pair.phi, params.d_over_lambda)
    v = steering_vector(params.n_tx, pair.theta, params.d_over_lambda)
    w = sample_complex_gaussian(rng, params.n_rx, params.sigma_n_sq)
    return math.sqrt(params.p_t) * (u.conj() @ channel.h @ v) + u.conj() @ w


def measure_rss(
    channel: ChannelRealization,
    pair: BeamPair,
    params: ChannelParams,
    rng: np.random.Generator,
) -> float:
    """Received signal strength |y|^2 at ``pair``; fresh noise on every call."""
    return float(abs(measure_signal(channel, pair, params, rng)) ** 2)


def beamforming_gain(channel: ChannelRealization, pair: BeamPair, d_over_lambda: float = 0.5) -> float:
    """Noise-free |u^H H v|^2 of a beam pair; the quantity alignment tries to maximize."""
    u = steering_vector(channel.n_rx, pair.phi, d_over_lambda)
    v = steering_vector(channel.n_tx, pair.theta, d_over_lambda)
    return float(abs(u.conj() @ channel.h @ v) ** 2)


def spectral_efficiency(gain: float, params: ChannelParams) -> float:
    """Single-stream Shannon rate log2(1 + p_t * gain / sigma_n_sq), bits/s/Hz."""
    if gain < 0:
        raise ValueError("gain must be >= 0")
    if params.sigma_n_sq == 0:
        return math.inf if gain > 0 else 0.0
    return math.log2(1.0 + params.p_t * gain / params.sigma_n_sq)


def grid_signal_matrix(
    channel: ChannelRealization,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    params: ChannelParams,
) -> np.ndarray:
    """Noise-free signal amplitudes sqrt(p_t) * u_r^H H v_t for every codebook pair.

    Shape (g_rx, g_tx); entry [r, t] pairs RX column r with TX column t.
    """
    s = rx_codebook.columns.conj().T @ channel.h @ tx_codebook.columns
    return math.sqrt(params.p_t) * s


def grid_gain_matrix(
    channel: ChannelRealization, tx_codebook: Codebook, rx_codebook: Codebook
) -> np.ndarray:
    """Noise-free beamforming gains |u_r^H H v_t|^2 over the codebook cross-grid."""
    s = rx_codebook.columns.conj().T @ channel.h @ tx_codebook.columns
    return np.abs(s) ** 2


class RssMeter:
    """Counts RSS queries against one fixed channel; the black-box objective.

    Wraps (channel, params, rng) so callers see a plain ``measure(pair)``
    interface plus a running measurement count.
    """

    def __init__(
        self,
        channel: ChannelRealization,
        params: ChannelParams,
        rng: np.random.Generator,
    ):
        self.channel = channel
        self.params = params
        self.rng = rng
        self.count = 0

    def measure(self, pair: BeamPair) -> float:
        self.count += 1
        return measure_rss(self.channel, pair, self.params, self.rng)
