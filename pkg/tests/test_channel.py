import math

import numpy as np
import pytest

from beamopt.channel import (
    BeamPair,
    ChannelParams,
    ChannelRealization,
    RssMeter,
    beamforming_gain,
    build_codebook,
    draw_channel,
    grid_gain_matrix,
    measure_rss,
    spectral_efficiency,
    steering_vector,
)


def rebuild_from_paths(channel, n_tx, n_rx, d_over_lambda=0.5):
    """Independent reconstruction of H from the stored path parameters."""
    lp = len(channel.alphas)
    h = np.zeros((n_rx, n_tx), dtype=np.complex128)
    for alpha, theta, phi in zip(channel.alphas, channel.thetas, channel.phis):
        a_t = steering_vector(n_tx, theta, d_over_lambda)
        a_r = steering_vector(n_rx, phi, d_over_lambda)
        h += alpha * np.outer(a_r, a_t.conj())
    return math.sqrt(n_tx * n_rx / lp) * h


def single_path_channel(n_tx, n_rx, theta, phi, alpha=1.0 + 0j):
    a_t = steering_vector(n_tx, theta)
    a_r = steering_vector(n_rx, phi)
    h = math.sqrt(n_tx * n_rx) * alpha * np.outer(a_r, a_t.conj())
    return ChannelRealization(
        h=h,
        alphas=np.array([alpha]),
        thetas=np.array([theta]),
        phis=np.array([phi]),
    )


class TestSteeringVector:
    def test_broadside(self):
        np.testing.assert_allclose(steering_vector(4, 0.0), 0.5 * np.ones(4), atol=1e-15)

    def test_endfire_two_elements(self):
        v = steering_vector(2, math.pi / 2, 0.5)
        np.testing.assert_allclose(v, np.array([1.0, -1.0]) / math.sqrt(2), atol=1e-12)

    def test_unit_norm_large_array(self):
        v = steering_vector(64, 0.7)
        assert v.shape == (64,)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    @pytest.mark.parametrize("n,angle", [(3, -1.2), (16, 0.4), (64, 1.5)])
    def test_unit_norm_everywhere(self, n, angle):
        assert abs(np.linalg.norm(steering_vector(n, angle)) - 1.0) < 1e-12


class TestChannelParams:
    def test_snr_definition(self):
        p = ChannelParams(p_t=2.0, sigma_a_sq=3.0, sigma_n_sq=1.5)
        assert p.snr_linear == pytest.approx(4.0)
        assert p.snr_db == pytest.approx(10 * math.log10(4.0))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_tx": 0},
            {"n_paths": 0},
            {"d_over_lambda": 0.0},
            {"sigma_a_sq": 0.0},
            {"p_t": 0.0},
            {"sigma_n_sq": -1.0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ChannelParams(**kwargs)


class TestBeamPair:
    def test_domain_enforced(self):
        with pytest.raises(ValueError):
            BeamPair(theta=2.0, phi=0.0)
        with pytest.raises(ValueError):
            BeamPair(theta=0.0, phi=-2.0)


class TestDrawChannel:
    def test_shape_at_reference_geometry(self):
        params = ChannelParams()  # 64 TX, 16 RX, 5 paths
        ch = draw_channel(np.random.default_rng(0), params)
        assert ch.h.shape == (16, 64)
        assert len(ch.alphas) == 5

    def test_angles_in_domain(self):
        ch = draw_channel(np.random.default_rng(3), ChannelParams(n_paths=50))
        assert np.all(np.abs(ch.thetas) <= math.pi / 2)
        assert np.all(np.abs(ch.phis) <= math.pi / 2)

    def test_matrix_matches_path_sum(self):
        params = ChannelParams(n_tx=12, n_rx=6, n_paths=4)
        ch = draw_channel(np.random.default_rng(1), params)
        expected = rebuild_from_paths(ch, 12, 6)
        np.testing.assert_allclose(ch.h, expected, atol=1e-12)

    def test_single_forced_path(self):
        ch = single_path_channel(8, 4, 0.0, 0.0)
        a_t = steering_vector(8, 0.0)
        a_r = steering_vector(4, 0.0)
        np.testing.assert_allclose(
            ch.h, math.sqrt(32) * np.outer(a_r, a_t.conj()), atol=1e-14
        )

    def test_mean_frobenius_energy(self):
        # Monte-Carlo check of E||H||_F^2 = n_tx * n_rx * sigma_a_sq
        params = ChannelParams(sigma_a_sq=1.0)
        rng = np.random.default_rng(11)
        total = 0.0
        n_draws = 10_000
        for _ in range(n_draws):
            ch = draw_channel(rng, params)
            total += np.linalg.norm(ch.h) ** 2
        mean = total / n_draws
        assert abs(mean - 64 * 16) / (64 * 16) < 0.02

    def test_same_seed_same_channel(self):
        params = ChannelParams()
        a = draw_channel(np.random.default_rng(5), params)
        b = draw_channel(np.random.default_rng(5), params)
        np.testing.assert_array_equal(a.h, b.h)


class TestCodebook:
    def test_dft_orthogonality_at_critical_sampling(self):
        cb = build_codebook(64, 64, 0.5)
        gram = np.abs(cb.columns.conj().T @ cb.columns - np.eye(64))
        assert gram.max() < 1e-10

    def test_single_column(self):
        cb = build_codebook(8, 1, 0.5)
        assert cb.spatial_angles.tolist() == [-1.0]
        np.testing.assert_allclose(
            cb.columns[:, 0], steering_vector(8, math.asin(-1.0)), atol=1e-14
        )

    def test_receive_codebook_shape(self):
        cb = build_codebook(16, 16, 0.5)
        assert cb.columns.shape == (16, 16)
        assert np.all(np.diff(cb.spatial_angles) > 0)
        assert cb.spatial_angles[0] == -1.0 and cb.spatial_angles[-1] < 1.0

    def test_columns_match_steering_at_arcsin(self):
        cb = build_codebook(10, 7, 0.5)
        for i in range(7):
            expected = steering_vector(10, math.asin(cb.spatial_angles[i]))
            np.testing.assert_allclose(cb.columns[:, i], expected, atol=1e-14)


class TestMeasureRss:
    def test_noiseless_aligned_single_path(self):
        params = ChannelParams(n_tx=16, n_rx=8, n_paths=1, p_t=2.0, sigma_n_sq=0.0)
        ch = single_path_channel(16, 8, 0.4, -0.3)
        rss = measure_rss(ch, BeamPair(0.4, -0.3), params, np.random.default_rng(0))
        assert rss == pytest.approx(2.0 * 16 * 8, rel=1e-12)

    def test_noiseless_orthogonal_grid_pair(self):
        # on-grid path; any other grid pair sees (numerically) nothing
        tx = build_codebook(16, 16)
        rx = build_codebook(8, 8)
        ch = single_path_channel(16, 8, float(tx.angles[3]), float(rx.angles[2]))
        params = ChannelParams(n_tx=16, n_rx=8, n_paths=1, sigma_n_sq=0.0)
        pair = BeamPair(float(tx.angles[9]), float(rx.angles[5]))
        assert measure_rss(ch, pair, params, np.random.default_rng(0)) < 1e-18

    def test_noise_only_mean(self):
        params = ChannelParams(n_tx=2, n_rx=2, n_paths=1, sigma_n_sq=0.7)
        zero = ChannelRealization(
            h=np.zeros((2, 2), dtype=np.complex128),
            alphas=np.array([0.0 + 0j]),
            thetas=np.array([0.0]),
            phis=np.array([0.0]),
        )
        rng = np.random.default_rng(21)
        pair = BeamPair(0.1, -0.2)
        total = sum(measure_rss(zero, pair, params, rng) for _ in range(100_000))
        assert abs(total / 100_000 - 0.7) / 0.7 < 0.02

    def test_noiseless_is_deterministic_and_matches_gain(self):
        params = ChannelParams(n_tx=8, n_rx=4, n_paths=3, p_t=1.7, sigma_n_sq=0.0)
        ch = draw_channel(np.random.default_rng(2), params)
        pair = BeamPair(0.25, 0.6)
        a = measure_rss(ch, pair, params, np.random.default_rng(0))
        b = measure_rss(ch, pair, params, np.random.default_rng(99))
        assert a == b == pytest.approx(1.7 * beamforming_gain(ch, pair), rel=1e-12)


class TestBeamformingGain:
    def test_zero_channel(self):
        zero = ChannelRealization(
            h=np.zeros((4, 8), dtype=np.complex128),
            alphas=np.array([0.0 + 0j]),
            thetas=np.array([0.0]),
            phis=np.array([0.0]),
        )
        assert beamforming_gain(zero, BeamPair(0.3, 0.3)) == 0.0

    def test_aligned_closed_form(self):
        alpha = 0.8 - 0.6j
        ch = single_path_channel(16, 8, -0.5, 0.2, alpha)
        gain = beamforming_gain(ch, BeamPair(-0.5, 0.2))
        assert gain == pytest.approx(16 * 8 * abs(alpha) ** 2, rel=1e-12)

    def test_consistent_with_noisy_measurements(self):
        params = ChannelParams(n_tx=8, n_rx=4, n_paths=2, sigma_n_sq=0.5)
        ch = draw_channel(np.random.default_rng(8), params)
        pair = BeamPair(0.0, 0.0)
        rng = np.random.default_rng(9)
        n = 20_000
        mean_rss = sum(measure_rss(ch, pair, params, rng) for _ in range(n)) / n
        gain = beamforming_gain(ch, pair)
        # E[RSS] = p_t * gain + sigma_n_sq
        assert mean_rss - 0.5 == pytest.approx(gain, rel=0.05, abs=0.05)


class TestSpectralEfficiency:
    def test_values(self):
        params = ChannelParams(p_t=1.0, sigma_n_sq=1.0)
        assert spectral_efficiency(0.0, params) == 0.0
        assert spectral_efficiency(1.0, params) == pytest.approx(1.0)
        assert spectral_efficiency(3.0, params) == pytest.approx(2.0)

    def test_rejects_negative_gain(self):
        with pytest.raises(ValueError):
            spectral_efficiency(-1.0, ChannelParams())


class TestGridHelpers:
    def test_grid_gain_matches_per_pair_gain(self):
        params = ChannelParams(n_tx=8, n_rx=4, n_paths=3)
        ch = draw_channel(np.random.default_rng(4), params)
        tx = build_codebook(8, 8)
        rx = build_codebook(4, 4)
        gains = grid_gain_matrix(ch, tx, rx)
        for r in range(4):
            for t in range(8):
                pair = BeamPair(float(tx.angles[t]), float(rx.angles[r]))
                assert gains[r, t] == pytest.approx(beamforming_gain(ch, pair), rel=1e-10)


class TestRssMeter:
    def test_counts_measurements(self):
        params = ChannelParams(n_tx=4, n_rx=2, n_paths=1, sigma_n_sq=0.1)
        ch = draw_channel(np.random.default_rng(0), params)
        meter = RssMeter(ch, params, np.random.default_rng(1))
        for _ in range(7):
            meter.measure(BeamPair(0.0, 0.0))
        assert meter.count == 7
