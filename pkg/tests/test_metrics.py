import numpy as np
import pytest

from conftest import brute_gain, brute_user_sinr, make_config, random_channels, random_solution
from models.system import BeamformingSolution, ChannelSet, SystemConfig
from utils.metrics import (
    beampattern_gain,
    constraint_report,
    effective_target_channel,
    effective_user_channel,
    leakage_sinr,
    normalized_worst_residual,
    total_power,
    user_sinr,
)


def _single_user_config(**overrides) -> SystemConfig:
    values = dict(L=1, K=1, M=0, N=1, p_max=1.0, gamma_c=1.0, gamma_t=1.0, sigma2_user=0.5, sigma2_target=1.0)
    values.update(overrides)
    return SystemConfig(**values)


def test_effective_user_channel_zero_theta_is_direct(rng):
    channels = random_channels(rng, 3, 2, 4)
    np.testing.assert_allclose(effective_user_channel(1, channels, np.zeros(4)), channels.h_direct[1])


def test_single_element_cascade(rng):
    channels = random_channels(rng, 3, 1, 1)
    channels = ChannelSet(g_mat=channels.g_mat, h_direct=np.zeros((1, 3)), h_ris=channels.h_ris, g_ris=channels.g_ris)
    np.testing.assert_allclose(effective_user_channel(0, channels, np.ones(1)),
                               channels.h_ris[0, 0] * channels.g_mat[0])
    np.testing.assert_allclose(effective_target_channel(channels, np.array([2.0j])),
                               2.0j * channels.g_ris[0] * channels.g_mat[0])


def test_effective_channels_match_triple_product(rng):
    channels = random_channels(rng, 3, 2, 4)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    expected = np.zeros(3, dtype=complex)
    for n in range(4):
        for l in range(3):
            expected[l] += channels.h_ris[0, n] * theta[n] * channels.g_mat[n, l]
    np.testing.assert_allclose(effective_user_channel(0, channels, theta), channels.h_direct[0] + expected)
    assert np.all(effective_target_channel(channels, np.zeros(4)) == 0)


def test_user_sinr_single_term_arithmetic():
    config = _single_user_config()
    channels = ChannelSet(g_mat=np.zeros((1, 1)), h_direct=np.ones((1, 1)), h_ris=np.zeros((1, 1)),
                          g_ris=np.zeros(1))
    assert user_sinr(0, np.ones((1, 1)), np.ones(1), channels, config) == pytest.approx(2.0)
    assert user_sinr(0, np.zeros((1, 1)), np.ones(1), channels, config) == 0.0


@pytest.mark.parametrize("mode", ["passive", "active"])
def test_sinr_and_gain_match_oracle(rng, mode):
    config = make_config(mode, L=3, K=2, M=2, N=4)
    channels = random_channels(rng, 3, 2, 4)
    x_mat, theta = random_solution(rng, config, amplitude=config.amplitude_bound)
    for k in range(config.K):
        assert user_sinr(k, x_mat, theta, channels, config) == pytest.approx(
            brute_user_sinr(k, x_mat, theta, channels, config), rel=1e-10)
    assert beampattern_gain(x_mat, theta, channels, config) == pytest.approx(
        brute_gain(x_mat, theta, channels, config.sigma2_ris), rel=1e-10)


def test_leakage_sinr_edge_cases(rng):
    config = make_config("active", L=3, K=2, M=2, N=4)
    channels = random_channels(rng, 3, 2, 4)
    x_mat, theta = random_solution(rng, config)
    x_zero = x_mat.copy()
    x_zero[:, 0] = 0
    assert leakage_sinr(0, x_zero, theta, channels, config) == 0.0
    assert leakage_sinr(1, x_mat, np.zeros(4), channels, config) == 0.0


def test_gain_with_only_dynamic_noise(rng):
    config = make_config("active", L=3, K=2, M=2, N=4)
    channels = random_channels(rng, 3, 2, 4)
    gain = beampattern_gain(np.zeros((3, 4)), np.ones(4), channels, config)
    assert gain == pytest.approx(config.sigma2_ris * np.sum(np.abs(channels.g_ris) ** 2), rel=1e-12)
    passive = make_config("passive", L=3, K=2, M=2, N=4)
    assert beampattern_gain(np.zeros((3, 4)), np.ones(4), channels, passive) == 0.0


def test_total_power_terms(rng):
    channels = random_channels(rng, 3, 2, 4)
    x_mat = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    theta = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert total_power(x_mat, np.zeros(4), channels.g_mat, 0.1) == pytest.approx(np.linalg.norm(x_mat) ** 2)
    assert total_power(np.zeros((3, 4)), theta, channels.g_mat, 0.1) == pytest.approx(
        0.1 * np.sum(np.abs(theta) ** 2))
    reflected = np.diag(theta) @ channels.g_mat @ x_mat
    expected = np.linalg.norm(x_mat) ** 2 + np.linalg.norm(reflected) ** 2 + 0.1 * np.linalg.norm(theta) ** 2
    assert total_power(x_mat, theta, channels.g_mat, 0.1) == pytest.approx(expected, rel=1e-12)


def test_common_phase_rotation_invariance_in_passive_mode(rng):
    config = make_config("passive", L=3, K=2, M=2, N=4)
    channels = random_channels(rng, 3, 2, 4)
    channels = ChannelSet(g_mat=channels.g_mat, h_direct=np.zeros((2, 3)), h_ris=channels.h_ris,
                          g_ris=channels.g_ris)
    x_mat, theta = random_solution(rng, config)
    rotated = theta * np.exp(1j * 0.7)
    assert beampattern_gain(x_mat, rotated, channels, config) == pytest.approx(
        beampattern_gain(x_mat, theta, channels, config), rel=1e-9)
    for k in range(config.K):
        assert user_sinr(k, x_mat, rotated, channels, config) == pytest.approx(
            user_sinr(k, x_mat, theta, channels, config), rel=1e-9)


def test_constraint_report_signs(rng):
    config = make_config("active", L=3, K=2, M=2, N=4)
    channels = random_channels(rng, 3, 2, 4)
    report = constraint_report(BeamformingSolution(np.zeros((3, 4), dtype=complex), np.ones(4, dtype=complex)),
                               channels, config)
    assert all(report.constraint_residuals[f"sinr_{k}"] < 0 for k in range(config.K))
    assert report.total_power >= 0 and report.beampattern_gain >= 0

    x_mat, theta = random_solution(rng, config)
    exact = config.replace(p_max=total_power(x_mat, theta, channels.g_mat, config.sigma2_ris))
    report = constraint_report(BeamformingSolution(x_mat, theta), channels, exact)
    assert report.constraint_residuals["power"] == pytest.approx(0.0, abs=1e-12 * exact.p_max)
    assert normalized_worst_residual(report, exact) <= report.constraint_residuals["power"] / exact.p_max + 1e-15
