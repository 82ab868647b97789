"""
测试夹具：小规模场景与独立的暴力计算基准
"""

from typing import Dict, Optional

import numpy as np
import pytest

from models.scene import generate_channels
from models.system import ChannelSet, SystemConfig, default_geometry, system_config_from_dict

SMALL_SYSTEM = {"L": 3, "K": 2, "M": 2, "N": 6, "p_max_dbm": 40.0, "gamma_c_db": 10.0, "gamma_t_db": 0.0}


def make_config(mode: str = "active", **overrides) -> SystemConfig:
    values: Dict = dict(SMALL_SYSTEM)
    values.update(overrides)
    return system_config_from_dict(values, mode)


def make_channels(config: SystemConfig, seed: int = 7, scene: Optional[Dict] = None) -> ChannelSet:
    geometry = default_geometry(config.K, scene)
    return generate_channels(config, geometry, seed=seed)


def random_channels(rng: np.random.Generator, L: int, K: int, N: int, scale: float = 1.0) -> ChannelSet:
    """与场景模型无关的 i.i.d. 复高斯信道"""
    def cn(*shape):
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    return ChannelSet(g_mat=cn(N, L), h_direct=cn(K, L), h_ris=cn(K, N), g_ris=cn(N))


def random_solution(rng: np.random.Generator, config: SystemConfig, amplitude: float = 1.0):
    x_mat = (rng.standard_normal((config.L, config.columns))
             + 1j * rng.standard_normal((config.L, config.columns)))
    theta = amplitude * rng.uniform(0.2, 1.0, config.N) * np.exp(1j * rng.uniform(0, 2 * np.pi, config.N))
    return x_mat, theta


def brute_gain(x_mat: np.ndarray, theta: np.ndarray, channels: ChannelSet, sigma2_ris: float) -> float:
    """用显式 Θ = diag(θ) 与逐列求和计算波束图增益"""
    big_theta = np.diag(theta)
    g_t = channels.g_ris @ big_theta @ channels.g_mat
    total = 0.0
    for j in range(x_mat.shape[1]):
        total += abs(np.dot(g_t, x_mat[:, j])) ** 2
    return total + sigma2_ris * np.linalg.norm(channels.g_ris @ big_theta) ** 2


def brute_user_sinr(k: int, x_mat: np.ndarray, theta: np.ndarray, channels: ChannelSet, config: SystemConfig) -> float:
    big_theta = np.diag(theta)
    h_k = channels.h_direct[k] + channels.h_ris[k] @ big_theta @ channels.g_mat
    powers = [abs(np.dot(h_k, x_mat[:, j])) ** 2 for j in range(x_mat.shape[1])]
    noise = config.sigma2_user[k] + config.sigma2_ris * np.linalg.norm(channels.h_ris[k] @ big_theta) ** 2
    return powers[k] / (noise + sum(powers) - powers[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(params=["passive", "active"])
def mode(request):
    return request.param


@pytest.fixture
def small_config(mode):
    return make_config(mode)


@pytest.fixture
def small_channels(small_config):
    return make_channels(small_config)


@pytest.fixture
def active_config():
    return make_config("active")


@pytest.fixture
def passive_config():
    return make_config("passive")


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    monkeypatch.setenv("RISISAC_WORKERS", "1")
    yield
