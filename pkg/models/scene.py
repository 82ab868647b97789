"""
仿真场景生成：阵列导向矢量、距离路径损耗与莱斯衰落信道
"""

import math
from typing import Dict, Optional

import numpy as np

from models.system import ChannelSet, SceneGeometry, SystemConfig
from utils.constants import DEFAULT_SCENE
from utils.helpers import db2pow

# 链路类别，对应 pathloss_exponents 的键
LINK_CLASSES = ("bs_ris", "bs_user", "ris_user", "ris_target")


def steering_vector(n_elements: int,
                    azimuth_deg: float,
                    elevation_deg: float,
                    spacing_over_wavelength: float = 0.5,
                    n_cols: Optional[int] = None) -> np.ndarray:
    """
    均匀平面阵导向矢量

    阵元按行排列，每行 n_cols 个（默认 ceil(sqrt(n))）；n_cols = n_elements 时退化为线阵。
    水平相位步进 2π·d·sin(az)·cos(el)，垂直相位步进 2π·d·sin(el)。
    """
    if n_elements < 1:
        raise ValueError("n_elements 必须 ≥ 1")
    if n_cols is None:
        n_cols = int(math.ceil(math.sqrt(n_elements)))
    index = np.arange(n_elements)
    col = index % n_cols
    row = index // n_cols
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    phase = 2.0 * np.pi * spacing_over_wavelength * (col * np.sin(az) * np.cos(el) + row * np.sin(el))
    return np.exp(1j * phase)


def _direction_angles(src: np.ndarray, dst: np.ndarray) -> tuple:
    """src 指向 dst 的方位角与俯仰角（度）"""
    delta = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    azimuth = math.degrees(math.atan2(delta[1], delta[0]))
    elevation = math.degrees(math.asin(delta[2] / np.linalg.norm(delta)))
    return azimuth, elevation


def path_loss(distance: float, exponent: float, reference_loss_db: float) -> float:
    """参考距离 1 m 的对数距离路径损耗（线性功率增益）"""
    return db2pow(reference_loss_db) * distance ** (-exponent)


def _rician(rng: np.random.Generator, los: np.ndarray, kappa: float, gain: float) -> np.ndarray:
    """莱斯混合：单位模 LoS 分量与 CN(0,1) 散射分量，条目方差等于 gain"""
    scatter = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2.0)
    if math.isinf(kappa):
        return np.sqrt(gain) * los
    return np.sqrt(gain) * (np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * scatter)


def generate_channels(config: SystemConfig,
                      geometry: SceneGeometry,
                      rician_factor_db: float = DEFAULT_SCENE["rician_factor_db"],
                      pathloss_exponent: Optional[Dict[str, float]] = None,
                      seed: int = 0,
                      reference_loss_db: float = DEFAULT_SCENE["reference_loss_db"],
                      spacing_over_wavelength: float = DEFAULT_SCENE["element_spacing"]) -> ChannelSet:
    """
    生成一次信道实现

    随机数按固定顺序抽取（G, h_D, h_R, g_R），同一种子下只改变目标角度时散射分量不变。

    Args:
        config: 系统配置（使用 L、K、N 与 direct_links）
        geometry: 场景几何，用户数必须等于 K
        rician_factor_db: 莱斯因子（dB），inf 表示纯 LoS
        pathloss_exponent: 各链路类别的路径损耗指数
        seed: 64 位无符号种子

    Returns:
        ChannelSet: 信道集合
    """
    geometry.check_distances()
    if len(geometry.user_positions) != config.K:
        raise ValueError(f"几何中的用户数 {len(geometry.user_positions)} 与 K={config.K} 不一致")

    exponents = dict(DEFAULT_SCENE["pathloss_exponents"])
    exponents.update(pathloss_exponent or {})
    kappa = math.inf if math.isinf(rician_factor_db) else 10.0 ** (rician_factor_db / 10.0)
    if not 0 <= int(seed) < 2 ** 64:
        raise ValueError(f"种子必须是 64 位无符号整数，当前为 {seed}")
    rng = np.random.default_rng(int(seed))

    bs = np.asarray(geometry.bs_position, dtype=float)
    ris = np.asarray(geometry.ris_position, dtype=float)
    L, K, N = config.L, config.K, config.N

    def bs_array(az: float, el: float) -> np.ndarray:
        return steering_vector(L, az, el, spacing_over_wavelength, n_cols=L)

    def ris_array(az: float, el: float) -> np.ndarray:
        return steering_vector(N, az, el, spacing_over_wavelength)

    # BS→RIS
    az_d, el_d = _direction_angles(bs, ris)
    az_a, el_a = _direction_angles(ris, bs)
    los = np.outer(ris_array(az_a, el_a), bs_array(az_d, el_d).conj())
    gain = path_loss(np.linalg.norm(ris - bs), exponents["bs_ris"], reference_loss_db)
    g_mat = _rician(rng, los, kappa, gain)

    h_direct = np.zeros((K, L), dtype=complex)
    h_ris = np.zeros((K, N), dtype=complex)
    for k, user in enumerate(geometry.user_positions):
        user = np.asarray(user, dtype=float)
        # BS→用户 k（关闭直射链路时仍抽取随机数以保持随机流对齐）
        az, el = _direction_angles(bs, user)
        gain = path_loss(np.linalg.norm(user - bs), exponents["bs_user"], reference_loss_db)
        direct = _rician(rng, bs_array(az, el).conj(), kappa, gain)
        h_direct[k] = direct if config.direct_links else 0.0
        # RIS→用户 k
        az, el = _direction_angles(ris, user)
        gain = path_loss(np.linalg.norm(user - ris), exponents["ris_user"], reference_loss_db)
        h_ris[k] = _rician(rng, ris_array(az, el).conj(), kappa, gain)

    # RIS→目标，LoS 方向由目标角度决定
    gain = path_loss(geometry.target_distance, exponents["ris_target"], reference_loss_db)
    los = ris_array(geometry.target_azimuth_deg, geometry.target_elevation_deg).conj()
    g_ris = _rician(rng, los, kappa, gain)

    channels = ChannelSet(
        g_mat=g_mat,
        h_direct=h_direct,
        h_ris=h_ris,
        g_ris=g_ris,
        target_azimuth_deg=geometry.target_azimuth_deg,
        target_elevation_deg=geometry.target_elevation_deg,
    )
    channels.validate(config)
    return channels


def perturb_target_angles(geometry: SceneGeometry, delta_az_deg: float, delta_el_deg: float) -> SceneGeometry:
    """返回目标角度平移后的几何副本"""
    return geometry.model_copy(update={
        "target_azimuth_deg": geometry.target_azimuth_deg + delta_az_deg,
        "target_elevation_deg": geometry.target_elevation_deg + delta_el_deg,
    })


def experiment_seed(base_seed: int, index: int) -> int:
    """实验序号到种子的映射：base_seed + index，对 2^64 取模"""
    return (int(base_seed) + int(index)) % (2 ** 64)
