"""
模型量的精确计算：等效信道、SINR、信息泄露、波束图增益与功耗

这些函数同时是优化器的报告工具和测试中的真值基准。
"""

from typing import Dict

import numpy as np

from models.system import BeamformingSolution, ChannelSet, MetricReport, RisMode, SystemConfig
from utils.errors import DimensionError


def _check_theta(channels: ChannelSet, theta: np.ndarray) -> None:
    if theta.shape != (channels.g_mat.shape[0],):
        raise DimensionError(f"theta 长度 {theta.shape} 与 RIS 单元数 {channels.g_mat.shape[0]} 不一致")


def effective_user_channel(k: int, channels: ChannelSet, theta: np.ndarray) -> np.ndarray:
    """h_k = h_D,k + h_R,k·diag(θ)·G"""
    theta = np.asarray(theta)
    _check_theta(channels, theta)
    return channels.h_direct[k] + (channels.h_ris[k] * theta) @ channels.g_mat


def effective_target_channel(channels: ChannelSet, theta: np.ndarray) -> np.ndarray:
    """g_t = g_R·diag(θ)·G（BS 与目标之间没有直射链路）"""
    theta = np.asarray(theta)
    _check_theta(channels, theta)
    return (channels.g_ris * theta) @ channels.g_mat


def _sinr(channel: np.ndarray, k: int, x_mat: np.ndarray, noise: float) -> float:
    received = np.abs(channel @ x_mat) ** 2
    interference = np.sum(np.delete(received, k))
    return float(received[k] / (noise + interference))


def user_sinr(k: int, x_mat: np.ndarray, theta: np.ndarray, channels: ChannelSet, config: SystemConfig) -> float:
    """用户 k 解码 w_c,k 的 SINR（线性）"""
    h_k = effective_user_channel(k, channels, theta)
    ris_noise = config.sigma2_ris * float(np.sum(np.abs(channels.h_ris[k] * theta) ** 2))
    return _sinr(h_k, k, x_mat, config.sigma2_user[k] + ris_noise)


def leakage_sinr(k: int, x_mat: np.ndarray, theta: np.ndarray, channels: ChannelSet, config: SystemConfig) -> float:
    """目标处解码 w_c,k 的 SINR（线性），即信息泄露量"""
    g_t = effective_target_channel(channels, theta)
    ris_noise = config.sigma2_ris * float(np.sum(np.abs(channels.g_ris * theta) ** 2))
    return _sinr(g_t, k, x_mat, config.sigma2_target + ris_noise)


def beampattern_gain(x_mat: np.ndarray, theta: np.ndarray, channels: ChannelSet, config: SystemConfig) -> float:
    """目标方向的波束图增益：Σ|g_t x_j|² + σ_I²‖g_R Θ‖²"""
    g_t = effective_target_channel(channels, theta)
    signal = float(np.sum(np.abs(g_t @ x_mat) ** 2))
    return signal + config.sigma2_ris * float(np.sum(np.abs(channels.g_ris * theta) ** 2))


def total_power(x_mat: np.ndarray, theta: np.ndarray, g_mat: np.ndarray, sigma2_ris: float) -> float:
    """BS 与有源 RIS 的总功耗 ‖X‖² + ‖ΘGX‖² + σ_I²‖Θ‖²"""
    theta = np.asarray(theta)
    reflected = (theta[:, None] * g_mat) @ x_mat
    return (float(np.sum(np.abs(x_mat) ** 2))
            + float(np.sum(np.abs(reflected) ** 2))
            + sigma2_ris * float(np.sum(np.abs(theta) ** 2)))


def budget_power(x_mat: np.ndarray, theta: np.ndarray, channels: ChannelSet, config: SystemConfig) -> float:
    """计入 P_max 预算的功率：有源模式为总功耗，无源模式只计 BS 发射功率"""
    if config.ris_mode == RisMode.ACTIVE:
        return total_power(x_mat, theta, channels.g_mat, config.sigma2_ris)
    return float(np.sum(np.abs(x_mat) ** 2))


def constraint_report(solution: BeamformingSolution, channels: ChannelSet, config: SystemConfig) -> MetricReport:
    """
    计算全部指标和带符号残差

    残差约定为 “≥ 0 表示满足”：
        sinr_k      γ_c,k − Γ_c,k
        leakage_k   Γ_t,k − γ_t,k
        power       P_max − P
        amplitude_n β_max − |θ_n|（无源模式为 1 − |θ_n|）
    """
    solution.validate(config)
    channels.validate(config)
    x_mat, theta = solution.x_mat, solution.theta

    sinr = np.array([user_sinr(k, x_mat, theta, channels, config) for k in range(config.K)])
    leakage = np.array([leakage_sinr(k, x_mat, theta, channels, config) for k in range(config.K)])
    power = budget_power(x_mat, theta, channels, config)

    residuals: Dict[str, float] = {}
    for k in range(config.K):
        residuals[f"sinr_{k}"] = float(sinr[k] - config.gamma_c[k])
    for k in range(config.K):
        residuals[f"leakage_{k}"] = float(config.gamma_t[k] - leakage[k])
    residuals["power"] = float(config.p_max - power)
    magnitude = np.abs(theta)
    for n in range(config.N):
        residuals[f"amplitude_{n}"] = float(config.amplitude_bound - magnitude[n])

    return MetricReport(
        user_sinr=sinr,
        leakage_sinr=leakage,
        beampattern_gain=beampattern_gain(x_mat, theta, channels, config),
        total_power=power,
        constraint_residuals=residuals,
        unit_modulus_gap=float(np.max(np.abs(1.0 - magnitude), initial=0.0)),
    )


def normalized_worst_residual(report: MetricReport, config: SystemConfig) -> float:
    """功率残差按 P_max 归一化后的最差残差，供迭代接受判据使用"""
    worst = float("inf")
    for name, value in report.constraint_residuals.items():
        if name == "power":
            value = value / config.p_max
        worst = min(worst, value)
    return worst
