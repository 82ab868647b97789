"""
领域数据类型：系统配置、场景几何、信道集合、波束成形解与指标报告
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    model_validator,
)

from utils.constants import DEFAULT_SCENE, DEFAULT_SYSTEM
from utils.errors import DimensionError, GeometryError
from utils.helpers import db2pow, dbm2watt

Vector3 = Tuple[float, float, float]


class RisMode(str, Enum):
    PASSIVE = "passive"
    ACTIVE = "active"


class SystemConfig(BaseModel):
    """
    场景标量（全部为线性单位）

    每用户量（gamma_c、gamma_t、sigma2_user）可以传入标量，会自动广播到 K 个用户。
    """
    model_config = ConfigDict(frozen=True)

    L: PositiveInt
    K: PositiveInt
    M: NonNegativeInt
    N: PositiveInt
    p_max: PositiveFloat
    gamma_c: Tuple[PositiveFloat, ...]
    gamma_t: Tuple[PositiveFloat, ...]
    sigma2_user: Tuple[PositiveFloat, ...]
    sigma2_target: PositiveFloat
    sigma2_ris: NonNegativeFloat = 0.0
    beta_max: float = Field(default=1.0, ge=1.0)
    ris_mode: RisMode = RisMode.PASSIVE
    zeta: PositiveFloat = 1e-3
    direct_links: bool = True

    @model_validator(mode="before")
    @classmethod
    def _broadcast_per_user(cls, data: Any) -> Any:
        if isinstance(data, dict) and "K" in data:
            data = dict(data)
            for key in ("gamma_c", "gamma_t", "sigma2_user"):
                value = data.get(key)
                if value is not None and np.isscalar(value):
                    data[key] = (float(value),) * int(data["K"])
        return data

    @model_validator(mode="after")
    def _check_mode(self) -> "SystemConfig":
        for key in ("gamma_c", "gamma_t", "sigma2_user"):
            if len(getattr(self, key)) != self.K:
                raise ValueError(f"{key} 长度必须等于 K={self.K}")
        if self.ris_mode == RisMode.PASSIVE:
            if self.sigma2_ris != 0.0 or self.beta_max != 1.0:
                raise ValueError("无源 RIS 要求 sigma2_ris = 0 且 beta_max = 1")
        elif self.sigma2_ris <= 0.0:
            raise ValueError("有源 RIS 要求 sigma2_ris > 0")
        return self

    @property
    def columns(self) -> int:
        """X 的列数 K + M"""
        return self.K + self.M

    @property
    def amplitude_bound(self) -> float:
        return self.beta_max if self.ris_mode == RisMode.ACTIVE else 1.0

    def replace(self, **updates: Any) -> "SystemConfig":
        """返回更新后的新配置（重新验证）"""
        data = self.model_dump()
        data.update(updates)
        if "K" in updates:
            # 用户数变化时按第一个用户的阈值重新广播
            for key in ("gamma_c", "gamma_t", "sigma2_user"):
                if key not in updates:
                    data[key] = data[key][0]
        return SystemConfig.model_validate(data)


def system_config_from_dict(values: Optional[Dict[str, Any]] = None,
                            mode: Optional[Union[str, RisMode]] = None) -> SystemConfig:
    """
    从 dB 级配置字典构造 SystemConfig（唯一的 dB→线性换算点）

    Args:
        values: 与 DEFAULT_SYSTEM 同结构的字典，缺失项使用默认值
        mode: 覆盖字典中的 ris_mode

    Returns:
        SystemConfig: 线性单位配置
    """
    merged = dict(DEFAULT_SYSTEM)
    merged.update(values or {})
    ris_mode = RisMode(mode if mode is not None else merged["ris_mode"])
    active = ris_mode == RisMode.ACTIVE
    return SystemConfig(
        L=int(merged["L"]),
        K=int(merged["K"]),
        M=int(merged["M"]),
        N=int(merged["N"]),
        p_max=dbm2watt(merged["p_max_dbm"]),
        gamma_c=db2pow(merged["gamma_c_db"]),
        gamma_t=db2pow(merged["gamma_t_db"]),
        sigma2_user=dbm2watt(merged["noise_dbm"]),
        sigma2_target=dbm2watt(merged["target_noise_dbm"]),
        sigma2_ris=dbm2watt(merged["ris_noise_dbm"]) if active else 0.0,
        beta_max=float(merged["beta_max"]) if active else 1.0,
        ris_mode=ris_mode,
        zeta=float(merged["zeta"]),
        direct_links=bool(merged["direct_links"]),
    )


class SceneGeometry(BaseModel):
    """节点坐标（米）与目标相对 RIS 的方位角/俯仰角（度）"""
    model_config = ConfigDict(frozen=True)

    bs_position: Vector3
    ris_position: Vector3
    user_positions: Tuple[Vector3, ...]
    target_azimuth_deg: float
    target_elevation_deg: float
    target_distance: PositiveFloat = 20.0

    @property
    def target_position(self) -> np.ndarray:
        az = np.deg2rad(self.target_azimuth_deg)
        el = np.deg2rad(self.target_elevation_deg)
        direction = np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
        return np.asarray(self.ris_position) + self.target_distance * direction

    def check_distances(self) -> None:
        """所有节点两两距离必须为正"""
        nodes = {"bs": self.bs_position, "ris": self.ris_position, "target": tuple(self.target_position)}
        for k, position in enumerate(self.user_positions):
            nodes[f"user{k}"] = position
        for (name_a, a), (name_b, b) in combinations(nodes.items(), 2):
            if np.linalg.norm(np.subtract(a, b)) <= 0.0:
                raise GeometryError(f"节点 {name_a} 与 {name_b} 重合")


def default_geometry(num_users: int, scene: Optional[Dict[str, Any]] = None) -> SceneGeometry:
    """按默认布局生成几何：用户等间隔分布在 user_center 周围的圆上"""
    params = dict(DEFAULT_SCENE)
    params.update(scene or {})
    center = np.asarray(params["user_center"], dtype=float)
    radius = float(params["user_radius"])
    angles = 2.0 * np.pi * np.arange(num_users) / num_users
    users = tuple(
        (float(center[0] + radius * np.cos(a)), float(center[1] + radius * np.sin(a)), float(center[2]))
        for a in angles
    )
    return SceneGeometry(
        bs_position=tuple(params["bs_position"]),
        ris_position=tuple(params["ris_position"]),
        user_positions=users,
        target_azimuth_deg=float(params["target_azimuth_deg"]),
        target_elevation_deg=float(params["target_elevation_deg"]),
        target_distance=float(params["target_distance"]),
    )


def _complex_to_json(array: np.ndarray) -> Dict[str, Any]:
    array = np.asarray(array)
    return {"shape": list(array.shape), "real": array.real.ravel().tolist(), "imag": array.imag.ravel().tolist()}


def _complex_from_json(data: Dict[str, Any]) -> np.ndarray:
    real = np.asarray(data["real"], dtype=float)
    imag = np.asarray(data["imag"], dtype=float)
    return (real + 1j * imag).reshape(data["shape"])


@dataclass(frozen=True)
class ChannelSet:
    """
    四组信道：G (N×L)、h_D (K×L，每行一个用户)、h_R (K×N)、g_R (N,)
    """
    g_mat: np.ndarray
    h_direct: np.ndarray
    h_ris: np.ndarray
    g_ris: np.ndarray
    target_azimuth_deg: float = float("nan")
    target_elevation_deg: float = float("nan")

    @property
    def shape(self) -> Tuple[int, int, int]:
        """(L, K, N)"""
        return self.g_mat.shape[1], self.h_direct.shape[0], self.g_mat.shape[0]

    def validate(self, config: SystemConfig) -> None:
        expected = {
            "g_mat": (config.N, config.L),
            "h_direct": (config.K, config.L),
            "h_ris": (config.K, config.N),
            "g_ris": (config.N,),
        }
        for name, shape in expected.items():
            array = getattr(self, name)
            if array.shape != shape:
                raise DimensionError(f"{name} 形状为 {array.shape}，期望 {shape}")
            if not np.all(np.isfinite(array)):
                raise DimensionError(f"{name} 含有非有限值")

    def max_entry(self) -> float:
        return float(max(np.max(np.abs(a), initial=0.0)
                         for a in (self.g_mat, self.h_direct, self.h_ris, self.g_ris)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "g_mat": _complex_to_json(self.g_mat),
            "h_direct": _complex_to_json(self.h_direct),
            "h_ris": _complex_to_json(self.h_ris),
            "g_ris": _complex_to_json(self.g_ris),
            "target_azimuth_deg": self.target_azimuth_deg,
            "target_elevation_deg": self.target_elevation_deg,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChannelSet":
        return cls(
            g_mat=_complex_from_json(data["g_mat"]),
            h_direct=_complex_from_json(data["h_direct"]),
            h_ris=_complex_from_json(data["h_ris"]),
            g_ris=_complex_from_json(data["g_ris"]),
            target_azimuth_deg=float(data.get("target_azimuth_deg", float("nan"))),
            target_elevation_deg=float(data.get("target_elevation_deg", float("nan"))),
        )

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ChannelSet":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class BeamformingSolution:
    """BS 波束成形矩阵 X = [x_c1..x_cK, x_t1..x_tM] 与 RIS 系数向量 θ"""
    x_mat: np.ndarray
    theta: np.ndarray

    def validate(self, config: SystemConfig) -> None:
        if self.x_mat.shape != (config.L, config.columns):
            raise DimensionError(f"x_mat 形状为 {self.x_mat.shape}，期望 {(config.L, config.columns)}")
        if self.theta.shape != (config.N,):
            raise DimensionError(f"theta 形状为 {self.theta.shape}，期望 {(config.N,)}")
        if not (np.all(np.isfinite(self.x_mat)) and np.all(np.isfinite(self.theta))):
            raise DimensionError("解中含有非有限值")

    def to_dict(self) -> Dict[str, Any]:
        return {"x_mat": _complex_to_json(self.x_mat), "theta": _complex_to_json(self.theta)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BeamformingSolution":
        return cls(x_mat=_complex_from_json(data["x_mat"]), theta=_complex_from_json(data["theta"]))


@dataclass
class MetricReport:
    """
    精确指标与带符号残差（残差 ≥ 0 表示满足约束）

    total_power 是计入预算的功率：有源模式为 BS 与 aRIS 的总功耗，无源模式为 ‖X‖²。
    """
    user_sinr: np.ndarray
    leakage_sinr: np.ndarray
    beampattern_gain: float
    total_power: float
    constraint_residuals: Dict[str, float] = field(default_factory=dict)
    unit_modulus_gap: float = 0.0

    @property
    def worst_residual(self) -> float:
        if not self.constraint_residuals:
            return 0.0
        return float(min(self.constraint_residuals.values()))

    def is_feasible(self, tol: float = 1e-6) -> bool:
        return self.worst_residual >= -tol

    def to_row(self) -> Dict[str, float]:
        """按固定列顺序展开为一行"""
        row: Dict[str, float] = {
            "beampattern_gain": self.beampattern_gain,
            "total_power": self.total_power,
        }
        for k, value in enumerate(self.user_sinr):
            row[f"user_sinr_{k}"] = float(value)
        for k, value in enumerate(self.leakage_sinr):
            row[f"leakage_sinr_{k}"] = float(value)
        row["worst_residual"] = self.worst_residual
        row["unit_modulus_gap"] = self.unit_modulus_gap
        return row
