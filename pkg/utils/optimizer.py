"""
SCA 驱动：有源 RIS（aRIS）与无源 RIS（pRIS）的波束成形优化

流程：信道缩放 → 可行性恢复求初始点 → 逐次求解凸子问题直至收敛 → 反缩放增益。
每个被接受的迭代点都在原问题约束内（残差 ≥ −acceptance_tol），真实目标不下降。
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

from models.system import BeamformingSolution, ChannelSet, RisMode, SystemConfig
from utils.conic_solver import ConicSettings, SolveResult, SolveStatus, solve
from utils.constants import DEFAULT_SOLVER_SETTINGS
from utils.errors import InitializationError, ScalingError
from utils.metrics import (
    budget_power,
    constraint_report,
    effective_target_channel,
    effective_user_channel,
    normalized_worst_residual,
)
from utils.sca import ExpansionPoint, Subproblem, assemble_subproblem

logger = logging.getLogger(__name__)


class SolverSettings(BaseModel):
    """SCA 外层迭代设置"""
    model_config = ConfigDict(frozen=True)

    sca_tolerance: PositiveFloat = DEFAULT_SOLVER_SETTINGS["sca_tolerance"]
    max_sca_iters: PositiveInt = DEFAULT_SOLVER_SETTINGS["max_sca_iters"]
    zeta: Optional[PositiveFloat] = DEFAULT_SOLVER_SETTINGS["zeta"]
    zeta_growth: float = Field(default=DEFAULT_SOLVER_SETTINGS["zeta_growth"], gt=1.0)
    max_zeta_escalations: int = Field(default=DEFAULT_SOLVER_SETTINGS["max_zeta_escalations"], ge=0)
    unit_modulus_tol: PositiveFloat = DEFAULT_SOLVER_SETTINGS["unit_modulus_tol"]
    scale_epsilon: PositiveFloat = DEFAULT_SOLVER_SETTINGS["scale_epsilon"]
    use_scaling: bool = DEFAULT_SOLVER_SETTINGS["use_scaling"]
    feasibility_threshold: PositiveFloat = DEFAULT_SOLVER_SETTINGS["feasibility_threshold"]
    constraint_margin: float = Field(default=DEFAULT_SOLVER_SETTINGS["constraint_margin"], ge=0.0, lt=1e-2)
    acceptance_tol: PositiveFloat = DEFAULT_SOLVER_SETTINGS["acceptance_tol"]
    monotone_tol: PositiveFloat = DEFAULT_SOLVER_SETTINGS["monotone_tol"]
    conic: ConicSettings = Field(default_factory=ConicSettings)


@dataclass
class IterationRecord:
    iteration: int
    objective: float  # 收敛判据跟踪的目标：aRIS 为真实增益，pRIS 为增益 + ζ‖θ‖²
    surrogate: float
    gain: float
    zeta: float
    worst_residual: float
    unit_modulus_gap: float
    solve_time: float
    subproblem_iterations: int
    status: str


@dataclass
class IterationTrace:
    """逐次迭代记录；第 0 条为初始点"""
    records: List[IterationRecord] = field(default_factory=list)
    segment_start: int = 0

    def add(self, record: IterationRecord) -> None:
        self.records.append(record)

    def start_segment(self) -> None:
        """ζ 变化后开始新的收敛段，段首为当前最后一条记录"""
        self.segment_start = max(len(self.records) - 1, 0)

    def current_segment(self) -> List[IterationRecord]:
        return self.records[self.segment_start:]

    @property
    def gains(self) -> np.ndarray:
        return np.array([record.gain for record in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([record.objective for record in self.records])

    @property
    def total_solve_time(self) -> float:
        return float(sum(record.solve_time for record in self.records))

    @property
    def total_subproblem_iterations(self) -> int:
        return int(sum(record.subproblem_iterations for record in self.records))

    def is_monotone(self, tol: float = 1e-8) -> bool:
        """每个 ζ 恒定段内跟踪目标不下降（相对容差）"""
        for start, stop in self._segments():
            values = [record.objective for record in self.records[start:stop]]
            for previous, current in zip(values, values[1:]):
                if current < previous - tol * max(abs(previous), 1e-300):
                    return False
        return True

    def _segments(self) -> List[Tuple[int, int]]:
        """ζ 相同的连续记录区间"""
        bounds, start = [], 0
        for index in range(1, len(self.records)):
            if self.records[index].zeta != self.records[index - 1].zeta:
                bounds.append((start, index))
                start = index
        bounds.append((start, len(self.records)))
        return bounds

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.records])

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps([asdict(r) for r in self.records], ensure_ascii=False, indent=2),
                            encoding="utf-8")
        else:
            self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class ScaleState:
    """缩放因子 ς 以及缩放后的信道与配置"""
    varsigma: float
    mode: RisMode
    channels: ChannelSet
    config: SystemConfig

    @property
    def factors(self) -> Dict[str, float]:
        return _scale_factors(self.varsigma, self.mode)


def _scale_factors(varsigma: float, mode: RisMode) -> Dict[str, float]:
    """
    各量的乘子。无源模式：{√ςG, ςh_D, √ςh_R, √ςg_R, ς²σ²}。
    有源模式下 G 与 σ_I² 保持不变、其余信道乘 ς，使功耗模型精确不变。
    """
    root = float(np.sqrt(varsigma))
    if mode == RisMode.ACTIVE:
        return {"g_mat": 1.0, "h_direct": varsigma, "h_ris": varsigma, "g_ris": varsigma,
                "sigma2_user": varsigma ** 2, "sigma2_target": varsigma ** 2, "sigma2_ris": 1.0}
    return {"g_mat": root, "h_direct": varsigma, "h_ris": root, "g_ris": root,
            "sigma2_user": varsigma ** 2, "sigma2_target": varsigma ** 2, "sigma2_ris": varsigma ** 2}


def _apply_factors(channels: ChannelSet, config: SystemConfig, factors: Dict[str, float],
                   inverse: bool = False) -> Tuple[ChannelSet, SystemConfig]:
    power = -1.0 if inverse else 1.0
    scaled_channels = ChannelSet(
        g_mat=channels.g_mat * factors["g_mat"] ** power,
        h_direct=channels.h_direct * factors["h_direct"] ** power,
        h_ris=channels.h_ris * factors["h_ris"] ** power,
        g_ris=channels.g_ris * factors["g_ris"] ** power,
        target_azimuth_deg=channels.target_azimuth_deg,
        target_elevation_deg=channels.target_elevation_deg,
    )
    scaled_config = config.replace(
        sigma2_user=tuple(s * factors["sigma2_user"] ** power for s in config.sigma2_user),
        sigma2_target=config.sigma2_target * factors["sigma2_target"] ** power,
        sigma2_ris=config.sigma2_ris * factors["sigma2_ris"] ** power,
    )
    return scaled_channels, scaled_config


def scale_problem(channels: ChannelSet, config: SystemConfig, scale_epsilon: float = 10.0) -> ScaleState:
    """
    ς = ε / max|信道元素|，返回缩放后的信道与噪声功率

    (X, θ) 在缩放前后不变，SINR 与泄露量不变，波束图增益乘以 ς²。
    """
    max_entry = channels.max_entry()
    if not np.isfinite(max_entry) or max_entry <= 0.0:
        raise ScalingError("信道全为零，无法缩放")
    varsigma = float(scale_epsilon) / max_entry
    scaled_channels, scaled_config = _apply_factors(channels, config, _scale_factors(varsigma, config.ris_mode))
    logger.debug(f"[缩放] ς = {varsigma:.6e}（max|h| = {max_entry:.3e}, ε = {scale_epsilon}）")
    return ScaleState(varsigma=varsigma, mode=config.ris_mode, channels=scaled_channels, config=scaled_config)


def identity_scale(channels: ChannelSet, config: SystemConfig) -> ScaleState:
    return ScaleState(varsigma=1.0, mode=config.ris_mode, channels=channels, config=config)


def descale_channels(state: ScaleState) -> Tuple[ChannelSet, SystemConfig]:
    """scale_problem 的逆变换"""
    return _apply_factors(state.channels, state.config, state.factors, inverse=True)


def descale_gain(gain_scaled: float, state: ScaleState) -> float:
    return float(gain_scaled) / state.varsigma ** 2


def converged(trace: IterationTrace, settings: SolverSettings) -> bool:
    """当前 ζ 段内相对目标变化 ≤ sca_tolerance，或迭代次数达到 max_sca_iters"""
    records = trace.current_segment()
    if not records:
        raise ValueError("迭代记录为空")
    if len(records) - 1 >= settings.max_sca_iters:
        return True
    if len(records) < 2:
        return False
    previous, current = records[-2].objective, records[-1].objective
    if previous == current:
        return True
    change = abs(current - previous) / max(abs(previous), np.finfo(float).tiny)
    return change <= settings.sca_tolerance


def complexity_estimate(config: SystemConfig) -> Dict[str, float]:
    """
    aRIS 子问题的规模与每次迭代复杂度估计

    N_var、N_cons、N_size 按解析计数给出，复杂度为 (N_cons+1)^0.5·N_var·(N_var² + N_cons + N_size)。
    """
    K, L, M, N = config.K, config.L, config.M, config.N
    n_var = 2 * (K ** 2 + K * (L + M + N) + L * M + N) + 1
    n_cons = 4 * K ** 2 + 2 * K * (1 + 2 * M + 2 * N) + 4 * M * N + N + 2
    block = (2 * L + 1) ** 2
    n_size = ((L * (K + M) + 1) ** 2
              + K * (2 * (K + M - 1) + N + L + 1) ** 2
              + 4 * K * (K - 1) * block
              + 4 * K * M * block
              + K * (3 + L) ** 2
              + 4 * K * block
              + (2 * L * (K + M) + 2 * N * (K + M) + 2 * N) ** 2
              + 4 * K * N * block
              + 4 * M * N * block
              + 4 * N)
    per_iteration = (n_cons + 1) ** 0.5 * n_var * (n_var ** 2 + n_cons + n_size)
    return {"N_var": n_var, "N_cons": n_cons, "N_size": n_size, "per_iteration": float(per_iteration)}


def default_start(channels: ChannelSet, config: SystemConfig) -> BeamformingSolution:
    """
    可行性循环的默认起点

    θ 相位为 0，幅度 1（无源）或 β_max/2（有源）；通信列为指向各用户等效信道的最大比传输方向，
    感知列指向目标等效信道；整体功率归一化到 P_max/2。
    """
    amplitude = config.beta_max / 2.0 if config.ris_mode == RisMode.ACTIVE else 1.0
    theta = np.full(config.N, amplitude, dtype=complex)

    def direction(channel: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(channel)
        if norm <= 0.0:
            unit = np.zeros(config.L, dtype=complex)
            unit[0] = 1.0
            return unit
        return np.conj(channel) / norm

    columns = [direction(effective_user_channel(k, channels, theta)) for k in range(config.K)]
    target_direction = direction(effective_target_channel(channels, theta))
    columns += [target_direction] * config.M
    x_mat = np.column_stack(columns)

    budget = config.p_max / 2.0
    if config.ris_mode == RisMode.ACTIVE:
        noise = config.sigma2_ris * float(np.sum(np.abs(theta) ** 2))
        if noise >= budget / 2.0:
            theta = theta * np.sqrt(budget / 2.0 / noise)
            noise = budget / 2.0
        signal = budget_power(x_mat, theta, channels, config) - noise
        x_mat = x_mat * np.sqrt((budget - noise) / signal)
    else:
        x_mat = x_mat * np.sqrt(budget / float(np.sum(np.abs(x_mat) ** 2)))
    return BeamformingSolution(x_mat=x_mat, theta=theta)


@dataclass
class InitializationResult:
    """Feasible 时 solution 为可行初始点；Infeasible 时只给出松弛和"""
    status: str
    sum_delta: float
    solution: Optional[BeamformingSolution] = None
    iterations: int = 0
    solve_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == "Feasible"


@dataclass
class OptimizationResult:
    solution: BeamformingSolution
    trace: IterationTrace
    gain: float
    worst_residual: float
    unit_modulus_gap: float
    degraded: bool
    status: str
    zeta: Optional[float] = None
    escalations: int = 0
    logs: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return sum(1 for record in self.trace.records if record.status not in ("start", "zeta_escalation"))


class SCAOptimizer:
    """单个信道实现上的 SCA 优化器"""

    def __init__(self,
                 channels: ChannelSet,
                 config: SystemConfig,
                 settings: Optional[SolverSettings] = None):
        channels.validate(config)
        self.channels = channels
        self.config = config
        self.settings = settings or SolverSettings()
        self.mode = config.ris_mode
        self.kind = "aris" if self.mode == RisMode.ACTIVE else "pris"
        self.scale = self._make_scale(self.settings.scale_epsilon)
        self.iterations_history: List[Dict[str, Any]] = []
        self.logs: List[Dict[str, Any]] = []
        self._log("INFO", f"模式 {self.mode.value}, L={config.L}, K={config.K}, M={config.M}, N={config.N}, "
                          f"ς={self.scale.varsigma:.3e}")

    def _log(self, level: str, message: str) -> None:
        self.logs.append({"time": time.time(), "level": level, "message": message})
        logger.log(logging.getLevelName(level), f"[SCA-{'aRIS' if self.kind == 'aris' else 'pRIS'}] {message}")

    def get_latest_logs(self) -> List[Dict[str, Any]]:
        logs = self.logs.copy()
        self.logs = []
        return logs

    def _make_scale(self, epsilon: float) -> ScaleState:
        if not self.settings.use_scaling:
            return identity_scale(self.channels, self.config)
        return scale_problem(self.channels, self.config, epsilon)

    def _tightened(self, config: SystemConfig) -> SystemConfig:
        margin = self.settings.constraint_margin
        return config.replace(
            gamma_c=tuple(g * (1.0 + margin) for g in config.gamma_c),
            gamma_t=tuple(g * (1.0 - margin) for g in config.gamma_t),
            p_max=config.p_max * (1.0 - margin),
        )

    def build_subproblem(self,
                         kind: str,
                         solution: BeamformingSolution,
                         zeta_true: Optional[float] = None,
                         scale: Optional[ScaleState] = None) -> Subproblem:
        """在缩放域中以 solution 为展开点组装子问题（X 与 θ 在缩放前后不变）"""
        scale = scale or self.scale
        expansion = ExpansionPoint.build(solution.x_mat, solution.theta, scale.channels)
        zeta = None if zeta_true is None else zeta_true * scale.varsigma ** 2
        return assemble_subproblem(kind, expansion, scale.channels, self._tightened(scale.config), zeta)

    def initial_zeta(self, solution: BeamformingSolution) -> float:
        """pRIS 在 solution 处使用的初始罚项系数（未缩放单位）"""
        report = constraint_report(solution, self.channels, self.config)
        return self._initial_zeta(report.beampattern_gain)

    def _solve_subproblem(self,
                          kind: str,
                          solution: BeamformingSolution,
                          zeta_true: Optional[float] = None) -> Tuple[SolveResult, Subproblem, ScaleState]:
        """组装并求解一次子问题；NumericalLimit 时以 ε×0.1 重新缩放后重试一次"""
        scale = self.scale
        for attempt in range(2):
            subproblem = self.build_subproblem(kind, solution, zeta_true, scale)
            result = solve(subproblem.program, self.settings.conic)
            if result.status != SolveStatus.NUMERICAL_LIMIT or attempt == 1 or not self.settings.use_scaling:
                return result, subproblem, scale
            self._log("WARNING", f"子问题数值受限（pres={result.primal_residual:.2e}, "
                                 f"dres={result.dual_residual:.2e}），以 ε×0.1 重新缩放后重试")
            scale = self._make_scale(self.settings.scale_epsilon * 0.1)
        return result, subproblem, scale

    def initialize(self, start: Optional[BeamformingSolution] = None) -> InitializationResult:
        """
        可行性恢复：在 Σ(δ_c + δ_t) 上运行 SCA，Σδ ≤ feasibility_threshold 时返回可行初始点

        Args:
            start: 起点，缺省使用 default_start

        Returns:
            InitializationResult
        """
        settings = self.settings
        current = start or default_start(self.channels, self.config)
        current.validate(self.config)
        previous_delta = np.inf
        total_time = 0.0
        sum_delta = np.inf
        for iteration in range(1, settings.max_sca_iters + 1):
            result, subproblem, scale = self._solve_subproblem("feasibility", current)
            total_time += result.wall_time
            if result.status != SolveStatus.OPTIMAL:
                # 重试后仍未求解成功：视为无改进步，停止并按当前点判定
                self._log("WARNING", f"[初始化] 第 {iteration} 次可行性子问题返回 {result.status.value}"
                                     f"（pres={result.primal_residual:.2e}, gap={result.gap:.2e}），停止迭代")
                candidates = [current]
                if result.status == SolveStatus.NUMERICAL_LIMIT:
                    candidates.insert(0, subproblem.solution(result.x, self.config))
                for candidate in candidates:
                    report = constraint_report(candidate, self.channels, self.config)
                    if normalized_worst_residual(report, self.config) >= -settings.acceptance_tol:
                        self._log("INFO", "[初始化] 停止时的点满足原约束，判定可行")
                        return InitializationResult("Feasible", 0.0, candidate, iteration, total_time)
                break
            current = subproblem.solution(result.x, self.config)
            sum_delta = max(0.0, -result.objective)
            self._log("DEBUG", f"[初始化] 第 {iteration} 次迭代 Σδ = {sum_delta:.3e}")
            if sum_delta <= settings.feasibility_threshold:
                report = constraint_report(current, self.channels, self.config)
                worst = normalized_worst_residual(report, self.config)
                if worst >= -settings.acceptance_tol:
                    self._log("INFO", f"[初始化] 找到可行初始点（{iteration} 次迭代，最差残差 {worst:.2e}）")
                    return InitializationResult("Feasible", sum_delta, current, iteration, total_time)
                self._log("WARNING", f"[初始化] Σδ 已为零但原约束残差为 {worst:.2e}，继续迭代")
            elif np.isfinite(previous_delta):
                change = abs(previous_delta - sum_delta) / max(previous_delta, np.finfo(float).tiny)
                if change <= settings.sca_tolerance:
                    break
            previous_delta = sum_delta
        self._log("INFO", f"[初始化] 判定不可行，Σδ = {sum_delta:.3e}")
        return InitializationResult("Infeasible", float(sum_delta), None, iteration, total_time)

    def _merit(self, gain: float, theta: np.ndarray, zeta_true: Optional[float]) -> float:
        if zeta_true is None:
            return gain
        return gain + zeta_true * float(np.sum(np.abs(theta) ** 2))

    def _initial_zeta(self, gain0: float) -> float:
        """缩放域中 ζ0 = settings.zeta 或 max(config.zeta, 10·G0/N)，返回未缩放单位的值"""
        scaled_gain = gain0 * self.scale.varsigma ** 2
        if self.settings.zeta is not None:
            zeta_scaled = self.settings.zeta
        else:
            zeta_scaled = max(self.config.zeta, 10.0 * scaled_gain / self.config.N)
        return zeta_scaled / self.scale.varsigma ** 2

    def optimize(self, x0: np.ndarray, theta0: np.ndarray) -> OptimizationResult:
        """
        从可行初始点运行 SCA 主循环

        Args:
            x0: 初始波束成形矩阵 L×(K+M)
            theta0: 初始 RIS 系数

        Returns:
            OptimizationResult: 最后一个被接受的迭代点及其轨迹
        """
        settings = self.settings
        config = self.config
        current = BeamformingSolution(x_mat=np.asarray(x0, dtype=complex), theta=np.asarray(theta0, dtype=complex))
        current.validate(config)
        report = constraint_report(current, self.channels, config)
        worst = normalized_worst_residual(report, config)
        if worst < -settings.acceptance_tol:
            raise InitializationError(f"初始点不可行，最差归一化残差 {worst:.3e}")

        passive = self.kind == "pris"
        zeta = self._initial_zeta(report.beampattern_gain) if passive else None
        escalations = 0
        trace = IterationTrace()
        trace.add(IterationRecord(
            iteration=0,
            objective=self._merit(report.beampattern_gain, current.theta, zeta),
            surrogate=float("nan"),
            gain=report.beampattern_gain,
            zeta=zeta or 0.0,
            worst_residual=worst,
            unit_modulus_gap=report.unit_modulus_gap,
            solve_time=0.0,
            subproblem_iterations=0,
            status="start",
        ))
        self._log("INFO", f"初始增益 {report.beampattern_gain:.6e}" + (f", ζ = {zeta:.3e}" if passive else ""))

        degraded = False
        status = "max_iters"
        iteration = 0
        while True:
            iteration += 1
            result, subproblem, scale = self._solve_subproblem(self.kind, current, zeta)
            if result.status == SolveStatus.PRIMAL_INFEASIBLE and iteration == 1:
                raise InitializationError("第 1 次迭代子问题不可行，初始点不满足前置条件")
            if result.status in (SolveStatus.PRIMAL_INFEASIBLE, SolveStatus.DUAL_INFEASIBLE):
                self._log("WARNING", f"子问题返回 {result.status.value}，保留上一迭代点")
                degraded, status = True, "degraded"
                break

            candidate = subproblem.solution(result.x, config)
            candidate_report = constraint_report(candidate, self.channels, config)
            candidate_worst = normalized_worst_residual(candidate_report, config)
            merit = self._merit(candidate_report.beampattern_gain, candidate.theta, zeta)
            previous = trace.records[-1].objective
            decrease = previous - merit > settings.monotone_tol * max(abs(previous), np.finfo(float).tiny)

            if candidate_worst < -settings.acceptance_tol or decrease:
                reason = f"残差 {candidate_worst:.2e}" if candidate_worst < -settings.acceptance_tol \
                    else f"目标下降 {previous:.6e} → {merit:.6e}"
                small_step = abs(previous - merit) <= settings.sca_tolerance * max(abs(previous), 1e-300)
                if result.status == SolveStatus.OPTIMAL and small_step and candidate_worst >= -settings.acceptance_tol:
                    self._log("INFO", f"候选点{reason}，变化低于收敛容差，视为收敛")
                    status = "converged"
                else:
                    self._log("WARNING", f"拒绝候选点（{reason}，求解状态 {result.status.value}），保留上一迭代点")
                    degraded, status = True, "degraded"
                break
            if result.status == SolveStatus.NUMERICAL_LIMIT:
                self._log("WARNING", "子问题数值受限，候选点通过接受检查，继续")

            current = candidate
            trace.add(IterationRecord(
                iteration=iteration,
                objective=merit,
                surrogate=descale_gain(result.objective, scale),
                gain=candidate_report.beampattern_gain,
                zeta=zeta or 0.0,
                worst_residual=candidate_worst,
                unit_modulus_gap=candidate_report.unit_modulus_gap,
                solve_time=result.wall_time,
                subproblem_iterations=result.iterations,
                status=result.status.value,
            ))
            self.iterations_history.append(asdict(trace.records[-1]))
            self._log("DEBUG", f"第 {iteration} 次迭代: 增益 {candidate_report.beampattern_gain:.6e}, "
                               f"最差残差 {candidate_worst:.2e}, 子问题 {result.iterations} 步")

            if not converged(trace, settings):
                continue
            segment_length = len(trace.current_segment()) - 1
            if passive and candidate_report.unit_modulus_gap > settings.unit_modulus_tol:
                if escalations < settings.max_zeta_escalations:
                    escalations += 1
                    zeta *= settings.zeta_growth
                    self._log("INFO", f"θ 未贴合单位模（偏差 {candidate_report.unit_modulus_gap:.2e}），"
                                      f"ζ 提升到 {zeta:.3e}（第 {escalations} 次）")
                    # 以新 ζ 重新计算段首目标
                    last = trace.records[-1]
                    trace.add(IterationRecord(**{**asdict(last), "objective": self._merit(last.gain, current.theta, zeta),
                                                 "zeta": zeta, "solve_time": 0.0, "subproblem_iterations": 0,
                                                 "status": "zeta_escalation"}))
                    trace.start_segment()
                    continue
                self._log("WARNING", f"ζ 已提升 {escalations} 次仍未贴合单位模（偏差 "
                                     f"{candidate_report.unit_modulus_gap:.2e}）")
            status = "converged" if segment_length < settings.max_sca_iters else "max_iters"
            break

        final_report = constraint_report(current, self.channels, config)
        self._log("INFO", f"结束（{status}），增益 {final_report.beampattern_gain:.6e}，"
                          f"共 {len(trace.records) - 1} 条迭代记录")
        return OptimizationResult(
            solution=current,
            trace=trace,
            gain=final_report.beampattern_gain,
            worst_residual=normalized_worst_residual(final_report, config),
            unit_modulus_gap=final_report.unit_modulus_gap,
            degraded=degraded,
            status=status,
            zeta=zeta,
            escalations=escalations,
            logs=list(self.logs),
        )

    def run(self, start: Optional[BeamformingSolution] = None) -> Tuple[InitializationResult, Optional[OptimizationResult]]:
        """初始化后运行主循环；不可行时第二项为 None"""
        init = self.initialize(start)
        if not init.feasible:
            return init, None
        return init, self.optimize(init.solution.x_mat, init.solution.theta)


def initialize(channels: ChannelSet,
               config: SystemConfig,
               settings: Optional[SolverSettings] = None,
               start: Optional[BeamformingSolution] = None) -> InitializationResult:
    return SCAOptimizer(channels, config, settings).initialize(start)


def _optimize(mode: RisMode, channels, config, settings, x0, theta0) -> Tuple[BeamformingSolution, IterationTrace]:
    if config.ris_mode != mode:
        raise ValueError(f"配置模式为 {config.ris_mode.value}，期望 {mode.value}")
    result = SCAOptimizer(channels, config, settings).optimize(x0, theta0)
    return result.solution, result.trace


def optimize_aris(channels: ChannelSet,
                  config: SystemConfig,
                  settings: Optional[SolverSettings],
                  x0: np.ndarray,
                  theta0: np.ndarray) -> Tuple[BeamformingSolution, IterationTrace]:
    """有源 RIS：最大化 𝓕，约束为 SINR、泄露、总功耗与 |θ_n| ≤ β_max"""
    return _optimize(RisMode.ACTIVE, channels, config, settings, x0, theta0)


def optimize_pris(channels: ChannelSet,
                  config: SystemConfig,
                  settings: Optional[SolverSettings],
                  x0: np.ndarray,
                  theta0: np.ndarray) -> Tuple[BeamformingSolution, IterationTrace]:
    """无源 RIS：最大化 𝓕 + ζ 罚项，约束 ‖X‖² ≤ P_max 与 |θ_n| ≤ 1，收敛时检查单位模贴合"""
    return _optimize(RisMode.PASSIVE, channels, config, settings, x0, theta0)
