"""
蒙特卡洛实验：参数扫描、目标角度不确定性、收敛轨迹与初始化敏感性

每一次运行由一个可序列化的运行描述（dict）完全确定，可以在任意进程中重放。
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt, ValidationError, field_validator

from models.scene import experiment_seed, generate_channels, perturb_target_angles
from models.system import (
    BeamformingSolution,
    ChannelSet,
    RisMode,
    SceneGeometry,
    SystemConfig,
    default_geometry,
    system_config_from_dict,
)
from utils.common import aggregate_results, relative_spread, solve_time_table
from utils.conic import dump_program
from utils.constants import (
    DEFAULT_SCENE,
    DEFAULT_SWEEP,
    DEFAULT_SYSTEM,
    FULL_SCALE_PRESET,
    RAW_COLUMNS,
    SCHEMA_VERSION,
    SWEEP_PARAMETERS,
    TIMING_COLUMNS,
)
from utils.errors import OutputError
from utils.helpers import deep_merge, pow2db, read_json_file
from utils.metrics import beampattern_gain
from utils.optimizer import SCAOptimizer, SolverSettings, complexity_estimate, default_start
from utils.parallel_executor import run_parallel

logger = logging.getLogger(__name__)

UNCERTAINTY_COLUMNS = ["gain_true", "ratio", "degradation", "delta_az_deg", "delta_el_deg"]


class SweepSpec(BaseModel):
    """扫描描述：一个扫描参数、取值列表、种子数与模式"""
    model_config = ConfigDict(frozen=True)

    parameter: str = DEFAULT_SWEEP["parameter"]
    values: Tuple[float, ...] = Field(default=tuple(DEFAULT_SWEEP["values"]), min_length=1)
    seeds: PositiveInt = DEFAULT_SWEEP["seeds"]
    base_seed: NonNegativeInt = DEFAULT_SWEEP["base_seed"]
    modes: Tuple[RisMode, ...] = Field(default=tuple(RisMode(m) for m in DEFAULT_SWEEP["modes"]), min_length=1)
    system: Dict[str, Any] = Field(default_factory=dict)
    scene: Dict[str, Any] = Field(default_factory=dict)
    solver: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("parameter")
    @classmethod
    def _known_parameter(cls, value: str) -> str:
        if value not in SWEEP_PARAMETERS:
            raise ValueError(f"不支持的扫描参数 {value}，可选: {', '.join(SWEEP_PARAMETERS)}")
        return value

    def descriptors(self) -> List[Dict[str, Any]]:
        """展开为运行描述列表，顺序为 (value, seed, mode)"""
        tasks = []
        for value in self.values:
            for index in range(self.seeds):
                for mode in self.modes:
                    tasks.append({
                        "parameter": self.parameter,
                        "value": value,
                        "seed": experiment_seed(self.base_seed, index),
                        "mode": RisMode(mode).value,
                        "system": dict(self.system),
                        "scene": dict(self.scene),
                        "solver": dict(self.solver),
                    })
        return tasks


def parse_sweep_spec(source: Union[str, Path, Dict[str, Any], None],
                     defaults: Optional[Dict[str, Any]] = None) -> Tuple[Optional[SweepSpec], Optional[str]]:
    """
    解析扫描描述（文件路径或字典），与默认配置合并

    Returns:
        (SweepSpec, None) 或 (None, 错误信息)
    """
    data: Dict[str, Any] = {}
    if isinstance(source, (str, Path)):
        loaded, error = read_json_file(source)
        if error:
            return None, error
        data = loaded
    elif isinstance(source, dict):
        data = dict(source)
    merged = deep_merge(defaults or {}, data)
    try:
        return SweepSpec.model_validate(merged), None
    except ValidationError as e:
        return None, f"扫描描述无效: {e}"


def apply_full_scale(spec: SweepSpec) -> SweepSpec:
    """全规模预设：N = 100、100 个信道实现，并使用预设的扫描取值"""
    values = FULL_SCALE_PRESET["values"].get(spec.parameter, list(spec.values))
    system = deep_merge(spec.system, FULL_SCALE_PRESET["system"])
    if spec.parameter == "N":
        system.pop("N", None)
    return spec.model_copy(update={
        "values": tuple(values),
        "seeds": FULL_SCALE_PRESET["sweep"]["seeds"],
        "system": system,
    })


def build_instance(descriptor: Dict[str, Any]) -> Tuple[SystemConfig, SceneGeometry, ChannelSet, SolverSettings]:
    """由运行描述生成 (配置, 几何, 信道, 求解器设置)"""
    system = deep_merge(DEFAULT_SYSTEM, descriptor.get("system", {}))
    scene = deep_merge(DEFAULT_SCENE, descriptor.get("scene", {}))
    parameter, value = descriptor.get("parameter"), descriptor.get("value")
    if parameter in ("N", "K"):
        system[parameter] = int(value)
    elif parameter == "direct_links":
        system[parameter] = bool(value)
    elif parameter in ("p_max_dbm", "gamma_c_db", "gamma_t_db", "beta_max"):
        system[parameter] = float(value)
    config = system_config_from_dict(system, descriptor["mode"])
    geometry = default_geometry(config.K, scene)
    channels = channels_for(config, geometry, scene, int(descriptor["seed"]))
    settings = SolverSettings.model_validate(descriptor.get("solver", {}))
    return config, geometry, channels, settings


def channels_for(config: SystemConfig, geometry: SceneGeometry, scene: Dict[str, Any], seed: int) -> ChannelSet:
    return generate_channels(
        config,
        geometry,
        rician_factor_db=float(scene["rician_factor_db"]),
        pathloss_exponent=scene["pathloss_exponents"],
        seed=seed,
        reference_loss_db=float(scene["reference_loss_db"]),
        spacing_over_wavelength=float(scene["element_spacing"]),
    )


def _base_row(descriptor: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "parameter": descriptor.get("parameter"),
        "value": descriptor.get("value"),
        "seed": int(descriptor["seed"]),
        "mode": descriptor["mode"],
    }


def uncertainty_offsets(seed: int, half_width: float) -> Tuple[float, float]:
    """公共随机数：u ~ U(−1, 1)²，偏移 = half_width·u，不同半宽共享同一组 u"""
    rng = np.random.default_rng([int(seed), 1])
    u_az, u_el = rng.uniform(-1.0, 1.0, size=2)
    return float(half_width * u_az), float(half_width * u_el)


def run_single(descriptor: Dict[str, Any]) -> Dict[str, Any]:
    """
    执行一次运行：生成信道 → 初始化 → 优化 → 评估

    扫描参数为 target_uncertainty_deg 时，以估计角度优化、以真实角度评估增益。
    """
    config, geometry, channels, settings = build_instance(descriptor)
    row = _base_row(descriptor)
    optimizer = SCAOptimizer(channels, config, settings)
    init, result = optimizer.run()

    row["subproblem_iterations"] = 0
    row["solve_time"] = init.solve_time
    if result is None:
        row.update({"gain": float("nan"), "gain_db": float("nan"), "iterations": 0, "feasible": False,
                    "worst_residual": float("nan"), "unit_modulus_gap": float("nan"), "degraded": False,
                    "status": "infeasible"})
        solution = None
    else:
        row.update({
            "gain": result.gain,
            "gain_db": pow2db(result.gain) if result.gain > 0 else float("-inf"),
            "iterations": result.iterations,
            "feasible": bool(result.worst_residual >= -settings.acceptance_tol),
            "worst_residual": result.worst_residual,
            "unit_modulus_gap": result.unit_modulus_gap,
            "degraded": result.degraded,
            "status": result.status,
        })
        row["solve_time"] += result.trace.total_solve_time
        row["subproblem_iterations"] = result.trace.total_subproblem_iterations
        solution = result.solution

    if descriptor.get("parameter") == "target_uncertainty_deg":
        row.update(_evaluate_uncertainty(descriptor, config, geometry, solution))
    return row


def _evaluate_uncertainty(descriptor: Dict[str, Any],
                          config: SystemConfig,
                          geometry: SceneGeometry,
                          solution: Optional[BeamformingSolution]) -> Dict[str, Any]:
    half_width = float(descriptor["value"])
    if half_width < 0:
        raise ValueError("不确定性半宽必须非负")
    delta_az, delta_el = uncertainty_offsets(int(descriptor["seed"]), half_width)
    extra = {"delta_az_deg": delta_az, "delta_el_deg": delta_el}
    if solution is None:
        extra.update({"gain_true": float("nan"), "ratio": float("nan"), "degradation": float("nan")})
        return extra
    scene = deep_merge(DEFAULT_SCENE, descriptor.get("scene", {}))
    true_geometry = perturb_target_angles(geometry, delta_az, delta_el)
    # 同一种子：散射分量相同，只有目标方向的 LoS 分量改变
    true_channels = channels_for(config, true_geometry, scene, int(descriptor["seed"]))
    estimated_channels = channels_for(config, geometry, scene, int(descriptor["seed"]))
    gain_est = beampattern_gain(solution.x_mat, solution.theta, estimated_channels, config)
    gain_true = beampattern_gain(solution.x_mat, solution.theta, true_channels, config)
    ratio = gain_true / gain_est if gain_est > 0 else float("nan")
    extra.update({"gain_true": gain_true, "ratio": ratio, "degradation": 1.0 - ratio})
    return extra


@dataclass
class SweepResult:
    raw: pd.DataFrame
    timing: pd.DataFrame
    aggregate: pd.DataFrame
    errors: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        """全部请求的运行都已完成（可行或标记为不可行）"""
        return not self.errors


def _collect(results: List[Dict[str, Any]], extra_columns: List[str]) -> SweepResult:
    rows = [r for r in results if "error" not in r]
    errors = [r for r in results if "error" in r]
    for failure in errors:
        logger.error(f"[扫描] 运行失败 {failure.get('context', {}).get('seed')}: {failure['error']}")
    columns = RAW_COLUMNS + [c for c in extra_columns if any(c in row for row in rows)]
    raw = pd.DataFrame(rows, columns=columns) if rows else pd.DataFrame(columns=columns)
    timing = pd.DataFrame(rows, columns=TIMING_COLUMNS) if rows else pd.DataFrame(columns=TIMING_COLUMNS)
    order = ["value", "seed", "mode"]
    raw = raw.sort_values(order, kind="mergesort").reset_index(drop=True)
    timing = timing.sort_values(order, kind="mergesort").reset_index(drop=True)
    aggregate = aggregate_results(raw, [c for c in ("degradation", "ratio") if c in raw.columns])
    return SweepResult(raw=raw, timing=timing, aggregate=aggregate, errors=errors)


def run_sweep(spec: SweepSpec,
              workers: Optional[int] = None,
              show_progress: bool = True) -> SweepResult:
    """
    运行扫描：每个 (value, seed, mode) 一行；不可行实例保留并标记

    Args:
        spec: 扫描描述
        workers: 并行进程数
        show_progress: 是否显示进度条

    Returns:
        SweepResult: 原始表（按 value, seed, mode 排序）、计时表与聚合表
    """
    tasks = spec.descriptors()
    logger.info(f"[扫描] 参数 {spec.parameter}，{len(spec.values)} 个取值 × {spec.seeds} 个种子 × "
                f"{len(spec.modes)} 种模式 = {len(tasks)} 次运行")
    results = run_parallel(run_single, tasks, workers=workers, show_progress=show_progress)
    return _collect(results, UNCERTAINTY_COLUMNS if spec.parameter == "target_uncertainty_deg" else [])


def run_uncertainty_experiment(spec: SweepSpec,
                               workers: Optional[int] = None,
                               show_progress: bool = True) -> SweepResult:
    """目标角度不确定性实验：values 为方位角/俯仰角偏移的半宽（度）"""
    if any(v < 0 for v in spec.values):
        raise ValueError("不确定性半宽必须非负")
    spec = spec.model_copy(update={"parameter": "target_uncertainty_deg"})
    return run_sweep(spec, workers=workers, show_progress=show_progress)


def run_convergence_study(seed: int,
                          system: Optional[Dict[str, Any]] = None,
                          scene: Optional[Dict[str, Any]] = None,
                          solver: Optional[Dict[str, Any]] = None,
                          modes: Tuple[RisMode, ...] = (RisMode.PASSIVE, RisMode.ACTIVE)) -> pd.DataFrame:
    """单个种子上两种模式的逐次迭代真实增益"""
    frames = []
    for mode in modes:
        descriptor = {"seed": seed, "mode": RisMode(mode).value, "system": system or {},
                      "scene": scene or {}, "solver": solver or {}}
        config, _, channels, settings = build_instance(descriptor)
        init, result = SCAOptimizer(channels, config, settings).run()
        if result is None:
            logger.warning(f"[收敛] 种子 {seed} 模式 {mode} 不可行")
            continue
        frame = result.trace.to_frame()
        frame.insert(0, "mode", RisMode(mode).value)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["mode", "iteration", "gain"])
    return pd.concat(frames, ignore_index=True)


def random_start(config: SystemConfig, channels: ChannelSet, rng: np.random.Generator) -> BeamformingSolution:
    """随机相位 θ 与随机 X 方向，功率与默认起点一致"""
    base = default_start(channels, config)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=config.N)
    theta = np.abs(base.theta) * np.exp(1j * phases)
    x_mat = rng.standard_normal(base.x_mat.shape) + 1j * rng.standard_normal(base.x_mat.shape)
    x_mat *= np.linalg.norm(base.x_mat) / np.linalg.norm(x_mat)
    if config.ris_mode == RisMode.ACTIVE:
        reflected = np.linalg.norm((theta[:, None] * channels.g_mat) @ x_mat) ** 2
        reference = np.linalg.norm((base.theta[:, None] * channels.g_mat) @ base.x_mat) ** 2
        total = np.linalg.norm(x_mat) ** 2 + reflected
        x_mat *= np.sqrt((np.linalg.norm(base.x_mat) ** 2 + reference) / total)
    return BeamformingSolution(x_mat=x_mat, theta=theta)


def run_initialization_study(seed: int,
                             n_starts: int = 5,
                             system: Optional[Dict[str, Any]] = None,
                             scene: Optional[Dict[str, Any]] = None,
                             solver: Optional[Dict[str, Any]] = None,
                             mode: RisMode = RisMode.ACTIVE) -> Tuple[pd.DataFrame, float]:
    """
    初始化敏感性：多个随机起点经可行性恢复后运行 SCA

    Returns:
        (每个起点一行的表, 最终增益的相对离差)
    """
    descriptor = {"seed": seed, "mode": RisMode(mode).value, "system": system or {},
                  "scene": scene or {}, "solver": solver or {}}
    config, _, channels, settings = build_instance(descriptor)
    rows = []
    for start_index in range(n_starts):
        rng = np.random.default_rng([int(seed), 2, start_index])
        start = random_start(config, channels, rng)
        optimizer = SCAOptimizer(channels, config, settings)
        init, result = optimizer.run(start)
        rows.append({
            "start": start_index,
            "feasible": result is not None,
            "initial_gain": result.trace.records[0].gain if result else float("nan"),
            "gain": result.gain if result else float("nan"),
            "iterations": result.iterations if result else 0,
        })
    table = pd.DataFrame(rows)
    return table, relative_spread(table["gain"].tolist())


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    text = f"# schema_version={SCHEMA_VERSION}\n" + frame.to_csv(index=False, float_format="%.17g")
    path.write_text(text, encoding="utf-8")


def _write_json(frame: pd.DataFrame, path: Path) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "columns": list(frame.columns),
        "rows": json.loads(frame.to_json(orient="records", double_precision=15)),
    }
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")


def emit_outputs(result: SweepResult,
                 output_dir: Union[str, Path],
                 fmt: str = "csv",
                 stem: str = "sweep") -> List[Path]:
    """
    写出原始表、聚合表与计时表

    原始表不含计时列，相同输入重跑时逐字节一致。

    Returns:
        写出的文件路径列表
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"不支持的输出格式: {fmt}")
    if result.raw.empty:
        raise OutputError("结果表为空，未写出任何文件", output_dir)
    output_dir = Path(output_dir)
    writer = _write_csv if fmt == "csv" else _write_json
    outputs = [
        (result.raw, output_dir / f"{stem}_raw.{fmt}"),
        (result.aggregate, output_dir / f"{stem}_aggregate.{fmt}"),
        (solve_time_table(result.timing), output_dir / f"{stem}_timing.{fmt}"),
    ]
    written = []
    for frame, path in outputs:
        try:
            output_dir.mkdir(parents=True, exist_ok=True)
            writer(frame, path)
        except OSError as e:
            raise OutputError(f"写出失败: {e}", path) from e
        written.append(path)
    logger.info(f"[输出] 已写出 {', '.join(p.name for p in written)}")
    return written


def read_raw_csv(path: Union[str, Path]) -> pd.DataFrame:
    """读取 emit_outputs 写出的 CSV（跳过版本注释行）"""
    return pd.read_csv(path, comment="#")


def replay_row(row: Dict[str, Any], spec: SweepSpec, tol: float = 1e-9) -> Dict[str, Any]:
    """按 (config, seed, mode) 重放一行并比对增益与可行性"""
    descriptor = {
        "parameter": row["parameter"],
        "value": row["value"],
        "seed": int(row["seed"]),
        "mode": row["mode"],
        "system": dict(spec.system),
        "scene": dict(spec.scene),
        "solver": dict(spec.solver),
    }
    replayed = run_single(descriptor)
    gain, expected = replayed["gain"], float(row["gain"])
    if np.isnan(expected):
        gain_match = bool(np.isnan(gain))
    else:
        gain_match = abs(gain - expected) <= tol * max(1.0, abs(expected))
    feasible_match = bool(replayed["feasible"]) == bool(row["feasible"])
    return {"gain": gain, "expected_gain": expected, "match": gain_match and feasible_match}


def dump_first_subproblem(descriptor: Dict[str, Any], path: Union[str, Path]) -> Path:
    """把第一次 SCA 子问题（在可行初始点处展开）写成纯文本锥格式"""
    config, _, channels, settings = build_instance(descriptor)
    optimizer = SCAOptimizer(channels, config, settings)
    init = optimizer.initialize()
    start = init.solution if init.feasible else default_start(channels, config)
    if not init.feasible:
        subproblem = optimizer.build_subproblem("feasibility", start)
    elif config.ris_mode == RisMode.ACTIVE:
        subproblem = optimizer.build_subproblem("aris", start)
    else:
        subproblem = optimizer.build_subproblem("pris", start, optimizer.initial_zeta(start))
    stats = subproblem.program.statistics()
    estimate = complexity_estimate(config)
    logger.info(f"[导出] 子问题规模 {stats}；解析计数 N_var={estimate['N_var']}, N_cons={estimate['N_cons']}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        dump_program(subproblem.program, path)
    except OSError as e:
        raise OutputError(f"写出失败: {e}", path) from e
    return path
