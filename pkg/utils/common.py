"""
结果表的统计工具：按扫描点与模式聚合增益、可行率与迭代数
"""

from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

GROUP_KEYS = ["parameter", "value", "mode"]


def calculate_feasible_rate(table: pd.DataFrame) -> float:
    """可行运行的比例"""
    if table.empty:
        return 0.0
    return float(table["feasible"].astype(bool).mean())


def aggregate_results(table: pd.DataFrame, extra_columns: Sequence[str] = ()) -> pd.DataFrame:
    """
    按 (parameter, value, mode) 聚合

    gain 的均值/中位数只统计可行运行（不可行行的 gain 为 NaN）。
    """
    if table.empty:
        return pd.DataFrame(columns=GROUP_KEYS)
    grouped = table.groupby(GROUP_KEYS, sort=True)
    aggregate = pd.DataFrame({
        "runs": grouped.size(),
        "feasible_rate": grouped["feasible"].apply(lambda s: float(s.astype(bool).mean())),
        "mean_gain": grouped["gain"].mean(),
        "median_gain": grouped["gain"].median(),
        "mean_gain_db": grouped["gain_db"].mean(),
        "mean_iterations": grouped["iterations"].mean(),
        "degraded_runs": grouped["degraded"].apply(lambda s: int(s.astype(bool).sum())),
    })
    for column in extra_columns:
        if column in table.columns:
            aggregate[f"mean_{column}"] = grouped[column].mean()
            aggregate[f"median_{column}"] = grouped[column].median()
    return aggregate.reset_index()


def solve_time_table(timing: pd.DataFrame) -> pd.DataFrame:
    """按 (value, mode) 聚合平均求解时间与子问题迭代数"""
    if timing.empty:
        return pd.DataFrame(columns=GROUP_KEYS + ["mean_solve_time", "mean_subproblem_iterations"])
    grouped = timing.groupby(GROUP_KEYS, sort=True)
    return pd.DataFrame({
        "mean_solve_time": grouped["solve_time"].mean(),
        "mean_subproblem_iterations": grouped["subproblem_iterations"].mean(),
    }).reset_index()


def relative_spread(values: Sequence[float]) -> float:
    """(max − min) / max，用于比较不同起点的最终增益"""
    array = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if array.size == 0:
        return float("nan")
    top = float(np.max(np.abs(array)))
    if top == 0.0:
        return 0.0
    return float((array.max() - array.min()) / top)


def is_nondecreasing(values: Sequence[float], rtol: float = 0.0) -> bool:
    values = list(values)
    return all(b >= a - rtol * abs(a) for a, b in zip(values, values[1:]))


def trend_by_mode(aggregate: pd.DataFrame, column: str = "mean_gain") -> Dict[str, List[float]]:
    """每种模式按扫描值排序后的统计序列"""
    trends: Dict[str, List[float]] = {}
    for mode, frame in aggregate.groupby("mode", sort=True):
        trends[str(mode)] = frame.sort_values("value")[column].tolist()
    return trends
