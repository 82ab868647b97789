from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

from utils.common import calculate_feasible_rate

MODE_LABELS = {"passive": "无源 RIS", "active": "有源 RIS"}


def _empty_figure(text: str = "无数据") -> go.Figure:
    fig = go.Figure()
    fig.add_annotation(
        text=text,
        showarrow=False,
        font=dict(size=20)
    )
    return fig


def create_gain_sweep_chart(aggregate: pd.DataFrame, log_scale: bool = True) -> go.Figure:
    """各扫描取值下两种模式的平均波束图增益"""
    if aggregate.empty or aggregate["mean_gain"].dropna().empty:
        return _empty_figure()

    df = aggregate.dropna(subset=["mean_gain"]).copy()
    df["模式"] = df["mode"].map(MODE_LABELS).fillna(df["mode"])
    parameter = str(df["parameter"].iloc[0])

    fig = px.line(
        df.sort_values("value"),
        x="value",
        y="mean_gain",
        color="模式",
        markers=True,
        title=f"波束图增益随 {parameter} 的变化",
        labels={"value": parameter, "mean_gain": "平均增益"},
        log_y=log_scale,
        height=500
    )
    return fig


def create_convergence_chart(trace_frame: pd.DataFrame, log_scale: bool = True) -> go.Figure:
    """逐次迭代的真实增益；ζ 提升记录单独标出"""
    if trace_frame.empty:
        return _empty_figure()

    df = trace_frame.copy()
    if "mode" not in df.columns:
        df["mode"] = "active"
    df["模式"] = df["mode"].map(MODE_LABELS).fillna(df["mode"])
    df["step"] = df.groupby("mode").cumcount()

    fig = px.line(
        df,
        x="step",
        y="gain",
        color="模式",
        markers=True,
        title="SCA 收敛轨迹",
        labels={"step": "迭代记录", "gain": "增益"},
        log_y=log_scale,
        height=500
    )
    escalations = df[df["status"] == "zeta_escalation"] if "status" in df.columns else df.iloc[0:0]
    if not escalations.empty:
        fig.add_trace(go.Scatter(
            x=escalations["step"],
            y=escalations["gain"],
            mode="markers",
            marker=dict(symbol="x", size=12),
            name="ζ 提升"
        ))
    return fig


def create_uncertainty_chart(aggregate: pd.DataFrame) -> go.Figure:
    """目标角度不确定性下的增益退化中位数"""
    column = "median_degradation"
    if aggregate.empty or column not in aggregate.columns or aggregate[column].dropna().empty:
        return _empty_figure()

    df = aggregate.dropna(subset=[column]).copy()
    df["模式"] = df["mode"].map(MODE_LABELS).fillna(df["mode"])
    fig = px.bar(
        df.sort_values("value"),
        x="value",
        y=column,
        color="模式",
        barmode="group",
        title="目标角度失配造成的增益退化",
        labels={"value": "角度偏移半宽 (度)", column: "退化中位数 (1 − G_true/G_est)"},
        height=500
    )
    return fig


def create_solve_time_chart(timing: pd.DataFrame) -> go.Figure:
    """平均求解时间"""
    if timing.empty:
        return _empty_figure()

    df = timing.copy()
    df["模式"] = df["mode"].map(MODE_LABELS).fillna(df["mode"])
    fig = px.bar(
        df.sort_values("value"),
        x="value",
        y="mean_solve_time",
        color="模式",
        barmode="group",
        title="平均求解时间",
        labels={"value": str(df["parameter"].iloc[0]), "mean_solve_time": "时间 (秒)"},
        height=500
    )
    return fig


def save_gain_sweep_png(aggregate: pd.DataFrame, path: Union[str, Path], log_scale: bool = True) -> Optional[Path]:
    """用 matplotlib 导出增益扫描图；无可行数据时不写文件并返回 None"""
    df = aggregate.dropna(subset=["mean_gain"]) if not aggregate.empty else aggregate
    if df.empty:
        return None

    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for mode, group in df.groupby("mode", sort=True):
        group = group.sort_values("value")
        ax.plot(group["value"], group["mean_gain"], marker="o", label=MODE_LABELS.get(mode, mode))
    if log_scale:
        ax.set_yscale("log")
    ax.set_xlabel(str(df["parameter"].iloc[0]))
    ax.set_ylabel("mean gain")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def generate_report(raw: pd.DataFrame, aggregate: pd.DataFrame) -> Dict[str, Any]:
    """生成扫描摘要：总运行数、可行率、各模式最优扫描点"""
    report: Dict[str, Any] = {
        "total_runs": int(len(raw)),
        "feasible_rate": calculate_feasible_rate(raw),
        "degraded_runs": int(raw["degraded"].astype(bool).sum()) if not raw.empty else 0,
        "best_points": [],
    }
    if aggregate.empty:
        return report

    best: List[Dict[str, Any]] = []
    for mode, group in aggregate.dropna(subset=["mean_gain"]).groupby("mode", sort=True):
        row = group.loc[group["mean_gain"].idxmax()]
        best.append({"mode": mode, "value": row["value"], "mean_gain": float(row["mean_gain"])})
    report["best_points"] = best
    return report
