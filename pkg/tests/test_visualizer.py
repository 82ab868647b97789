import pandas as pd

from utils.visualizer import (
    create_convergence_chart,
    create_gain_sweep_chart,
    create_solve_time_chart,
    create_uncertainty_chart,
    generate_report,
    save_gain_sweep_png,
)


def _aggregate():
    return pd.DataFrame({
        "parameter": ["N"] * 4,
        "value": [8, 16, 8, 16],
        "mode": ["active", "active", "passive", "passive"],
        "mean_gain": [2e-6, 5e-6, 1e-7, 3e-7],
        "median_degradation": [0.0, 0.1, 0.0, 0.2],
    })


def test_empty_inputs_give_annotated_figure():
    for fig in (create_gain_sweep_chart(pd.DataFrame(columns=["mean_gain"])),
                create_convergence_chart(pd.DataFrame()),
                create_uncertainty_chart(pd.DataFrame()),
                create_solve_time_chart(pd.DataFrame())):
        assert fig.layout.annotations[0].text == "无数据"


def test_gain_chart_uses_log_axis_and_mode_labels():
    fig = create_gain_sweep_chart(_aggregate())
    assert fig.layout.yaxis.type == "log"
    assert {trace.name for trace in fig.data} == {"有源 RIS", "无源 RIS"}
    assert create_gain_sweep_chart(_aggregate(), log_scale=False).layout.yaxis.type != "log"


def test_convergence_chart_marks_zeta_escalations():
    trace = pd.DataFrame({
        "mode": ["passive"] * 4,
        "iteration": [0, 1, 1, 2],
        "gain": [1.0, 2.0, 2.0, 2.5],
        "status": ["start", "Optimal", "zeta_escalation", "Optimal"],
    })
    fig = create_convergence_chart(trace)
    marker = [t for t in fig.data if t.name == "ζ 提升"]
    assert len(marker) == 1 and list(marker[0].x) == [2]


def test_uncertainty_and_time_charts():
    assert len(create_uncertainty_chart(_aggregate()).data) == 2
    timing = pd.DataFrame({"parameter": ["N", "N"], "value": [8, 8], "mode": ["active", "passive"],
                           "mean_solve_time": [0.5, 0.2]})
    assert len(create_solve_time_chart(timing).data) == 2


def test_png_export(tmp_path):
    path = save_gain_sweep_png(_aggregate(), tmp_path / "plots" / "gain.png")
    assert path.exists() and path.read_bytes()[:4] == b"\x89PNG"
    assert save_gain_sweep_png(_aggregate().assign(mean_gain=float("nan")), tmp_path / "none.png") is None
    assert not (tmp_path / "none.png").exists()


def test_report_picks_best_point_per_mode():
    raw = pd.DataFrame({"feasible": [True, False, True, True], "degraded": [False, False, True, False]})
    report = generate_report(raw, _aggregate())
    assert report["total_runs"] == 4
    assert report["feasible_rate"] == 0.75
    assert report["degraded_runs"] == 1
    assert {(p["mode"], p["value"]) for p in report["best_points"]} == {("active", 16), ("passive", 16)}
