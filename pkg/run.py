#!/usr/bin/env python
"""
命令行入口：扫描、不确定性实验、初始化敏感性、收敛轨迹、单行重放与子问题导出
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import RESULTS_DIR, get_worker_limit, load_config
from models.system import RisMode
from utils.common import solve_time_table
from utils.errors import ConfigError, RisIsacError
from utils.experiments import (
    SweepSpec,
    apply_full_scale,
    dump_first_subproblem,
    emit_outputs,
    parse_sweep_spec,
    read_raw_csv,
    replay_row,
    run_convergence_study,
    run_initialization_study,
    run_sweep,
    run_uncertainty_experiment,
)
from utils.visualizer import (
    create_convergence_chart,
    create_gain_sweep_chart,
    create_solve_time_chart,
    create_uncertainty_chart,
    generate_report,
    save_gain_sweep_png,
)

logger = logging.getLogger("run")


def _spec_defaults(config: Dict[str, Any]) -> Dict[str, Any]:
    """配置文件中的 system/scene/solver 作为扫描描述的默认值"""
    defaults = dict(config["sweep"])
    defaults["system"] = config["system"]
    defaults["scene"] = config["scene"]
    defaults["solver"] = {**config["solver"], "conic": config["conic"]}
    return defaults


def _load_spec(args: argparse.Namespace, config: Dict[str, Any]) -> SweepSpec:
    spec, error = parse_sweep_spec(args.sweep, _spec_defaults(config))
    if error:
        raise ConfigError(error, args.sweep)
    if args.mode != "both":
        spec = spec.model_copy(update={"modes": (RisMode(args.mode),)})
    if args.full_scale:
        spec = apply_full_scale(spec)
    return spec


def _workers(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    return args.workers if args.workers else get_worker_limit(config)


def _write_report(result, args: argparse.Namespace, stem: str) -> None:
    """摘要 JSON；--plot 时另外导出 PNG 与交互式 HTML 图表"""
    output = Path(args.output_dir)
    report = generate_report(result.raw, result.aggregate)
    (output / f"{stem}_report.json").write_text(json.dumps(report, ensure_ascii=False, indent=2, default=float),
                                               encoding="utf-8")
    if not args.plot:
        return
    save_gain_sweep_png(result.aggregate, output / f"{stem}_gain.png")
    create_gain_sweep_chart(result.aggregate).write_html(output / f"{stem}_gain.html")
    create_solve_time_chart(solve_time_table(result.timing)).write_html(output / f"{stem}_time.html")
    if "median_degradation" in result.aggregate.columns:
        create_uncertainty_chart(result.aggregate).write_html(output / f"{stem}_degradation.html")


def _finish_sweep(result, args: argparse.Namespace, stem: str) -> int:
    if not result.raw.empty:
        emit_outputs(result, args.output_dir, args.format, stem=stem)
        _write_report(result, args, stem)
    if not result.complete:
        logger.error(f"[扫描] {len(result.errors)} 次运行未完成")
        return 1
    infeasible = int((~result.raw["feasible"].astype(bool)).sum())
    logger.info(f"[扫描] 完成 {len(result.raw)} 次运行，其中 {infeasible} 次标记为不可行")
    return 0 if not result.raw.empty else 1


def cmd_sweep(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    spec = _load_spec(args, config)
    result = run_sweep(spec, workers=_workers(args, config), show_progress=not args.quiet)
    return _finish_sweep(result, args, stem=f"sweep_{spec.parameter}")


def cmd_uncertainty(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    spec = _load_spec(args, config)
    if args.half_widths:
        spec = spec.model_copy(update={"values": tuple(args.half_widths)})
    elif spec.parameter != "target_uncertainty_deg":
        spec = spec.model_copy(update={"values": (0.0, 2.5, 5.0)})
    result = run_uncertainty_experiment(spec, workers=_workers(args, config), show_progress=not args.quiet)
    return _finish_sweep(result, args, stem="uncertainty")


def cmd_init_study(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    defaults = _spec_defaults(config)
    table, spread = run_initialization_study(
        args.seed, args.starts, defaults["system"], defaults["scene"], defaults["solver"],
        mode=RisMode(args.mode if args.mode != "both" else "active"),
    )
    output = Path(args.output_dir)
    output.mkdir(parents=True, exist_ok=True)
    table.to_csv(output / f"init_study_{args.seed}.csv", index=False, float_format="%.17g")
    logger.info(f"[初始化研究] {len(table)} 个起点，最终增益相对离差 {spread:.3e}")
    return 0 if bool(table["feasible"].all()) else 1


def cmd_convergence(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    defaults = _spec_defaults(config)
    modes = (RisMode.PASSIVE, RisMode.ACTIVE) if args.mode == "both" else (RisMode(args.mode),)
    frame = run_convergence_study(args.seed, defaults["system"], defaults["scene"], defaults["solver"], modes)
    output = Path(args.output_dir)
    output.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output / f"convergence_{args.seed}.csv", index=False, float_format="%.17g")
    if args.plot:
        create_convergence_chart(frame).write_html(output / f"convergence_{args.seed}.html")
    return 0 if not frame.empty else 1


def cmd_replay(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    spec = _load_spec(args, config)
    raw = read_raw_csv(args.raw)
    rows: List[int] = args.row or list(range(len(raw)))
    mismatches = 0
    for index in rows:
        outcome = replay_row(raw.iloc[index].to_dict(), spec)
        level = logging.INFO if outcome["match"] else logging.ERROR
        logger.log(level, f"[重放] 第 {index} 行: 记录增益 {outcome['expected_gain']:.17g}, "
                          f"重放增益 {outcome['gain']:.17g}, {'一致' if outcome['match'] else '不一致'}")
        mismatches += not outcome["match"]
    return 0 if mismatches == 0 else 1


def cmd_dump_program(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    defaults = _spec_defaults(config)
    descriptor = {
        "seed": args.seed,
        "mode": args.mode if args.mode != "both" else "active",
        "system": defaults["system"],
        "scene": defaults["scene"],
        "solver": defaults["solver"],
    }
    path = dump_first_subproblem(descriptor, Path(args.output_dir) / f"subproblem_{descriptor['mode']}_{args.seed}.txt")
    logger.info(f"[导出] 子问题已写出到 {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="配置文件路径（缺省为 data/config.json）")
    common.add_argument("--sweep", help="扫描描述 JSON 文件")
    common.add_argument("--output-dir", default=str(RESULTS_DIR), help="输出目录")
    common.add_argument("--workers", type=int, help="并行进程数")
    common.add_argument("--mode", choices=["passive", "active", "both"], default="both", help="RIS 模式过滤")
    common.add_argument("--full-scale", action="store_true", help="使用全规模预设（N = 100，100 个种子）")
    common.add_argument("--format", choices=["csv", "json"], default="csv", help="输出格式")
    common.add_argument("--log-level", default="INFO", help="日志级别")
    common.add_argument("--quiet", action="store_true", help="不显示进度条")
    common.add_argument("--plot", action="store_true", help="额外导出 PNG / HTML 图表")

    parser = argparse.ArgumentParser(description="安全 RIS-ISAC 波束成形实验")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="参数扫描")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("uncertainty", parents=[common], help="目标角度不确定性实验")
    p.add_argument("--half-widths", type=float, nargs="+", help="角度偏移半宽（度）")
    p.set_defaults(handler=cmd_uncertainty)

    p = sub.add_parser("init-study", parents=[common], help="初始化敏感性")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=5)
    p.set_defaults(handler=cmd_init_study)

    p = sub.add_parser("convergence", parents=[common], help="单种子收敛轨迹")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_convergence)

    p = sub.add_parser("replay", parents=[common], help="重放原始结果表中的行")
    p.add_argument("--raw", required=True, help="原始结果 CSV")
    p.add_argument("--row", type=int, nargs="+", help="行号（缺省为全部）")
    p.set_defaults(handler=cmd_replay)

    p = sub.add_parser("dump-program", parents=[common], help="导出第一次 SCA 子问题")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_dump_program)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        return args.handler(args, config)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return 2
    except RisIsacError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
