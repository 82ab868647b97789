"""
辅助函数模块，包含单位换算、JSON 读取与字典合并等通用功能
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np


def db2pow(value_db: Union[float, Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """dB 转线性功率比，标量输入返回 float，序列输入返回数组"""
    linear = np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)
    return float(linear) if linear.ndim == 0 else linear


def pow2db(value: float) -> float:
    """线性功率比转 dB，非正值返回 -inf"""
    if value <= 0:
        return float("-inf")
    return float(10.0 * np.log10(value))


def dbm2watt(value_dbm: Union[float, Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """dBm 转瓦特"""
    return db2pow(np.asarray(value_dbm, dtype=float) - 30.0)


def watt2dbm(value_w: float) -> float:
    """瓦特转 dBm"""
    return pow2db(value_w) + 30.0


def read_json_file(path: Union[str, Path]) -> Tuple[Optional[Dict[str, Any]], Optional[str]]:
    """
    读取 JSON 文件

    Args:
        path: 文件路径

    Returns:
        Tuple[Dict, str]: 解析结果和错误信息（成功时错误为 None）
    """
    path = Path(path)
    if not path.exists():
        return None, f"文件不存在: {path}"
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        return None, f"JSON 解析失败: {path}: {e}"
    except OSError as e:
        return None, f"无法读取文件: {path}: {e}"
    if not isinstance(data, dict):
        return None, f"顶层必须是 JSON 对象: {path}"
    return data, None


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并两个字典，override 中的值优先"""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged
