"""
异常类型定义模块，所有库级错误都继承自 RisIsacError
"""

from pathlib import Path
from typing import Optional, Union


class RisIsacError(Exception):
    """库内所有错误的基类"""


class ConfigError(RisIsacError):
    """配置文件或扫描描述无效"""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        self.path = str(path) if path is not None else None
        if self.path:
            message = f"{message} (文件: {self.path})"
        super().__init__(message)


class GeometryError(RisIsacError, ValueError):
    """场景几何退化，例如节点重合"""


class DimensionError(RisIsacError, ValueError):
    """数组维度与系统配置不一致"""


class ScalingError(RisIsacError, ValueError):
    """无法对信道进行缩放（全零信道）"""


class InitializationError(RisIsacError):
    """初始点违反优化器的前置条件"""


class OutputError(RisIsacError):
    """结果文件写出失败"""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        self.path = str(path) if path is not None else None
        if self.path:
            message = f"{message} (路径: {self.path})"
        super().__init__(message)
