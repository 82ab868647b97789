import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from utils.constants import (
    DEFAULT_CONIC_SETTINGS,
    DEFAULT_SCENE,
    DEFAULT_SOLVER_SETTINGS,
    DEFAULT_SWEEP,
    DEFAULT_SYSTEM,
)
from utils.errors import ConfigError
from utils.helpers import deep_merge

# 读取 .env 中的 RISISAC_* 覆盖项
load_dotenv()

# 创建必要的目录
BASE_DIR = Path(__file__).parent
DATA_DIR = Path(os.environ.get("RISISAC_DATA_DIR", BASE_DIR / "data"))
CONFIG_FILE = DATA_DIR / "config.json"
RESULTS_DIR = DATA_DIR / "results"
SCENES_DIR = DATA_DIR / "scenes"  # 信道实现的 JSON 快照

for directory in [DATA_DIR, RESULTS_DIR, SCENES_DIR]:
    directory.mkdir(exist_ok=True, parents=True)

# 默认配置
DEFAULT_CONFIG = {
    "system": DEFAULT_SYSTEM,
    "scene": DEFAULT_SCENE,
    "solver": DEFAULT_SOLVER_SETTINGS,
    "conic": DEFAULT_CONIC_SETTINGS,
    "sweep": DEFAULT_SWEEP,
    "workers": None
}


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """加载配置，文件不存在时写出默认配置，缺失的键用默认值补齐"""
    config_path = Path(path) if path is not None else CONFIG_FILE
    if not config_path.exists():
        if path is not None:
            raise ConfigError("配置文件不存在", config_path)
        save_config(DEFAULT_CONFIG, config_path)
        return json.loads(json.dumps(DEFAULT_CONFIG))

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            user_config = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法的 JSON: {e}", config_path) from e

    if not isinstance(user_config, dict):
        raise ConfigError("配置文件顶层必须是对象", config_path)
    return deep_merge(DEFAULT_CONFIG, user_config)


def save_config(config: Dict[str, Any], path: Optional[Union[str, Path]] = None) -> None:
    """保存配置"""
    config_path = Path(path) if path is not None else CONFIG_FILE
    config_path.parent.mkdir(exist_ok=True, parents=True)
    with open(config_path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2, ensure_ascii=False)


def get_worker_limit(config: Optional[Dict[str, Any]] = None) -> int:
    """
    获取并行工作进程数

    优先级: 环境变量 RISISAC_WORKERS > 配置文件 workers > CPU 核数
    """
    env_value = os.environ.get("RISISAC_WORKERS")
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            raise ConfigError(f"RISISAC_WORKERS 必须是整数，当前为 {env_value!r}")

    if config is None:
        # 只读：配置文件不存在时不写出默认配置
        config = load_config() if CONFIG_FILE.exists() else DEFAULT_CONFIG
    workers = config.get("workers")
    if workers:
        return max(1, int(workers))

    return max(1, os.cpu_count() or 1)
