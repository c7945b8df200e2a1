"""配置管理模块 - 读写 JSON 配置文件（数值容差与命令默认值）"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)

# 通过环境变量 SPHERE_FMT_HOME 可将配置与日志目录移到别处（CI / 测试）
CONFIG_DIR = Path(os.environ.get("SPHERE_FMT_HOME", Path.home() / ".sphere-fmt"))
CONFIG_FILE = CONFIG_DIR / "config.json"

BANK_NAMES = ("paper", "eta1", "eta2", "eta3")


@dataclass
class NumericsConfig:
    exactness_tol: float = 1e-10
    cg_tol: float = 1e-12
    cg_max_iter: int = 200
    uep_grid_step: float = 1e-4
    uep_tol: float = 1e-10
    gram_memory_bytes: int = 512 * 1024 * 1024
    truncation_tol: float = 1e-10
    chunk_size: int = 512  # 稠密变换每批处理的节点数


@dataclass
class RunDefaults:
    bank: str = "paper"
    levels: str = "4:6"
    rule: str | None = None  # None → 每层 gl:2^j
    seed: int = 0
    out_dir: str = "out"


@dataclass
class AppConfig:
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    defaults: RunDefaults = field(default_factory=RunDefaults)

    def save(self) -> None:
        """保存配置到 JSON 文件"""
        CONFIG_DIR.mkdir(parents=True, exist_ok=True)
        CONFIG_FILE.write_text(json.dumps(asdict(self), indent=2), encoding="utf-8")

    @classmethod
    def load(cls) -> "AppConfig":
        """从 JSON 文件加载配置，文件不存在或损坏则回落到默认配置并重写"""
        if not CONFIG_FILE.exists():
            config = cls()
            config.save()
            return config

        try:
            data = json.loads(CONFIG_FILE.read_text(encoding="utf-8"))
            if not isinstance(data, dict):
                raise TypeError("config root must be an object")
            config = cls(
                numerics=_merge(NumericsConfig(), data.get("numerics", {})),
                defaults=_merge(RunDefaults(), data.get("defaults", {})),
            )
            if config.defaults.bank not in BANK_NAMES:
                raise ValueError(f"unknown bank {config.defaults.bank!r}")
        except (json.JSONDecodeError, TypeError, KeyError, ValueError) as e:
            logger.warning("Invalid config file %s (%s), falling back to defaults", CONFIG_FILE, e)
            config = cls()

        config.save()
        return config


def _merge(base: Any, overrides: Any) -> Any:
    """用 JSON 中的同名字段覆盖 dataclass 默认值，忽略未知字段，类型不符则报错"""
    if not isinstance(overrides, dict):
        raise TypeError("section must be an object")
    for f in fields(base):
        if f.name not in overrides:
            continue
        value = overrides[f.name]
        default = getattr(base, f.name)
        if default is not None and value is not None:
            # bool 是 int 的子类，单独排除
            if isinstance(value, bool) or not isinstance(value, (type(default), int)):
                raise TypeError(f"{f.name}: expected {type(default).__name__}")
            if isinstance(default, float):
                value = float(value)
            elif isinstance(default, int) and not isinstance(value, int):
                raise TypeError(f"{f.name}: expected int")
        setattr(base, f.name, value)
    return base
