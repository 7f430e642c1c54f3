"""
配置加载器模块

从扁平的 YAML 配置文件（每行 ``key: value``）读取实验配置，
与默认配置合并后通过 ExperimentConfig 校验。

主要功能：
- 读取随包附带的默认配置 kbound/app/config.yaml
- 默认文件缺失时回退到硬编码默认值
- 合并顺序：默认值 → 配置文件 → 命令行覆盖
- 把文件缺失、解析失败和字段校验错误统一转换为 ConfigError
"""

from __future__ import annotations

import logging
import os
from typing import Any, Dict, Mapping, Optional

import yaml
from pydantic import ValidationError

from kbound.core.contracts import ExperimentConfig
from kbound.core.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "app", "config.yaml"))


class ConfigLoader:
    """
    配置加载器类

    初始化时读取默认配置；``load`` 在默认值之上叠加用户配置文件与覆盖项。
    """

    def __init__(self, defaults_path: Optional[str] = None):
        """
        初始化配置加载器

        Args:
            defaults_path: 默认配置文件路径，None 时使用随包附带的 config.yaml
        """
        self.defaults_path = defaults_path or DEFAULT_CONFIG_PATH
        self._defaults: Dict[str, Any] = {}  # 默认配置缓存
        self._load_defaults()

    def _load_defaults(self) -> None:
        if not os.path.exists(self.defaults_path):
            # 回退到模型自带的默认值
            self._load_fallback_defaults()
            return
        try:
            self._defaults = self._read_mapping(self.defaults_path)
        except ConfigError as exc:
            logger.warning(f"默认配置无法解析，使用内置默认值: {exc}")
            self._load_fallback_defaults()

    def _load_fallback_defaults(self) -> None:
        self._defaults = ExperimentConfig().model_dump()

    @staticmethod
    def _read_mapping(path: str) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as f:
                content = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if content is None:
            return {}
        if not isinstance(content, dict):
            raise ConfigError(f"config {path} must be a flat key: value mapping")
        return dict(content)

    @property
    def defaults(self) -> Dict[str, Any]:
        return dict(self._defaults)

    def load(self, path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
        """
        加载并校验实验配置

        Args:
            path: 用户配置文件路径，None 表示只用默认值
            overrides: 覆盖项（值为 None 的项被忽略）

        Returns:
            ExperimentConfig: 校验后的配置

        Raises:
            ConfigError: 文件不存在、无法解析或字段非法
        """
        merged = self.defaults
        if path is not None:
            if not os.path.isfile(path):
                raise ConfigError(f"config not found: {path}")
            merged.update(self._read_mapping(path))
        if overrides:
            merged.update({k: v for k, v in overrides.items() if v is not None})
        try:
            config = ExperimentConfig(**merged)
        except ValidationError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        logger.debug(f"配置已加载: {config.model_dump()}")
        return config


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """使用默认加载器读取配置"""
    return ConfigLoader().load(path, overrides)


# Global instance for easy access
_default_config: Optional[ExperimentConfig] = None


def get_default_config() -> ExperimentConfig:
    """Get the packaged default configuration."""
    global _default_config
    if _default_config is None:
        _default_config = ConfigLoader().load()
    return _default_config
