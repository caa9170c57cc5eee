import os
from typing import Any, Dict, Optional
import yaml
import logging
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "config/config.yaml"


class EmbeddingSettings(BaseSettings):
    """构造阶段使用的常数"""

    model_config = SettingsConfigDict(env_prefix="SNOWEMBED_", env_file=".env", extra="ignore")

    # 分解
    c_m: float = 4.0
    c_0: float = 2.0
    c_pad: float = 4.0
    delta_growth_limit: int = 8
    padding_retries: int = 4
    eps_pad: Optional[float] = None

    # 随机投影
    c_jl: float = 8.0
    jl_max_tries: int = 64
    jl_max_growth: int = 8
    jl_tol: float = 1e-9

    # 变换与簇嵌入
    gram_tol: float = 1e-9
    l1_cluster_cap: int = 14
    cut_tol: float = 1e-6

    # Lipschitz 延拓
    kirszbraun_tol: float = 1e-6
    kirszbraun_max_iter: int = 10000

    rescale_c: float = 40.0
    dim_override: Optional[float] = None
    doubling_max_centers: int = 64
    keep_blocks_limit: int = 2_000_000


class AuditSettings(BaseSettings):
    """审计阶段声明的界"""

    model_config = SettingsConfigDict(env_prefix="SNOWEMBED_AUDIT_", env_file=".env", extra="ignore")

    c_b: float = 45.0
    linf_c_b: float = 1.0
    band_c: float = 16.0
    tail_slack: float = 1.1
    dominance_floor: float = 0.45
    float_slack: float = 1e-9
    max_violations: int = 100


class LogSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SNOWEMBED_", env_file=".env", extra="ignore")

    log_level: str = Field(default="INFO")
    log_dir: str = Field(default="logs")
    log_file: str = Field(default="snowembed.log")
    file_logging: bool = True


class Settings:
    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or os.getenv("SNOWEMBED_CONFIG", DEFAULT_CONFIG_PATH)
        self._load_config()
        self._init_settings()

    def _load_config(self) -> None:
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                self.config = yaml.safe_load(f) or {}
        except FileNotFoundError:
            logger.debug(f"Config file {self.config_path} not found, using defaults")
            self.config = {}
        except Exception as e:
            logger.error(f"Error loading config file: {str(e)}")
            self.config = {}

    def _section(self, name: str) -> Dict[str, Any]:
        section = self.config.get(name) or {}
        if not isinstance(section, dict):
            logger.error(f"Config section '{name}' is not a mapping, ignoring it")
            return {}
        return section

    def _init_settings(self) -> None:
        self.embedding = EmbeddingSettings(**self._section("embedding"))
        self.audit = AuditSettings(**self._section("audit"))
        self.logging = LogSettings(**self._section("logging"))

    def as_dict(self) -> Dict[str, Any]:
        """导出当前生效的配置（写入报告头）"""
        return {
            "embedding": self.embedding.model_dump(),
            "audit": self.audit.model_dump(),
        }


@lru_cache()
def get_settings(config_path: Optional[str] = None) -> Settings:
    return Settings(config_path)
