# Configuration settings for the clone detector
import os
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

load_dotenv()


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


class Config:
    """Environment-driven defaults for indexing, detection and the watch service"""

    # Index
    INDEX_PATH: str = os.getenv("CLONEDEX_INDEX_PATH", "./clonedex.idx")
    LANGUAGE_DIR: str = os.getenv(
        "CLONEDEX_LANGUAGE_DIR", str(Path(__file__).resolve().parent / "languages")
    )

    # Detection
    THRESHOLD: float = float(os.getenv("CLONEDEX_THRESHOLD", "0.7"))  # best precision/recall trade-off
    GRANULARITY: str = os.getenv("CLONEDEX_GRANULARITY", "method")
    MIN_TOKENS: int = int(os.getenv("CLONEDEX_MIN_TOKENS", "50"))
    SCOPE: str = os.getenv("CLONEDEX_SCOPE", "both")
    NORMALIZE_IDENTIFIERS: bool = _env_bool("CLONEDEX_NORMALIZE_IDENTIFIERS", False)
    NORMALIZE_LITERALS: bool = _env_bool("CLONEDEX_NORMALIZE_LITERALS", False)
    WORKERS: int = int(os.getenv("CLONEDEX_WORKERS", "1"))
    PROJECT_LAYOUT: str = os.getenv("CLONEDEX_PROJECT_LAYOUT", "root")

    # Reports
    OUTPUT_FORMAT: str = os.getenv("CLONEDEX_OUTPUT_FORMAT", "csv")

    # Watch service
    DEBOUNCE_MS: int = int(os.getenv("CLONEDEX_DEBOUNCE_MS", "200"))
    SOCKET_PATH: str = os.getenv("CLONEDEX_SOCKET_PATH", "./clonedex.sock")

    # Bench
    SEEDS_PATH: str = os.getenv(
        "CLONEDEX_SEEDS_PATH", str(Path(__file__).resolve().parent / "seeds")
    )
    BENCH_PER_TYPE: int = 100
    BENCH_EDIT_FRACTION: float = 0.2
    BENCH_RNG_SEED: int = 42

    # Logging
    LOG_LEVEL: str = os.getenv("CLONEDEX_LOG", "INFO").upper()


config = Config()


class Granularity(str, Enum):
    FILE = "file"
    METHOD = "method"
    BLOCK = "block"


class Scope(str, Enum):
    INTRA = "intra"
    INTER = "inter"
    BOTH = "both"

    def admits(self, project_a: str, project_b: str) -> bool:
        """Whether a pair between the two projects belongs to this scope"""
        if self is Scope.INTRA:
            return project_a == project_b
        if self is Scope.INTER:
            return project_a != project_b
        return True


def theta_fraction(theta: float) -> Fraction:
    """Exact rational form of a decimal threshold (0.7 -> 7/10)"""
    return Fraction(str(theta)).limit_denominator(10**9)


class NormalizationConfig(BaseModel):
    """Token normalization switches applied while tokenizing"""
    model_config = ConfigDict(frozen=True)

    rename_identifiers: bool = False
    abstract_literals: bool = False


class DetectionConfig(BaseModel):
    """Parameters that decide which block pairs count as clones"""
    model_config = ConfigDict(frozen=True)

    theta: float = Field(default=0.7, gt=0.0, le=1.0)
    granularity: Granularity = Granularity.METHOD
    min_tokens: int = Field(default=50, ge=1)
    normalization: NormalizationConfig = NormalizationConfig()
    scope: Scope = Scope.BOTH
    workers: int = Field(default=1, ge=1)

    @property
    def theta_exact(self) -> Fraction:
        return theta_fraction(self.theta)


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    TREE = "tree"


class CliConfig(BaseModel):
    """Merged command-line configuration (defaults < config file < flags)"""
    model_config = ConfigDict(frozen=True)

    subcommand: str
    roots: Tuple[str, ...] = ()
    theta: float = Field(default=0.7, gt=0.0, le=1.0)
    granularity: Granularity = Granularity.METHOD
    languages: Tuple[str, ...] = ()
    min_tokens: int = Field(default=50, ge=1)
    normalize_identifiers: bool = False
    normalize_literals: bool = False
    scope: Scope = Scope.BOTH
    output_format: OutputFormat = OutputFormat.CSV
    out: Optional[str] = None
    index_path: Optional[str] = None
    debounce_ms: int = Field(default=200, ge=0)
    json_output: bool = False
    workers: int = Field(default=1, ge=1)
    project_layout: str = "root"

    @field_validator("project_layout")
    @classmethod
    def _check_layout(cls, value: str) -> str:
        if value not in {"root", "children"}:
            raise ValueError("project_layout must be 'root' or 'children'")
        return value

    @property
    def normalization(self) -> NormalizationConfig:
        return NormalizationConfig(
            rename_identifiers=self.normalize_identifiers,
            abstract_literals=self.normalize_literals,
        )

    def detection(self) -> DetectionConfig:
        return DetectionConfig(
            theta=self.theta,
            granularity=self.granularity,
            min_tokens=self.min_tokens,
            normalization=self.normalization,
            scope=self.scope,
            workers=self.workers,
        )
