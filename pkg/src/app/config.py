"""Run configuration: one JSON file per run, plus process settings from the environment."""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from chains.chain_core import MAX_DIAMETER, strip_chain
from construction.errors import ConfigError
from construction.rotation import RotationVector
from construction.search import Budgets, SearchSettings

DEFAULT_ALPHA0 = RotationVector(2, 1, 5)
DEFAULT_OUTPUT_DIR = "runs"
DEFAULT_HISTORY_FILE = "~/.akpc_history"


@dataclass(frozen=True)
class EnvSettings:
    log_level: str = "INFO"
    output_dir: str = DEFAULT_OUTPUT_DIR
    history_file: str = DEFAULT_HISTORY_FILE


def env_settings() -> EnvSettings:
    load_dotenv()
    return EnvSettings(
        log_level=os.getenv("AKPC_LOG_LEVEL", "INFO").upper(),
        output_dir=os.getenv("AKPC_OUTPUT_DIR", DEFAULT_OUTPUT_DIR),
        history_file=os.path.expanduser(os.getenv("AKPC_HISTORY_FILE", DEFAULT_HISTORY_FILE)),
    )


@dataclass(frozen=True)
class RunConfig:
    """Everything a build needs; written back to the run directory as config.json."""

    alpha0: RotationVector = DEFAULT_ALPHA0
    N0: int = 8
    eps0: float = 0.0625
    stages: int = 1
    budgets: Budgets = field(default_factory=Budgets)
    settings: SearchSettings = field(default_factory=SearchSettings)
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self):
        if self.stages < 1:
            raise ConfigError("stages: nothing to build, need at least 1")
        if self.N0 < 4:
            raise ConfigError(f"N0: chain size {self.N0} is below 4")
        if not 0 < self.eps0 < 0.5:
            raise ConfigError(f"eps0: {self.eps0} is not in (0, 1/2)")
        diameter = strip_chain(0.0, self.eps0, self.N0).max_diameter()
        if diameter >= MAX_DIAMETER:
            key = "eps0" if 1.5 / self.N0 < MAX_DIAMETER else "N0"
            raise ConfigError(
                f"{key}: strip chain elements of N0={self.N0}, eps0={self.eps0} have diameter "
                f"{diameter:.4g}, not below {MAX_DIAMETER}"
            )
        for name, value in asdict(self.budgets).items():
            if value <= 0:
                raise ConfigError(f"budgets.{name}: must be positive, got {value}")
        for name, value in asdict(self.settings).items():
            if value <= 0:
                raise ConfigError(f"settings.{name}: must be positive, got {value}")
        if not 0 < self.settings.return_ratio < 1:
            raise ConfigError("settings.return_ratio: must lie in (0, 1)")

    def with_out(self, out: Optional[str]) -> "RunConfig":
        return replace(self, out=out) if out else self

    def to_json(self) -> Dict[str, Any]:
        return {
            "alpha0": [str(self.alpha0.x), str(self.alpha0.y)],
            "N0": self.N0,
            "eps0": self.eps0,
            "stages": self.stages,
            "budgets": asdict(self.budgets),
            "settings": asdict(self.settings),
            "seed": self.seed,
            "out": self.out,
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"{key}: unknown config key")
        values: Dict[str, Any] = {}
        if "alpha0" in doc:
            values["alpha0"] = _parse_alpha(doc["alpha0"])
        for key, kind in (("N0", int), ("eps0", float), ("stages", int), ("seed", int)):
            if key in doc:
                values[key] = _coerce(key, doc[key], kind)
        if "budgets" in doc:
            values["budgets"] = _section("budgets", doc["budgets"], Budgets)
        if "settings" in doc:
            values["settings"] = _section("settings", doc["settings"], SearchSettings)
        if doc.get("out") is not None:
            values["out"] = str(doc["out"])
        return cls(**values)


def _coerce(key: str, value: Any, kind: type) -> Any:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")
    try:
        converted = kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from exc
    if kind is int and converted != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return converted


def _parse_alpha(value: Any) -> RotationVector:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"alpha0: expected a pair of rationals, got {value!r}")
    try:
        x, y = (Fraction(str(v)) for v in value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"alpha0: {exc}") from exc
    return RotationVector.from_fractions(x, y)


def _section(name: str, doc: Any, kind: type) -> Any:
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: expected a JSON object")
    defaults = kind()
    values = {}
    for key, value in doc.items():
        if not hasattr(defaults, key):
            raise ConfigError(f"{name}.{key}: unknown config key")
        values[key] = _coerce(f"{name}.{key}", value, type(getattr(defaults, key)))
    return kind(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config: {path} does not exist") from exc
    except (OSError, ValueError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    return RunConfig.from_json(doc)
