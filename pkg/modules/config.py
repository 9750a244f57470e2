"""
Run Configuration
Numeric limits, environment overrides and the YAML run document
"""

import copy
import logging
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

# ===========================================
# ENVIRONMENT
# ===========================================
LOG_LEVEL = os.getenv("PSEUDOGROUP_LOG_LEVEL", "")
ENV_SEED = os.getenv("PSEUDOGROUP_SEED", "")
ENV_THREADS = os.getenv("PSEUDOGROUP_THREADS", "")
ENV_OUTPUT_DIR = os.getenv("PSEUDOGROUP_OUTPUT_DIR", "")

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "config.yaml"


# ===========================================
# NUMERIC LIMITS - SHARED BY ALL ENGINES
# ===========================================
@dataclass(frozen=True)
class NumericTolerances:
    """Immutable numeric defaults"""
    JET_ORDER: int = 32
    MIN_RUN_JET_ORDER: int = 8
    SUBDIVISION_FLOOR: float = 1e-8
    NEWTON_RESIDUAL: float = 1e-12
    POLISH_RESIDUAL: float = 1e-10
    INVERSE_RESIDUAL: float = 1e-12
    INVERSE_MAX_ITERATIONS: int = 64
    REVERSION_SEED_TERMS: int = 16
    HYPERBOLIC_TOL: float = 1e-6
    SEPARATION_ETA: float = 1e-9
    MATCH_FACTOR: float = 10.0
    CONTOUR_BASE_SAMPLES: int = 64
    CONTOUR_MAX_SAMPLES: int = 2 ** 20
    WINDING_ACCEPT: float = 0.25
    SHIFT_RETRIES: int = 8
    INTERPOLATION_GAP: float = 1e-8
    T_ANCHOR: float = 1e-3
    T_MIN: float = 1e-8
    T_MAX: float = 1e-1
    SHRINK: float = 0.9                    # closed sub-domains use 9/10 of the radius
    TORSION_TOL: float = 1e-10
    TORSION_SAMPLES: int = 16
    ROOT_OF_UNITY_MAX_ORDER: int = 64
    UNIT_CIRCLE_TOL: float = 1e-9
    TANGENCY_THRESHOLD: float = 1e-12
    LINEAR_RADIUS: float = 10.0
    BOUNDARY_SAMPLES: int = 64
    MULTIPLE_ROOT_SLOPE: float = 1e-6


TOLERANCES = NumericTolerances()


# ===========================================
# ANALYSIS SECTIONS
# ===========================================
@dataclass
class FixedPointSettings:
    """fixed-points command"""
    region_radius: Optional[float] = None   # defaults to the base disc
    region_center: Tuple[float, float] = (0.0, 0.0)
    tol: float = TOLERANCES.SUBDIVISION_FLOOR


@dataclass
class SplitSettings:
    """split command and perturbation budgets"""
    delta: float = 0.05
    t_min: float = TOLERANCES.T_MIN
    t_max: float = TOLERANCES.T_MAX
    max_steps: int = 16
    max_depth: int = 6
    tau: float = 0.05
    q: Optional[Tuple[float, float]] = None


@dataclass
class HyperbolicSettings:
    """hyperbolic command and orbit budgets"""
    max_syllables: int = 4
    max_abs_exponent: int = 1
    max_words: int = 2000
    conjugacy_representatives: bool = False
    require_in_domain: bool = False
    orbit_depth: int = 6
    max_cells: int = 20000
    separation_n: int = 5
    separation_eps: float = 1e-3
    region_radius: Optional[float] = None


@dataclass
class DomainMapSettings:
    """domain-map command"""
    resolution: int = 64
    closed: bool = False


@dataclass
class ConfigValidation:
    """Result of validating a run document"""
    is_valid: bool
    message: str
    failed_checks: List[str] = field(default_factory=list)


@dataclass
class RunConfig:
    """Parsed run document"""
    f_spec: Dict[str, Any]
    g_spec: Dict[str, Any]
    disc_radius: float = 0.6
    orders: Tuple[Optional[int], Optional[int]] = (None, None)
    alpha: int = 0
    seed: int = 0
    threads: int = 1
    jet_order: int = TOLERANCES.JET_ORDER
    fixed_points: FixedPointSettings = field(default_factory=FixedPointSettings)
    split: SplitSettings = field(default_factory=SplitSettings)
    hyperbolic: HyperbolicSettings = field(default_factory=HyperbolicSettings)
    domain_map: DomainMapSettings = field(default_factory=DomainMapSettings)
    output_dir: str = "results"
    log_level: str = "INFO"
    log_file_enabled: bool = True
    log_console_enabled: bool = True
    source: Optional[str] = None
    unknown_keys: List[str] = field(default_factory=list)

    def to_document(self) -> Dict[str, Any]:
        """Back to the YAML document layout (round trip)"""
        return {
            "run": {"seed": self.seed, "threads": self.threads},
            "generators": {
                "disc_radius": self.disc_radius,
                "orders": {"r": format_order(self.orders[0]), "s": format_order(self.orders[1])},
                "alpha": self.alpha,
                "f": copy.deepcopy(self.f_spec),
                "g": copy.deepcopy(self.g_spec),
            },
            "analysis": {
                "jet_order": self.jet_order,
                "fixed_points": _section_to_dict(self.fixed_points),
                "split": _section_to_dict(self.split),
                "hyperbolic": _section_to_dict(self.hyperbolic),
                "domain_map": _section_to_dict(self.domain_map),
            },
            "output": {"dir": self.output_dir},
            "monitoring": {
                "logging": {
                    "level": self.log_level,
                    "file_enabled": self.log_file_enabled,
                    "console_enabled": self.log_console_enabled,
                }
            },
        }


# ===========================================
# PARSING HELPERS
# ===========================================
def parse_order(value: Any) -> Optional[int]:
    """None means infinite order"""
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in ("inf", ".inf", "infinity", "∞"):
            return None
        return int(value)
    if isinstance(value, float):
        if math.isinf(value):
            return None
        if not value.is_integer():
            raise ValueError(f"order must be an integer, got {value}")
        return int(value)
    return int(value)


def format_order(value: Optional[int]) -> Any:
    return "inf" if value is None else int(value)


def parse_complex(value: Any) -> complex:
    """Scalar, [re, im] pair or a Python complex literal"""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex pair needs two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def format_complex(value: complex) -> List[float]:
    value = complex(value)
    return [float(value.real), float(value.imag)]


def _section_to_dict(section: Any) -> Dict[str, Any]:
    out = {}
    for f in fields(section):
        value = getattr(section, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def _section_from_dict(cls, data: Optional[Dict[str, Any]], name: str, unknown: List[str]):
    if not data:
        return cls()
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            unknown.append(f"analysis.{name}.{key}")
            continue
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


# ===========================================
# LOADING
# ===========================================
def load_document(path: Path) -> Dict[str, Any]:
    """Read a YAML (or JSON) run document"""
    with open(path, "r") as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return data


def config_from_document(data: Dict[str, Any], source: Optional[str] = None) -> RunConfig:
    """Build a RunConfig; raises KeyError/ValueError/TypeError on malformed input"""
    unknown: List[str] = []
    run = data.get("run") or {}
    generators = data["generators"]
    analysis = data.get("analysis") or {}
    orders = generators.get("orders") or {}
    monitoring = ((data.get("monitoring") or {}).get("logging")) or {}

    for key in analysis:
        if key not in ("jet_order", "fixed_points", "split", "hyperbolic", "domain_map"):
            unknown.append(f"analysis.{key}")

    cfg = RunConfig(
        f_spec=dict(generators["f"]),
        g_spec=dict(generators["g"]),
        disc_radius=float(generators.get("disc_radius", 0.6)),
        orders=(parse_order(orders.get("r")), parse_order(orders.get("s"))),
        alpha=int(generators.get("alpha", 0)),
        seed=int(run.get("seed", 0)),
        threads=int(run.get("threads", 1)),
        jet_order=int(analysis.get("jet_order", TOLERANCES.JET_ORDER)),
        fixed_points=_section_from_dict(FixedPointSettings, analysis.get("fixed_points"), "fixed_points", unknown),
        split=_section_from_dict(SplitSettings, analysis.get("split"), "split", unknown),
        hyperbolic=_section_from_dict(HyperbolicSettings, analysis.get("hyperbolic"), "hyperbolic", unknown),
        domain_map=_section_from_dict(DomainMapSettings, analysis.get("domain_map"), "domain_map", unknown),
        output_dir=str((data.get("output") or {}).get("dir", "results")),
        log_level=str(monitoring.get("level", "INFO")).upper(),
        log_file_enabled=bool(monitoring.get("file_enabled", True)),
        log_console_enabled=bool(monitoring.get("console_enabled", True)),
        source=source,
        unknown_keys=unknown,
    )
    return apply_env_overrides(cfg)


def apply_env_overrides(cfg: RunConfig) -> RunConfig:
    """PSEUDOGROUP_* variables win over the document"""
    if LOG_LEVEL:
        cfg.log_level = LOG_LEVEL.upper()
    if ENV_SEED:
        cfg.seed = int(ENV_SEED)
    if ENV_THREADS:
        cfg.threads = int(ENV_THREADS)
    if ENV_OUTPUT_DIR:
        cfg.output_dir = ENV_OUTPUT_DIR
    return cfg


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """Load the run document at ``path`` (default config/config.yaml)"""
    config_path = Path(path) if path else DEFAULT_CONFIG_PATH
    data = load_document(config_path)
    cfg = config_from_document(data, source=str(config_path))
    logger.debug(f"Loaded run config from {config_path}")
    return cfg


def write_run_config(cfg: RunConfig, path: Path) -> Path:
    """Write the document form of ``cfg`` as YAML"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(cfg.to_document(), f, sort_keys=True, default_flow_style=False)
    return path
