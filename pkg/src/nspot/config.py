"""Run configuration (YAML) with a lossless dict round trip."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .features import POLLUTANTS, FeatureSpec
from .sampler import ChainConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


def _tuple_fields(obj):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, list):
            setattr(obj, f.name, tuple(v))


def _plain(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _section(cls, d, name):
    d = dict(d or {})
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    return cls(**d)


@dataclass
class ReturnLevelConfig:
    horizons_years: tuple = (5.0, 10.0)
    p: tuple = ()
    n_replicates: int = 100
    simulation_length: int | None = None
    pool: str = "global"
    level: float = 0.95
    conditional: bool = True

    def __post_init__(self):
        _tuple_fields(self)
        if self.pool not in ("global", "block"):
            raise ConfigError("return_levels.pool must be 'global' or 'block'")
        if not self.horizons_years and not self.p:
            raise ConfigError("return_levels needs horizons_years or p")
        if any(h <= 0 for h in self.horizons_years) or any(not 0 < q < 1 for q in self.p):
            raise ConfigError("horizons must be positive and p values in (0, 1)")
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be >= 1")


@dataclass
class ScenarioConfig:
    reduction: float = 0.25
    horizons_years: tuple = (5.0, 10.0)
    n_replicates: int = 100
    simulation_length: int | None = None
    lag_resampling: bool = True
    band_halfwidth: float = 0.05
    level: float = 0.95

    def __post_init__(self):
        _tuple_fields(self)
        if not 0.0 <= self.reduction < 1.0:
            raise ConfigError("scenario.reduction must lie in [0, 1)")


@dataclass
class ComparisonConfig:
    method: str = "harmonic"
    truncate: float = 0.1

    def __post_init__(self):
        if self.method not in ("harmonic", "bridge"):
            raise ConfigError("comparison.method must be 'harmonic' or 'bridge'")
        if not 0.0 <= self.truncate < 1.0:
            raise ConfigError("comparison.truncate must lie in [0, 1)")


@dataclass
class DiagnosticsConfig:
    qq_replicates: int = 100
    level: float = 0.95


@dataclass
class CrossValidationConfig:
    train_fraction: float = 0.75
    min_exceedances: int = 1

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("cross_validation.train_fraction must lie in (0, 1)")


@dataclass
class RunConfig:
    data_path: str = "data.csv"
    target_pollutant: str = "no2"
    threshold_quantile: float | None = 0.90
    threshold: float | None = None
    output_dir: str = "output"
    feature_spec: FeatureSpec = field(default_factory=FeatureSpec)
    chain: ChainConfig = field(default_factory=ChainConfig)
    return_levels: ReturnLevelConfig = field(default_factory=ReturnLevelConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    comparison: ComparisonConfig = field(default_factory=ComparisonConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    cross_validation: CrossValidationConfig = field(default_factory=CrossValidationConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def __post_init__(self):
        if self.target_pollutant not in POLLUTANTS:
            raise ConfigError(f"target_pollutant must be one of {POLLUTANTS}")
        if (self.threshold is None) == (self.threshold_quantile is None):
            raise ConfigError("set exactly one of threshold_quantile and threshold")
        if self.threshold_quantile is not None and not 0.0 < self.threshold_quantile < 1.0:
            raise ConfigError("threshold_quantile must lie in (0, 1)")

    def resolve(self, path):
        path = Path(path)
        return path if path.is_absolute() else self.base_dir / path

    @property
    def data_file(self):
        return self.resolve(self.data_path)

    @property
    def output_path(self):
        return self.resolve(self.output_dir)

    def to_dict(self):
        return {
            "data_path": self.data_path,
            "target_pollutant": self.target_pollutant,
            "threshold_quantile": self.threshold_quantile,
            "threshold": self.threshold,
            "output_dir": self.output_dir,
            "feature_spec": self.feature_spec.to_dict(),
            "chain": self.chain.to_dict(),
            "return_levels": _plain(asdict(self.return_levels)),
            "scenario": _plain(asdict(self.scenario)),
            "comparison": asdict(self.comparison),
            "diagnostics": asdict(self.diagnostics),
            "cross_validation": asdict(self.cross_validation),
            "synth": self.synth.to_dict(),
        }

    @classmethod
    def from_dict(cls, d, base_dir=Path(".")):
        d = dict(d or {})
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        if "threshold" in d and d["threshold"] is not None and "threshold_quantile" not in d:
            d["threshold_quantile"] = None
        try:
            return cls(
                data_path=str(d.get("data_path", "data.csv")),
                target_pollutant=d.get("target_pollutant", "no2"),
                threshold_quantile=d.get("threshold_quantile", 0.90),
                threshold=d.get("threshold"),
                output_dir=str(d.get("output_dir", "output")),
                feature_spec=FeatureSpec.from_dict(d.get("feature_spec")),
                chain=ChainConfig.from_dict(d.get("chain")),
                return_levels=_section(ReturnLevelConfig, d.get("return_levels"), "return_levels"),
                scenario=_section(ScenarioConfig, d.get("scenario"), "scenario"),
                comparison=_section(ComparisonConfig, d.get("comparison"), "comparison"),
                diagnostics=_section(DiagnosticsConfig, d.get("diagnostics"), "diagnostics"),
                cross_validation=_section(CrossValidationConfig, d.get("cross_validation"), "cross_validation"),
                synth=SynthConfig.from_dict(d.get("synth")),
                base_dir=Path(base_dir),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text, base_dir=Path(".")):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(data or {}, base_dir)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return RunConfig.from_yaml(text, path.parent)
