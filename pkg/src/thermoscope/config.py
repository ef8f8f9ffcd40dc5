"""Run configuration: one JSON file holding every knob a command needs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .acoustics import AcousticConfig, RingGeometry
from .cnn import CnnConfig, TrainConfig
from .dataset import SyntheticConfig
from .errors import InvalidArgumentError
from .evaluation import DEFAULT_N_PTS, DEFAULT_N_RX
from .signals import ExcitationSpec
from .thermal import ThermalConfig


def _plain(obj):
    """JSON-ready copy of a (nested) dataclass with tuples turned into lists."""
    if hasattr(obj, "__dataclass_fields__"):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgumentError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise InvalidArgumentError(f"{where}: {exc}") from exc


def acoustic_from_dict(data, where="acoustic"):
    data = dict(data or {})
    if "excitation" in data:
        data["excitation"] = _build(ExcitationSpec, data["excitation"], f"{where}.excitation")
    return _build(AcousticConfig, data, where)


@dataclass(frozen=True)
class SweepGrid:
    n_pts: tuple = DEFAULT_N_PTS
    n_rx: tuple = DEFAULT_N_RX
    folds: int = 10
    group_by_run: bool = False
    decimation: int = 2

    def __post_init__(self):
        object.__setattr__(self, "n_pts", tuple(int(v) for v in self.n_pts))
        object.__setattr__(self, "n_rx", tuple(int(v) for v in self.n_rx))
        if not self.n_pts or not self.n_rx:
            raise InvalidArgumentError("sweep grid must not be empty")
        if any(v < 1 for v in self.n_pts):
            raise InvalidArgumentError("n_pts values must be positive")
        if any(v < 1 or v % 2 == 0 for v in self.n_rx):
            raise InvalidArgumentError("n_rx values must be odd and positive")
        if self.folds < 2:
            raise InvalidArgumentError("folds must be >= 2")
        if self.decimation < 1:
            raise InvalidArgumentError("decimation must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    n_runs: int = 5
    ramp_time: float = 4 * 3600.0
    ramp_jitter: float = 0.10
    material_jitter: float = 0.05
    thermocouple_noise: float = 0.5
    thermal: ThermalConfig = field(default_factory=ThermalConfig)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    geometry: RingGeometry = field(default_factory=RingGeometry)
    cnn: CnnConfig = field(default_factory=CnnConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepGrid = field(default_factory=SweepGrid)
    dataset: str = "dataset"
    out: str = "out"

    def synthetic(self) -> SyntheticConfig:
        return SyntheticConfig(n_runs=self.n_runs, seed=self.seed, thermal=self.thermal, acoustic=self.acoustic,
                               geometry=self.geometry, ramp_time=self.ramp_time, ramp_jitter=self.ramp_jitter,
                               material_jitter=self.material_jitter, thermocouple_noise=self.thermocouple_noise)

    def to_dict(self):
        return _plain(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        nested = {
            "thermal": lambda d: _build(ThermalConfig, d, "thermal"),
            "acoustic": acoustic_from_dict,
            "geometry": lambda d: _build(RingGeometry, d, "geometry"),
            "cnn": lambda d: _build(CnnConfig, d, "cnn"),
            "training": lambda d: _build(TrainConfig, d, "training"),
            "sweep": lambda d: _build(SweepGrid, d, "sweep"),
        }
        for key, make in nested.items():
            if key in data:
                data[key] = make(data[key])
        return _build(cls, data, "config")

    def with_overrides(self, seed=None, n_rx=None, n_pts=None, folds=None, out=None, dataset=None):
        cfg = self
        sweep = cfg.sweep
        if n_rx is not None:
            sweep = replace(sweep, n_rx=tuple(n_rx))
        if n_pts is not None:
            sweep = replace(sweep, n_pts=tuple(n_pts))
        if folds is not None:
            sweep = replace(sweep, folds=folds)
        changes = {"sweep": sweep}
        if seed is not None:
            changes["seed"] = seed
        if out is not None:
            changes["out"] = str(out)
        if dataset is not None:
            changes["dataset"] = str(dataset)
        return replace(cfg, **changes)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InvalidArgumentError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: invalid JSON ({exc})") from exc
    return RunConfig.from_dict(data)


def save_config(config: RunConfig, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
