"""Experiment configuration: a TOML file plus command-line overrides."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..addr import CacheGeometry, LevelGeometry
from ..timing import LatencyParams

SCENARIO_NAMES = ("hist", "tpr", "evset-classic", "evset-rand", "ppp", "clock", "covert")
SCATTER_ONLY = ("evset-rand", "ppp")
CLASSIC_ONLY = ("evset-classic", "covert")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeometryConfig:
    l1_sets: int | None = None
    l1_ways: int | None = None
    l2_sets: int | None = None
    l2_ways: int | None = None
    llc_sets: int | None = None
    llc_ways: int | None = None
    llc_slices: int | None = None

    def build(self, mode: str) -> CacheGeometry:
        if mode == "classic":
            d = CacheGeometry.classic_default()
            l1, l2, l3 = d.levels
            return CacheGeometry((
                LevelGeometry("L1", self.l1_sets or l1.sets, self.l1_ways or l1.ways),
                LevelGeometry("L2", self.l2_sets or l2.sets, self.l2_ways or l2.ways),
                LevelGeometry("LLC", self.llc_sets or l3.sets, self.llc_ways or l3.ways,
                              slices=self.llc_slices or l3.slices, inclusive=True,
                              private=False),
            ))
        if any(v is not None for v in (self.llc_sets, self.llc_ways, self.llc_slices)):
            raise ConfigError("the scatter hierarchy has no llc_* level; use l2_*")
        d = CacheGeometry.scatter_default()
        l1, l2 = d.levels
        return CacheGeometry((
            LevelGeometry("L1", self.l1_sets or l1.sets, self.l1_ways or l1.ways),
            LevelGeometry("L2", self.l2_sets or l2.sets, self.l2_ways or l2.ways,
                          inclusive=True, private=False),
        ))


@dataclass(frozen=True)
class LatencyConfig:
    l1_hit: int = 4
    l2_hit: int = 12
    llc_hit: int = 40
    miss: int = 200
    penalty_waw: int = 100
    clock_period: int = 100_000
    clock_amplitude: int = 30
    noise_sigma: float = 15.0
    serialize_cost: int = 250
    fence_cost: int = 30
    flush_cost: int = 50
    read_clock: bool = False
    # None: noiseless for the randomized-cache scenarios, noisy otherwise
    noiseless: bool | None = None

    def build(self, scenario: str) -> LatencyParams:
        d = asdict(self)
        quiet = d.pop("noiseless")
        p = LatencyParams(**d)
        if quiet is None:
            quiet = scenario in SCATTER_ONLY
        return p.quiet() if quiet else p


@dataclass(frozen=True)
class Params:
    """Scenario parameters; ``None`` picks the scenario's default."""
    reps: int | None = None
    th: float = 10.0
    p_e: float = 0.9
    division: int | None = None
    runs: int | None = None
    iterations: int = 3000
    trials: int = 100
    reps_list: tuple[int, ...] = (2, 6, 10, 20, 30, 50)
    mem_size: int | None = None
    variant: str = "performance"
    ratio_trials: int = 200
    eval_trials: int = 1000
    prime_fraction: float = 0.5
    max_rounds: int = 2000
    periods: int = 100
    avg_window: int = 64
    delta_window: int = 16
    edge_th: float = 15.0
    divisions: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)
    message_bytes: int = 1024
    repetitions: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "hist"
    seed: int = 0
    cache: str | None = None
    out_dir: str = "out"
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    params: Params = field(default_factory=Params)

    def validate(self) -> "ExperimentConfig":
        if self.scenario not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"choose from {', '.join(SCENARIO_NAMES)}")
        if self.cache not in (None, "classic", "scatter"):
            raise ConfigError(f"cache must be 'classic' or 'scatter', not {self.cache!r}")
        if self.scenario in SCATTER_ONLY and self.cache == "classic":
            raise ConfigError(f"scenario {self.scenario} needs cache = 'scatter'")
        if self.scenario in CLASSIC_ONLY and self.cache == "scatter":
            raise ConfigError(f"scenario {self.scenario} needs cache = 'classic'")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        p = self.params
        if p.reps is not None and (p.reps < 2 or p.reps % 2):
            raise ConfigError("reps must be even and >= 2")
        if any(r < 2 or r % 2 for r in p.reps_list):
            raise ConfigError("every reps_list entry must be even and >= 2")
        if p.division is not None and p.division < 1:
            raise ConfigError("division must be >= 1")
        if not 0 < p.p_e <= 1:
            raise ConfigError("p_e must lie in (0, 1]")
        if p.variant not in ("performance", "coverage"):
            raise ConfigError("variant must be 'performance' or 'coverage'")
        try:
            self.geometry.build(self.mode)
            self.latency.build(self.scenario)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return self

    @property
    def mode(self) -> str:
        if self.cache:
            return self.cache
        return "scatter" if self.scenario in SCATTER_ONLY else "classic"

    def to_dict(self) -> dict:
        return asdict(self)


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(v)
        _check_type(name, k, v, known[k].default)
        kw[k] = v
    return cls(**kw)


def _check_type(section, key, value, default):
    if default is None:
        want = (bool,) if key == "noiseless" else (int,)
    elif isinstance(default, bool):
        want = (bool,)
    elif isinstance(default, float):
        want = (int, float)
    else:
        want = (type(default),)
    ok = isinstance(value, want) and not (isinstance(value, bool) and bool not in want)
    if isinstance(value, tuple):
        ok = ok and all(isinstance(x, int) and not isinstance(x, bool) for x in value)
    if not ok:
        raise ConfigError(f"[{section}] {key}: unexpected value {value!r}")


def from_dict(data: dict) -> ExperimentConfig:
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kw = {k: v for k, v in data.items() if k not in ("geometry", "latency", "params")}
    for k, v in kw.items():
        want = int if k == "seed" else str
        if not isinstance(v, want) or isinstance(v, bool):
            raise ConfigError(f"{k}: unexpected value {v!r}")
    kw["geometry"] = _section(GeometryConfig, data.get("geometry", {}), "geometry")
    kw["latency"] = _section(LatencyConfig, data.get("latency", {}), "latency")
    kw["params"] = _section(Params, data.get("params", {}), "params")
    return ExperimentConfig(**kw)


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a TOML file (optional) and apply overrides.

    Override keys: seed, scenario, out_dir, cache at the top level and
    reps, th, p_e, division inside ``params``. ``None`` values are ignored.
    """
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"invalid TOML in {path}: {e}") from None
    cfg = from_dict(data)
    top = {k: v for k, v in overrides.items()
           if k in ("seed", "scenario", "out_dir", "cache") and v is not None}
    par = {k: v for k, v in overrides.items()
           if k in ("reps", "th", "p_e", "division") and v is not None}
    if set(overrides) - {"seed", "scenario", "out_dir", "cache", "reps", "th", "p_e", "division"}:
        raise ConfigError("unsupported override")
    cfg = replace(cfg, **top, params=replace(cfg.params, **par))
    return cfg.validate()
