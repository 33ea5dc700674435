"""Flat run configuration shared by the CLI commands.

Values are resolved in layers, later layers winning:
defaults < preset < config file < command-line flags.
"""
from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError
from .evolve import GaConfig
from .graphcore import ImportanceConfig
from .spectra import PREPROCESS_PRESETS, PreprocessConfig, SplitSpec

# gamma, q, reinsertion per named configuration
PRESETS = {
    "ganet-c": {"gamma": 1.0, "q": 3, "reinsertion": "pure"},
    "ganet-e": {"gamma": 1.0, "q": 5, "reinsertion": "ordered"},
    "ganet-g": {"gamma": 1.0, "q": 5, "reinsertion": "pure"},
    "ganet-k": {"gamma": 2.0, "q": 3, "reinsertion": "pure"},
}


@dataclass
class RunConfig:
    preset: str | None = None
    metric: str = "euclidean"
    measure: str = "degree"
    gamma: float = 1.0
    q: int = 3
    q_test: int | None = None
    reinsertion: str = "pure"
    selection: str = "tournament"
    tournament_size: int = 2
    crossover: str = "two_point"
    crossover_rate: float = 0.9
    mutation_rate: float | None = None
    population_size: int = 100
    generations: int = 100
    pagerank_damping: float = 0.85
    pagerank_tol: float = 1e-10
    pagerank_max_iter: int = 1000
    seed: int = 0
    train_fraction: float = 93 / 159
    validation_fraction: float = 33 / 159
    test_fraction: float = 33 / 159
    pipeline: str | None = None
    steps: tuple = PreprocessConfig().step_order
    amide_window: tuple = (1630.0, 1660.0)
    savgol_window: int = 9
    savgol_degree: int = 2
    derivative_order: int = 1
    truncate_range: tuple = (900.0, 1800.0)
    positive_label: str = "ASD"

    # ------------------------------------------------------------ derived
    def sub_seed(self, stream: str) -> int:
        return derive_seed(self.seed, stream)

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(
            amide_window=self.amide_window,
            savgol_window=self.savgol_window,
            savgol_degree=self.savgol_degree,
            derivative_order=self.derivative_order,
            truncate_range=self.truncate_range,
            step_order=self.steps,
        )

    def ga_config(self) -> GaConfig:
        return GaConfig(
            population_size=self.population_size,
            generations=self.generations,
            selection=self.selection,
            tournament_size=self.tournament_size,
            crossover=self.crossover,
            crossover_rate=self.crossover_rate,
            mutation_rate=self.mutation_rate,
            reinsertion=self.reinsertion,
            q=self.q,
            seed=self.sub_seed("ga"),
        )

    def importance_config(self) -> ImportanceConfig:
        return ImportanceConfig(
            measure=self.measure,
            pagerank_damping=self.pagerank_damping,
            pagerank_tol=self.pagerank_tol,
            pagerank_max_iter=self.pagerank_max_iter,
            gamma=self.gamma,
            q_test=self.q_test,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.validation_fraction, self.test_fraction,
                         seed=self.sub_seed("split"))

    def validate(self) -> "RunConfig":
        if self.metric not in ("euclidean", "cosine"):
            raise ConfigError(f"metric must be euclidean or cosine, got {self.metric!r}")
        self.preprocess_config()
        self.ga_config()
        self.importance_config()
        self.split_spec()
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("steps", "amide_window", "truncate_range"):
            d[k] = list(d[k])
        return d


def derive_seed(seed: int, stream: str) -> int:
    """Independent, reproducible seed for a named randomness stream."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stream.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT = {"q", "tournament_size", "population_size", "generations", "pagerank_max_iter",
        "seed", "savgol_window", "savgol_degree", "derivative_order"}
_OPT_INT = {"q_test"}
_FLOAT = {"gamma", "crossover_rate", "pagerank_damping", "pagerank_tol",
          "train_fraction", "validation_fraction", "test_fraction"}
_OPT_FLOAT = {"mutation_rate"}
_PAIR = {"amide_window", "truncate_range"}
_OPT_STR = {"preset", "pipeline"}


def coerce(key: str, value):
    """Convert a raw string (or already-typed value) for ``key``."""
    key = key.strip().replace("-", "_")
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if not isinstance(value, str):
        return key, value
    raw = value.strip()
    try:
        if key in _OPT_INT or key in _OPT_FLOAT or key in _OPT_STR:
            if raw.lower() in ("", "none", "null"):
                return key, None
        if key in _INT or key in _OPT_INT:
            return key, int(raw)
        if key in _FLOAT or key in _OPT_FLOAT:
            return key, float(raw)
        if key in _PAIR:
            parts = [float(p) for p in raw.replace(":", ",").split(",") if p.strip()]
            if len(parts) != 2:
                raise ValueError("expected two numbers")
            return key, tuple(parts)
        if key == "steps":
            if raw.lower() in ("", "none"):
                return key, ()
            return key, tuple(p.strip() for p in raw.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value {value!r} for {key}: {exc}") from None
    return key, raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read config file ({exc.strerror})") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        k, v = coerce(k, v)
        out[k] = v
    return out


def _expand(layer: dict) -> dict:
    layer = dict(layer)
    pipe = layer.get("pipeline")
    if pipe is not None and "steps" not in layer:
        if pipe not in PREPROCESS_PRESETS:
            raise ConfigError(
                f"unknown pipeline {pipe!r}; choose from {sorted(PREPROCESS_PRESETS)}"
            )
        layer["steps"] = PREPROCESS_PRESETS[pipe]
    return layer


def resolve(file_values: dict | None = None, flags: dict | None = None) -> RunConfig:
    """Merge the layers into a validated :class:`RunConfig`."""
    file_values = _expand(file_values or {})
    flags = _expand({k: v for k, v in (flags or {}).items() if v is not None})
    preset = flags.get("preset", file_values.get("preset"))
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
        values["preset"] = preset
    values.update(file_values)
    values.update(flags)
    cfg = RunConfig(**dict(coerce(k, v) for k, v in values.items()))
    return cfg.validate()
