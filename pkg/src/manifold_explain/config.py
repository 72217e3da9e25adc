"""Run configuration loaded from an INI file with a single ``[run]`` section.

Example::

    [run]
    seed = 0
    min_samples_leaf = 40
    sigma = 1.5
    features = identity(0); identity(1); product(0,1):5
    huber_delta = inf
    solver_scale = absolute
    probes = x1: 0,14.5; x2: 10,10

Keys not given keep their defaults. Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace

from manifold_explain.bench import ROBUSTNESS_PROBES, STUDY_PROBES, BenchConfig
from manifold_explain.errors import ValidationError
from manifold_explain.sampling import SamplerConfig
from manifold_explain.spiral_data import GenerationConfig
from manifold_explain.surrogate import FeatureMap, SolverConfig
from manifold_explain.tree import TreeParams

SECTION = "run"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    # data
    n: int = 80_000
    theta_min: float = 0.0
    theta_max: float = 8 * math.pi
    noise_sigma: float = 0.4
    train_fraction: float = 0.9
    # black box
    max_depth: int | None = 16
    min_samples_leaf: int = 40
    min_samples_split: int = 2
    # domain
    alpha: float = 1.0
    # sampler
    sigma: float = 1.5
    m: int = 1000
    max_attempt_factor: int = 100
    # surrogate
    features: tuple = ("identity(0)", "identity(1)")
    penalty_per_sample: float = 0.01
    huber_delta: float = 1.35
    solver_scale: str = "concomitant"
    tol: float = 1e-7
    max_iter: int = 20_000
    # evaluation
    eval_radius: float | None = None
    eval_n: int = 2000
    repeat: int = 1
    # probes as (name, (x1, x2)) pairs
    probes: tuple = tuple(STUDY_PROBES.items())
    robustness_probes: tuple = tuple(ROBUSTNESS_PROBES.items())
    out_dir: str = "out"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        if self.penalty_per_sample < 0:
            raise ValidationError("penalty_per_sample must be >= 0")
        if self.eval_radius is not None and not self.eval_radius > 0:
            raise ValidationError("eval_radius must be > 0")
        if self.eval_n < 2:
            raise ValidationError("eval_n must be >= 2")
        if self.repeat < 1:
            raise ValidationError("repeat must be >= 1")
        if not self.probes:
            raise ValidationError("at least one probe is required")
        # build the parts once so invalid values fail at load time
        self.generation()
        self.tree()
        self.sampler()
        self.solver()
        self.feature_map()

    def generation(self) -> GenerationConfig:
        return GenerationConfig(self.n, self.theta_min, self.theta_max, self.noise_sigma, self.seed)

    def tree(self) -> TreeParams:
        return TreeParams(self.max_depth, self.min_samples_leaf, self.min_samples_split)

    def sampler(self, seed: int | None = None) -> SamplerConfig:
        return SamplerConfig(self.sigma, self.m, self.max_attempt_factor, self.seed if seed is None else seed)

    def solver(self) -> SolverConfig:
        return SolverConfig(huber_delta=self.huber_delta, tol=self.tol, max_iter=self.max_iter, scale=self.solver_scale)

    def feature_map(self) -> FeatureMap:
        return FeatureMap.parse(self.features, default_lam=self.penalty_per_sample * self.m)

    def bench(self) -> BenchConfig:
        return BenchConfig(
            data=self.generation(),
            train_fraction=self.train_fraction,
            tree=self.tree(),
            alpha=self.alpha,
            sampler=self.sampler(),
            features=tuple(self.features),
            penalty_per_sample=self.penalty_per_sample,
            solver=self.solver(),
            eval_radius=self.eval_radius,
            eval_n=self.eval_n,
            probes=dict(self.probes),
            robustness_probes=dict(self.robustness_probes),
            repeat=self.repeat,
            seed=self.seed,
        )


def parse_point(text: str) -> tuple:
    """``"0.0,14.5"`` -> ``(0.0, 14.5)``."""
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"cannot parse point {text!r}; expected 'x1,x2'") from None
    if len(vals) != 2:
        raise ValidationError(f"point {text!r} must have two coordinates")
    return vals


def parse_probes(text: str) -> tuple:
    """``"x1: 0,14.5; x2: 10,10"`` -> ``(("x1", (0.0, 14.5)), ("x2", (10.0, 10.0)))``."""
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        name, sep, point = item.partition(":")
        if not sep or not name.strip():
            raise ValidationError(f"probe entry {item!r} must look like 'name: x1,x2'")
        out.append((name.strip(), parse_point(point)))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ValidationError(f"probe names must be unique, got {names}")
    return tuple(out)


def _parse_value(name, raw, default):
    raw = raw.strip()
    try:
        if name == "features":
            items = tuple(s.strip() for s in raw.split(";") if s.strip())
            if not items:
                raise ValueError("empty feature list")
            return items
        if name in ("max_depth", "eval_radius") and raw.lower() in ("none", "unlimited", ""):
            return None
        if name in ("solver_scale", "out_dir"):
            return raw
        if name in ("probes", "robustness_probes"):
            return parse_probes(raw)
        if name in ("max_depth", "eval_radius"):
            return int(raw) if name == "max_depth" else float(raw)
        if isinstance(default, int):
            return int(raw, 0)
        return float(raw)
    except ValueError as exc:
        raise ValidationError(f"config key {name!r}: cannot parse {raw!r} ({exc})") from None


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (optional) and apply ``overrides`` (already typed values)."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ValidationError(f"malformed config {path}: {exc}") from None
        extra = [s for s in parser.sections() if s != SECTION]
        if extra:
            raise ValidationError(f"unknown config section(s) {extra}; expected [{SECTION}]")
        if parser.has_section(SECTION):
            defaults = {f.name: f.default for f in fields(RunConfig)}
            for key, raw in parser.items(SECTION):
                if key not in defaults:
                    raise ValidationError(f"unknown config key {key!r}")
                values[key] = _parse_value(key, raw, defaults[key])
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return replace(RunConfig(), **values) if values else RunConfig()
