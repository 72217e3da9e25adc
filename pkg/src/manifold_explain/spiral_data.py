"""Spiral toy dataset: generation, splitting and CSV persistence.

Samples lie on the Archimedean spiral ``r = theta`` with isotropic Gaussian
noise on the Cartesian coordinates; the target is the arc length of the
spiral from the origin up to ``theta``.

Randomness comes from numpy's ``Generator`` with the PCG64 bit generator
(``numpy.random.default_rng(seed)``), so a seed fully determines a dataset.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from manifold_explain.errors import DomainError, ParseError, ValidationError

CSV_HEADER = ("x1", "x2", "y", "theta")


def spiral_target(theta):
    """Arc length of ``r = theta`` from 0 to ``theta``.

    Accepts a scalar or an array. ``asinh`` is evaluated as
    ``log(theta + sqrt(1 + theta**2))``, which is stable for ``theta >= 0``.
    """
    t = np.asarray(theta, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("spiral_target requires theta >= 0")
    root = np.sqrt(1.0 + t * t)
    out = 0.5 * (t * root + np.log(t + root))
    if out.ndim == 0:
        return float(out)
    return out


def spiral_point(theta):
    """Noise-free Cartesian point(s) on the spiral."""
    t = np.asarray(theta, dtype=float)
    return np.stack([t * np.cos(t), t * np.sin(t)], axis=-1)


class SpiralSample(NamedTuple):
    x1: float
    x2: float
    y: float
    theta: float


@dataclass(frozen=True)
class GenerationConfig:
    n: int = 80_000
    theta_min: float = 0.0
    theta_max: float = 8 * math.pi
    noise_sigma: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n <= 0:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")
        if not self.theta_min < self.theta_max:
            raise ValidationError("theta_min must be smaller than theta_max")
        if self.theta_min < 0:
            raise ValidationError("theta_min must be >= 0 (arc length is measured from the origin)")
        if not self.noise_sigma >= 0:
            raise ValidationError("noise_sigma must be >= 0")


def _readonly(a, shape_tail=()):
    a = np.array(a, dtype=float, copy=True)
    if a.size == 0:
        a = a.reshape((0, *shape_tail))
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column store of spiral samples.

    ``x`` has shape ``(n, feature_dim)``; ``y`` and ``theta`` have shape ``(n,)``.
    """

    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    feature_dim: int = field(default=2)

    def __post_init__(self):
        x = _readonly(self.x, (self.feature_dim,))
        if x.ndim != 2 or x.shape[1] != self.feature_dim:
            raise ValidationError(f"x must have shape (n, {self.feature_dim}), got {x.shape}")
        y = _readonly(self.y)
        theta = _readonly(self.theta)
        if y.shape != (len(x),) or theta.shape != (len(x),):
            raise ValidationError("x, y and theta must have the same number of rows")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "theta", theta)

    def __len__(self):
        return len(self.y)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_dim == other.feature_dim
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.theta, other.theta)
        )

    @property
    def samples(self) -> Iterator[SpiralSample]:
        for (x1, x2), y, t in zip(self.x, self.y, self.theta):
            yield SpiralSample(float(x1), float(x2), float(y), float(t))

    def subset(self, index) -> "Dataset":
        return Dataset(self.x[index], self.y[index], self.theta[index], self.feature_dim)

    @classmethod
    def empty(cls, feature_dim=2):
        return cls(np.empty((0, feature_dim)), np.empty(0), np.empty(0), feature_dim)


def generate_dataset(config: GenerationConfig) -> Dataset:
    """Draw ``config.n`` noisy spiral samples.

    All theta values are drawn first, then the noise matrix, so the theta
    sequence for a given seed does not depend on ``noise_sigma``.
    """
    rng = np.random.default_rng(config.seed)
    theta = rng.uniform(config.theta_min, config.theta_max, size=config.n)
    noise = rng.normal(0.0, 1.0, size=(config.n, 2)) * config.noise_sigma
    x = spiral_point(theta) + noise
    return Dataset(x, spiral_target(theta), theta)


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle and partition into (train, test); ``|train| = round(n * train_fraction)``."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(dataset)
    n_train = int(math.floor(n * train_fraction + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:])


def write_csv(dataset: Dataset, path) -> None:
    """Write ``x1,x2,y,theta`` rows with 17 significant digits (exact round trip)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for (x1, x2), y, t in zip(dataset.x.tolist(), dataset.y.tolist(), dataset.theta.tolist()):
            fh.write(f"{x1!r},{x2!r},{y!r},{t!r}\n")


def read_csv(path) -> Dataset:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if tuple(c.strip() for c in row) != CSV_HEADER:
                    raise ParseError(f"expected header {','.join(CSV_HEADER)!r}, got {','.join(row)!r}", lineno)
                continue
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", lineno)
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(f"non-numeric field ({exc})", lineno) from None
            rows.append(values)
    if not rows:
        return Dataset.empty()
    arr = np.array(rows, dtype=float)
    return Dataset(arr[:, :2], arr[:, 2], arr[:, 3])
