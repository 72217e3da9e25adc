"""Neighborhood samplers around a probe instance.

``sample_normal`` draws from an isotropic Gaussian. ``sample_selected``
filters the same Gaussian stream through domain membership, keeping draws in
the order they were produced. Points are pulled from the generator in chunks,
which yields the same stream as drawing them one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from manifold_explain.errors import LowAcceptanceError, ValidationError


@dataclass(frozen=True)
class SamplerConfig:
    sigma: float = 1.5
    m: int = 1000
    max_attempt_factor: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("sigma must be > 0")
        if int(self.m) != self.m or self.m <= 0:
            raise ValidationError("m must be a positive integer")
        if int(self.max_attempt_factor) != self.max_attempt_factor or self.max_attempt_factor < 1:
            raise ValidationError("max_attempt_factor must be an integer >= 1")


def _probe(x_star):
    x = np.asarray(x_star, dtype=float)
    if x.ndim != 1:
        raise ValidationError("probe must be a single feature vector")
    return x


def gaussian_stream(x_star, config: SamplerConfig, chunk=None):
    """Yield successive ``(k, d)`` chunks of N(x_star, sigma^2 I) draws."""
    x = _probe(x_star)
    rng = np.random.default_rng(config.seed)
    chunk = chunk or max(config.m, 256)
    while True:
        yield x + config.sigma * rng.standard_normal((chunk, len(x)))


def sample_normal(x_star, config: SamplerConfig) -> np.ndarray:
    """``config.m`` i.i.d. draws from N(x_star, sigma^2 I), shape ``(m, d)``."""
    x = _probe(x_star)
    rng = np.random.default_rng(config.seed)
    return x + config.sigma * rng.standard_normal((config.m, len(x)))


def sample_selected(x_star, config: SamplerConfig, shape, return_attempts=False):
    """Rejection-sample ``config.m`` Gaussian draws that fall inside ``shape``.

    ``shape`` needs a vectorized ``contains``. Raises
    :class:`LowAcceptanceError` when the ``max_attempt_factor * m`` budget
    runs out first. With ``return_attempts`` the number of draws consumed up
    to the last acceptance is returned as well.
    """
    budget = config.max_attempt_factor * config.m
    kept = []
    n_kept = 0
    attempts = 0
    for block in gaussian_stream(x_star, config):
        block = block[: budget - attempts]
        inside = np.asarray(shape.contains(block), dtype=bool)
        hits = np.nonzero(inside)[0]
        need = config.m - n_kept
        if len(hits) >= need:
            kept.append(block[hits[:need]])
            attempts += int(hits[need - 1]) + 1
            out = np.concatenate(kept)
            return (out, attempts) if return_attempts else out
        kept.append(block[hits])
        n_kept += len(hits)
        attempts += len(block)
        if attempts >= budget:
            raise LowAcceptanceError(n_kept, attempts, config.m)
    raise AssertionError("unreachable")
