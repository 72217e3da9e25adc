"""One local explanation: sample, query the black box, fit the surrogate."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from manifold_explain import metrics
from manifold_explain.errors import ValidationError
from manifold_explain.sampling import SamplerConfig, sample_normal, sample_selected
from manifold_explain.spiral_data import Dataset, spiral_point, spiral_target
from manifold_explain.surrogate import Coefficients, FeatureMap, SolverConfig, apply_map, fit, predict_surrogate

log = logging.getLogger(__name__)

STRATEGIES = ("normal", "selected")

# Surrogate fits in explanations estimate the residual scale jointly (see SolverConfig).
EXPLAIN_SOLVER = SolverConfig(scale="concomitant")


def default_feature_map(m: int, dim: int = 2) -> FeatureMap:
    """Identity properties with the benchmark penalty ``0.01 * m`` on each."""
    return FeatureMap.identity_map(dim, lam=0.01 * m)


@dataclass(frozen=True)
class ExplanationRequest:
    probe: tuple
    strategy: str = "selected"
    sampler: SamplerConfig = SamplerConfig()
    fmap: FeatureMap | None = None
    solver: SolverConfig = EXPLAIN_SOLVER

    def __post_init__(self):
        object.__setattr__(self, "probe", tuple(float(v) for v in self.probe))
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.fmap is None:
            object.__setattr__(self, "fmap", default_feature_map(self.sampler.m, len(self.probe)))


@dataclass(frozen=True)
class Explanation:
    probe: tuple
    strategy: str
    intercept: float
    importances: dict
    fit_mse: float
    samples_used: int
    seed: int
    converged: bool
    kkt_residual: float
    config: dict
    coefficients: Coefficients = field(repr=False)
    fmap: FeatureMap = field(repr=False)
    samples: np.ndarray = field(repr=False)
    attempts: int = 0
    eval_mse: float | None = None
    eval_r2: float | None = None

    def predict(self, x):
        return predict_surrogate(self.coefficients, self.fmap, x)

    def to_dict(self):
        out = {
            "probe": list(self.probe),
            "strategy": self.strategy,
            "importances": dict(self.importances),
            "intercept": self.intercept,
            "fit_mse": self.fit_mse,
            "samples_used": self.samples_used,
            "attempts": self.attempts,
            "converged": self.converged,
            "kkt_residual": self.kkt_residual,
            "seed": self.seed,
            "config": self.config,
        }
        if self.eval_mse is not None:
            out["eval"] = {"mse": self.eval_mse, "r2": self.eval_r2}
        return out

    def with_eval(self, mse, r2):
        return replace(self, eval_mse=float(mse), eval_r2=float(r2))


def _config_echo(request: ExplanationRequest, coeffs: Coefficients):
    solver = asdict(request.solver)
    solver["huber_delta"] = _json_float(solver["huber_delta"])
    return {
        "sampler": asdict(request.sampler),
        "solver": solver,
        "feature_map": request.fmap.specs,
        "effective_delta": _json_float(coeffs.delta),
        "residual_scale": coeffs.scale,
    }


def _json_float(v):
    return v if math.isfinite(v) else str(v)


def explain(model: Callable, shape, request: ExplanationRequest) -> Explanation:
    """Explain ``model`` around ``request.probe``.

    ``model`` maps a ``(k, d)`` batch to ``k`` predictions. ``shape`` is needed
    for the selected strategy and ignored otherwise.
    """
    probe = np.asarray(request.probe, dtype=float)
    attempts = request.sampler.m
    if request.strategy == "selected":
        if shape is None:
            raise ValidationError("the selected strategy needs a domain shape")
        points, attempts = sample_selected(probe, request.sampler, shape, return_attempts=True)
    else:
        points = sample_normal(probe, request.sampler)
    targets = np.asarray(model(points), dtype=float)
    design = apply_map(request.fmap, points)
    coeffs = fit(design, targets, request.fmap, request.solver)
    if not coeffs.converged:
        log.warning(
            "surrogate fit at %s (%s) stopped after %d iterations with KKT residual %.3g",
            request.probe, request.strategy, coeffs.iterations, coeffs.kkt_residual,
        )
    fitted = coeffs.intercept + design @ coeffs.weights
    return Explanation(
        probe=request.probe,
        strategy=request.strategy,
        intercept=coeffs.intercept,
        importances=dict(zip(request.fmap.names, coeffs.weights.tolist())),
        fit_mse=metrics.mse(targets, fitted),
        samples_used=len(points),
        seed=request.sampler.seed,
        converged=coeffs.converged,
        kkt_residual=coeffs.kkt_residual,
        config=_config_echo(request, coeffs),
        coefficients=coeffs,
        fmap=request.fmap,
        samples=points,
        attempts=attempts,
    )


def evaluate_explanation(explanation: Explanation, local_test: Dataset) -> tuple[float, float]:
    """(MSE, R^2) of the surrogate against the true targets of ``local_test``."""
    if len(local_test) == 0:
        raise ValidationError("local test set is empty")
    pred = explanation.predict(local_test.x)
    return metrics.mse(local_test.y, pred), metrics.r2(local_test.y, pred)


def local_test_set(probe, radius, n, noise_sigma, seed, theta_min=0.0, theta_max=8 * math.pi, grid=200_001):
    """Spiral samples whose noise-free point lies within ``radius`` of ``probe``.

    The admissible theta set (possibly several intervals) is located on a
    dense grid; theta is drawn uniformly over it by rejection from its
    enclosing range, then the point is noised as in the training data.
    """
    probe = np.asarray(probe, dtype=float)
    grid_t = np.linspace(theta_min, theta_max, grid)
    near = np.linalg.norm(spiral_point(grid_t) - probe, axis=1) <= radius
    if not near.any():
        raise ValidationError(f"no part of the spiral lies within {radius} of {tuple(probe)}")
    step = grid_t[1] - grid_t[0]
    lo = max(theta_min, grid_t[near].min() - step)
    hi = min(theta_max, grid_t[near].max() + step)
    rng = np.random.default_rng(seed)
    thetas = []
    count = 0
    while count < n:
        cand = rng.uniform(lo, hi, size=max(n, 256))
        ok = np.linalg.norm(spiral_point(cand) - probe, axis=1) <= radius
        thetas.append(cand[ok])
        count += int(ok.sum())
    theta = np.concatenate(thetas)[:n]
    x = spiral_point(theta) + rng.normal(0.0, 1.0, size=(n, 2)) * noise_sigma
    return Dataset(x, spiral_target(theta), theta)
