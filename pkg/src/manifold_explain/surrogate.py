"""Interpretable surrogate: property maps and the penalized robust fit.

The surrogate is ``g(x) = a0 + sum_i a_i f_i(x)`` over named property
functions ``f_i``. Coefficients minimize

    sum_k rho(t_k - g(x_k)) + sum_i lam_i |a_i|

where ``rho(r) = r**2`` for ``|r| <= delta`` and ``2 delta |r| - delta**2``
otherwise (twice the textbook Huber function, so ``delta = inf`` gives the
plain squared error). The intercept is not penalized.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from manifold_explain.errors import EvaluationError, ValidationError

MAD_TO_SIGMA = 1.482602218505602


@dataclass(frozen=True)
class PropertyFunction:
    """A named map from a batch of feature vectors ``(k, d)`` to ``(k,)`` values."""

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)
    lam: float = 0.0
    spec: str = ""

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValidationError(f"penalty for {self.name!r} must be >= 0")

    def __call__(self, x):
        return self.func(np.atleast_2d(np.asarray(x, dtype=float)))


def _col(i):
    return lambda x: x[:, i]


def identity(i: int, lam: float = 0.0, name: str | None = None) -> PropertyFunction:
    return PropertyFunction(name or f"x{i + 1}", _col(i), lam, f"identity({i})")


def product(i: int, j: int, lam: float = 0.0, name: str | None = None) -> PropertyFunction:
    return PropertyFunction(name or f"x{i + 1}*x{j + 1}", lambda x: x[:, i] * x[:, j], lam, f"product({i},{j})")


def square(i: int, lam: float = 0.0, name: str | None = None) -> PropertyFunction:
    return PropertyFunction(name or f"x{i + 1}^2", lambda x: x[:, i] ** 2, lam, f"square({i})")


def radius(lam: float = 0.0, name: str | None = None) -> PropertyFunction:
    return PropertyFunction(name or "r", lambda x: np.sqrt(np.sum(x * x, axis=1)), lam, "radius()")


_BUILTINS = {"identity": (identity, 1), "product": (product, 2), "square": (square, 1), "radius": (radius, 0)}
_SPEC_RE = re.compile(r"^\s*(\w+)\s*\(\s*([\d\s,]*)\)\s*(?::\s*(\S+)\s*)?$")


def parse_property(text: str, default_lam: float = 0.0) -> PropertyFunction:
    """Parse ``"identity(0)"``, ``"product(0,1):2.5"`` etc. The suffix is the penalty."""
    m = _SPEC_RE.match(text)
    if not m or m.group(1) not in _BUILTINS:
        raise ValidationError(f"unknown property function {text!r}; expected one of {sorted(_BUILTINS)}")
    ctor, arity = _BUILTINS[m.group(1)]
    args = [int(a) for a in m.group(2).replace(" ", "").split(",") if a]
    if len(args) != arity:
        raise ValidationError(f"{m.group(1)} takes {arity} index argument(s), got {len(args)}")
    lam = default_lam if m.group(3) is None else float(m.group(3))
    return ctor(*args, lam=lam)


@dataclass(frozen=True)
class FeatureMap:
    functions: tuple[PropertyFunction, ...]

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        names = [f.name for f in self.functions]
        if len(set(names)) != len(names):
            raise ValidationError(f"property names must be unique, got {names}")
        if not self.functions:
            raise ValidationError("a feature map needs at least one property")

    def __len__(self):
        return len(self.functions)

    @property
    def names(self):
        return [f.name for f in self.functions]

    @property
    def lambdas(self):
        return np.array([f.lam for f in self.functions], dtype=float)

    @property
    def specs(self):
        return [f"{f.spec}:{f.lam!r}" for f in self.functions]

    def with_lambdas(self, lams) -> "FeatureMap":
        lams = np.broadcast_to(np.asarray(lams, dtype=float), (len(self),))
        return FeatureMap(tuple(PropertyFunction(f.name, f.func, float(l), f.spec) for f, l in zip(self.functions, lams)))

    @classmethod
    def identity_map(cls, dim=2, lam=0.0):
        return cls(tuple(identity(i, lam) for i in range(dim)))

    @classmethod
    def parse(cls, specs: Sequence[str], default_lam: float = 0.0):
        return cls(tuple(parse_property(s, default_lam) for s in specs))


def apply_map(fmap: FeatureMap, x) -> np.ndarray:
    """Property vector ``[f_1(x), ..., f_N(x)]`` for one point, or the ``(k, N)`` design for a batch."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    cols = []
    for f in fmap.functions:
        try:
            v = np.asarray(f(arr), dtype=float)
        except IndexError:
            raise ValidationError(f"property {f.name!r} needs more features than the {arr.shape[1]} given") from None
        if not np.all(np.isfinite(v)):
            raise EvaluationError(f"property {f.name!r} produced a non-finite value")
        cols.append(v)
    design = np.stack(cols, axis=1)
    return design[0] if single else design


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`fit`.

    With ``scale="absolute"`` the loss threshold is ``huber_delta`` in target
    units. With ``scale="concomitant"`` a residual scale ``s`` is estimated
    jointly with the coefficients by minimizing the convex objective

        M s + sum_k s rho_eps(r_k / s) + sum_i lam_i |a_i|,   eps = huber_delta

    so for the final ``s`` the coefficients solve the fixed-threshold problem
    with ``delta = eps s`` and penalties ``s lam_i``.
    """

    huber_delta: float = 1.35
    tol: float = 1e-7
    max_iter: int = 20_000
    backtrack: float = 2.0
    accelerate: bool = True
    scale: str = "absolute"
    scale_tol: float = 1e-10
    scale_rounds: int = 200

    def __post_init__(self):
        if not self.huber_delta > 0:
            raise ValidationError("huber_delta must be > 0 (use inf for squared error)")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError("max_iter must be an integer >= 1")
        if not self.backtrack > 1:
            raise ValidationError("backtrack factor must be > 1")
        if self.scale not in ("concomitant", "absolute"):
            raise ValidationError("scale must be 'concomitant' or 'absolute'")
        if self.scale == "concomitant" and not math.isfinite(self.huber_delta):
            raise ValidationError("concomitant scale needs a finite huber_delta")


@dataclass(frozen=True)
class Coefficients:
    """Fitted surrogate.

    ``delta`` is the loss threshold the coefficients are optimal for and
    ``scale`` the factor applied to the penalties (1 in absolute mode).
    """

    intercept: float
    weights: np.ndarray
    converged: bool = True
    iterations: int = 0
    kkt_residual: float = 0.0
    objective: float = math.nan
    delta: float = math.inf
    scale: float = 1.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if not (math.isfinite(self.intercept) and np.all(np.isfinite(w))):
            raise ValidationError("coefficients must be finite")


def huber_rho(r, delta):
    r = np.asarray(r, dtype=float)
    if math.isinf(delta):
        return r * r
    a = np.abs(r)
    return np.where(a <= delta, r * r, 2.0 * delta * a - delta * delta)


def huber_psi(r, delta):
    """Derivative of :func:`huber_rho`."""
    r = np.asarray(r, dtype=float)
    if math.isinf(delta):
        return 2.0 * r
    return 2.0 * np.clip(r, -delta, delta)


def objective(design, targets, intercept, weights, lambdas, delta):
    r = np.asarray(targets, dtype=float) - intercept - np.asarray(design, dtype=float) @ np.asarray(weights, dtype=float)
    return float(np.sum(huber_rho(r, delta)) + np.sum(np.asarray(lambdas) * np.abs(weights)))


def kkt_residual(grad, weights, lambdas):
    """Largest violation of the optimality conditions; ``grad[0]`` is the intercept."""
    g0, g = grad[0], grad[1:]
    nz = weights != 0
    viol = np.where(nz, np.abs(g + lambdas * np.sign(weights)), np.maximum(np.abs(g) - lambdas, 0.0))
    return float(max(abs(g0), viol.max(initial=0.0)))


def _soft(v, thr):
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


class _Problem:
    """Fixed-threshold objective on centred data; column 0 of ``A`` is the intercept."""

    def __init__(self, A, t, lambdas, delta):
        self.A, self.t, self.lambdas, self.delta = A, t, lambdas, delta
        self.pen = np.concatenate([[0.0], lambdas])
        self.L_max = 2.0 * float(np.linalg.eigvalsh(A.T @ A)[-1])

    def f(self, w):
        return float(np.sum(huber_rho(self.t - self.A @ w, self.delta)))

    def grad(self, w):
        return -(self.A.T @ huber_psi(self.t - self.A @ w, self.delta))

    def F(self, w):
        return self.f(w) + float(self.pen @ np.abs(w))

    def kkt(self, w, g=None):
        return kkt_residual(self.grad(w) if g is None else g, w[1:], self.lambdas)

    def prox_step(self, v, gv, step_l):
        z = v - gv / step_l
        z[1:] = _soft(z[1:], self.lambdas / step_l)
        return z

    def newton_polish(self, w):
        """Exact minimizer on the current inlier set and sign pattern, or None.

        On a fixed partition the smooth loss is quadratic, so one linear solve
        lands on the optimum whenever the partition is already correct.
        """
        r = self.t - self.A @ w
        inl = np.abs(r) <= self.delta
        free = np.concatenate([[True], w[1:] != 0])
        Af = self.A[:, free]
        Ai = Af[inl]
        if Ai.shape[0] < Ai.shape[1]:
            return None
        sign = np.sign(w[free])
        sign[0] = 0.0
        lam = self.pen[free]
        rhs = 2.0 * (Ai.T @ self.t[inl]) - lam * sign
        if math.isfinite(self.delta):
            rhs += 2.0 * self.delta * (Af[~inl].T @ np.sign(r[~inl]))
        H = 2.0 * (Ai.T @ Ai)
        try:
            wf = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(wf)) or np.any(np.sign(wf[1:]) != sign[1:]):
            return None
        out = np.zeros_like(w)
        out[free] = wf
        return out


def _prox_gradient(prob: _Problem, config: SolverConfig, w0, polish_every=25):
    """Monotone FISTA with backtracking, finished by Newton polishing of the active set."""
    L = max(prob.L_max * 1e-3, 1e-300)
    x = w0.copy()
    Fx = prob.F(x)
    y, t_k = x.copy(), 1.0
    res = math.inf
    it = 0
    for it in range(1, config.max_iter + 1):
        gx = prob.grad(x)
        res = prob.kkt(x, gx)
        if res <= config.tol:
            return x, True, it - 1, res
        if it % polish_every == 0:
            cand = prob.newton_polish(x)
            if cand is not None:
                Fc = prob.F(cand)
                rc = prob.kkt(cand)
                if Fc <= Fx + 1e-12 * abs(Fx) and rc < res:
                    x, Fx, y, t_k = cand, min(Fc, Fx), cand.copy(), 1.0
                    if rc <= config.tol:
                        return x, True, it, rc
                    continue
        fy, gy = prob.f(y), prob.grad(y)
        while L < prob.L_max:
            z = prob.prox_step(y, gy, L)
            d = z - y
            # slack absorbs rounding in f near the optimum
            if prob.f(z) <= fy + gy @ d + 0.5 * L * (d @ d) + 1e-13 * (1.0 + abs(fy)):
                break
            L = min(L * config.backtrack, prob.L_max)
        else:
            z = prob.prox_step(y, gy, L)
        Fz = prob.F(z)
        x_old = x
        if Fz <= Fx:
            x, Fx = z, Fz
        else:
            # rejected: plain step from x with the global Lipschitz bound, which cannot ascend
            x = prob.prox_step(x, gx, max(L, prob.L_max))
            Fx = prob.F(x)
        if config.accelerate and Fz <= Fx:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
            y = x + ((t_k - 1.0) / t_new) * (x - x_old)
            t_k = t_new
        else:
            y, t_k = x.copy(), 1.0
    res = prob.kkt(x)
    return x, res <= config.tol, it, res


def _initial_scale(r):
    med = np.median(r)
    s = MAD_TO_SIGMA * float(np.median(np.abs(r - med)))
    if s == 0.0:
        s = float(np.mean(np.abs(r - med)))
    return s


def _scale_step(r, eps, m):
    """Minimize ``m s + sum_k s rho_eps(r_k / s)`` over ``s > 0`` for fixed residuals.

    The derivative ``m - sum_inliers r^2 / s^2 - eps^2 |outliers|`` is
    increasing in ``s``; its root is found by bisection in log space.
    """
    a = np.abs(r)
    if not np.any(a > 0):
        return 0.0

    def deriv(s):
        inl = a <= eps * s
        return m - float(np.sum(a[inl] ** 2)) / (s * s) - eps * eps * float(np.sum(~inl))

    hi = max(float(a.max()) / eps, float(np.sqrt(np.sum(a * a) / m))) * 2.0 + 1e-300
    lo = hi
    while deriv(lo) > 0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if deriv(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def fit(design, targets, fmap, solver: SolverConfig = SolverConfig()) -> Coefficients:
    """Penalized robust linear fit of ``targets`` on the property ``design`` matrix.

    ``fmap`` is a :class:`FeatureMap` (its penalties are used) or a sequence
    of penalties. Properties and targets are centred during optimization and
    the intercept, an unpenalized variable there, is recovered afterwards.
    A result that misses ``tol`` within ``max_iter`` comes back with
    ``converged=False``.
    """
    X = np.asarray(design, dtype=float)
    t = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("design must be a non-empty (M, N) matrix")
    if t.shape != (X.shape[0],):
        raise ValidationError("targets must have one entry per design row")
    lambdas = fmap.lambdas if isinstance(fmap, FeatureMap) else np.asarray(fmap, dtype=float)
    if lambdas.shape != (X.shape[1],):
        raise ValidationError(f"expected {X.shape[1]} penalties, got {lambdas.shape}")
    if np.any(lambdas < 0):
        raise ValidationError("penalties must be >= 0")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(t))):
        raise ValidationError("design and targets must be finite")

    x_mean = X.mean(axis=0)
    t_mean = float(t.mean())
    A = np.column_stack([np.ones(len(t)), X - x_mean])
    tc = t - t_mean
    w = np.zeros(X.shape[1] + 1)

    delta, scale = solver.huber_delta, 1.0
    total_iters = 0
    if solver.scale == "concomitant":
        eps = solver.huber_delta
        scale = _initial_scale(tc)
        for _ in range(solver.scale_rounds):
            if scale == 0.0:
                break
            w, _, n_it, _ = _prox_gradient(_Problem(A, tc, scale * lambdas, eps * scale), solver, w)
            total_iters += n_it
            new = _scale_step(tc - A @ w, eps, len(tc))
            done = new == 0.0 or abs(new - scale) <= solver.scale_tol * scale
            if new > 0.0:
                scale = new
            if done:
                break
        if scale == 0.0:
            # exact interpolation: every threshold gives the same minimizer
            scale = 1.0
        delta = eps * scale

    prob = _Problem(A, tc, scale * lambdas, delta)
    w, converged, n_it, res = _prox_gradient(prob, solver, w)
    weights = w[1:]
    intercept = float(t_mean + w[0] - x_mean @ weights)
    return Coefficients(
        intercept=intercept,
        weights=weights,
        converged=bool(converged),
        iterations=int(total_iters + n_it),
        kkt_residual=float(res),
        objective=objective(X, t, intercept, weights, scale * lambdas, delta),
        delta=float(delta),
        scale=float(scale),
    )


def predict_surrogate(coeffs: Coefficients, fmap: FeatureMap, x):
    """``a0 + sum_i a_i f_i(x)`` for one point (float) or a batch (array)."""
    p = apply_map(fmap, x)
    out = coeffs.intercept + p @ coeffs.weights
    return float(out) if np.ndim(out) == 0 else out
