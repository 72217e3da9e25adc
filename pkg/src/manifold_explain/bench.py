"""End-to-end spiral benchmark: black-box quality, probe studies, robustness table."""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from manifold_explain.alpha_shape import AlphaShape, build_alpha_shape
from manifold_explain.errors import ExplainError
from manifold_explain.explainer import EXPLAIN_SOLVER, ExplanationRequest, evaluate_explanation, explain, local_test_set
from manifold_explain.metrics import mse, r2
from manifold_explain.sampling import SamplerConfig
from manifold_explain.spiral_data import Dataset, GenerationConfig, generate_dataset, spiral_point, split
from manifold_explain.surrogate import FeatureMap, SolverConfig
from manifold_explain.tree import RegressionTree, TreeParams, fit_tree

log = logging.getLogger(__name__)

__all__ = ["mse", "r2", "BenchConfig", "Pipeline", "derive_seed", "data_seed", "split_seed", "eval_seed", "probe_seed", "build_pipeline", "run_probe_study", "run_robustness_study", "run_benchmark", "acceptance_checks", "format_table", "tangent_derivative", "spiral_gradient", "importance_spreads"]

STUDY_PROBES = {"x1": (0.0, 14.5), "x2": (10.0, 10.0), "x3": (-16.0, 0.0)}
ROBUSTNESS_PROBES = {"x1": (0.0, 14.5), "x1a": (-2.0, 14.5), "x1b": (1.0, 14.0), "x1c": (0.5, 13.7)}

# Values reported for the spiral experiment, used side by side with ours.
PUBLISHED = {
    "blackbox": {"mse": 24.00, "r2": 0.997},
    "probes": {
        ("x1", "normal"): {"x1": -0.92, "x2": 2.46, "mse": 1.18, "r2": 0.72},
        ("x1", "selected"): {"x1": -0.96, "x2": 0.33, "mse": 0.19, "r2": 0.95},
        ("x2", "normal"): {"mse": 0.70, "r2": 0.81},
        ("x2", "selected"): {"mse": 0.16, "r2": 0.96},
        ("x3", "normal"): {"mse": 0.45, "r2": 0.91},
        ("x3", "selected"): {"x2": -1.0, "mse": 0.17, "r2": 0.97},
        ("x1a", "normal"): {"x1": -1.07, "x2": 1.87, "mse": 6.19, "r2": 0.64},
        ("x1b", "normal"): {"x1": -0.89, "x2": 3.91, "mse": 8.99, "r2": 0.46},
        ("x1c", "normal"): {"x1": -0.95, "x2": 1.47, "mse": 1.09, "r2": 0.93},
        ("x1a", "selected"): {"x1": -0.98, "x2": 0.31, "mse": 0.30, "r2": 0.98},
        ("x1b", "selected"): {"x1": -0.97, "x2": 0.07, "mse": 0.21, "r2": 0.99},
        ("x1c", "selected"): {"x1": -0.96, "x2": 0.39, "mse": 0.39, "r2": 0.99},
    },
    "spread": {"selected_x1": 0.02, "normal_x2": 2.44},
}

_TAG_DATA, _TAG_SPLIT, _TAG_PROBE, _TAG_EVAL = 1, 2, 3, 4


def derive_seed(master: int, *keys) -> int:
    """Stable 63-bit seed from a master seed and integer or float keys."""
    words = [int(master) & 0xFFFFFFFFFFFFFFFF]
    for k in keys:
        if isinstance(k, float):
            k = struct.unpack("<q", struct.pack("<d", k))[0]
        words.append(int(k) & 0xFFFFFFFFFFFFFFFF)
    hi, lo = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return ((int(hi) << 32) | int(lo)) & 0x7FFFFFFFFFFFFFFF


def data_seed(master):
    return derive_seed(master, _TAG_DATA)


def split_seed(master):
    return derive_seed(master, _TAG_SPLIT)


def eval_seed(master, probe):
    return derive_seed(master, _TAG_EVAL, float(probe[0]), float(probe[1]))


def probe_seed(master, probe, repeat=0):
    return derive_seed(master, _TAG_PROBE, float(probe[0]), float(probe[1]), repeat)


@dataclass(frozen=True)
class BenchConfig:
    data: GenerationConfig = GenerationConfig()
    train_fraction: float = 0.9
    tree: TreeParams = TreeParams()
    alpha: float = 1.0
    sampler: SamplerConfig = SamplerConfig()
    features: tuple = ("identity(0)", "identity(1)")
    penalty_per_sample: float = 0.01
    solver: SolverConfig = EXPLAIN_SOLVER
    eval_radius: float | None = None  # defaults to 2 * sampler.sigma
    eval_n: int = 2000
    probes: dict = field(default_factory=lambda: dict(STUDY_PROBES))
    robustness_probes: dict = field(default_factory=lambda: dict(ROBUSTNESS_PROBES))
    repeat: int = 1
    seed: int = 0

    @property
    def radius(self):
        return self.eval_radius if self.eval_radius is not None else 2.0 * self.sampler.sigma

    def feature_map(self) -> FeatureMap:
        return FeatureMap.parse(self.features, default_lam=self.penalty_per_sample * self.sampler.m)

    def echo(self):
        solver = {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v)) for k, v in self.solver.__dict__.items()}
        return {
            "data": {k: v for k, v in self.data.__dict__.items() if k != "seed"},
            "train_fraction": self.train_fraction,
            "tree": dict(self.tree.__dict__),
            "alpha": self.alpha,
            "sampler": {k: v for k, v in self.sampler.__dict__.items() if k != "seed"},
            "feature_map": self.feature_map().specs,
            "solver": solver,
            "eval_radius": self.radius,
            "eval_n": self.eval_n,
            "probes": {k: list(v) for k, v in self.probes.items()},
            "robustness_probes": {k: list(v) for k, v in self.robustness_probes.items()},
            "repeat": self.repeat,
            "seed": self.seed,
        }


@dataclass
class Pipeline:
    config: BenchConfig
    train: Dataset
    test: Dataset
    model: RegressionTree
    shape: AlphaShape
    blackbox: dict


def build_pipeline(config: BenchConfig) -> Pipeline:
    """Generate, split, train the tree and estimate the domain."""
    dataset = generate_dataset(replace(config.data, seed=data_seed(config.seed)))
    train, test = split(dataset, config.train_fraction, split_seed(config.seed))
    model = fit_tree(train, params=config.tree)
    pred = model.predict(test.x)
    blackbox = {
        "test_mse": mse(test.y, pred),
        "test_r2": r2(test.y, pred),
        "n_train": len(train),
        "n_test": len(test),
        "leaves": model.leaf_count,
        "depth": model.depth(),
    }
    log.info("black box: MSE=%.3f R2=%.5f", blackbox["test_mse"], blackbox["test_r2"])
    shape = build_alpha_shape(train.x, config.alpha)
    log.info("alpha shape: %d of %d triangles kept", len(shape.kept), len(shape.triangulation.triangles))
    return Pipeline(config, train, test, model, shape, blackbox)


def _explain_row(pipe: Pipeline, name, probe, strategy, repeat=0):
    cfg = pipe.config
    sampler = replace(cfg.sampler, seed=probe_seed(cfg.seed, probe, repeat))
    request = ExplanationRequest(probe, strategy, sampler, cfg.feature_map(), cfg.solver)
    row = {"point": name, "probe": [float(probe[0]), float(probe[1])], "strategy": strategy, "seed": sampler.seed}
    try:
        exp = explain(pipe.model.predict, pipe.shape, request)
        local = local_test_set(
            probe, cfg.radius, cfg.eval_n, cfg.data.noise_sigma, eval_seed(cfg.seed, probe),
            cfg.data.theta_min, cfg.data.theta_max,
        )
        m, q = evaluate_explanation(exp, local)
        exp = exp.with_eval(m, q)
    except ExplainError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row, None
    row.update(
        importances=exp.importances,
        intercept=exp.intercept,
        fit_mse=exp.fit_mse,
        mse=m,
        r2=q,
        converged=exp.converged,
        acceptance_rate=exp.samples_used / exp.attempts,
    )
    return row, exp


def _with_repeats(pipe, name, probe, strategy):
    row, exp = _explain_row(pipe, name, probe, strategy)
    if pipe.config.repeat > 1 and "error" not in row:
        runs = [row] + [_explain_row(pipe, name, probe, strategy, r)[0] for r in range(1, pipe.config.repeat)]
        runs = [r for r in runs if "error" not in r]
        stats = {}
        for key in list(row["importances"]) + ["mse", "r2"]:
            vals = np.array([r["importances"][key] if key in r["importances"] else r[key] for r in runs])
            stats[key] = {"mean": float(vals.mean()), "spread": float(np.ptp(vals))}
        row["repeats"] = {"n": len(runs), "stats": stats}
    return row, exp


def run_probe_study(pipe: Pipeline, probes=None, strategies=("normal", "selected")):
    """Explain and evaluate each probe under each strategy."""
    probes = probes if probes is not None else pipe.config.probes
    rows, explanations = [], {}
    for name, probe in probes.items():
        for strategy in strategies:
            row, exp = _with_repeats(pipe, name, probe, strategy)
            rows.append(row)
            explanations[name, strategy] = exp
    return rows, explanations


def importance_spreads(rows, strategy):
    """Max minus min of each importance over the rows of one strategy."""
    sel = [r for r in rows if r["strategy"] == strategy and "importances" in r]
    if not sel:
        return {}
    keys = list(sel[0]["importances"])
    return {k: float(np.ptp([r["importances"][k] for r in sel])) for k in keys}


def run_robustness_study(pipe: Pipeline, probes=None, cached=None):
    """Explanations for the base probe and its perturbations, with per-strategy spreads."""
    probes = probes if probes is not None else pipe.config.robustness_probes
    rows = []
    for name, probe in probes.items():
        for strategy in ("normal", "selected"):
            hit = None
            if cached:
                hit = next((r for r in cached if r["point"] == name and r["strategy"] == strategy and tuple(r["probe"]) == tuple(map(float, probe))), None)
            rows.append(hit if hit is not None else _with_repeats(pipe, name, probe, strategy)[0])
    spreads = {s: importance_spreads(rows, s) for s in ("normal", "selected")}
    return {"rows": rows, "spreads": spreads}


def tangent_derivative(probe, theta_min=0.0, theta_max=8 * math.pi, grid=400_001):
    """dy/dx1 along the noise-free spiral at the point nearest ``probe``."""
    t = np.linspace(theta_min, theta_max, grid)
    k = int(np.argmin(np.linalg.norm(spiral_point(t) - np.asarray(probe, dtype=float), axis=1)))
    th = float(t[k])
    dy = math.sqrt(1.0 + th * th)
    dx1 = math.cos(th) - th * math.sin(th)
    return dy / dx1, th


def spiral_gradient(probe, theta_min=0.0, theta_max=8 * math.pi, grid=400_001):
    """Gradient of y on the noise-free spiral at the point nearest ``probe``.

    y equals arc length up to a constant, so its gradient along the curve is
    the unit tangent.
    """
    t = np.linspace(theta_min, theta_max, grid)
    k = int(np.argmin(np.linalg.norm(spiral_point(t) - np.asarray(probe, dtype=float), axis=1)))
    th = float(t[k])
    tangent = np.array([math.cos(th) - th * math.sin(th), math.sin(th) + th * math.cos(th)])
    return tangent / np.linalg.norm(tangent), th


def _check(cid, name, measured, passed, band, published=None):
    return {"id": cid, "name": name, "measured": measured, "published": published, "band": band, "passed": bool(passed)}


def _find(rows, point, strategy):
    return next((r for r in rows if r["point"] == point and r["strategy"] == strategy), None)


def acceptance_checks(report) -> list:
    """Pass/fail bands for the benchmark-level criteria."""
    checks = []
    bb = report["blackbox"]
    checks.append(_check(
        1, "black-box quality", {"mse": bb["test_mse"], "r2": bb["test_r2"]},
        bb["test_r2"] >= 0.99 and 10.0 <= bb["test_mse"] <= 50.0, "R2 >= 0.99 and MSE in [10, 50]", PUBLISHED["blackbox"],
    ))
    rows = report["probe_study"]
    x1s, x1n = _find(rows, "x1", "selected"), _find(rows, "x1", "normal")
    x2s, x3s = _find(rows, "x2", "selected"), _find(rows, "x3", "selected")

    def ok(r):
        return r is not None and "error" not in r

    if ok(x1s):
        i = x1s["importances"]
        checks.append(_check(
            2, "x1 selected sampling", {"x1": i["x1"], "x2": i["x2"], "mse": x1s["mse"], "r2": x1s["r2"]},
            -1.15 <= i["x1"] <= -0.80 and abs(i["x2"]) <= 0.5 and x1s["r2"] >= 0.90 and x1s["mse"] <= 0.5,
            "x1 in [-1.15, -0.80], |x2| <= 0.5, R2 >= 0.90, MSE <= 0.5", PUBLISHED["probes"]["x1", "selected"],
        ))
    else:
        checks.append(_check(2, "x1 selected sampling", None, False, "row failed"))
    if ok(x1s) and ok(x1n):
        gap = x1s["r2"] - x1n["r2"]
        checks.append(_check(3, "x1 strategy gap", {"selected_r2": x1s["r2"], "normal_r2": x1n["r2"], "gap": gap},
                             gap >= 0.1, "selected R2 - normal R2 >= 0.1", {"selected_r2": 0.95, "normal_r2": 0.72}))
    else:
        checks.append(_check(3, "x1 strategy gap", None, False, "row failed"))
    if ok(x2s):
        a, b = x2s["importances"]["x1"], x2s["importances"]["x2"]
        ratio = abs(a / b) if b != 0 else math.inf
        grad, _ = spiral_gradient(x2s["probe"])
        checks.append(_check(
            4, "x2 selected sampling", {"x1": a, "x2": b, "ratio": ratio, "r2": x2s["r2"], "oracle_gradient": grad.tolist()},
            a * b > 0 and 0.5 <= ratio <= 2.0 and x2s["r2"] >= 0.90,
            "same sign, |x1/x2| in [0.5, 2.0], R2 >= 0.90", PUBLISHED["probes"]["x2", "selected"],
        ))
    else:
        checks.append(_check(4, "x2 selected sampling", None, False, "row failed"))
    if ok(x3s):
        a, b = x3s["importances"]["x1"], x3s["importances"]["x2"]
        checks.append(_check(
            5, "x3 selected sampling", {"x1": a, "x2": b, "r2": x3s["r2"]},
            -1.15 <= b <= -0.85 and abs(b) > abs(a) and x3s["r2"] >= 0.90,
            "x2 in [-1.15, -0.85], |x2| > |x1|, R2 >= 0.90", PUBLISHED["probes"]["x3", "selected"],
        ))
    else:
        checks.append(_check(5, "x3 selected sampling", None, False, "row failed"))
    rob = report["robustness"]
    sel, nor = rob["spreads"].get("selected", {}), rob["spreads"].get("normal", {})
    complete = all("error" not in r for r in rob["rows"]) and sel and nor
    if complete:
        passed = sel["x1"] <= 0.1 and sel["x1"] < min(nor.values()) and all(sel[k] < nor[k] for k in sel)
        checks.append(_check(
            6, "robustness ordering", {"selected": sel, "normal": nor}, passed,
            "selected x1 spread <= 0.1, below every normal spread; selected < normal per importance",
            PUBLISHED["spread"],
        ))
    else:
        checks.append(_check(6, "robustness ordering", None, False, "row failed"))
    if ok(x1s):
        oracle, theta = tangent_derivative(x1s["probe"])
        val = x1s["importances"]["x1"]
        checks.append(_check(9, "analytic tangent oracle", {"x1": val, "oracle": oracle, "theta": theta},
                             abs(val - oracle) <= 0.2, "|x1 - dy/dx1| <= 0.2"))
    else:
        checks.append(_check(9, "analytic tangent oracle", None, False, "row failed"))
    return checks


def run_benchmark(config: BenchConfig = BenchConfig(), pipeline: Pipeline | None = None):
    """Full benchmark; returns ``(report, pipeline, explanations)``."""
    pipe = pipeline or build_pipeline(config)
    rows, explanations = run_probe_study(pipe)
    robustness = run_robustness_study(pipe, cached=rows)
    report = {
        "config": config.echo(),
        "blackbox": pipe.blackbox,
        "shape": {
            "alpha": pipe.shape.alpha,
            "kept_triangles": int(len(pipe.shape.kept)),
            "total_triangles": int(len(pipe.shape.triangulation.triangles)),
            "area": pipe.shape.area(),
        },
        "probe_study": rows,
        "robustness": robustness,
        "seeds": {
            "master": config.seed,
            "data": data_seed(config.seed),
            "split": split_seed(config.seed),
            "eval": {name: eval_seed(config.seed, p) for name, p in {**config.probes, **config.robustness_probes}.items()},
        },
    }
    report["checks"] = acceptance_checks(report)
    report["passed"] = all(c["passed"] for c in report["checks"])
    return report, pipe, explanations


def _fmt(v, width, prec=2):
    if v is None:
        return " " * (width - 1) + "-"
    return f"{v:{width}.{prec}f}"


def format_table(report) -> str:
    """Plain-text tables in the layout of the robustness table, plus checks."""
    lines = []
    bb = report["blackbox"]
    lines.append(f"Black box (CART): test MSE={bb['test_mse']:.2f} R2={bb['test_r2']:.4f}   [published: MSE=24.00 R2=0.997]")
    lines.append("")
    header = f"{'point':<6}{'x1':>7}{'x2':>7}{'x1 imp':>9}{'x2 imp':>9}{'MSE':>9}{'R2':>9}   published (x1 imp, x2 imp, MSE, R2)"
    for title, rows in (("Probe study", report["probe_study"]), ("Robustness", report["robustness"]["rows"])):
        for strategy in ("normal", "selected"):
            lines.append(f"{title} - {strategy} sampling")
            lines.append(header)
            lines.append("-" * len(header))
            for r in rows:
                if r["strategy"] != strategy:
                    continue
                px, py = r["probe"]
                if "error" in r:
                    lines.append(f"{r['point']:<6}{px:7.2f}{py:7.2f}   error: {r['error']}")
                    continue
                ref = PUBLISHED["probes"].get((r["point"], strategy), {})
                ref_txt = ", ".join(_fmt(ref.get(k), 5).strip() for k in ("x1", "x2", "mse", "r2"))
                lines.append(
                    f"{r['point']:<6}{px:7.2f}{py:7.2f}{_fmt(r['importances'].get('x1'), 9)}{_fmt(r['importances'].get('x2'), 9)}"
                    f"{_fmt(r['mse'], 9)}{_fmt(r['r2'], 9)}   {ref_txt}"
                )
                if "repeats" in r:
                    st = r["repeats"]["stats"]
                    lines.append(
                        f"{'  mean':<20}{_fmt(st['x1']['mean'], 9)}{_fmt(st['x2']['mean'], 9)}{_fmt(st['mse']['mean'], 9)}{_fmt(st['r2']['mean'], 9)}"
                    )
                    lines.append(
                        f"{'  spread':<20}{_fmt(st['x1']['spread'], 9)}{_fmt(st['x2']['spread'], 9)}{_fmt(st['mse']['spread'], 9)}{_fmt(st['r2']['spread'], 9)}"
                    )
            lines.append("")
    sp = report["robustness"]["spreads"]
    for s in ("normal", "selected"):
        if sp.get(s):
            lines.append(f"importance spread ({s}): " + ", ".join(f"{k}={v:.3f}" for k, v in sp[s].items()))
    lines.append("")
    for c in report["checks"]:
        lines.append(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['id']:>2}. {c['name']}: {c['band']}")
    return "\n".join(lines) + "\n"
