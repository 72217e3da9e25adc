"""Command-line entry point: generate | train | shape | explain | bench.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime or
numerical failure, 3 benchmark acceptance band failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from manifold_explain import bench, svg
from manifold_explain.alpha_shape import build_alpha_shape, load_shape, save_shape
from manifold_explain.config import load_config, parse_point
from manifold_explain.errors import ExplainError, ParseError, SchemaError, ValidationError
from manifold_explain.explainer import ExplanationRequest, evaluate_explanation, explain, local_test_set
from manifold_explain.metrics import mse, r2
from manifold_explain.sampling import SamplerConfig, gaussian_stream
from manifold_explain.spiral_data import generate_dataset, read_csv, split, write_csv
from manifold_explain.tree import fit_tree, load_tree, save_tree

log = logging.getLogger("manifold_explain")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_BANDS = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _config(args, **extra):
    overrides = {"seed": args.seed, "out_dir": args.out_dir}
    overrides.update(extra)
    return load_config(args.config, overrides)


def _out_path(cfg, given, default_name):
    path = Path(given) if given else Path(cfg.out_dir) / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _train_split(cfg, dataset):
    if len(dataset) < 2:
        return dataset, dataset.subset(np.arange(0))
    return split(dataset, cfg.train_fraction, bench.split_seed(cfg.seed))


def _safe_metrics(y, pred):
    m = mse(y, pred) if len(y) else math.nan
    try:
        q = r2(y, pred)
    except ValidationError:
        q = math.nan
    return m, q


def cmd_generate(args) -> int:
    cfg = _config(args, n=args.n)
    data = generate_dataset(replace(cfg.generation(), seed=bench.data_seed(cfg.seed)))
    path = _out_path(cfg, args.out, "spiral.csv")
    write_csv(data, path)
    print(f"wrote {len(data)} samples to {path}: theta in [{cfg.theta_min:g}, {cfg.theta_max:g}], noise sigma {cfg.noise_sigma:g}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args, max_depth=args.max_depth, min_samples_leaf=args.min_samples_leaf)
    if args.unlimited_depth:
        cfg = replace(cfg, max_depth=None)
    data = read_csv(args.dataset)
    if len(data) == 0:
        raise ValidationError(f"{args.dataset} has no samples")
    train, test = _train_split(cfg, data)
    model = fit_tree(train, params=cfg.tree())
    path = _out_path(cfg, args.out, "tree.json")
    save_tree(model, path)
    held = test if len(test) else train
    m, q = _safe_metrics(held.y, model.predict(held.x))
    print(f"MSE={m:.4f} R2={q:.5f}")
    log.info("tree with %d leaves, depth %d written to %s", model.leaf_count, model.depth(), path)
    return EXIT_OK


def cmd_shape(args) -> int:
    cfg = _config(args, alpha=args.alpha)
    train, _ = _train_split(cfg, read_csv(args.dataset))
    shape = build_alpha_shape(train.x, cfg.alpha)
    path = _out_path(cfg, args.out, "shape.json")
    save_shape(shape, path)
    print(f"alpha={cfg.alpha:g}: kept {len(shape.kept)} of {len(shape.triangulation.triangles)} triangles, area {shape.area():.2f}")
    return EXIT_OK


def _replay(probe, sampler, attempts, shape):
    """Draws consumed by the selected sampler, split into accepted and rejected."""
    draws = []
    n = 0
    for block in gaussian_stream(probe, sampler):
        draws.append(block[: attempts - n])
        n += len(draws[-1])
        if n >= attempts:
            break
    draws = np.concatenate(draws)
    inside = shape.contains(draws)
    return draws[inside], draws[~inside]


def cmd_explain(args) -> int:
    cfg = _config(args, alpha=args.alpha, sigma=args.sigma, m=args.m)
    probe = parse_point(args.probe)
    model = load_tree(args.model)
    data = read_csv(args.dataset) if args.dataset else None
    shape = None
    if args.strategy == "selected":
        if args.shape:
            shape = load_shape(args.shape)
        elif data is not None:
            shape = build_alpha_shape(_train_split(cfg, data)[0].x, cfg.alpha)
        else:
            raise ValidationError("the selected strategy needs --dataset or --shape")
    seed = bench.probe_seed(cfg.seed, probe)
    request = ExplanationRequest(probe, args.strategy, cfg.sampler(seed), cfg.feature_map(), cfg.solver())
    exp = explain(model.predict, shape, request)
    if not args.no_eval:
        radius = cfg.eval_radius if cfg.eval_radius is not None else 2.0 * cfg.sigma
        local = local_test_set(probe, radius, cfg.eval_n, cfg.noise_sigma, bench.eval_seed(cfg.seed, probe), cfg.theta_min, cfg.theta_max)
        exp = exp.with_eval(*evaluate_explanation(exp, local))
    path = _out_path(cfg, args.out, "explanation.json")
    _dump_json(exp.to_dict(), path)
    print(", ".join(f"{k}={v:.4f}" for k, v in exp.importances.items()) + (f"  MSE={exp.eval_mse:.4f} R2={exp.eval_r2:.4f}" if exp.eval_mse is not None else ""))
    if args.svg:
        if shape is not None:
            accepted, rejected = _replay(np.asarray(probe), request.sampler, exp.attempts, shape)
        else:
            accepted, rejected = exp.samples, None
        cloud = data.x if data is not None else None
        svg.write_svg(svg.sampling_plot(probe, accepted, rejected, shape, cloud, window=4 * cfg.sigma), args.svg)
    return EXIT_OK


def _bench_svgs(out, report, pipe, explanations, cfg):
    rng = np.random.default_rng(0)
    cloud = pipe.train.x[rng.choice(len(pipe.train), size=min(8000, len(pipe.train)), replace=False)]
    svg.write_svg(svg.overview_plot(cloud, pipe.shape, dict(cfg.probes)), out / "overview.svg")
    for (name, strategy), exp in explanations.items():
        if exp is None:
            continue
        probe = np.asarray(exp.probe)
        if strategy == "selected":
            accepted, rejected = _replay(probe, _sampler_of(exp), exp.attempts, pipe.shape)
        else:
            accepted, rejected = exp.samples, None
        text = svg.sampling_plot(probe, accepted, rejected, pipe.shape, pipe.train.x, window=4 * cfg.sampler.sigma, label=name)
        svg.write_svg(text, out / f"samples_{name}_{strategy}.svg")


def _sampler_of(exp):
    s = exp.config["sampler"]
    return SamplerConfig(s["sigma"], s["m"], s["max_attempt_factor"], s["seed"])


def cmd_bench(args) -> int:
    cfg = _config(args, repeat=args.repeat)
    bcfg = cfg.bench()
    report, pipe, explanations = bench.run_benchmark(bcfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(report, out / "report.json")
    table = bench.format_table(report)
    (out / "report.txt").write_text(table)
    if not args.no_svg:
        _bench_svgs(out, report, pipe, explanations, bcfg)
    print(table, end="")
    return EXIT_OK if report["passed"] else EXIT_BANDS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config file)")
    common.add_argument("--config", default=None, help="INI file with a [run] section")
    common.add_argument("--out-dir", default=None, help="directory for outputs (default: out)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="manifold-explain", description="Local surrogate explanations on an alpha-shape data domain.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write the spiral data set as CSV")
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--out", default=None, help="CSV path (default: <out-dir>/spiral.csv)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="fit the regression tree black box")
    t.add_argument("dataset")
    t.add_argument("--max-depth", type=int, default=None)
    t.add_argument("--unlimited-depth", action="store_true")
    t.add_argument("--min-samples-leaf", type=int, default=None)
    t.add_argument("--out", default=None, help="model JSON path (default: <out-dir>/tree.json)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("shape", parents=[common], help="estimate the alpha shape of the training split")
    s.add_argument("dataset")
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--out", default=None, help="shape JSON path (default: <out-dir>/shape.json)")
    s.set_defaults(func=cmd_shape)

    e = sub.add_parser("explain", parents=[common], help="explain one prediction")
    e.add_argument("model", help="tree JSON from 'train'")
    e.add_argument("probe", help="instance to explain, e.g. '0.0,14.5'")
    e.add_argument("--dataset", default=None, help="CSV used to build the shape (training split)")
    e.add_argument("--shape", default=None, help="shape JSON from 'shape' (instead of --dataset)")
    e.add_argument("--strategy", choices=("normal", "selected"), default="selected")
    e.add_argument("--alpha", type=float, default=None)
    e.add_argument("--sigma", type=float, default=None)
    e.add_argument("--m", type=int, default=None)
    e.add_argument("--no-eval", action="store_true", help="skip the local spiral test set")
    e.add_argument("--out", default=None, help="explanation JSON path (default: <out-dir>/explanation.json)")
    e.add_argument("--svg", default=None, help="also write a sample scatter plot here")
    e.set_defaults(func=cmd_explain)

    b = sub.add_parser("bench", parents=[common], help="run the full spiral benchmark")
    b.add_argument("--repeat", type=int, default=None, help="explanations per probe for mean/spread columns")
    b.add_argument("--no-svg", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ParseError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_INVALID
    except (ExplainError, OSError, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
