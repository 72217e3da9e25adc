"""Benchmark wiring: seeds, oracles, report structure and table."""

import json
import math

import numpy as np
import pytest

from manifold_explain.bench import (
    BenchConfig,
    acceptance_checks,
    data_seed,
    derive_seed,
    eval_seed,
    format_table,
    importance_spreads,
    probe_seed,
    run_benchmark,
    spiral_gradient,
    split_seed,
    tangent_derivative,
)
from manifold_explain.sampling import SamplerConfig
from manifold_explain.spiral_data import GenerationConfig
from manifold_explain.tree import TreeParams


class TestSeeds:
    def test_stable_and_distinct(self):
        assert derive_seed(0, 1) == derive_seed(0, 1)
        seeds = {data_seed(0), split_seed(0), probe_seed(0, (0.0, 14.5)), eval_seed(0, (0.0, 14.5)), data_seed(1)}
        assert len(seeds) == 5
        assert all(0 <= s < 2**63 for s in seeds)

    def test_probe_and_repeat_change_seed(self):
        assert probe_seed(0, (0.0, 14.5)) != probe_seed(0, (0.0, 14.6))
        assert probe_seed(0, (0.0, 14.5), 0) != probe_seed(0, (0.0, 14.5), 1)

    def test_float_keys_exact(self):
        # the key is the bit pattern, so -0.0 and 0.0 differ and ints equal their float spelling
        assert derive_seed(0, 0.0) != derive_seed(0, -0.0)
        assert probe_seed(0, (0, 14.5)) == probe_seed(0, (0.0, 14.5))


class TestOracles:
    def test_tangent_at_x1(self):
        d, theta = tangent_derivative((0.0, 14.5))
        assert theta == pytest.approx(14.14, abs=0.01)
        assert d == pytest.approx(-1.0024, abs=1e-3)

    def test_gradient_is_unit_tangent(self):
        g, theta = spiral_gradient((10.0, 10.0))
        assert np.linalg.norm(g) == pytest.approx(1.0)
        # finite difference of arc length along the curve
        from manifold_explain.spiral_data import spiral_point

        h = 1e-6
        step = spiral_point(np.array([theta + h]))[0] - spiral_point(np.array([theta - h]))[0]
        np.testing.assert_allclose(g, step / np.linalg.norm(step), atol=1e-6)
        # the two components have opposite signs at this probe
        assert g[0] * g[1] < 0


def small_config(**kw):
    base = dict(
        data=GenerationConfig(n=6000),
        tree=TreeParams(max_depth=10, min_samples_leaf=10),
        sampler=SamplerConfig(sigma=1.5, m=200),
        eval_n=300,
    )
    base.update(kw)
    return BenchConfig(**base)


@pytest.fixture(scope="module")
def small_run():
    return run_benchmark(small_config())


class TestSmallBenchmark:
    def test_report_structure(self, small_run):
        report, pipe, explanations = small_run
        assert set(report) == {"config", "blackbox", "shape", "probe_study", "robustness", "seeds", "checks", "passed"}
        assert {c["id"] for c in report["checks"]} == {1, 2, 3, 4, 5, 6, 9}
        assert len(report["probe_study"]) == 6
        assert len(report["robustness"]["rows"]) == 8
        assert report["blackbox"]["n_train"] == 5400
        assert set(explanations) == {(p, s) for p in ("x1", "x2", "x3") for s in ("normal", "selected")}
        json.dumps(report, allow_nan=False)

    def test_robustness_reuses_study_rows(self, small_run):
        report = small_run[0]
        base = [r for r in report["robustness"]["rows"] if r["point"] == "x1"]
        study = [r for r in report["probe_study"] if r["point"] == "x1"]
        assert base == study

    def test_seed_block(self, small_run):
        seeds = small_run[0]["seeds"]
        assert seeds["data"] == data_seed(0)
        assert seeds["eval"]["x2"] == eval_seed(0, (10.0, 10.0))

    def test_deterministic(self, small_run):
        again = run_benchmark(small_config(), pipeline=small_run[1])[0]
        assert json.dumps(again, sort_keys=True) == json.dumps(small_run[0], sort_keys=True)

    def test_format_table(self, small_run):
        text = format_table(small_run[0])
        assert "Probe study - selected sampling" in text
        assert "Robustness - normal sampling" in text
        assert text.count("[PASS]") + text.count("[FAIL]") == 7

    def test_repeat_adds_stats(self, small_run):
        pipe = small_run[1]
        pipe2 = type(pipe)(**{**pipe.__dict__, "config": small_config(repeat=3)})
        report = run_benchmark(pipe2.config, pipeline=pipe2)[0]
        row = report["probe_study"][0]
        assert row["repeats"]["n"] == 3
        assert set(row["repeats"]["stats"]) == {"x1", "x2", "mse", "r2"}
        assert "mean" in format_table(report)


class TestChecks:
    def test_errored_rows_fail(self):
        report = {
            "blackbox": {"test_mse": 20.0, "test_r2": 0.999},
            "probe_study": [{"point": "x1", "strategy": "selected", "probe": [0.0, 14.5], "error": "boom"}],
            "robustness": {"rows": [], "spreads": {}},
        }
        checks = {c["id"]: c for c in acceptance_checks(report)}
        assert checks[1]["passed"]
        assert not any(checks[i]["passed"] for i in (2, 3, 4, 5, 6, 9))

    def test_spreads(self):
        rows = [
            {"strategy": "normal", "importances": {"x1": 1.0, "x2": 5.0}},
            {"strategy": "normal", "importances": {"x1": 2.0, "x2": -1.0}},
            {"strategy": "selected", "importances": {"x1": 0.0, "x2": 0.0}},
        ]
        assert importance_spreads(rows, "normal") == {"x1": 1.0, "x2": 6.0}
        assert importance_spreads(rows, "selected") == {"x1": 0.0, "x2": 0.0}
        assert importance_spreads([], "normal") == {}

    def test_nan_free(self, bench_report):
        for r in bench_report["probe_study"]:
            assert all(math.isfinite(v) for v in r["importances"].values())
