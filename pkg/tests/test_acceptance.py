"""Acceptance criteria at their stated sizes and tolerances.

Each test records one PASS/FAIL line, echoed in the pytest terminal summary
under "acceptance criteria".
"""

import csv
import io
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

import hindsight
from hindsight import linalg
from hindsight.cli import main
from hindsight.config import RunConfig
from hindsight.game import ThetaParams, equilibrium_roots, fixed_point_residual
from hindsight.harness import moment_event_check, run_coverage, run_power_curve, tail_validity_check
from hindsight.moments import slack_vector, test_statistic as statistic
from hindsight.regret import MULTINOMIAL, PayoffSpec, binary_regret, multinomial_regret

from conftest import ACCEPTANCE_LINES, make_data

PRESETS = Path(hindsight.__file__).parent / "presets"


def record(number, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    return ok


def preset_spec(name, **changes):
    return replace(RunConfig.load(PRESETS / name).experiment(), **changes)


def test_criterion_1_table1_coverage_at_zero_interaction():
    spec = preset_spec("table1.toml", phi0=(0.0,), reps=500, B=500)
    report = run_coverage(spec)
    mod = report.lookup(method="modified")[0]["coverage"]
    bench = report.lookup(method="benchmark")[0]["coverage"]
    ok = 0.948 - 0.035 <= mod <= 0.948 + 0.035 and bench >= 0.99
    assert record(1, ok, f"modified {mod:.3f} in [0.913, 0.983], benchmark {bench:.3f} >= 0.99")


def test_criterion_2_table1_conservative_with_interaction():
    spec = preset_spec("table1.toml", phi0=(0.5,), reps=500, B=500)
    report = run_coverage(spec)
    mod = report.lookup(method="modified")[0]["coverage"]
    bench = report.lookup(method="benchmark")[0]["coverage"]
    ok = mod >= 0.99 and bench >= 0.99
    assert record(2, ok, f"modified {mod:.3f}, benchmark {bench:.3f}, both >= 0.99")


def test_criterion_3_undercoverage_without_regrets():
    spec = preset_spec("table3.toml", phi0=(-1.0,), methods=("modified",), reps=500, B=500)
    assert spec.ignore_regret and spec.level == 0.90 and spec.designs == ((10, 300),)
    cov = run_coverage(spec).rows[0]["coverage"]
    assert record(3, cov <= 0.88, f"regrets ignored, modified coverage {cov:.3f} <= 0.88")


def test_criterion_4_power_against_zero_interaction():
    spec = preset_spec("figure1.toml", phi0=(0.5,), methods=("modified",), reps=200, B=500)
    assert spec.nuisance_points == 21 and spec.designs == ((10, 300),)
    freq = run_power_curve(spec, [0.0]).rows[0]["coverage"]
    assert record(4, freq <= 0.05, f"phi=0 covered with frequency {freq:.3f} <= 0.05")


def test_criterion_5_regret_tail_validity():
    spec = preset_spec("table1.toml", phi0=(0.5,), reps=200)
    rows = tail_validity_check(spec, rhos=(0.1, 0.01))
    ok = all(r["pass"] for r in rows)
    detail = ", ".join(f"rho={r['rho']}: {r['frequency']:.5f} <= {r['bound']:.5f}" for r in rows)
    assert record(5, ok, detail)


def test_criterion_6_moment_event_frequency():
    spec = preset_spec("table1.toml", phi0=(0.5,), reps=500)
    out = moment_event_check(spec)
    assert record(6, out["pass"], f"event frequency {out['frequency']:.3f} >= {out['bound']:.4f}")


def numerical_suite():
    gen = np.random.default_rng(2024)
    failures = []

    worst = 0.0
    for _ in range(1000):
        n = int(gen.integers(1, 9))
        m = gen.uniform(1e-3, 10.0, size=(n, n)) * gen.choice([1.0, 1e-4], size=(n, n))
        pair = linalg.perron_frobenius(m)
        worst = max(worst, np.linalg.norm(m @ pair.vector - pair.value * pair.vector) / np.linalg.norm(m))
    if worst > 1e-10:
        failures.append(f"PF residual {worst:.2e}")

    def two_alt(slope):
        return PayoffSpec(MULTINOMIAL, lambda x: np.zeros((np.size(x), 2)),
                          lambda x: np.full((np.size(x), 2), slope))

    group_of = np.repeat(np.arange(4), [2, 5, 17, 100])
    data = make_data(gen.integers(0, 2, group_of.size), gen.standard_normal(group_of.size), group_of)
    for slope in (0.3, -1.7):
        gap = np.max(np.abs(multinomial_regret(two_alt(slope), data, 0.01).lam[:, 0]
                            - binary_regret(PayoffSpec.linear_in_means(1.0, slope), data, 0.01).lam))
        if gap > 1e-12:
            failures.append(f"K=2 gap {gap:.2e}")

    resid = 0.0
    for phi in np.linspace(-2.0, 2.0, 21):
        for c in np.linspace(-2.0, 2.0, 9):
            theta = ThetaParams(1.0, float(phi))
            for p in equilibrium_roots(theta, float(c)):
                resid = max(resid, fixed_point_residual(theta, float(c), p))
    if resid > 1e-12:
        failures.append(f"fixed-point residual {resid:.2e}")

    scaled = binary_regret(PayoffSpec.linear_in_means(1.0, 0.5), data, 0.01).lam * np.sqrt(
        data.size_of_own_group() - 1.0)
    if np.ptp(scaled) > 4 * np.finfo(float).eps * scaled[0]:
        failures.append(f"lambda sqrt(N_s - 1) spread {np.ptp(scaled):.2e}")

    for _ in range(1000):
        ell = int(gen.integers(1, 6))
        l_u, l_l = gen.normal(size=ell), gen.normal(size=ell)
        w_u, w_l = gen.uniform(0, 1, ell), gen.uniform(0, 1, ell)
        du, dl = gen.uniform(0, 1, ell), gen.uniform(0, 1, ell)
        if statistic(l_u, l_l, w_u + du, w_l + dl, 50) > statistic(l_u, l_l, w_u, w_l, 50):
            failures.append("T increased with slack")
            break

    worst = 0.0
    for _ in range(50):
        d = gen.uniform(0, 1, size=(30, 4)) * gen.choice([0.0, 1.0], size=(30, 4), p=[0.3, 0.7])
        a = slack_vector(d, 0.01, 1e-16).w
        b = slack_vector(d, 0.01, 1e-12).w
        worst = max(worst, float(np.max(np.abs(a - b) / np.abs(a))))
    if worst >= 1e-6:
        failures.append(f"eta sensitivity {worst:.2e}")
    return failures


def test_criterion_7_numerical_invariants():
    failures = numerical_suite()
    detail = "; ".join(failures) if failures else "PF, K=2, fixed point, scaling, monotone T, eta"
    assert record(7, not failures, detail)


def strip_runtime(text):
    rows = list(csv.reader(io.StringIO(text)))
    if "runtime_s" not in rows[0]:
        return text
    k = rows[0].index("runtime_s")
    return [r[:k] + r[k + 1:] for r in rows]


PRESET_RUNS = [
    ("coverage", "table1.toml", ["--reps", "4", "--bootstrap", "50"]),
    ("coverage", "table3.toml", ["--reps", "2", "--bootstrap", "50"]),
    ("power", "figure1.toml", ["--reps", "2", "--bootstrap", "20"]),
    ("mcdiarmid-check", "mcdiarmid.toml", []),
]


def run_preset(tmp, command, preset, flags, workers, tag):
    out = tmp / f"{preset}-{workers}-{tag}"
    code = main([command, "--config", str(PRESETS / preset), "--workers", str(workers),
                 "--out", str(out), *flags])
    assert code == 0
    files = {p.name: p.read_text() for p in sorted(out.iterdir())}
    manifest = json.loads(files.pop("manifest.json"))
    # Requested output directory and worker cap are the only inputs that vary.
    manifest["config"].pop("output")
    manifest["config"]["experiment"].pop("workers")
    manifest.get("experiment", {}).pop("workers", None)
    return files, manifest


def test_criterion_8_determinism_and_worker_invariance(tmp_path):
    problems = []
    for command, preset, flags in PRESET_RUNS:
        first, manifest = run_preset(tmp_path, command, preset, flags, 1, "a")
        again, manifest_again = run_preset(tmp_path, command, preset, flags, 1, "b")
        for name in first:
            # The measured wall time is the only field allowed to differ.
            if strip_runtime(first[name]) != strip_runtime(again[name]):
                problems.append(f"{preset} rerun changed {name}")
        if manifest != manifest_again:
            problems.append(f"{preset} rerun changed manifest")
        for workers in (4, 8):
            other, manifest_other = run_preset(tmp_path, command, preset, flags, workers, "w")
            if {k: strip_runtime(v) for k, v in other.items()} != {k: strip_runtime(v) for k, v in first.items()}:
                problems.append(f"{preset} differs with {workers} workers")
            if manifest_other != manifest:
                problems.append(f"{preset} manifest differs with {workers} workers")
    detail = "; ".join(problems) if problems else "4 presets rerun identically at 1, 4 and 8 workers"
    assert record(8, not problems, detail)
