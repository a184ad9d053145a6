"""Acceptance suite: one test per release criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Every tolerance is fixed here; nothing is calibrated elsewhere.
"""

import json
import time

import numpy as np
import pytest

from conftest import make_query
from provex.abstraction import ReductionSchedule, build_abstract, refine
from provex.bounds import propagate_abstract, propagate_box, sample_box
from provex.cli import main
from provex.explain import (
    FeatureGrouping,
    explain_abstraction_refinement,
    explain_baseline,
    order_features,
)
from provex.fixtures import demo_network, mnist_shape_network, random_network, uniform_instances
from provex.images import save_instance_csv
from provex.intervals import IntervalVector, iv_subset
from provex.network import forward, forward_batch, save_network
from provex.queries import (
    OracleOutcome,
    RegressionQuery,
    check_concrete,
    check_regression,
    check_abstract,
    oracle_check,
)

SLACK = 1e-9


def _report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_c01_reference_network_values():
    """Exact logits and enclosures of the bundled small network, under 1 ms."""
    net, x = demo_network()
    np.testing.assert_array_equal(forward(net, x), [15.0, 46.0])
    box = IntervalVector([0, 1, 1], [1, 1, 1])
    lb = propagate_box(net, box)
    np.testing.assert_allclose(lb.final.lo, [15, 46], atol=SLACK)
    np.testing.assert_allclose(lb.final.hi, [22, 55], atol=SLACK)
    np.testing.assert_allclose(lb.per_layer[0].lo, [3, 3, 6], atol=SLACK)
    np.testing.assert_allclose(lb.per_layer[0].hi, [5, 5, 7], atol=SLACK)
    for _ in range(3):  # warm-up
        forward(net, x)
        propagate_box(net, box)
    best = min(
        _timed(lambda: (forward(net, x), propagate_box(net, box))) for _ in range(5)
    )
    _report(1, best < 1e-3, f"logits (15,46), enclosures exact, {best * 1e6:.0f}us per evaluation")


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def test_c02_soundness_of_reduced_sufficiency():
    """No reduced-network Sufficient verdict is ever refuted by the oracle."""
    t0 = time.time()
    sufficient = witnesses = 0
    for seed in range(200):
        act = "relu" if seed % 2 == 0 else "sigmoid"
        rng = np.random.default_rng(seed)
        depth = int(rng.integers(1, 4))
        widths = tuple(int(w) for w in rng.integers(8, 49, size=depth))
        net = random_network(6, widths, 3, act, seed=seed)
        x = uniform_instances(net, 1, seed=seed)[0]
        epsilon = (0.01, 0.05, 0.1)[seed % 3]
        fixed = set(rng.choice(6, size=3, replace=False).tolist())
        q = make_query(net, x, fixed, epsilon)
        lb = propagate_box(net, q.query_box())
        anet = build_abstract(net, lb, rate=(0.3, 0.5, 0.7)[seed % 3])
        if check_abstract(anet, q).is_sufficient:
            sufficient += 1
            result = oracle_check(net, q, budget=2048)
            if result.outcome is OracleOutcome.WITNESS:
                witnesses += 1
    elapsed = time.time() - t0
    ok = witnesses == 0 and sufficient > 50 and elapsed < 60
    _report(2, ok, f"{sufficient} sufficient verdicts, {witnesses} refuted, {elapsed:.1f}s")


def test_c03_containment_along_refinement_chains():
    """Refinement chains nest and always contain sampled network outputs."""
    rng = np.random.default_rng(2)
    worst_violation = 0.0
    for seed in range(200):
        act = "relu" if seed % 2 == 0 else "sigmoid"
        net = random_network(6, (12, 10), 3, act, seed=seed + 4000)
        x = uniform_instances(net, 1, seed=seed)[0]
        free = rng.choice(6, size=3, replace=False)
        lo, hi = x.copy(), x.copy()
        lo[free] = np.maximum(0.0, x[free] - 0.15)
        hi[free] = np.minimum(1.0, x[free] + 0.15)
        box = IntervalVector(lo, hi)
        lb = propagate_box(net, box)
        anet = build_abstract(net, lb, 0.25)
        prev = propagate_abstract(anet, box)
        logits = forward_batch(net, sample_box(box, 50, rng))
        for rate in (0.5, 0.75, 1.0):
            assert np.all(logits >= prev.lo - SLACK) and np.all(logits <= prev.hi + SLACK)
            anet = refine(net, anet, lb, rate)
            out = propagate_abstract(anet, box)
            assert iv_subset(out, prev, SLACK)
            assert iv_subset(lb.final, out, SLACK)
            worst_violation = max(
                worst_violation,
                float(np.max(prev.lo - out.lo, initial=0.0)),
                float(np.max(out.hi - prev.hi, initial=0.0)),
            )
            prev = out
        assert np.all(logits >= prev.lo - SLACK) and np.all(logits <= prev.hi + SLACK)
    _report(3, True, f"200 chains nested, worst overshoot {worst_violation:.2e}")


def test_c04_implication_chain_monotonicity():
    """Sufficient never reverts along finer rates; explanations never grow."""
    schedule = ReductionSchedule((0.25, 0.5, 0.75, 1.0))
    reversions = 0
    checked = 0
    for seed in range(60):
        act = "relu" if seed % 2 == 0 else "sigmoid"
        net = random_network(6, (12, 10), 3, act, seed=seed + 5000)
        x = uniform_instances(net, 1, seed=seed)[0]
        rng = np.random.default_rng(seed)
        fixed = set(rng.choice(6, size=3, replace=False).tolist())
        q = make_query(net, x, fixed, 0.1)
        lb = propagate_box(net, q.query_box())
        anet = build_abstract(net, lb, schedule.rates[0])
        sufficient_seen = check_abstract(anet, q).is_sufficient
        for rate in schedule.rates[1:]:
            anet = refine(net, anet, lb, rate)
            now = check_abstract(anet, q).is_sufficient
            checked += 1
            if sufficient_seen and not now:
                reversions += 1
            sufficient_seen = sufficient_seen or now
    shrunk = True
    for seed in range(20):
        net = random_network(6, (12, 10), 3, "sigmoid", seed=seed + 5100)
        x = uniform_instances(net, 1, seed=seed)[0]
        _, trace = explain_abstraction_refinement(net, x, 0.1, schedule=schedule, seed=seed)
        sizes = [len(ids) for _, ids in sorted(trace.snapshots.items())]
        shrunk = shrunk and all(a >= b for a, b in zip(sizes, sizes[1:]))
    ok = reversions == 0 and shrunk
    _report(4, ok, f"{checked} refinement verdicts monotone, snapshot sizes non-increasing")


def test_c05_search_equivalence(tmp_path):
    """Both searches return identical sets; the comparison bench exits 0."""
    mismatches = 0
    for seed in range(100):
        act = "relu" if seed % 2 == 0 else "sigmoid"
        net = random_network(7, (12, 10), 3, act, seed=seed + 300)
        x = uniform_instances(net, 1, seed=seed)[0]
        grouping = FeatureGrouping.singletons(7)
        ordering = order_features(net, x, grouping, "sensitivity")
        kept_a, _ = explain_abstraction_refinement(net, x, 0.1, grouping, ordering, seed=seed)
        kept_b, _ = explain_baseline(net, x, 0.1, grouping, ordering, seed=seed)
        mismatches += kept_a != kept_b
    net = random_network(6, (10, 8), 3, "relu", seed=77)
    net_path = tmp_path / "net.json"
    net_path.write_text(save_network(net))
    args = ["bench", "--network", str(net_path), "--epsilon", "0.1", "--out", str(tmp_path)]
    for i, row in enumerate(uniform_instances(net, 5, seed=77)):
        p = tmp_path / f"x{i}.csv"
        save_instance_csv(str(p), row)
        args += ["--input", str(p)]
    bench_code = main(args)
    ok = mismatches == 0 and bench_code == 0
    _report(5, ok, f"100 instances identical, bench exit code {bench_code}")


def test_c06_oracle_minimality():
    """With the complete oracle, results are subset-minimal and sufficient.

    Instances come from a seeded stream; instances where any search or
    verification query exhausts the split budget are skipped until 50
    fully decidable instances are collected.
    """
    epsilon = 0.15
    budget = 1 << 14
    collected = failures = skipped = 0
    seed = 0
    while collected < 50 and seed < 300:
        seed += 1
        net = random_network(6, (8,), 2, "relu", seed=seed + 600)
        x = uniform_instances(net, 1, seed=seed)[0]
        kept, trace = explain_baseline(net, x, epsilon, backend="oracle", oracle_budget=budget)
        if any(step.verdict == "uncertain" for step in trace.steps):
            skipped += 1
            continue
        fixed = frozenset(kept)
        final = oracle_check(net, make_query(net, x, fixed, epsilon), budget=budget)
        removals = [
            oracle_check(net, make_query(net, x, fixed - {g}, epsilon), budget=budget)
            for g in kept
        ]
        if final.outcome is OracleOutcome.EXHAUSTED or any(
            r.outcome is OracleOutcome.EXHAUSTED for r in removals
        ):
            skipped += 1
            continue
        collected += 1
        if not final.proved:
            failures += 1
        elif any(r.outcome is not OracleOutcome.WITNESS for r in removals):
            failures += 1
    ok = collected == 50 and failures == 0
    _report(6, ok, f"{collected} decidable instances ({skipped} skipped), {failures} minimality failures")


def test_c07_trivial_bounds():
    """Zero radius frees everything; the full set is always sufficient;
    an unreduced reduction is bit-identical to the network."""
    for seed in range(10):
        net = random_network(6, (9, 8), 3, "relu" if seed % 2 else "sigmoid", seed=seed + 40)
        x = uniform_instances(net, 1, seed=seed)[0]
        kept, _ = explain_baseline(net, x, 0.0)
        assert kept == frozenset()
        q = make_query(net, x, set(range(6)), 10.0)
        assert check_concrete(net, q).is_sufficient
    bit_equal = True
    for seed in range(50):
        act = ("relu", "sigmoid", "tanh")[seed % 3]
        net = random_network(6, (10, 8), 3, act, seed=seed + 700)
        x = uniform_instances(net, 1, seed=seed)[0]
        rng = np.random.default_rng(seed)
        free = rng.choice(6, size=3, replace=False)
        lo, hi = x.copy(), x.copy()
        lo[free] = np.maximum(0.0, x[free] - 0.2)
        hi[free] = np.minimum(1.0, x[free] + 0.2)
        box = IntervalVector(lo, hi)
        lb = propagate_box(net, box)
        out = propagate_abstract(build_abstract(net, lb, 1.0), box)
        bit_equal = bit_equal and np.array_equal(out.lo, lb.final.lo) and np.array_equal(out.hi, lb.final.hi)
    _report(7, bit_equal, "zero-radius, full-set, and unreduced-identity checks hold")


@pytest.mark.slow
def test_c08_performance_proxy(tmp_path):
    """On the large sigmoid fixture the reduced search does no more neuron
    evaluations than the baseline on most instances, and coarse queries are
    faster per query than full ones."""
    net = mnist_shape_network(seed=3)
    net_path = tmp_path / "net.json"
    net_path.write_text(save_network(net))
    args = [
        "bench", "--network", str(net_path), "--epsilon", "0.0001",
        "--out", str(tmp_path), "--seed", "0",
    ]
    for i, row in enumerate(uniform_instances(net, 20, seed=11)):
        p = tmp_path / f"x{i:02d}.csv"
        save_instance_csv(str(p), row)
        args += ["--input", str(p)]
    t0 = time.time()
    code = main(args)
    elapsed = time.time() - t0
    assert code == 0
    import csv as _csv

    with open(tmp_path / "bench.csv", newline="") as fh:
        rows = list(_csv.DictReader(fh))
    evals = {}
    for r in rows:
        evals.setdefault(r["instance"], {})[r["algorithm"]] = int(r["neuron_evaluations"])
    wins = sum(
        1 for v in evals.values() if v["abstraction_refinement"] <= v["baseline"]
    )
    summary = json.loads((tmp_path / "bench_summary.json").read_text())
    times = summary["mean_query_time_by_rate"]
    coarse, full = times.get("0.1"), times.get("1")
    print(
        f"  [logged] per-instance neuron-evals: "
        f"{[(v['baseline'], v['abstraction_refinement']) for v in evals.values()][:5]}..."
    )
    print(f"  [logged] mean query time by rate: { {k: f'{v:.2e}' for k, v in times.items()} }")
    ok = wins >= 14 and coarse is not None and full is not None and coarse < full
    _report(8, ok, f"reduced search wins {wins}/20, query time {coarse:.2e}s@0.1 vs {full:.2e}s@1.0, bench {elapsed:.0f}s")


def test_c09_regression_sufficiency():
    """Regression verdicts are never contradicted by a dense grid."""
    sufficient = contradicted = 0
    for seed in range(50):
        net = random_network(5, (8, 6), 1, "tanh", seed=seed + 900)
        x = uniform_instances(net, 1, seed=seed)[0]
        q = RegressionQuery(x, frozenset({2, 3, 4}), 0.2, 0.1, net.input_domain)
        verdict = check_regression(net, q, rng=np.random.default_rng(seed))
        if not verdict.is_sufficient:
            continue
        sufficient += 1
        box = q.query_box()
        grids = [np.linspace(box.lo[i], box.hi[i], 17) for i in range(2)]
        mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = np.tile(x, (mesh.shape[0], 1))
        pts[:, :2] = mesh
        values = forward_batch(net, pts)[:, 0]
        ref = forward(net, x)[0]
        if np.any(np.abs(values - ref) > q.delta + 1e-12):
            contradicted += 1
    ok = contradicted == 0 and sufficient >= 10
    _report(9, ok, f"{sufficient} sufficient verdicts over 50 nets, {contradicted} contradicted")


def test_c10_report_determinism(tmp_path):
    """Identical configurations produce byte-identical reports apart from
    wall-time fields."""
    net, x = demo_network()
    net_path = tmp_path / "net.json"
    net_path.write_text(save_network(net))
    inst_path = tmp_path / "x.csv"
    save_instance_csv(str(inst_path), x)
    out = tmp_path / "out"
    args = [
        "explain", "--network", str(net_path), "--input", str(inst_path),
        "--epsilon", "1.0", "--seed", "5", "--out", str(out),
    ]

    def normalized_bytes():
        assert main(args) == 0
        report = json.loads((out / "report.json").read_text())
        report["work"]["wall_time"] = 0.0
        report["trace"]["wall_time"] = 0.0
        for step in report["trace"]["steps"]:
            step["elapsed"] = 0.0
        return json.dumps(report, sort_keys=False).encode()

    first = normalized_bytes()
    second = normalized_bytes()
    _report(10, first == second, f"{len(first)} report bytes identical across runs")
