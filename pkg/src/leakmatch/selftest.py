"""Built-in oracle-equivalence and invariant checks on an embedded corpus.

The corpus is regenerated from a pinned synthetic config; its checksum and
the naive-scan match counts of a fixed leak sample are frozen in
``data/selftest_golden.json``.
"""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .analysis import sweep
from .core import DiscretizationConfig
from .ingest import SyntheticPopulationConfig, generate_synthetic
from .matcher import count_matches, estimate_rho, monotonicity_violations
from .uniqueness import (
    TraceMatchMode,
    estimate_trace_uniqueness,
    relaxed_trace_match,
    strict_trace_match,
)

SELFTEST_POPULATION = dict(num_users=1000, num_sites=600, events_mean=80.0, events_std=120.0, seed=20240101)
SELFTEST_DISCRETIZATION = dict(delta_xy=200.0, delta_t=300)
SELFTEST_LEAKS = dict(k=list(range(1, 11)), sample_size=50, seed=7)


def selftest_corpus():
    return generate_synthetic(
        SyntheticPopulationConfig(**SELFTEST_POPULATION), DiscretizationConfig(**SELFTEST_DISCRETIZATION)
    )


def load_golden() -> dict:
    text = resources.files("leakmatch").joinpath("data/selftest_golden.json").read_text(encoding="utf-8")
    return json.loads(text)


def run_selftest(workers: int = 1):
    """Return ``(name, passed, detail)`` triples."""
    results = []
    golden = load_golden()
    ds = selftest_corpus()

    checksum = ds.checksum()
    results.append(("corpus_checksum", checksum == golden["checksum"], checksum[:16]))

    try:
        ds.check_invariants()
        results.append(("index_consistency", True, f"{len(ds.index)} keys"))
    except AssertionError as e:
        results.append(("index_consistency", False, str(e)))

    report = estimate_rho(ds, workers=workers, **SELFTEST_LEAKS)
    nus = [r.nu for r in report.records]
    results.append(("golden_nu", nus == golden["nu"], f"{len(nus)} leaks"))
    leaks = [(r.tuples, r.user) for r in report.records]
    mismatches = 0
    from .core import Leak

    for tuples, user in leaks:
        leak = Leak(frozenset(tuples), user, ds.cfg)
        naive = count_matches(leak, ds, "naive")
        if not (naive == count_matches(leak, ds, "pruned") == count_matches(leak, ds, "index")):
            mismatches += 1
    results.append(("index_pruned_naive_equivalence", mismatches == 0, f"{mismatches} mismatches"))
    results.append(("self_match", all(r.owner_hit == 1 and r.nu >= 1 for r in report.records), "owner in match set"))
    bad = monotonicity_violations(report)
    results.append(("nested_k_monotonicity", bad == 0, f"{bad} violations"))

    rng = np.random.default_rng(11)
    users = ds.users
    viol = 0
    for _ in range(2000):
        a, b = rng.choice(len(users), size=2)
        ta, tb = ds.traces[users[a]], ds.traces[users[b]]
        s, r1, r2 = strict_trace_match(ta, tb), relaxed_trace_match(ta, tb), relaxed_trace_match(tb, ta)
        if (s and not r1) or r1 != r2:
            viol += 1
    results.append(("strict_implies_relaxed", viol == 0, f"{viol} violations / 2000 pairs"))

    probs = {}
    for mode in ("strict", "relaxed"):
        tm = TraceMatchMode(mode)
        idx = estimate_trace_uniqueness(ds, 60, tm, seed=3, workers=workers)
        pair = estimate_trace_uniqueness(ds, 60, tm, seed=3, method="pairwise")
        same = [a.matches for a in idx.records] == [b.matches for b in pair.records]
        results.append((f"uniqueness_{mode}_index_vs_pairwise", same, f"p={idx.probability:.3f}"))
        probs[mode] = idx.probability
    results.append(("bound_ordering", probs["strict"] >= probs["relaxed"], str(probs)))

    grid = sweep(ds, [1, 2, 3], [300, 900], [200.0, 1000.0], 100, seed=5, workers=workers)
    bad = grid.monotonicity_violations()
    results.append(("sweep_monotonicity", not any(bad.values()), json.dumps(bad, sort_keys=True)))
    return results
