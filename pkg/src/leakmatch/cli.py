"""Command line entry point: ``leakmatch <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation, 1 anything else. Outputs are staged in a temporary
sibling directory and only moved into ``--out`` when the run succeeds.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import cohort_compare, popularity_profile, sweep, time_of_day_profile
from .config import COMMANDS, ExperimentConfig, load_config_file, validate
from .core import DiscretizationConfig
from .dataset import Dataset
from .errors import ConfigError, CorpusError, InvalidInputError, InvariantError, ShortTraceError
from .ingest import (
    SyntheticPopulationConfig,
    build_traces,
    generate_synthetic_events,
    read_events_csv,
    write_events_csv,
    SYNTHETIC_ORIGIN,
)
from .matcher import estimate_rho, monotonicity_violations
from .parallel import WORKERS_ENV, default_workers
from .uniqueness import TraceMatchMode, estimate_trace_uniqueness

log = logging.getLogger("leakmatch")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3, 4


def _list_arg(kind):
    def parse(s):
        try:
            return [kind(v) for v in s.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__} values") from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leakmatch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON config file; flags override its keys")
    common.add_argument("-o", "--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or CPU count)")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--dataset", help="dataset container written by generate/ingest")
    data.add_argument("--k", type=_list_arg(int), help="leak sizes, e.g. 1,2,3")
    data.add_argument("--delta-t-min", dest="delta_t_min", type=_list_arg(float))
    data.add_argument("--delta-xy-km", dest="delta_xy_km", type=_list_arg(float))
    data.add_argument("--sample-size", dest="sample_size", type=int)

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--delta-t-min", dest="delta_t_min", type=_list_arg(float))
    grid.add_argument("--delta-xy-km", dest="delta_xy_km", type=_list_arg(float))

    g = sub.add_parser("generate", parents=[common, grid], help="write a synthetic corpus")
    g.add_argument("--users", type=int)
    g.add_argument("--sites", type=int)
    g.add_argument("--no-events-csv", dest="events_csv", action="store_false", default=None)

    i = sub.add_parser("ingest", parents=[common, grid], help="raw event CSV to dataset container")
    i.add_argument("--input")
    i.add_argument("--merge-threshold", dest="merge_threshold", type=float)
    i.add_argument("--day-start", dest="day_start", type=int)

    m = sub.add_parser("match-leaks", parents=[common, data], help="unique-match probability per k")
    m.add_argument("--method", choices=["index", "pruned", "naive"])
    m.add_argument("--leaks-per-user", dest="leaks_per_user", type=int)

    sub.add_parser("sweep", parents=[common, data], help="probability grid over delta_t x delta_xy")

    pp = sub.add_parser("popularity", parents=[common, data], help="match frequency by location popularity")
    pp.add_argument("--bins", type=int)
    sub.add_parser("timeofday", parents=[common, data], help="match frequency by time of day")
    c = sub.add_parser("cohorts", parents=[common, data], help="mobility features of unique vs non-unique users")
    c.add_argument("--repeat", type=int)

    u = sub.add_parser("uniqueness", parents=[common, data], help="whole-trace uniqueness bounds")
    u.add_argument("--mode", choices=["strict", "relaxed", "both"])
    u.add_argument("--r", type=float)
    u.add_argument("--exhaustive", action="store_true", default=None)
    u.add_argument("--symmetric", action="store_true", default=None)

    sub.add_parser("selftest", parents=[common], help="oracle-equivalence and invariant checks")
    return p


_META_KEYS = {"config", "workers", "verbose"}


def resolve_config(args: argparse.Namespace):
    raw = {}
    if args.config:
        raw.update(load_config_file(args.config))
    for k, v in vars(args).items():
        if k in _META_KEYS or v is None:
            continue
        raw[k] = v
    return validate(raw)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(stage: Path, cfg: ExperimentConfig, workers: int, extra=None):
    outputs = sorted(p.name for p in stage.iterdir())
    manifest = {
        "format_version": cfg.format_version,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "workers": workers,
        "versions": {
            "leakmatch": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": {name: _sha256(stage / name) for name in outputs},
    }
    if extra:
        manifest.update(extra)
    (stage / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _text(path: Path, s: str):
    path.write_text(s, encoding="utf-8", newline="")


def _json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _dataset_at(cfg: ExperimentConfig, ds: Dataset, dt_min=None, dxy_km=None) -> Dataset:
    dt = int(round((dt_min if dt_min is not None else cfg.delta_t_min[0]) * 60))
    dxy = (dxy_km if dxy_km is not None else cfg.delta_xy_km[0]) * 1000.0
    if dt == ds.cfg.delta_t and abs(dxy - ds.cfg.delta_xy) < 1e-9:
        return ds
    return ds.coarsen(ds.cfg.coarsened(dxy, dt))


def _disc(cfg: ExperimentConfig) -> DiscretizationConfig:
    return DiscretizationConfig(
        delta_xy=cfg.delta_xy_km[0] * 1000.0,
        delta_t=int(round(cfg.delta_t_min[0] * 60)),
        day_start=int(cfg.day_start),
    )


def cmd_generate(cfg, stage, workers):
    pop = SyntheticPopulationConfig(num_users=cfg.users, num_sites=cfg.sites, seed=cfg.seed)
    table, _ = generate_synthetic_events(pop, cfg.day_start)
    ds = build_traces(table, _disc(cfg), merge_threshold=cfg.merge_threshold, projection_origin=SYNTHETIC_ORIGIN)
    ds.meta["synthetic"] = pop.to_dict()
    ds.save(stage / "dataset.lmds")
    if cfg.events_csv:
        write_events_csv(table, stage / "events.csv")
    _json(stage / "stats.json", ds.stats())


def cmd_ingest(cfg, stage, workers):
    table, rejected = read_events_csv(cfg.input)
    ds = build_traces(table, _disc(cfg), merge_threshold=cfg.merge_threshold, rejected=rejected)
    ds.save(stage / "dataset.lmds")
    _json(stage / "stats.json", ds.stats())


def _rho_csv(report) -> str:
    lines = ["k,n_leaks,rho,rho_std"]
    for row in report.aggregates()["per_k"]:
        lines.append(f"{row['k']},{row['n_leaks']},{row['rho']!r},{row['rho_std']!r}")
    return "\n".join(lines) + "\n"


def cmd_match_leaks(cfg, stage, workers):
    ds = _dataset_at(cfg, Dataset.load(cfg.dataset))
    report = estimate_rho(ds, cfg.k, cfg.sample_size, cfg.seed, cfg.method, cfg.leaks_per_user, workers)
    if len(cfg.k) > 1 and monotonicity_violations(report):
        raise InvariantError("nested leaks violated nu/xi monotonicity")
    _text(stage / "leaks.csv", report.to_csv())
    _text(stage / "rho.csv", _rho_csv(report))
    _text(stage / "report.json", report.to_json() + "\n")


def cmd_sweep(cfg, stage, workers):
    ds = _dataset_at(cfg, Dataset.load(cfg.dataset))
    dts = [int(round(v * 60)) for v in cfg.delta_t_min]
    dxys = [v * 1000.0 for v in cfg.delta_xy_km]
    grid = sweep(ds, cfg.k, dts, dxys, cfg.sample_size, cfg.seed, workers)
    bad = grid.monotonicity_violations()
    if any(bad.values()):
        raise InvariantError(f"sweep monotonicity violated: {bad}")
    _text(stage / "sweep.csv", grid.to_csv())
    _json(stage / "sweep.json", grid.manifest())


def cmd_popularity(cfg, stage, workers):
    base = Dataset.load(cfg.dataset)
    rows = ["delta_t_min,delta_xy_km,k,bin,frequency,unique_count,leak_count"]
    for dt in cfg.delta_t_min:
        for dxy in cfg.delta_xy_km:
            ds = _dataset_at(cfg, base, dt, dxy)
            report = estimate_rho(ds, cfg.k, cfg.sample_size, cfg.seed, workers=workers)
            for k in cfg.k:
                prof = popularity_profile(ds, report, cfg.bins, k)
                for b, (f, u, n) in enumerate(zip(prof.frequency.tolist(), prof.unique_counts.tolist(), prof.leak_counts.tolist())):
                    rows.append(f"{dt},{dxy!r},{k},{b},{f!r},{u},{n}")
    _text(stage / "popularity.csv", "\n".join(rows) + "\n")


def cmd_timeofday(cfg, stage, workers):
    base = Dataset.load(cfg.dataset)
    rows = ["delta_t_min,delta_xy_km,k,bin,frequency,unique_count,leak_count"]
    for dt in cfg.delta_t_min:
        for dxy in cfg.delta_xy_km:
            ds = _dataset_at(cfg, base, dt, dxy)
            report = estimate_rho(ds, cfg.k, cfg.sample_size, cfg.seed, workers=workers)
            for k in cfg.k:
                prof = time_of_day_profile(report, ds.cfg, k)
                for b, (f, u, n) in enumerate(zip(prof.frequency.tolist(), prof.unique_counts.tolist(), prof.leak_counts.tolist())):
                    rows.append(f"{dt},{dxy!r},{k},{b},{f!r},{u},{n}")
    _text(stage / "timeofday.csv", "\n".join(rows) + "\n")


def cmd_cohorts(cfg, stage, workers):
    ds = _dataset_at(cfg, Dataset.load(cfg.dataset))
    k = cfg.k[0]
    report = estimate_rho(ds, k, cfg.sample_size, cfg.seed, leaks_per_user=cfg.repeat, workers=workers)
    comp = cohort_compare(ds, report, k)
    _text(stage / "cohorts.csv", comp.to_csv())
    _json(stage / "cohorts.json", comp.meta)


def cmd_uniqueness(cfg, stage, workers):
    base = Dataset.load(cfg.dataset)
    modes = ["strict", "relaxed"] if cfg.mode == "both" else [cfg.mode]
    agg = ["delta_t_min,delta_xy_km,mode,r,probability,n_samples,skipped_comparisons"]
    samples = ["delta_t_min,delta_xy_km,mode,r,user,matches,unique,candidates,skipped"]
    for dt in cfg.delta_t_min:
        for dxy in cfg.delta_xy_km:
            ds = _dataset_at(cfg, base, dt, dxy)
            probs = {}
            for mode in modes:
                tm = TraceMatchMode(mode, cfg.r, cfg.exhaustive, cfg.symmetric)
                rep = estimate_trace_uniqueness(ds, cfg.sample_size, tm, cfg.seed, workers=workers)
                probs[mode] = rep.probability
                agg.append(f"{dt},{dxy!r},{mode},{cfg.r!r},{rep.probability!r},{len(rep.records)},{rep.skipped_comparisons}")
                for r in rep.records:
                    samples.append(f"{dt},{dxy!r},{mode},{cfg.r!r},{r.user},{r.matches},{r.unique},{r.candidates},{r.skipped}")
            if len(probs) == 2 and probs["strict"] < probs["relaxed"]:
                raise InvariantError("strict uniqueness fell below relaxed uniqueness")
    _text(stage / "uniqueness.csv", "\n".join(agg) + "\n")
    _text(stage / "uniqueness_samples.csv", "\n".join(samples) + "\n")


def cmd_selftest(cfg, stage, workers):
    from .selftest import run_selftest

    results = run_selftest(workers=workers)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in results]
    print("\n".join(lines))
    if stage is not None:
        _text(stage / "selftest.txt", "\n".join(lines) + "\n")
    if not all(ok for _, ok, _ in results):
        raise InvariantError("selftest failed")


HANDLERS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "match-leaks": cmd_match_leaks,
    "sweep": cmd_sweep,
    "popularity": cmd_popularity,
    "timeofday": cmd_timeofday,
    "cohorts": cmd_cohorts,
    "uniqueness": cmd_uniqueness,
    "selftest": cmd_selftest,
}
assert set(HANDLERS) == set(COMMANDS)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg, errors = resolve_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        workers = args.workers if args.workers is not None else default_workers()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if workers < 1:
        print("config error: workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    stage = None
    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=out.parent))
    try:
        HANDLERS[cfg.command](cfg, stage, workers)
        if stage is not None:
            _write_manifest(stage, cfg, workers)
            out.mkdir(parents=True, exist_ok=True)
            for p in sorted(stage.iterdir()):
                os.replace(p, out / p.name)
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CorpusError, InvalidInputError, ShortTraceError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    finally:
        if stage is not None and stage.exists():
            shutil.rmtree(stage, ignore_errors=True)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
