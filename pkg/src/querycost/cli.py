"""Command-line entry point: ``querycost <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data/repository error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import tempfile
import threading
import urllib.request
from datetime import timedelta
from pathlib import Path

from . import __version__
from .errors import QueryCostError

log = logging.getLogger("querycost")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers

def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2))


def _read_logs(path, now, window_days):
    """Records within ``window_days`` before ``now`` (default: the newest datehour in the file)."""
    from .logs import load_logs, parse_datehour

    batch = load_logs(path, window_days=None)
    now = parse_datehour(now) if now else max(r.timestamp for r in batch)
    if window_days is None:
        return list(batch), now
    lo = now - timedelta(days=window_days)
    kept = [r for r in batch if lo <= r.timestamp <= now]
    if not kept:
        from .errors import EmptyDataset
        raise EmptyDataset(f"no records of {path} fall in the {window_days} days before {now:%Y%m%d%H}")
    return kept, now


def _load_grid(path, kind):
    if not path:
        return None
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get(kind)
        if data is None:
            raise UsageError(f"grid file {path} has no entry for model kind {kind!r}")
    if not isinstance(data, list) or not data:
        raise UsageError(f"grid file {path} must hold a non-empty list of hyperparameter objects")
    return data


def _spec_from_args(args):
    from .synth import WorkloadSpec, default_spec

    spec = WorkloadSpec.load(args.spec) if getattr(args, "spec", None) else default_spec()
    if getattr(args, "noise_rate", None) is not None:
        spec.noise_rate = float(args.noise_rate)
    return spec


# ---------------------------------------------------------------- subcommands

def cmd_generate(args) -> int:
    from .logs import write_csv, write_jsonl
    from .synth import drift_shift, generate

    spec = _spec_from_args(args)
    if args.start or args.span_days:
        spec = spec.with_window(args.start or spec.start, args.span_days or spec.span_days)
    if args.severity:
        spec = drift_shift(spec, args.severity, args.seed)
    records = generate(spec, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    (write_csv if out.suffix.lower() == ".csv" else write_jsonl)(records, out)
    if args.save_spec:
        spec.save(args.save_spec)
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .pipeline import publish, train_bundles

    records, now = _read_logs(args.logs, args.now, args.window_days)
    log.info("training on %d records up to %s", len(records), now.isoformat())
    result = train_bundles(records, args.model, args.vectorizer, grid=_load_grid(args.grid, args.model),
                           seed=args.seed, train_fraction=args.train_fraction, cv_folds=args.cv_folds)
    versions = publish(args.repo, result)
    print(result.summary())
    for r, scores in result.cv_scores.items():
        print(f"cv mean accuracy [{r}]: {', '.join(f'{s:.4f}' for s in scores)}")
    print(f"saved cpu v{versions['cpu']}, memory v{versions['memory']} to {args.repo}")
    if args.report:
        _write_json(args.report, {
            "versions": versions,
            "model": args.model,
            "vectorizer": args.vectorizer,
            "n_train": len(result.train),
            "n_test": len(result.test),
            "hyperparameters": {r: b.hyperparameters for r, b in result.bundles.items()},
            "cv_scores": result.cv_scores,
            "reports": {r: rep.to_dict() for r, rep in result.reports.items()},
        })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .drift import MonitorWindow, evaluate_window
    from .logs import clean
    from .repo import load_bundle

    records, _ = _read_logs(args.logs, args.now, args.window_days)
    window = MonitorWindow.from_records(0, clean(records))
    out = {}
    for resource, version in (("cpu", args.cpu_version), ("memory", args.memory_version)):
        bundle = load_bundle(args.repo, resource, version)
        report = evaluate_window(bundle, window)
        out[resource] = {"version": bundle.version, **report.to_dict()}
        print(report.format_table(f"[{resource}] v{bundle.version} {bundle.model_kind}+{bundle.vectorizer_kind}"))
        print()
    if args.report:
        _write_json(args.report, out)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .serving import serve

    handle = serve(args.repo, args.bind)
    print(f"listening on {handle.url}", flush=True)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    try:
        while not stop.wait(0.5):
            pass
    finally:
        handle.shutdown()
    print("shut down", flush=True)
    return EXIT_OK


def _reload_over_http(url):
    def reload(resource, version):
        body = json.dumps({"resource": resource, "version": version}).encode()
        req = urllib.request.Request(url.rstrip("/") + "/v1/reload", body, {"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=30) as resp:
            log.info("serving reloaded: %s", resp.read().decode())
    return reload


def cmd_monitor(args) -> int:
    from .drift import drift_scenario
    from .synth import default_spec

    spec = _spec_from_args(args) if args.spec or args.noise_rate is not None else default_spec(noise_rate=0.05)
    from .pipeline import coerce_params
    from .models import MODEL_KINDS

    hp = coerce_params(args.model, _load_grid(args.grid, args.model)[0]) if args.grid else MODEL_KINDS[args.model][1]()
    drift_at = args.drift_at if args.drift_at and args.drift_at > 0 else None
    on_publish = _reload_over_http(args.serve_url) if args.serve_url else None
    with tempfile.TemporaryDirectory() as tmp:
        repo = args.repo or tmp
        reports, _ = drift_scenario(repo, spec, args.windows, drift_at, args.severity, args.window_size,
                                          args.train_size, args.model, args.vectorizer, hp, args.seed, on_publish)
    lines = [json.dumps(r.to_dict()) for r in reports]
    print("\n".join(lines))
    print()
    print(f"{'window':>6}  {'resource':<8} {'accuracy':>8} {'heavy P':>8} {'heavy R':>8}  retrain")
    for r in reports:
        print(f"{r.window_index:>6}  {r.resource:<8} {r.accuracy:>8.4f} {r.heavy_precision:>8.3f} "
              f"{r.heavy_recall:>8.3f}  {'yes' if r.retrain_triggered else ''}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("\n".join(lines) + "\n")
    if args.plot:
        from .plotting import plot_drift
        png, csv_path = plot_drift(reports, args.plot)
        print(f"wrote {png} and {csv_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from . import router
    from .synth import generate

    if args.logs:
        records, _ = _read_logs(args.logs, args.now, None)
    else:
        records = generate(_spec_from_args(args), args.n, args.seed)
    workload = router.workload_from_records(records, args.arrivals_per_tick, args.seed)
    history = router.workload_from_records(generate(_spec_from_args(args), 20000, args.seed + 1))
    capacity = args.capacity or router.capacity_for_utilization(workload, args.clusters, args.utilization)
    if args.repo:
        from .repo import load_bundle
        predictor = router.bundle_predictor(load_bundle(args.repo, "cpu"), load_bundle(args.repo, "memory"))
    else:
        predictor = router.oracle_predictor
    reports = []
    for policy in args.policy or router.POLICIES:
        pol = router.RoutingPolicy(policy, heavy_cap=args.heavy_cap, class_costs=router.class_cost_estimates(history))
        rep = router.simulate(workload, router.make_clusters(args.clusters, capacity, args.max_concurrency), pol,
                              predictor if policy == "predicted_cost" else router.oracle_predictor)
        reports.append(rep)
        print(rep.to_json())
    if args.report:
        _write_json(args.report, {"capacity": capacity, "clusters": args.clusters,
                                  "predictor": "model" if args.repo else "oracle",
                                  "reports": [r.to_dict() for r in reports]})
    if args.plot:
        from .plotting import plot_imbalance
        png, csv_path = plot_imbalance(reports, args.plot)
        print(f"wrote {png} and {csv_path}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    import numpy as np

    from .evaluation import kmeans, pearson_correlation, rank_correlation
    from .labeling import class_distribution, label_records
    from .logs import clean

    records, _ = _read_logs(args.logs, args.now, args.window_days)
    records = clean(records)
    dist = class_distribution(label_records(records))
    cpu = np.array([r.cpu_time_ms for r in records], dtype=float)
    mem = np.array([r.peak_memory_bytes for r in records], dtype=float)
    pts = np.column_stack([np.log10(cpu + 1), np.log10(mem + 1)])
    km = kmeans(pts, args.k, args.seed)
    out = {
        "n": len(records),
        "class_distribution": dist,
        "pearson": pearson_correlation(cpu, mem),
        "rank_correlation": rank_correlation(cpu, mem),
        "kmeans_log10_centroids": km.centroids.tolist(),
        "kmeans_inertia": km.inertia,
    }
    print(json.dumps(out, indent=2))
    if args.plot:
        from .plotting import plot_class_distribution
        plot_class_distribution(dist, args.plot)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON file whose keys override command-line options")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="querycost", description="SQL query cost classification toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def logs_opts(sp, required=True):
        sp.add_argument("--logs", required=required, help="query log file (.jsonl or .csv)")
        sp.add_argument("--now", help="window end as YYYYMMDDHH (default: newest datehour in the file)")

    g = sub.add_parser("generate", parents=[common], help="write synthetic query logs")
    g.add_argument("--n", type=int, default=10_000)
    g.add_argument("--out", required=True)
    g.add_argument("--spec", help="workload spec JSON")
    g.add_argument("--noise-rate", type=float)
    g.add_argument("--severity", type=float, default=0.0, help="apply drift_shift with this severity")
    g.add_argument("--start", help="first datehour (YYYYMMDDHH)")
    g.add_argument("--span-days", type=float)
    g.add_argument("--save-spec", help="write the effective workload spec here")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="train and save cpu and memory bundles")
    logs_opts(t)
    t.add_argument("--repo", required=True)
    t.add_argument("--model", choices=["rf", "gbt", "logreg"], default="gbt")
    t.add_argument("--vectorizer", choices=["count", "tfidf"], default="tfidf")
    t.add_argument("--grid", help="JSON list of hyperparameter objects (or {kind: list})")
    t.add_argument("--window-days", type=int, default=90)
    t.add_argument("--train-fraction", type=float, default=0.8)
    t.add_argument("--cv-folds", type=int, default=3)
    t.add_argument("--report", help="write metrics JSON here")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="score saved bundles on a log file")
    logs_opts(e)
    e.add_argument("--repo", required=True)
    e.add_argument("--cpu-version", default="latest")
    e.add_argument("--memory-version", default="latest")
    e.add_argument("--window-days", type=int, default=None)
    e.add_argument("--report")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("serve", parents=[common], help="run the prediction HTTP service")
    s.add_argument("--repo", required=True)
    s.add_argument("--bind", default="127.0.0.1:8080")
    s.set_defaults(func=cmd_serve)

    m = sub.add_parser("monitor", parents=[common], help="run the synthetic drift/retrain scenario")
    m.add_argument("--repo", help="model repository (default: a temporary directory)")
    m.add_argument("--windows", type=int, default=8)
    m.add_argument("--drift-at", type=int, default=4, help="first shifted window (0: no drift)")
    m.add_argument("--severity", type=float, default=0.5)
    m.add_argument("--window-size", type=int, default=5000)
    m.add_argument("--train-size", type=int, default=30000)
    m.add_argument("--model", choices=["rf", "gbt", "logreg"], default="gbt")
    m.add_argument("--vectorizer", choices=["count", "tfidf"], default="tfidf")
    m.add_argument("--grid", help="JSON hyperparameters; the first entry is used (default: model defaults)")
    m.add_argument("--spec")
    m.add_argument("--noise-rate", type=float)
    m.add_argument("--serve-url", help="ask this service to reload after each retrain")
    m.add_argument("--out", help="write the JSON-lines report here")
    m.add_argument("--plot", help="write a decay/recovery figure (PNG) and CSV here")
    m.set_defaults(func=cmd_monitor)

    r = sub.add_parser("simulate", parents=[common], help="simulate routing policies")
    logs_opts(r, required=False)
    r.add_argument("--n", type=int, default=10_000)
    r.add_argument("--spec")
    r.add_argument("--noise-rate", type=float, default=0.05)
    r.add_argument("--repo", help="use this repository's latest models as the predictor (default: oracle)")
    r.add_argument("--clusters", type=int, default=4)
    r.add_argument("--policy", action="append", choices=["round_robin", "least_loaded", "predicted_cost"])
    r.add_argument("--arrivals-per-tick", type=float, default=10.0)
    r.add_argument("--utilization", type=float, default=0.8)
    r.add_argument("--capacity", type=float, help="CPU-seconds per tick per cluster (default: from --utilization)")
    r.add_argument("--max-concurrency", type=int, default=16)
    r.add_argument("--heavy-cap", type=int, default=2)
    r.add_argument("--report")
    r.add_argument("--plot")
    r.set_defaults(func=cmd_simulate)

    d = sub.add_parser("diagnose", parents=[common], help="class balance, correlation and cost clusters")
    logs_opts(d)
    d.add_argument("--window-days", type=int, default=None)
    d.add_argument("--k", type=int, default=3)
    d.add_argument("--plot")
    d.set_defaults(func=cmd_diagnose)
    return p


def _apply_config(parser, args) -> None:
    if not args.config:
        return
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest in ("command", "func", "config") or not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        setattr(args, dest, value)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(parser, args)
        return args.func(args)
    except UsageError as exc:
        print(f"querycost: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QueryCostError as exc:
        print(f"querycost: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"querycost: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, TypeError) as exc:  # invalid option values, e.g. hyperparameters from a grid file
        print(f"querycost: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - last-resort diagnostic
        log.exception("internal error")
        print(f"querycost: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
