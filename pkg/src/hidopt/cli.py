"""Command-line interface: suite runner, aggregation, single runs, service."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .detection import DetectionConfig
from .experiments import ExperimentSuite, heatmap, run_suite, summarize
from .orchestrator import RunConfig, run


def _cmd_run(args) -> int:
    suite = ExperimentSuite.load(args.suite)
    env_base = os.environ.get("HO_SEED_BASE")
    if env_base is not None:
        suite.seed_base = int(env_base)
    out = run_suite(suite, args.out, jobs=args.jobs, smoke=args.smoke)
    print(f"suite '{suite.name}' finished; results in {out}")
    return 0


def _cmd_summarize(args) -> int:
    out = summarize(args.in_dir, args.out, pairs_out=args.pairs_out, long_out=args.long_out)
    print(f"summary written to {out}")
    return 0


def _cmd_heatmap(args) -> int:
    out = heatmap(args.in_dir, args.out)
    print(f"heatmap written to {out}")
    return 0


def _cmd_single(args) -> int:
    data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        data["seed"] = args.seed
    if args.mode:
        data["mode"] = args.mode
    if args.method or args.policy or args.k is not None or args.tau is not None:
        det = dict(data.get("detection") or {})
        if args.method:
            det["method"] = args.method
        if args.policy:
            det["policy"] = args.policy
        if args.k is not None:
            det["k"] = args.k
        if args.tau is not None:
            det["tau"] = args.tau
        DetectionConfig(
            method=det.get("method", "univariate"),
            policy=det.get("policy", "threshold"),
            k=det.get("k"),
            tau=det.get("tau"),
        )
        data["detection"] = det
    cfg = RunConfig.from_dict(data)
    record = run(cfg)
    Path(args.out).write_text(record.to_json(), encoding="utf-8")
    final = record.final
    print(
        f"run finished: true utility {final['true_utility']}, "
        f"active mask {''.join(str(v) for v in final['mask'])}, "
        f"record in {args.out}"
    )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint_dir=args.checkpoint_dir, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hidopt",
        description="Interactive multi-objective optimization with online objective reduction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment suite")
    p_run.add_argument("--suite", required=True, help="suite JSON file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p_run.add_argument("--smoke", action="store_true", help="reduced schedule for CI")
    p_run.set_defaults(func=_cmd_run)

    p_sum = sub.add_parser("summarize", help="aggregate a results directory")
    p_sum.add_argument("--in", dest="in_dir", required=True)
    p_sum.add_argument("--out", required=True)
    p_sum.add_argument("--pairs-out", default=None)
    p_sum.add_argument("--long-out", default=None)
    p_sum.set_defaults(func=_cmd_summarize)

    p_heat = sub.add_parser("heatmap", help="export active-objective frequencies")
    p_heat.add_argument("--in", dest="in_dir", required=True)
    p_heat.add_argument("--out", required=True)
    p_heat.set_defaults(func=_cmd_heatmap)

    p_single = sub.add_parser("single", help="execute one run from a config file")
    p_single.add_argument("--config", required=True, help="run config JSON")
    p_single.add_argument("--out", required=True, help="output record JSON")
    p_single.add_argument("--seed", type=int, default=None)
    p_single.add_argument("--mode", choices=["golden", "only_learning", "detection"], default=None)
    p_single.add_argument("--method", choices=["univariate", "rfe"], default=None)
    p_single.add_argument("--policy", choices=["fixed_k", "threshold"], default=None)
    p_single.add_argument("--k", type=int, default=None)
    p_single.add_argument("--tau", type=float, default=None)
    p_single.set_defaults(func=_cmd_single)

    p_serve = sub.add_parser("serve", help="start the interactive session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--checkpoint-dir", default=None, help="session persistence directory")
    p_serve.add_argument("--static-dir", default=None, help="serve UI assets from this directory")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
