"""Command-line front end.

Subcommands: run, resume, enumerate, eval, export, analyze. Config files are
flat ``key = value`` text mirroring the search config; command-line flags
override file values. Errors exit nonzero with a single ``error: ...`` line
on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, graph, harness, reward, space
from .catalog import CatalogError, load_catalog


def _build_run_config(args) -> harness.SearchConfig:
    d = harness.parse_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "evaluator": args.evaluator,
        "endpoint": args.endpoint,
        "db": args.db,
        "checkpoint": args.checkpoint,
        "max_depth": args.max_depth,
    }
    for key, val in overrides.items():
        if val is not None:
            d[key] = str(val)
    return harness.config_from_dict(d)


def _cmd_run(args) -> int:
    cfg = _build_run_config(args)
    log = harness.run_search(cfg)
    print(f"evaluated {log.unique_count()} unique models over "
          f"{len(log.records)} iterations")
    print(f"replay DB: {cfg.db_path}")
    print(f"checkpoint: {cfg.checkpoint_path}")
    return 0


def _cmd_resume(args) -> int:
    log = harness.resume(args.checkpoint)
    print(f"run has {log.unique_count()} unique models over "
          f"{len(log.records)} iterations")
    return 0


def _cmd_enumerate(args) -> int:
    total = space.count_trajectories(args.max_depth)
    if args.count_only:
        print(total)
        return 0
    for t in space.enumerate_all(args.max_depth):
        print(space.encode_net(t, args.classes))
    return 0


def _cmd_eval(args) -> int:
    t = space.decode_net(args.net, max_depth=args.max_depth)
    if args.evaluator == "simulated":
        oracle = reward.SimulatedOracleConfig(
            noise_sigma=args.noise_sigma, seed=args.seed
        )
        acc = reward.oracle_evaluate(oracle, t.blocks)
        print(f"{args.net} {acc!r}")
        return 0
    if not args.endpoint:
        raise harness.HarnessError("eval --evaluator external requires --endpoint")
    req = reward.EvalRequest(1, t.blocks, args.net, args.dataset)
    resp = reward.external_evaluate(args.endpoint, req, timeout=args.timeout)
    if resp.ok:
        print(f"{args.net} {resp.accuracy!r}")
        return 0
    raise harness.HarnessError(f"evaluation failed: {resp.detail}")


def _cmd_export(args) -> int:
    t = space.decode_net(args.net, max_depth=args.max_depth)
    specs = load_catalog(args.catalog) if args.catalog else None
    input_shape = tuple(int(x) for x in args.input_shape.split("x"))
    g = graph.build(t, input_shape, args.classes, specs=specs)
    text = graph.summarize(g) if args.summary else graph.export_graph(g)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_analyze(args) -> int:
    rows = analysis.load_db(args.db)
    if args.what == "top-k":
        sys.stdout.write(analysis.render_top_k(rows, args.k))
        return 0
    if args.what == "stages":
        csv = analysis.emit_stats_csv(analysis.stage_stats(rows))
        if args.csv:
            Path(args.csv).write_text(csv)
        else:
            sys.stdout.write(csv)
        return 0
    if args.what == "query":
        sys.stdout.write(analysis.structural_query(rows, args.query))
        return 0
    raise analysis.AnalysisError(f"unknown analyze action {args.what!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="blocksearch",
        description="Q-learning search over multi-block CNN architectures",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run a search from scratch")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--seed", type=int)
    run.add_argument("--evaluator", choices=["simulated", "external"])
    run.add_argument("--endpoint", help="host:port of an external trainer")
    run.add_argument("--db", help="replay DB path")
    run.add_argument("--checkpoint", help="checkpoint path")
    run.add_argument("--max-depth", type=int, dest="max_depth")
    run.set_defaults(fn=_cmd_run)

    res = sub.add_parser("resume", help="continue an interrupted run")
    res.add_argument("--checkpoint", required=True)
    res.set_defaults(fn=_cmd_resume)

    enum = sub.add_parser("enumerate", help="list every legal trajectory")
    enum.add_argument("--max-depth", type=int, default=5, dest="max_depth")
    enum.add_argument("--count-only", action="store_true")
    enum.add_argument("--classes", type=int, default=10)
    enum.set_defaults(fn=_cmd_enumerate)

    ev = sub.add_parser("eval", help="evaluate one net string")
    ev.add_argument("--net", required=True)
    ev.add_argument("--evaluator", choices=["simulated", "external"],
                    default="simulated")
    ev.add_argument("--endpoint")
    ev.add_argument("--dataset", default="cifar10")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--noise-sigma", type=float, default=0.0, dest="noise_sigma")
    ev.add_argument("--max-depth", type=int, default=5, dest="max_depth")
    ev.add_argument("--timeout", type=float, default=600.0)
    ev.set_defaults(fn=_cmd_eval)

    ex = sub.add_parser("export", help="export a net's layer graph")
    ex.add_argument("--net", required=True)
    ex.add_argument("--input-shape", default="3x32x32", dest="input_shape")
    ex.add_argument("--classes", type=int, default=10)
    ex.add_argument("--catalog", help="catalog template file override")
    ex.add_argument("--max-depth", type=int, default=5, dest="max_depth")
    ex.add_argument("--out", help="write to file instead of stdout")
    ex.add_argument("--summary", action="store_true",
                    help="emit the per-block report instead of the node list")
    ex.set_defaults(fn=_cmd_export)

    an = sub.add_parser("analyze", help="inspect a replay DB")
    an.add_argument("what", choices=["top-k", "stages", "query"])
    an.add_argument("--db", required=True)
    an.add_argument("--k", type=int, default=10)
    an.add_argument("--csv", help="write stage stats CSV here")
    an.add_argument("--query", help="contains:B(n) | swap_pairs | concat_effect")
    an.set_defaults(fn=_cmd_analyze)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (
        CatalogError,
        space.SpaceError,
        graph.GraphError,
        analysis.AnalysisError,
        harness.HarnessError,
        OSError,
        ValueError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
