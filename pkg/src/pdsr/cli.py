"""
Command-line frontend.

Subcommands: split, index, graph, recommend, evaluate, sweep, oracle (alias oracle-check).
Data goes to stdout (or to files under ``--out``); diagnostics go to stderr.

Exit codes:
    0  success
    1  oracle ratio below 0.5, or an unexpected failure
    2  configuration error
    3  dataset error
    4  unknown user
    5  oracle search space exceeds the cap
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .data import split_platforms
from .exceptions import ConfigError, DatasetError, SearchSpaceTooLarge, UnknownUserError
from .federation import publish
from .graph import build_graph
from .pipeline import (
    _GRAPH_LABEL,
    _SPLIT_LABEL,
    GRID_KEYS,
    PipelineConfig,
    config_from_mapping,
    load_matrix,
    metrics_csv,
    parse_config_text,
    parse_grid_values,
    run_pipeline,
    sweep,
)
from .recommend import (
    RecommendationQuery,
    brute_force_topk,
    build_pool,
    greedy_topk,
    objective_F,
)
from .rng import derive_seed, make_rng

log = logging.getLogger("pdsr")

EXIT_OK, EXIT_RATIO, EXIT_CONFIG, EXIT_DATA, EXIT_USER, EXIT_CAP = 0, 1, 2, 3, 4, 5
_ORACLE_LABEL = 3


def _overrides(args) -> dict[str, str]:
    values = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    if args.seed is not None:
        values["seed"] = str(args.seed)
    elif "PDSR_SEED" in os.environ:
        values["seed"] = os.environ["PDSR_SEED"]
    if args.threads is not None:
        values["threads"] = str(args.threads)
    return values


def _config(args) -> PipelineConfig:
    values = {"threads": str(os.cpu_count() or 1)}
    if args.config is not None:
        try:
            values.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    values.update(_overrides(args))
    return config_from_mapping(values)


def _emit(args, name: str, text: str | bytes) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / name
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text)
        log.info("wrote %s", path)
    elif isinstance(text, bytes):
        sys.stdout.buffer.write(text)
    else:
        sys.stdout.write(text)


def _first_split(cfg: PipelineConfig):
    matrix = load_matrix(cfg)
    return split_platforms(matrix, cfg.split_spec(derive_seed(cfg.seed, 0, _SPLIT_LABEL)))


def _first_graph(cfg: PipelineConfig, split, transcript=None):
    return build_graph(
        split.platforms, cfg.h_counts(), cfg.T, derive_seed(cfg.seed, 0, _GRAPH_LABEL), transcript=transcript
    )


def cmd_split(args) -> int:
    cfg = _config(args)
    split = _first_split(cfg)
    holdouts = {h.user: h for hs in split.targets.values() for h in hs}
    lines = ["user,platform,target,holdout_services"]
    for p in split.platforms:
        for u in p.user_ids:
            h = holdouts.get(int(u))
            services = " ".join(map(str, h.services)) if h is not None else ""
            lines.append(f"{int(u)},{p.platform_id},{int(h is not None)},{services}")
    _emit(args, "split.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_index(args) -> int:
    cfg = _config(args)
    split = _first_split(cfg)
    seed = derive_seed(cfg.seed, 0, _GRAPH_LABEL)
    for p, h in zip(split.platforms, cfg.h_counts()):
        for t in range(1, cfg.T + 1):
            data = publish(p, h, seed, t)
            if args.out:
                _emit(args, f"platform{p.platform_id}_round{t}.bin", data)
            else:
                print(f"platform={p.platform_id} round={t} bytes={len(data)}", file=sys.stderr)
    if not args.out:
        print("index messages were not written; pass --out to keep them", file=sys.stderr)
    return EXIT_OK


def cmd_graph(args) -> int:
    cfg = _config(args)
    split = _first_split(cfg)
    graph = _first_graph(cfg, split)
    _emit(args, "graph.tsv", graph.to_tsv())
    stats = graph.stats()
    print(
        f"vertices={stats['vertices']} edges={stats['edges']} mean_degree={stats['mean_degree']:.6f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_recommend(args) -> int:
    cfg = _config(args)
    split = _first_split(cfg)
    try:
        pid = split.locate(args.user)
    except KeyError:
        raise UnknownUserError(f"user {args.user} is not on any platform") from None
    if args.platform is not None and args.platform != pid:
        raise UnknownUserError(f"user {args.user} belongs to platform {pid}, not {args.platform}")
    query = RecommendationQuery(
        user=args.user,
        platform_id=pid,
        k=args.k if args.k is not None else cfg.K,
        lam=args.lam if args.lam is not None else cfg.lam_for(pid),
        xi=args.xi if args.xi is not None else cfg.xi_for(pid),
    )
    graph = _first_graph(cfg, split)
    rec = greedy_topk(graph, split.platform(pid), query)
    _emit(args, "recommend.csv", rec.to_csv())
    summary = json.dumps(rec.summary(), sort_keys=True)
    if args.out:
        _emit(args, "recommend.json", summary + "\n")
    else:
        print(summary, file=sys.stderr)
    if rec.truncated:
        log.warning("only %d candidates available; list truncated", rec.pool_size)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    reports = run_pipeline(cfg)
    _emit(args, "metrics.csv", metrics_csv(reports, cfg.record_seconds))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    grid = {}
    for key, text in (("H", args.H), ("T", args.T), ("lambda", args.lam), ("xi", args.xi)):
        if text is not None:
            grid[key] = parse_grid_values(key, text)
    if not grid:
        raise ConfigError(f"sweep needs at least one grid key among {GRID_KEYS}")
    rows = sweep(cfg, grid)
    _emit(args, "sweep.csv", metrics_csv(rows, cfg.record_seconds))
    failed = [r for r in rows if r.error]
    if failed:
        print(f"{len(failed)} sweep rows failed", file=sys.stderr)
        return EXIT_RATIO
    return EXIT_OK


def cmd_oracle(args) -> int:
    """Greedy vs exhaustive F on down-sampled pools of the first split's target users."""
    cfg = _config(args)
    max_candidates = args.max_candidates if args.max_candidates is not None else cfg.oracle_max_candidates
    instances = args.instances if args.instances is not None else cfg.oracle_instances
    if max_candidates < 1 or instances < 1:
        raise ConfigError("max-candidates and instances must be positive")
    split = _first_split(cfg)
    graph = _first_graph(cfg, split)
    rng = make_rng(derive_seed(cfg.seed, 0, _ORACLE_LABEL))
    targets = [(pid, h.user) for pid in cfg.reported() for h in split.targets[pid]]
    if not targets:
        raise ConfigError("oracle needs at least one target user")
    pools = {}
    lines = ["instance,platform,user,k,lambda,xi,greedy_F,optimal_F,ratio"]
    violations = 0
    worst = math.inf
    for inst in range(instances):
        pid, user = targets[inst % len(targets)]
        platform = split.platform(pid)
        if user not in pools:
            pools[user] = build_pool(graph, platform, user)
        full = pools[user]
        size = min(max_candidates, len(full))
        chosen = rng.choice(full.candidates, size=size, replace=False)
        pool = full.restrict(chosen.tolist())
        query = RecommendationQuery(user, pid, min(cfg.K, size), cfg.lam_for(pid), cfg.xi_for(pid))
        best = brute_force_topk(graph, platform, query, pool=pool, cap=cfg.oracle_cap)
        greedy = greedy_topk(graph, platform, query, pool=pool)
        g_value = objective_F(graph, pool, greedy.services, query.lam, query.xi)
        ratio = 1.0 if best.value <= 0 else g_value / best.value
        worst = min(worst, ratio)
        if ratio < 0.5 - 1e-12:
            violations += 1
        lines.append(
            f"{inst},{pid},{user},{query.k},{query.lam:.10g},{query.xi:.10g},"
            f"{g_value:.10g},{best.value:.10g},{ratio:.10g}"
        )
    _emit(args, "oracle.csv", "\n".join(lines) + "\n")
    print(f"instances={instances} violations={violations} min_ratio={worst:.6f}", file=sys.stderr)
    return EXIT_RATIO if violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("--seed", type=int, help="master seed (falls back to $PDSR_SEED, then the config)")
    common.add_argument("--out", help="write outputs into this directory instead of stdout")
    common.add_argument("--threads", type=int, help="parallel repetitions (default: available cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pdsr", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("split", parents=[common], help="partition users and draw holdouts")
    sub.add_parser("index", parents=[common], help="write per-platform signature messages")
    sub.add_parser("graph", parents=[common], help="build the similarity graph as TSV")

    rec = sub.add_parser("recommend", parents=[common], help="top-K list for one user")
    rec.add_argument("--user", type=int, required=True, help="global user id")
    rec.add_argument("--platform", type=int)
    rec.add_argument("--k", type=int)
    rec.add_argument("--lambda", dest="lam", type=float)
    rec.add_argument("--xi", type=float)

    sub.add_parser("evaluate", parents=[common], help="averaged metrics CSV")

    sw = sub.add_parser("sweep", parents=[common], help="metrics over a parameter grid")
    sw.add_argument("--H", help="e.g. 3,4,5,6")
    sw.add_argument("--T", help="e.g. 6..10")
    sw.add_argument("--lambda", dest="lam", help="e.g. 0.1,0.2,0.3,0.4")
    sw.add_argument("--xi", help="e.g. 0.1,0.2,0.3")

    orc = sub.add_parser("oracle", aliases=["oracle-check"], parents=[common], help="greedy vs exhaustive optimum")
    orc.add_argument("--max-candidates", type=int)
    orc.add_argument("--instances", type=int)
    return parser


COMMANDS = {
    "split": cmd_split,
    "index": cmd_index,
    "graph": cmd_graph,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "oracle-check": cmd_oracle,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UnknownUserError as exc:
        print(f"unknown user: {exc.args[0]}", file=sys.stderr)
        return EXIT_USER
    except SearchSpaceTooLarge as exc:
        print(f"oracle cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RATIO


if __name__ == "__main__":
    sys.exit(main())
