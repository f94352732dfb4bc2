"""Command-line entry point.

Subcommands compose via files: `synth` and `track` produce the CSV
datasets, `align`/`attack` query them, `sweep`/`density` run experiment
batteries, `report` pivots a sweep table, and `pipeline` chains everything
from one config file. Logs go to stderr, data to files; stdout carries a
single summary line. Exit codes: 0 ok, 2 config error, 3 data error,
4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .alignment import AlignmentQuery, CoverageMode, align_identity
from .attacks import EngagementModel, run_active_attack, run_passive_attack
from .config import (
    config_to_dict,
    parse_config,
    parse_corpus_config,
    seed_override_from_env,
)
from .corpus import DEFAULT_EPOCH_START, synthesize_corpus
from .datasets import (
    busiest_day,
    load_ground_truth,
    load_site_dataset,
    load_tracker_dataset,
    write_ground_truth,
    write_site_dataset,
    write_tracker_dataset,
)
from .errors import ConfigError, DataError, TrailalignError, UnknownUserError
from .evaluation import (
    pivot_sweep_rows,
    run_density_study,
    run_sweep,
    write_density_csv,
    write_sweep_csv,
)
from .pipeline import run_pipeline, write_json
from .tracking import GenConfig, ViewCountDist, generate_tracker_data

def _add_dataset_args(p: argparse.ArgumentParser, tracker: bool, ground_truth: bool) -> None:
    p.add_argument("--site-a", required=True, help="source-site CSV (username,timestamp)")
    p.add_argument("--site-b", required=True, help="target-site CSV (username,timestamp)")
    if tracker:
        p.add_argument("--tracker", required=True, help="tracker CSV")
    if ground_truth:
        p.add_argument("--ground-truth", required=True, help="ground-truth CSV")
    p.add_argument("--source", default="siteA", help="source site id (default siteA)")
    p.add_argument("--target", default="siteB", help="target site id (default siteB)")


def _add_query_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--user", required=True, help="source-site username to align")
    p.add_argument("--t0", type=int, default=None,
                   help="query start time (default: noon of the user's busiest day)")
    p.add_argument("--window-days", type=int, default=1)
    p.add_argument("--granularity", type=int, default=60, help="time matching range in seconds")
    p.add_argument("--mode", choices=["full", "any"], default="full")
    p.add_argument("--epoch-start", type=int, default=DEFAULT_EPOCH_START,
                   help="day-boundary anchor used to find the busiest day")


def _add_gen_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--browse-ratio", type=float, default=10.0)
    p.add_argument("--delta-t-max", type=int, default=0)
    p.add_argument("--now", type=int, default=None,
                   help="simulation horizon (default: newest post + 1 day)")
    p.add_argument("--seed", type=int, default=2)
    p.add_argument("--view-dist", choices=["normal", "pareto"], default="normal")
    p.add_argument("--pareto-view-shape", type=float, default=2.0)
    p.add_argument("--offset-exponent", type=float, default=2.0,
                   help="browse offset power-law pdf exponent magnitude")
    p.add_argument("--offset-min", type=int, default=1)
    p.add_argument("--alpha-offsets", action="store_true",
                   help="treat --offset-exponent as a Pareto shape alpha instead")
    p.add_argument("--distinguish", action=argparse.BooleanOptionalAction, default=True,
                   help="label events as post/browse instead of unlabeled")


def _seed(value: int) -> int:
    override = seed_override_from_env()
    return value if override is None else override


def _load_pair(args):
    a = load_site_dataset(args.site_a, args.source)
    b = load_site_dataset(args.site_b, args.target)
    return a, b


def _build_query(args, src) -> AlignmentQuery:
    t0 = args.t0
    if t0 is None:
        if args.user not in src.records:
            raise UnknownUserError(f"{args.user!r} not in {src.site_id}")
        t0 = args.epoch_start + busiest_day(src, args.user, args.epoch_start) * 86400 + 43200
    return AlignmentQuery(
        username=args.user,
        t0=t0,
        window_days=args.window_days,
        granularity_secs=args.granularity,
        source_site=args.source,
        target_site=args.target,
        coverage_mode=CoverageMode(args.mode),
    )


def _gen_config_from_args(args, newest: int) -> GenConfig:
    now = args.now if args.now is not None else newest + 86400
    return GenConfig(
        browse_ratio_n=args.browse_ratio,
        delta_t_max=args.delta_t_max,
        now=now,
        seed=_seed(args.seed),
        view_count_dist=ViewCountDist(args.view_dist),
        pareto_view_shape=args.pareto_view_shape,
        browse_offset_shape=args.offset_exponent,
        browse_offset_min=args.offset_min,
        offset_shape_is_pareto_alpha=args.alpha_offsets,
        distinguish_behaviors=args.distinguish,
    )


def cmd_synth(args) -> int:
    cfg = parse_corpus_config(args.config)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    a, b, gt = synthesize_corpus(cfg, threads=args.threads)
    write_site_dataset(a, out / "siteA.csv")
    write_site_dataset(b, out / "siteB.csv")
    write_ground_truth(gt, out / "ground_truth.csv")
    n_posts = sum(len(t) for t in a.records.values()) + sum(len(t) for t in b.records.values())
    print(f"synth: {cfg.n_users} users x 2 sites, {n_posts} posts -> {out}")
    return 0


def cmd_track(args) -> int:
    a, b = _load_pair(args)
    gt = load_ground_truth(args.ground_truth)
    newest = max(max(ts[-1] for ts in a.records.values()), max(ts[-1] for ts in b.records.values()))
    cfg = _gen_config_from_args(args, newest)
    tracker = generate_tracker_data(a, b, gt, cfg, threads=args.threads)
    write_tracker_dataset(tracker, args.output)
    print(
        f"track: {tracker.total_events()} events for {len(tracker.events)} tracking ids -> {args.output}"
    )
    return 0


def cmd_align(args) -> int:
    a, b = _load_pair(args)
    tracker = load_tracker_dataset(args.tracker)
    q = _build_query(args, a)
    result = align_identity(q, a, b, tracker)
    payload = {
        "query_times": result.query_times,
        "candidate_ids": sorted(result.candidate_ids),
        "matched_users": result.matched_users,
    }
    write_json(payload, Path(args.output))
    print(
        f"align: {len(result.query_times)} query times, {len(result.candidate_ids)} candidate ids, "
        f"{len(result.matched_users)} matched users -> {args.output}"
    )
    return 0


def cmd_attack(args) -> int:
    a, b = _load_pair(args)
    tracker = load_tracker_dataset(args.tracker)
    gt = load_ground_truth(args.ground_truth)
    q = _build_query(args, a)
    outcome = run_passive_attack(q, a, b, tracker, gt)
    payload = {
        "passive": {
            "candidates": outcome.candidates,
            "anonymity_set_size": outcome.anonymity_set_size,
            "deanonymized_size": outcome.deanonymized_size,
            "success": outcome.success,
            "true_target": outcome.true_target,
        }
    }
    final = outcome
    if args.active:
        model = EngagementModel(
            p_target=args.p_target,
            p_decoy=args.p_decoy,
            rounds=args.rounds,
            seed=_seed(args.attack_seed),
        )
        if outcome.candidates:
            final = run_active_attack(outcome, model)
            payload["active"] = {
                "candidates": final.candidates,
                "anonymity_set_size": final.anonymity_set_size,
                "deanonymized_size": final.deanonymized_size,
                "success": final.success,
                "true_target": final.true_target,
            }
        else:
            payload["active"] = None
    write_json(payload, Path(args.output))
    print(
        f"attack: |S|={final.anonymity_set_size} |S'|={final.deanonymized_size} "
        f"success={final.success} -> {args.output}"
    )
    return 0


def _load_or_synth(args, cfg):
    if args.site_a and args.site_b and args.ground_truth:
        a = load_site_dataset(args.site_a, "siteA")
        b = load_site_dataset(args.site_b, "siteB")
        gt = load_ground_truth(args.ground_truth)
    else:
        a, b, gt = synthesize_corpus(cfg.corpus, threads=args.threads)
    return a, b, gt


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] section")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    a, b, gt = _load_or_synth(args, cfg)
    cells = run_sweep(cfg.sweep, a, b, gt, cfg.gen, cfg.corpus.epoch_start, threads=args.threads)
    write_sweep_csv(cells, out / "sweep.csv")
    write_json(
        {"tool": "trailalign", "version": __version__, "config": config_to_dict(cfg)},
        out / "sweep_manifest.json",
    )
    print(f"sweep: {len(cells)} cells -> {out / 'sweep.csv'}")
    return 0


def cmd_density(args) -> int:
    cfg = parse_config(args.config)
    if cfg.density is None:
        raise ConfigError("config has no [density] section")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    a, b, gt = _load_or_synth(args, cfg)
    rows = run_density_study(
        a, b, gt, cfg.gen,
        buckets=cfg.density.buckets,
        trials_per_bucket=cfg.density.trials_per_bucket,
        granularity_secs=cfg.density.granularity_secs,
        window_days=cfg.density.window_days,
        seed=cfg.density.seed,
        epoch_start=cfg.corpus.epoch_start,
        threads=args.threads,
    )
    write_density_csv(rows, out / "density.csv")
    write_json(
        {"tool": "trailalign", "version": __version__, "config": config_to_dict(cfg)},
        out / "density_manifest.json",
    )
    print(f"density: {len(rows)} rows -> {out / 'density.csv'}")
    return 0


def cmd_report(args) -> int:
    with open(args.sweep, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{args.sweep}: no sweep rows")
    table = pivot_sweep_rows(rows, args.metric)
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(table)
    print(f"report: {len(table) - 1} x {len(table[0]) - 1} {args.metric} matrix -> {args.output}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=args.output_dir)
    try:
        artifacts = run_pipeline(cfg, threads=args.threads)
    except TrailalignError as exc:
        _write_error_file(exc, Path(cfg.output_dir))
        raise
    print(f"pipeline: {len(artifacts)} artifacts -> {cfg.output_dir}")
    return 0


def _error_payload(exc: Exception) -> dict:
    return {"error": type(exc).__name__, "message": str(exc)}


def _write_error_file(exc: Exception, output_dir: Path) -> None:
    if output_dir.is_dir():
        try:
            write_json(_error_payload(exc), output_dir / "error.json")
        except OSError:
            pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trailalign",
        description="Simulate and evaluate tracker-based cross-site identity alignment.",
    )
    parser.add_argument("--version", action="version", version=f"trailalign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the two site datasets and ground truth")
    p.add_argument("--config", required=True, help="TOML/JSON file with corpus settings")
    p.add_argument("-o", "--output-dir", default="out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="generate tracker data from site CSVs")
    _add_dataset_args(p, tracker=False, ground_truth=True)
    _add_gen_args(p)
    p.add_argument("-o", "--output", default="tracker.csv")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("align", help="run one identity-alignment query")
    _add_dataset_args(p, tracker=True, ground_truth=False)
    _add_query_args(p)
    p.add_argument("-o", "--output", default="alignment.json")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("attack", help="run a passive (optionally active) attack")
    _add_dataset_args(p, tracker=True, ground_truth=True)
    _add_query_args(p)
    p.add_argument("--passive", action="store_true", help="passive only (the default)")
    p.add_argument("--active", action="store_true", help="refine with engagement rounds")
    p.add_argument("--p-target", type=float, default=1.0)
    p.add_argument("--p-decoy", type=float, default=0.5)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--attack-seed", type=int, default=3)
    p.add_argument("-o", "--output", default="attack.json")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="run the parameter grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--site-a", help="reuse an existing source-site CSV")
    p.add_argument("--site-b", help="reuse an existing target-site CSV")
    p.add_argument("--ground-truth", help="reuse an existing ground-truth CSV")
    p.add_argument("-o", "--output-dir", default="out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("density", help="per-activity-bucket study in both label modes")
    p.add_argument("--config", required=True)
    p.add_argument("--site-a", help="reuse an existing source-site CSV")
    p.add_argument("--site-b", help="reuse an existing target-site CSV")
    p.add_argument("--ground-truth", help="reuse an existing ground-truth CSV")
    p.add_argument("-o", "--output-dir", default="out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("report", help="pivot a sweep.csv into a delta_t x granularity matrix")
    p.add_argument("--sweep", required=True)
    p.add_argument("--metric", choices=["iasr", "assr_reported", "aiup"], default="iasr")
    p.add_argument("-o", "--output", default="report.csv")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="full run from one config: synth, track, queries, sweeps")
    p.add_argument("--config", required=True)
    p.add_argument("-o", "--output-dir", default=None, help="override the config's output_dir")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return 2
    except DataError as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
