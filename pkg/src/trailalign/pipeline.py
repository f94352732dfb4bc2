"""End-to-end run orchestration: synth -> track -> align/attack -> sweep/density.

Every run writes a manifest.json holding the fully resolved configuration
(all seeds and defaults materialized) plus the tool version; feeding the
manifest back in reproduces every artifact byte for byte.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from . import __version__
from .alignment import align_identity
from .attacks import run_active_attack, run_passive_attack
from .config import RunConfig, config_to_dict
from .corpus import synthesize_corpus
from .datasets import (
    write_ground_truth,
    write_site_dataset,
    write_tracker_dataset,
)
from .errors import ConfigError, ValidationError
from .evaluation import run_density_study, run_sweep, write_density_csv, write_sweep_csv
from .tracking import generate_tracker_data

log = logging.getLogger("trailalign")


def write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _outcome_dict(outcome) -> dict:
    return {
        "candidates": list(outcome.candidates),
        "anonymity_set_size": outcome.anonymity_set_size,
        "deanonymized_size": outcome.deanonymized_size,
        "success": outcome.success,
        "true_target": outcome.true_target,
    }


def run_pipeline(cfg: RunConfig, threads: int = 1) -> list[Path]:
    """Execute a full run; returns the artifact paths written."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output_dir {cfg.output_dir!r} is not writable: {exc}") from exc
    artifacts: list[Path] = []

    log.info("synthesizing corpus: %d users, %d days", cfg.corpus.n_users, cfg.corpus.n_days)
    a, b, gt = synthesize_corpus(cfg.corpus, threads=threads)
    for ds, name in ((a, "siteA.csv"), (b, "siteB.csv")):
        write_site_dataset(ds, out / name)
        artifacts.append(out / name)
    write_ground_truth(gt, out / "ground_truth.csv")
    artifacts.append(out / "ground_truth.csv")

    log.info("generating tracker data: ratio %g, delta_t_max %d", cfg.gen.browse_ratio_n, cfg.gen.delta_t_max)
    tracker = generate_tracker_data(a, b, gt, cfg.gen, threads=threads)
    write_tracker_dataset(tracker, out / "tracker.csv")
    artifacts.append(out / "tracker.csv")

    sites = {a.site_id: a, b.site_id: b}
    for index, spec in enumerate(cfg.queries, start=1):
        if spec.source_site not in sites or spec.target_site not in sites:
            raise ValidationError(
                f"queries[{index - 1}]", f"unknown site in {spec.source_site!r}/{spec.target_site!r}"
            )
        src = sites[spec.source_site]
        tgt = sites[spec.target_site]
        q = spec.resolve(src, cfg.corpus.epoch_start)
        log.info("query %d: user %s", index, q.username)
        result = align_identity(q, src, tgt, tracker)
        payload = {
            "query": {
                "user": q.username,
                "t0": q.t0,
                "window_days": q.window_days,
                "granularity": q.granularity_secs,
                "mode": q.coverage_mode.value,
                "source": q.source_site,
                "target": q.target_site,
            },
            "result": {
                "query_times": result.query_times,
                "candidate_ids": sorted(result.candidate_ids),
                "matched_users": result.matched_users,
            },
        }
        outcome = run_passive_attack(q, src, tgt, tracker, gt)
        payload["attack"] = {"passive": _outcome_dict(outcome)}
        if cfg.engagement is not None:
            if outcome.candidates:
                refined = run_active_attack(outcome, cfg.engagement)
                payload["attack"]["active"] = _outcome_dict(refined)
            else:
                payload["attack"]["active"] = None  # nothing to refine
        path = out / f"query_{index:04d}.json"
        write_json(payload, path)
        artifacts.append(path)

    if cfg.sweep is not None:
        log.info("running sweep: %d cells", cfg.sweep.n_cells())
        cells = run_sweep(cfg.sweep, a, b, gt, cfg.gen, cfg.corpus.epoch_start, threads=threads)
        write_sweep_csv(cells, out / "sweep.csv")
        artifacts.append(out / "sweep.csv")

    if cfg.density is not None:
        log.info("running density study: buckets %s", cfg.density.buckets)
        rows = run_density_study(
            a, b, gt, cfg.gen,
            buckets=cfg.density.buckets,
            trials_per_bucket=cfg.density.trials_per_bucket,
            granularity_secs=cfg.density.granularity_secs,
            window_days=cfg.density.window_days,
            seed=cfg.density.seed,
            epoch_start=cfg.corpus.epoch_start,
            threads=threads,
        )
        write_density_csv(rows, out / "density.csv")
        artifacts.append(out / "density.csv")

    manifest = {"tool": "trailalign", "version": __version__, "config": config_to_dict(cfg)}
    write_json(manifest, out / "manifest.json")
    artifacts.append(out / "manifest.json")
    return artifacts
