"""Batch metrics and parameter-sweep experiment runners.

Three metrics over a batch of attack outcomes:

    success rate      fraction of trials whose candidate list contains the
                      true target,
    set scaling rate  original anonymity-set size divided by the mean
                      candidate-set size over *successful* trials (the
                      reported integer rounds half up),
    pinpoint rate     fraction of distinct queried users narrowed to exactly
                      one (correct) candidate.

Sweeps regenerate tracker data per generation cell and run one passive
attack per sampled user; cells, trials, and trial-user selection all draw
from index-keyed substreams so results are reproducible and order
independent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .alignment import AlignmentQuery, CoverageMode
from .attacks import AttackOutcome, resolve_true_target, run_passive_attack
from .datasets import (
    GroundTruth,
    SiteDataset,
    Timestamp,
    TrackerDataset,
    busiest_day,
    daily_post_maxima,
)
from .errors import EmptyBatchError, NoQueryTimesError, NoSuccessesError, ValidationError
from .tracking import GenConfig, generate_tracker_data

CELL_STREAM = 401
TRIAL_STREAM = 402


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed derived from integer parts."""
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class MetricsReport:
    n_experiments: int
    n_success: int
    iasr: float
    assr_exact: float | None  # None when no trial succeeded
    assr_reported: int | None
    aiup: float
    per_trial_sizes: list[int]


def compute_iasr(outcomes: list[AttackOutcome]) -> float:
    if not outcomes:
        raise EmptyBatchError("no outcomes")
    return sum(o.success for o in outcomes) / len(outcomes)


def compute_assr(anonymity_set_size: int, successful_sizes: list[int]) -> tuple[float, int]:
    if not successful_sizes:
        raise NoSuccessesError("ASSR is undefined without successful trials")
    exact = anonymity_set_size / (sum(successful_sizes) / len(successful_sizes))
    return exact, round_half_up(exact)


def compute_aiup(outcomes: list[AttackOutcome]) -> float:
    if not outcomes:
        raise EmptyBatchError("no outcomes")
    users = {o.true_target for o in outcomes}
    pinned = {o.true_target for o in outcomes if o.success and o.deanonymized_size == 1}
    return len(pinned) / len(users)


def summarize_outcomes(outcomes: list[AttackOutcome]) -> MetricsReport:
    if not outcomes:
        raise EmptyBatchError("no outcomes")
    anonymity = outcomes[0].anonymity_set_size
    successful_sizes = [o.deanonymized_size for o in outcomes if o.success]
    if successful_sizes:
        assr_exact, assr_reported = compute_assr(anonymity, successful_sizes)
    else:
        assr_exact = assr_reported = None
    return MetricsReport(
        n_experiments=len(outcomes),
        n_success=len(successful_sizes),
        iasr=compute_iasr(outcomes),
        assr_exact=assr_exact,
        assr_reported=assr_reported,
        aiup=compute_aiup(outcomes),
        per_trial_sizes=[o.deanonymized_size for o in outcomes],
    )


@dataclass(frozen=True)
class SweepSpec:
    """Grid of generation/query parameters plus trial budget."""

    granularities: list[int]
    delta_ts: list[int]
    browse_ratios: list[float]
    distinguish_modes: list[bool]
    density_filters: list[int]  # min max-daily-posts for trial users; 0 = all
    trials_per_cell: int
    window_days: int = 30
    coverage: CoverageMode = CoverageMode.FULL
    seed: int = 0

    def __post_init__(self):
        for name in ("granularities", "delta_ts", "browse_ratios", "distinguish_modes", "density_filters"):
            if not getattr(self, name):
                raise ValidationError(f"sweep.{name}", "must be non-empty")
        if self.trials_per_cell < 1:
            raise ValidationError("sweep.trials_per_cell", "must be >= 1")
        if self.window_days < 1:
            raise ValidationError("sweep.window_days", "must be >= 1")

    def n_cells(self) -> int:
        return (
            len(self.granularities)
            * len(self.delta_ts)
            * len(self.browse_ratios)
            * len(self.distinguish_modes)
            * len(self.density_filters)
        )


@dataclass(frozen=True)
class SweepCell:
    delta_t_max: int
    granularity_secs: int
    browse_ratio: float
    distinguish: bool
    density_filter: int
    report: MetricsReport | None
    error: str = ""


def _noon_of_busiest_day(src: SiteDataset, user: str, epoch_start: Timestamp) -> Timestamp:
    return epoch_start + busiest_day(src, user, epoch_start) * 86400 + 43200


def _sample_users(eligible: list[str], count: int, rng: np.random.Generator) -> list[str]:
    order = rng.permutation(len(eligible))
    return [eligible[i] for i in order[: min(count, len(eligible))]]


def run_attack_batch(
    users: list[str],
    src: SiteDataset,
    tgt: SiteDataset,
    tracker: TrackerDataset,
    gt: GroundTruth,
    granularity_secs: int,
    window_days: int,
    coverage: CoverageMode,
    epoch_start: Timestamp,
) -> list[AttackOutcome]:
    """One passive attack per user, t0 at noon of their busiest day.

    A query window holding none of the user's posts counts as a failed
    experiment rather than aborting the batch.
    """
    outcomes = []
    for user in users:
        q = AlignmentQuery(
            username=user,
            t0=_noon_of_busiest_day(src, user, epoch_start),
            window_days=window_days,
            granularity_secs=granularity_secs,
            source_site=src.site_id,
            target_site=tgt.site_id,
            coverage_mode=coverage,
        )
        try:
            outcomes.append(run_passive_attack(q, src, tgt, tracker, gt))
        except NoQueryTimesError:
            outcomes.append(
                AttackOutcome(
                    query=q,
                    candidates=[],
                    anonymity_set_size=len(tgt.records),
                    deanonymized_size=0,
                    success=False,
                    true_target=resolve_true_target(gt, user),
                )
            )
    return outcomes


def run_sweep(
    spec: SweepSpec,
    a: SiteDataset,
    b: SiteDataset,
    gt: GroundTruth,
    base_gen: GenConfig,
    epoch_start: Timestamp,
    threads: int = 1,
) -> list[SweepCell]:
    """Evaluate every grid cell; generation is shared across granularities.

    Cell order (and output row order) is delta_t, browse_ratio, distinguish,
    density_filter, granularity, nested in that order.
    """
    maxima = daily_post_maxima(a, epoch_start)
    cells: list[SweepCell] = []
    for i_dt, delta_t in enumerate(spec.delta_ts):
        for i_n, ratio in enumerate(spec.browse_ratios):
            for i_d, distinguish in enumerate(spec.distinguish_modes):
                gen_cfg = replace(
                    base_gen,
                    delta_t_max=delta_t,
                    browse_ratio_n=ratio,
                    distinguish_behaviors=distinguish,
                    seed=derive_seed(spec.seed, CELL_STREAM, i_dt, i_n, i_d),
                )
                try:
                    tracker = generate_tracker_data(a, b, gt, gen_cfg, threads=threads)
                except Exception as exc:  # recorded per-cell, not fatal
                    for i_f, density in enumerate(spec.density_filters):
                        for granularity in spec.granularities:
                            cells.append(
                                SweepCell(delta_t, granularity, ratio, distinguish, density, None, repr(exc))
                            )
                    continue
                for i_f, density in enumerate(spec.density_filters):
                    eligible = [u for u in sorted(a.records) if maxima[u] >= density]
                    rng = np.random.default_rng(
                        (spec.seed, TRIAL_STREAM, i_dt, i_n, i_d, i_f)
                    )
                    users = _sample_users(eligible, spec.trials_per_cell, rng)
                    for granularity in spec.granularities:
                        if not users:
                            cells.append(
                                SweepCell(delta_t, granularity, ratio, distinguish, density, None, "no eligible users")
                            )
                            continue
                        outcomes = run_attack_batch(
                            users, a, b, tracker, gt,
                            granularity, spec.window_days, spec.coverage, epoch_start,
                        )
                        cells.append(
                            SweepCell(delta_t, granularity, ratio, distinguish, density,
                                      summarize_outcomes(outcomes))
                        )
    return cells


SWEEP_CSV_FIELDS = [
    "delta_t_max", "granularity_secs", "browse_ratio", "distinguish",
    "density_filter", "n_experiments", "n_success", "iasr", "assr_reported",
    "aiup", "error",
]


def write_sweep_csv(cells: list[SweepCell], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_FIELDS)
        for c in cells:
            r = c.report
            writer.writerow([
                c.delta_t_max,
                c.granularity_secs,
                f"{c.browse_ratio:g}",
                str(c.distinguish).lower(),
                c.density_filter,
                r.n_experiments if r else "",
                r.n_success if r else "",
                f"{r.iasr:.4f}" if r else "",
                r.assr_reported if r and r.assr_reported is not None else "",
                f"{r.aiup:.4f}" if r else "",
                c.error,
            ])


def pivot_sweep_rows(rows: list[dict], metric: str) -> list[list[str]]:
    """Reshape long-format sweep rows into a delta_t x granularity matrix."""
    if metric not in ("iasr", "assr_reported", "aiup"):
        raise ValidationError("report.metric", f"unknown metric {metric!r}")
    for key in ("browse_ratio", "distinguish", "density_filter"):
        values = {row[key] for row in rows}
        if len(values) > 1:
            raise ValidationError(
                "report.sweep", f"cannot pivot: multiple {key} values {sorted(values)}"
            )
    granularities = sorted({int(row["granularity_secs"]) for row in rows})
    delta_ts = sorted({int(row["delta_t_max"]) for row in rows})
    by_cell = {(int(r["delta_t_max"]), int(r["granularity_secs"])): r[metric] for r in rows}
    table = [["delta_t_max"] + [str(g) for g in granularities]]
    for dt in delta_ts:
        table.append([str(dt)] + [by_cell.get((dt, g), "") for g in granularities])
    return table


@dataclass(frozen=True)
class DensityRow:
    bucket: int  # max posts/day defining the activity bucket
    distinguish: bool
    n_users: int
    n_trials: int
    report: MetricsReport | None
    skipped: bool = False


def run_density_study(
    a: SiteDataset,
    b: SiteDataset,
    gt: GroundTruth,
    base_gen: GenConfig,
    buckets: list[int],
    trials_per_bucket: int,
    granularity_secs: int = 60,
    window_days: int = 1,
    coverage: CoverageMode = CoverageMode.FULL,
    seed: int = 0,
    epoch_start: Timestamp = 0,
    threads: int = 1,
) -> list[DensityRow]:
    """Per-activity-bucket metrics, once with and once without behavior labels.

    Bucket membership is a user's observed max daily post count on the
    source site. Empty buckets are recorded as skipped rows.
    """
    maxima = daily_post_maxima(a, epoch_start)
    rows: list[DensityRow] = []
    for i_mode, distinguish in enumerate((True, False)):
        gen_cfg = replace(
            base_gen,
            distinguish_behaviors=distinguish,
            seed=derive_seed(seed, CELL_STREAM, i_mode),
        )
        tracker = generate_tracker_data(a, b, gt, gen_cfg, threads=threads)
        for i_bucket, bucket in enumerate(buckets):
            members = [u for u in sorted(a.records) if maxima[u] == bucket]
            if not members:
                rows.append(DensityRow(bucket, distinguish, 0, 0, None, skipped=True))
                continue
            rng = np.random.default_rng((seed, TRIAL_STREAM, i_mode, i_bucket))
            users = _sample_users(members, trials_per_bucket, rng)
            outcomes = run_attack_batch(
                users, a, b, tracker, gt,
                granularity_secs, window_days, coverage, epoch_start,
            )
            rows.append(
                DensityRow(bucket, distinguish, len(members), len(users), summarize_outcomes(outcomes))
            )
    return rows


DENSITY_CSV_FIELDS = [
    "bucket", "n_users", "n_trials",
    "aiup_with", "assr_with", "iasr_with",
    "aiup_without", "assr_without", "iasr_without",
    "skipped",
]


def write_density_csv(rows: list[DensityRow], path: str | Path) -> None:
    """One row per bucket, label modes side by side."""
    with_rows = {r.bucket: r for r in rows if r.distinguish}
    without_rows = {r.bucket: r for r in rows if not r.distinguish}
    buckets = [r.bucket for r in rows if r.distinguish]

    def cells(row: DensityRow | None) -> list[str]:
        if row is None or row.report is None:
            return ["", "", ""]
        r = row.report
        assr = str(r.assr_reported) if r.assr_reported is not None else ""
        return [f"{r.aiup:.4f}", assr, f"{r.iasr:.4f}"]

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DENSITY_CSV_FIELDS)
        for bucket in buckets:
            w = with_rows.get(bucket)
            wo = without_rows.get(bucket)
            skipped = (w is None or w.skipped) and (wo is None or wo.skipped)
            writer.writerow(
                [bucket, w.n_users if w else 0, w.n_trials if w else 0]
                + cells(w)
                + cells(wo)
                + [str(skipped).lower()]
            )
