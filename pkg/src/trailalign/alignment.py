"""Cross-site identity alignment through tracker data.

Pipeline: collect the query user's source-site post times inside the query
window, find tracking IDs whose source-site events cover those times within
the matching granularity, gather those IDs' target-site event times, and
report every target-site user whose full posting profile is covered by the
gathered times.

All operations are pure functions over immutable datasets; many queries may
run in parallel against one shared tracker.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum

from .datasets import SiteDataset, Timestamp, TrackerDataset
from .errors import NoQueryTimesError, UnknownUserError, ValidationError


class CoverageMode(Enum):
    # FULL: an ID must match every query time (partial matches are dropped).
    # ANY: one matching pairing suffices.
    FULL = "full"
    ANY = "any"


@dataclass(frozen=True)
class AlignmentQuery:
    username: str
    t0: Timestamp
    window_days: int = 1
    granularity_secs: int = 60
    source_site: str = "siteA"
    target_site: str = "siteB"
    coverage_mode: CoverageMode = CoverageMode.FULL

    def __post_init__(self):
        if self.window_days < 1:
            raise ValidationError("query.window_days", "must be >= 1")
        if self.granularity_secs < 0:
            raise ValidationError("query.granularity_secs", "must be >= 0")


@dataclass(frozen=True)
class AlignmentResult:
    query_times: list[Timestamp]
    candidate_ids: set[str]
    target_times: list[Timestamp]
    matched_users: list[str]  # sorted lexicographically


def _covered(times: list[Timestamp], t: Timestamp, radius: int) -> bool:
    """True iff some element of sorted `times` lies within `radius` of t."""
    i = bisect_left(times, t - radius)
    return i < len(times) and times[i] <= t + radius


def collect_query_times(q: AlignmentQuery, src: SiteDataset) -> list[Timestamp]:
    """The query user's posts inside [t0 - window, t0 + window], ascending."""
    if q.username not in src.records:
        raise UnknownUserError(f"{q.username!r} not in {src.site_id}")
    half = q.window_days * 86400
    times = [t for t in src.records[q.username] if q.t0 - half <= t <= q.t0 + half]
    if not times:
        raise NoQueryTimesError(
            f"{q.username!r} has no posts within {q.window_days} day(s) of t0={q.t0}"
        )
    return times


def match_tracking_ids(
    query_times: list[Timestamp], tracker: TrackerDataset, q: AlignmentQuery
) -> set[str]:
    """Tracking IDs whose source-site events match the query times.

    Browse events never participate (see TrackerDataset.posting_times).
    """
    if not query_times:
        raise NoQueryTimesError("query_times must be non-empty")
    g = q.granularity_secs
    matched: set[str] = set()
    for tid in tracker.events:
        times = tracker.posting_times(tid, q.source_site)
        if not times:
            continue
        if q.coverage_mode is CoverageMode.FULL:
            ok = all(_covered(times, t, g) for t in query_times)
        else:
            ok = any(_covered(times, t, g) for t in query_times)
        if ok:
            matched.add(tid)
    return matched


def collect_target_times(
    candidate_ids: set[str], tracker: TrackerDataset, q: AlignmentQuery
) -> list[Timestamp]:
    """All target-site event times across candidate IDs, sorted, duplicates kept."""
    times: list[Timestamp] = []
    for tid in candidate_ids:
        times.extend(tracker.posting_times(tid, q.target_site))
    times.sort()
    return times


def match_target_users(
    target_times: list[Timestamp], tgt: SiteDataset, q: AlignmentQuery
) -> list[str]:
    """Target users whose every post time is covered by some target time."""
    if not target_times:
        return []
    g = q.granularity_secs
    return [
        user
        for user in sorted(tgt.records)
        if all(_covered(target_times, t, g) for t in tgt.records[user])
    ]


def align_identity(
    q: AlignmentQuery,
    src: SiteDataset,
    tgt: SiteDataset,
    tracker: TrackerDataset,
) -> AlignmentResult:
    """Run the four-stage alignment pipeline for one source-site user."""
    query_times = collect_query_times(q, src)
    candidate_ids = match_tracking_ids(query_times, tracker, q)
    target_times = collect_target_times(candidate_ids, tracker, q)
    matched_users = match_target_users(target_times, tgt, q)
    return AlignmentResult(query_times, candidate_ids, target_times, matched_users)


def align_multi_source(
    q1: AlignmentQuery,
    q2: AlignmentQuery,
    src1: SiteDataset,
    src2: SiteDataset,
    tgt: SiteDataset,
    tracker: TrackerDataset,
) -> AlignmentResult:
    """Refine alignment with accounts on two source sites.

    Candidate IDs are the intersection of both single-source matches; the
    target phase then proceeds as in align_identity, under q1's granularity
    and target site.
    """
    if q1.target_site != q2.target_site:
        raise ValidationError("query.target_site", "both queries must share a target site")
    times1 = collect_query_times(q1, src1)
    times2 = collect_query_times(q2, src2)
    candidate_ids = match_tracking_ids(times1, tracker, q1) & match_tracking_ids(
        times2, tracker, q2
    )
    target_times = collect_target_times(candidate_ids, tracker, q1)
    matched_users = match_target_users(target_times, tgt, q1)
    return AlignmentResult(times1, candidate_ids, target_times, matched_users)
