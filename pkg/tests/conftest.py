"""Shared fixtures and small-instance builders."""

from __future__ import annotations

import numpy as np
import pytest

from trailalign.alignment import AlignmentQuery, CoverageMode
from trailalign.datasets import (
    BehaviorKind,
    GroundTruth,
    GroundTruthPair,
    SiteDataset,
    TrackerDataset,
    TrackerEvent,
)


def make_site(site_id: str, records: dict[str, list[int]]) -> SiteDataset:
    return SiteDataset(site_id, {u: sorted(set(ts)) for u, ts in records.items()})


def make_tracker(rows: list[tuple[str, str, int, str]]) -> TrackerDataset:
    """rows: (tracking_id, domain, time, kind) in any order."""
    events: dict[str, list[TrackerEvent]] = {}
    for tid, domain, t, kind in rows:
        events.setdefault(tid, []).append(TrackerEvent(domain, t, BehaviorKind(kind)))
    for tid in events:
        events[tid].sort(key=lambda e: e.time)
    label_mode = all(k != "unlabeled" for _, _, _, k in rows)
    return TrackerDataset(events=events, label_mode=label_mode)


def make_gt(pairs: list[tuple[str, str, str]]) -> GroundTruth:
    return GroundTruth([GroundTruthPair(*p) for p in pairs])


def random_instance(rng: np.random.Generator):
    """A small random (sources, target, tracker, queries) alignment instance.

    Two source sites plus one target site, <= 50 users and <= 200 tracker
    events; both queries share one granularity and a t0 sitting on one of
    the user's own posts.
    """
    span = 200_000
    n_users = int(rng.integers(2, 9))

    def random_site(site_id, prefix):
        records = {}
        for i in range(n_users):
            n_posts = int(rng.integers(1, 7))
            times = sorted(set(int(t) for t in rng.integers(0, span, n_posts)))
            records[f"{prefix}{i}"] = times
        return SiteDataset(site_id, records)

    src1 = random_site("siteA", "a")
    src2 = random_site("siteD", "d")
    tgt = random_site("siteB", "b")

    labeled = bool(rng.integers(0, 2))
    kinds = ["post", "browse"] if labeled else ["unlabeled"]
    tid_pool = [f"T{i}" for i in range(int(rng.integers(1, 13)))]
    n_events = int(rng.integers(1, 201))
    rows = []
    for _ in range(n_events):
        rows.append(
            (
                tid_pool[int(rng.integers(0, len(tid_pool)))],
                ("siteA", "siteB", "siteD")[int(rng.integers(0, 3))],
                int(rng.integers(0, span)),
                kinds[int(rng.integers(0, len(kinds)))],
            )
        )
    tracker = make_tracker(rows)

    granularity = int(rng.integers(0, 61))
    mode = CoverageMode.FULL if rng.integers(0, 2) else CoverageMode.ANY

    def random_query(src, source_site):
        user = sorted(src.records)[int(rng.integers(0, len(src.records)))]
        posts = src.records[user]
        t0 = posts[int(rng.integers(0, len(posts)))]
        return AlignmentQuery(
            username=user,
            t0=t0,
            window_days=int(rng.integers(1, 3)),
            granularity_secs=granularity,
            source_site=source_site,
            target_site="siteB",
            coverage_mode=mode,
        )

    q1 = random_query(src1, "siteA")
    q2 = random_query(src2, "siteD")
    return src1, src2, tgt, tracker, q1, q2


@pytest.fixture
def chain_instance():
    """The hand-traceable alice -> T1 -> bob instance."""
    src = make_site("siteA", {"alice": [1000, 2000], "amy": [50_000]})
    tgt = make_site("siteB", {"bob": [5003], "carol": [5003, 99_999]})
    tracker = make_tracker(
        [
            ("T1", "siteA", 995, "post"),
            ("T1", "siteA", 1993, "post"),
            ("T1", "siteB", 5000, "post"),
            ("T2", "siteA", 40_000, "post"),
            ("T2", "siteB", 99_000, "post"),
        ]
    )
    q = AlignmentQuery("alice", t0=1500, window_days=1, granularity_secs=10)
    return src, tgt, tracker, q
