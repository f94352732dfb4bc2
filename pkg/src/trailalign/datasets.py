"""Domain types and dataset file I/O.

Three CSV interchange formats, all UTF-8 with LF line endings and a
mandatory lowercase header row:

    site data:     username,timestamp
    tracker data:  tracking_id,domain,timestamp,kind   (kind: post|browse|unlabeled)
    ground truth:  tracking_id,user_a,user_b

Timestamps are integer Unix epoch seconds (UTC). All types are immutable
after construction and safe to share read-only across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    EmptyDatasetError,
    MalformedRowError,
    MixedLabelModesError,
)

Timestamp = int


class BehaviorKind(Enum):
    POST = "post"
    BROWSE = "browse"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class SiteDataset:
    """Per-site map from username to a strictly ascending list of post times."""

    site_id: str
    records: dict[str, list[Timestamp]]

    def __post_init__(self):
        for user, times in self.records.items():
            if not times:
                raise EmptyDatasetError(f"user {user!r} has no timestamps")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError(f"timestamps for {user!r} not strictly ascending")

    @property
    def usernames(self) -> list[str]:
        return sorted(self.records)


@dataclass(frozen=True, slots=True)
class TrackerEvent:
    domain: str
    time: Timestamp
    kind: BehaviorKind


@dataclass
class TrackerDataset:
    """Pseudonymous event log: tracking ID -> events sorted by time.

    `label_mode` is True when behaviors are distinguished (post/browse) and
    False when all events are unlabeled; the two never mix. The per-ID,
    per-domain time index is built lazily on first lookup; building it twice
    from concurrent readers is harmless.
    """

    events: dict[str, list[TrackerEvent]]
    label_mode: bool
    _index: dict[tuple[str, str], list[Timestamp]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self):
        for tid, evs in self.events.items():
            if any(b.time < a.time for a, b in zip(evs, evs[1:])):
                raise ValueError(f"events for {tid!r} not sorted by time")

    def posting_times(self, tracking_id: str, domain: str) -> list[Timestamp]:
        """Sorted times of non-browse events for one ID on one domain.

        Browse events never participate in matching: with label_mode the
        post label is authoritative, without it everything is unlabeled
        and counts.
        """
        key = (tracking_id, domain)
        cached = self._index.get(key)
        if cached is None:
            cached = [
                e.time
                for e in self.events.get(tracking_id, [])
                if e.domain == domain and e.kind is not BehaviorKind.BROWSE
            ]
            self._index[key] = cached
        return cached

    @property
    def tracking_ids(self) -> list[str]:
        return list(self.events)

    def total_events(self) -> int:
        return sum(len(evs) for evs in self.events.values())


@dataclass(frozen=True)
class GroundTruthPair:
    tracking_id: str
    user_a: str
    user_b: str


@dataclass(frozen=True)
class GroundTruth:
    """Evaluation-only bijection tracking ID <-> (source user, target user)."""

    pairs: list[GroundTruthPair]

    def target_of(self, source_user: str) -> str | None:
        for p in self.pairs:
            if p.user_a == source_user:
                return p.user_b
        return None

    def source_of(self, target_user: str) -> str | None:
        for p in self.pairs:
            if p.user_b == target_user:
                return p.user_a
        return None


@dataclass(frozen=True)
class Violation:
    """One ground-truth consistency failure found by validate_ground_truth."""

    kind: str  # "missing_user" | "duplicate_tracking_id" | "duplicate_user"
    subject: str
    site: str | None = None


def _read_rows(path: str | Path, expected_header: list[str]):
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: missing header row") from None
        if header != expected_header:
            raise MalformedRowError(1, f"expected header {expected_header}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise MalformedRowError(line_no, f"expected {len(expected_header)} fields, got {len(row)}")
            yield line_no, row


def _parse_timestamp(raw: str, line_no: int) -> Timestamp:
    try:
        value = int(raw)
    except ValueError:
        raise MalformedRowError(line_no, f"non-integer timestamp {raw!r}") from None
    if value < 0:
        raise MalformedRowError(line_no, f"negative timestamp {value}")
    return value


def load_site_dataset(path: str | Path, site_id: str) -> SiteDataset:
    """Load `username,timestamp` CSV; per-user times are sorted and deduplicated."""
    records: dict[str, set[Timestamp]] = {}
    for line_no, (username, raw_ts) in _read_rows(path, ["username", "timestamp"]):
        if not username:
            raise MalformedRowError(line_no, "empty username")
        records.setdefault(username, set()).add(_parse_timestamp(raw_ts, line_no))
    if not records:
        raise EmptyDatasetError(f"{path}: no data rows")
    return SiteDataset(site_id, {u: sorted(ts) for u, ts in records.items()})


def write_site_dataset(ds: SiteDataset, path: str | Path) -> None:
    """Write canonical form: rows sorted by username, then time."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["username", "timestamp"])
        for username in sorted(ds.records):
            for t in ds.records[username]:
                writer.writerow([username, t])


def load_tracker_dataset(path: str | Path, known_sites: set[str] | None = None) -> TrackerDataset:
    """Load `tracking_id,domain,timestamp,kind` CSV.

    label_mode is inferred; unlabeled rows must be exclusive. When
    `known_sites` is given, rows naming any other domain are rejected.
    """
    kinds = {k.value: k for k in BehaviorKind}
    events: dict[str, list[TrackerEvent]] = {}
    saw_labeled = saw_unlabeled = False
    for line_no, (tid, domain, raw_ts, raw_kind) in _read_rows(
        path, ["tracking_id", "domain", "timestamp", "kind"]
    ):
        if not tid:
            raise MalformedRowError(line_no, "empty tracking_id")
        if known_sites is not None and domain not in known_sites:
            raise MalformedRowError(line_no, f"unknown domain {domain!r}")
        kind = kinds.get(raw_kind)
        if kind is None:
            raise MalformedRowError(line_no, f"unknown kind {raw_kind!r}")
        if kind is BehaviorKind.UNLABELED:
            saw_unlabeled = True
        else:
            saw_labeled = True
        if saw_labeled and saw_unlabeled:
            raise MixedLabelModesError("post/browse rows coexist with unlabeled rows")
        events.setdefault(tid, []).append(TrackerEvent(domain, _parse_timestamp(raw_ts, line_no), kind))
    for tid in events:
        events[tid].sort(key=lambda e: e.time)
    return TrackerDataset(events=events, label_mode=not saw_unlabeled)


def write_tracker_dataset(ds: TrackerDataset, path: str | Path) -> None:
    """Write IDs in sorted order, each ID's events in stored (time) order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tracking_id", "domain", "timestamp", "kind"])
        for tid in sorted(ds.events):
            for e in ds.events[tid]:
                writer.writerow([tid, e.domain, e.time, e.kind.value])


def load_ground_truth(path: str | Path) -> GroundTruth:
    pairs = []
    for line_no, (tid, user_a, user_b) in _read_rows(path, ["tracking_id", "user_a", "user_b"]):
        if not tid or not user_a or not user_b:
            raise MalformedRowError(line_no, "empty field")
        pairs.append(GroundTruthPair(tid, user_a, user_b))
    return GroundTruth(pairs)


def write_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tracking_id", "user_a", "user_b"])
        for p in gt.pairs:
            writer.writerow([p.tracking_id, p.user_a, p.user_b])


def validate_ground_truth(gt: GroundTruth, a: SiteDataset, b: SiteDataset) -> list[Violation]:
    """Report bijection/reference violations; empty report means consistent."""
    violations: list[Violation] = []
    seen_tids: set[str] = set()
    seen_a: set[str] = set()
    seen_b: set[str] = set()
    for p in gt.pairs:
        if p.tracking_id in seen_tids:
            violations.append(Violation("duplicate_tracking_id", p.tracking_id))
        seen_tids.add(p.tracking_id)
        if p.user_a in seen_a:
            violations.append(Violation("duplicate_user", p.user_a, a.site_id))
        seen_a.add(p.user_a)
        if p.user_b in seen_b:
            violations.append(Violation("duplicate_user", p.user_b, b.site_id))
        seen_b.add(p.user_b)
        if p.user_a not in a.records:
            violations.append(Violation("missing_user", p.user_a, a.site_id))
        if p.user_b not in b.records:
            violations.append(Violation("missing_user", p.user_b, b.site_id))
    return violations


def daily_post_maxima(ds: SiteDataset, epoch_start: Timestamp) -> dict[str, int]:
    """Maximum single-day post count per user, with days anchored at epoch_start."""
    maxima: dict[str, int] = {}
    for user, times in ds.records.items():
        counts: dict[int, int] = {}
        for t in times:
            day = (t - epoch_start) // 86400
            counts[day] = counts.get(day, 0) + 1
        maxima[user] = max(counts.values())
    return maxima


def busiest_day(ds: SiteDataset, username: str, epoch_start: Timestamp) -> int:
    """Day index (relative to epoch_start) with the user's most posts; earliest wins ties."""
    counts: dict[int, int] = {}
    for t in ds.records[username]:
        day = (t - epoch_start) // 86400
        counts[day] = counts.get(day, 0) + 1
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]
