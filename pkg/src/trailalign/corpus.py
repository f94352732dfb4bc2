"""Synthetic two-site posting corpus generator.

Stands in for a live crawler: emits a source-site dataset, a target-site
dataset, and the ground-truth user bijection between them. Activity levels
follow a bucketed max-daily-posts profile and times of day follow an hourly
weight profile; the defaults mirror the activity mix and daily rhythm
typical of large microblogging platforms.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import GroundTruth, GroundTruthPair, SiteDataset, Timestamp
from .errors import InvalidCapError, ValidationError

# Fixed origin for generated timestamps so fixtures stay stable.
DEFAULT_EPOCH_START = 1_600_000_000

# (max posts per day, user count) buckets of the reference activity mix.
DEFAULT_ACTIVITY_BUCKETS = [
    (20, 22),
    (10, 174),
    (5, 161),
    (4, 481),
    (3, 1083),
    (2, 2961),
    (1, 5773),
]

# Hourly posting volume over a 24h day in the reference corpus (hour 0..23).
DEFAULT_DIURNAL_WEIGHTS = [
    60, 65, 70, 65, 55, 50, 45, 70, 80, 85, 90, 95,
    100, 105, 115, 120, 125, 120, 110, 100, 95, 85, 75, 70,
]

_USER_STREAM = 101


@dataclass(frozen=True)
class ActivityProfile:
    """Buckets of (max_daily_posts, user_count), caps strictly decreasing."""

    buckets: list[tuple[int, int]]

    def __post_init__(self):
        if not self.buckets:
            raise ValidationError("activity.buckets", "must be non-empty")
        caps = [c for c, _ in self.buckets]
        if any(b >= a for a, b in zip(caps, caps[1:])):
            raise ValidationError("activity.buckets", "caps must be strictly decreasing")
        if caps[-1] < 1:
            raise ValidationError("activity.buckets", "caps must be >= 1")
        if caps[0] > 86400:
            raise ValidationError("activity.buckets", "caps cannot exceed seconds in a day")
        if any(n <= 0 for _, n in self.buckets):
            raise ValidationError("activity.buckets", "user counts must be positive")

    @property
    def total_users(self) -> int:
        return sum(n for _, n in self.buckets)


@dataclass(frozen=True)
class DiurnalProfile:
    """24 hourly weights, normalized to sum 1 at construction."""

    hour_weights: tuple[float, ...]
    _cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __init__(self, hour_weights):
        weights = [float(w) for w in hour_weights]
        if len(weights) != 24:
            raise ValidationError("diurnal.hour_weights", "need exactly 24 weights")
        if any(w < 0 for w in weights):
            raise ValidationError("diurnal.hour_weights", "weights must be non-negative")
        total = sum(weights)
        if total <= 0:
            raise ValidationError("diurnal.hour_weights", "at least one weight must be positive")
        if abs(total - 1.0) < 1e-9:  # idempotent: already-normalized input round-trips exactly
            normalized = tuple(weights)
        else:
            normalized = tuple(w / total for w in weights)
        object.__setattr__(self, "hour_weights", normalized)
        object.__setattr__(self, "_cumulative", np.cumsum(normalized))


@dataclass(frozen=True)
class CorpusConfig:
    n_users: int
    n_days: int
    activity: ActivityProfile
    diurnal: DiurnalProfile
    seed: int
    epoch_start: Timestamp = DEFAULT_EPOCH_START

    def __post_init__(self):
        if self.n_users < 1:
            raise ValidationError("corpus.n_users", "must be >= 1")
        if self.n_days < 1:
            raise ValidationError("corpus.n_days", "must be >= 1")
        if self.seed < 0:
            raise ValidationError("corpus.seed", "must be non-negative")


def default_activity_profile() -> ActivityProfile:
    return ActivityProfile(list(DEFAULT_ACTIVITY_BUCKETS))


def default_diurnal_profile() -> DiurnalProfile:
    return DiurnalProfile(DEFAULT_DIURNAL_WEIGHTS)


def sample_daily_count(user_cap: int, rng: np.random.Generator) -> int:
    """One day's post count, uniform on [0, user_cap]."""
    if user_cap < 1:
        raise InvalidCapError(f"user_cap must be >= 1, got {user_cap}")
    return int(rng.integers(0, user_cap + 1))


def sample_post_time_of_day(profile: DiurnalProfile, rng: np.random.Generator) -> int:
    """Second-of-day in [0, 86399]: hour by profile weight, second uniform."""
    hour = int(np.searchsorted(profile._cumulative, rng.random(), side="right"))
    hour = min(hour, 23)  # guard against cumulative rounding at 1.0
    return hour * 3600 + int(rng.integers(0, 3600))


def apportion_bucket_counts(n_users: int, profile: ActivityProfile) -> list[int]:
    """Scale profile bucket occupancies to n_users by largest remainder."""
    total = profile.total_users
    quotas = [n_users * count / total for _, count in profile.buckets]
    assigned = [math.floor(q) for q in quotas]
    leftover = n_users - sum(assigned)
    by_remainder = sorted(
        range(len(quotas)), key=lambda i: (-(quotas[i] - assigned[i]), i)
    )
    for i in by_remainder[:leftover]:
        assigned[i] += 1
    return assigned


def assign_user_caps(n_users: int, profile: ActivityProfile) -> list[int]:
    """Per-user max-daily-posts cap, bucket by bucket in profile order."""
    caps = []
    for (cap, _), count in zip(profile.buckets, apportion_bucket_counts(n_users, profile)):
        caps.extend([cap] * count)
    return caps


def make_tracking_id(seed: int, index: int) -> str:
    """Opaque 16-hex-char ID from a seeded hash; carries no username information."""
    return hashlib.sha256(f"{seed}:{index}".encode()).hexdigest()[:16]


def _user_site_times(cfg: CorpusConfig, user_index: int, cap: int, site_index: int) -> list[Timestamp]:
    rng = np.random.default_rng((cfg.seed, _USER_STREAM, user_index, site_index))
    counts = [sample_daily_count(cap, rng) for _ in range(cfg.n_days)]
    # Force the cap on one day so max-daily-posts is a meaningful statistic.
    counts[int(rng.integers(0, cfg.n_days))] = cap
    used: set[tuple[int, int]] = set()
    times: list[Timestamp] = []
    for day, count in enumerate(counts):
        for _ in range(count):
            tod = sample_post_time_of_day(cfg.diurnal, rng)
            redraws = 0
            while (day, tod) in used:
                redraws += 1
                if redraws > 100:  # near-saturated day: probe instead of spinning
                    tod = (tod + 1) % 86400
                else:
                    tod = sample_post_time_of_day(cfg.diurnal, rng)
            used.add((day, tod))
            times.append(cfg.epoch_start + day * 86400 + tod)
    assert times, "cap >= 1 and a forced cap day guarantee at least one post"
    return sorted(times)


def synthesize_corpus(
    cfg: CorpusConfig, threads: int = 1
) -> tuple[SiteDataset, SiteDataset, GroundTruth]:
    """Generate both site datasets plus their ground-truth bijection.

    A user's streams on the two sites share an activity cap but are drawn
    independently, so cross-site timestamps carry no signal of their own.
    Per-user RNG substreams keep output identical for any thread count.
    """
    caps = assign_user_caps(cfg.n_users, cfg.activity)

    def one_user(i: int) -> tuple[list[Timestamp], list[Timestamp]]:
        return (
            _user_site_times(cfg, i, caps[i], 0),
            _user_site_times(cfg, i, caps[i], 1),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_user = list(pool.map(one_user, range(cfg.n_users)))
    else:
        per_user = [one_user(i) for i in range(cfg.n_users)]

    records_a: dict[str, list[Timestamp]] = {}
    records_b: dict[str, list[Timestamp]] = {}
    pairs: list[GroundTruthPair] = []
    for i, (times_a, times_b) in enumerate(per_user):
        user_a = f"a{i:05d}"
        user_b = f"b{i:05d}"
        records_a[user_a] = times_a
        records_b[user_b] = times_b
        pairs.append(GroundTruthPair(make_tracking_id(cfg.seed, i), user_a, user_b))

    tids = {p.tracking_id for p in pairs}
    if len(tids) != len(pairs):
        raise RuntimeError("tracking ID hash collision; change the corpus seed")

    return SiteDataset("siteA", records_a), SiteDataset("siteB", records_b), GroundTruth(pairs)
