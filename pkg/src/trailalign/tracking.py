"""Anonymized tracker dataset generation.

Turns the two site datasets plus their ground-truth bijection into a
pseudonymous event log: every post becomes one tracker event recorded at or
before its page time (uniform offset in [0, delta_t_max]), and every post
additionally spawns a sampled number of browse events at power-law time
offsets after it, attributed to uniformly chosen tracking IDs.

Randomness contract: post `i` (in canonical enumeration order: site A then
site B, usernames sorted, each user's times ascending) consumes the
substream seeded by ``(seed, POST_STREAM, i)`` in the fixed order
[page-time offset, browse count, browse offset uniforms, viewer indices].
This makes generation partitionable across workers and replayable by tests.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .datasets import (
    BehaviorKind,
    GroundTruth,
    SiteDataset,
    Timestamp,
    TrackerDataset,
    TrackerEvent,
    validate_ground_truth,
)
from .errors import (
    CapTooSmallError,
    HorizonBeforeDataError,
    InvalidGroundTruthError,
    ValidationError,
)

POST_STREAM = 201
_CHUNK = 2048


class ViewCountDist(Enum):
    NORMAL = "normal"
    PARETO = "pareto"


@dataclass(frozen=True)
class GenConfig:
    """Tracker generation parameters.

    browse_ratio_n is the expected browse events per post; zero disables
    browsing entirely. The browse offset power law is parameterized by the
    magnitude of its pdf exponent (default 2, i.e. pdf ~ x^-2); set
    offset_shape_is_pareto_alpha to reinterpret browse_offset_shape as the
    Pareto shape alpha (pdf ~ x^-(alpha+1)) instead.
    """

    browse_ratio_n: float
    delta_t_max: int
    now: Timestamp
    seed: int
    view_count_dist: ViewCountDist = ViewCountDist.NORMAL
    pareto_view_shape: float = 2.0
    browse_offset_shape: float = 2.0
    browse_offset_min: int = 1
    offset_shape_is_pareto_alpha: bool = False
    distinguish_behaviors: bool = True

    def __post_init__(self):
        if self.browse_ratio_n < 0:
            raise ValidationError("gen.browse_ratio_n", "must be >= 0")
        if self.delta_t_max < 0:
            raise ValidationError("gen.delta_t_max", "must be >= 0")
        if self.browse_offset_min < 1:
            raise ValidationError("gen.browse_offset_min", "must be >= 1")
        if self.pareto_view_shape <= 0:
            raise ValidationError("gen.pareto_view_shape", "must be positive")
        if self._offset_alpha() <= 0:
            raise ValidationError(
                "gen.browse_offset_shape",
                "pdf exponent must exceed 1 (or alpha must be positive)",
            )
        if self.seed < 0:
            raise ValidationError("gen.seed", "must be non-negative")

    def _offset_alpha(self) -> float:
        if self.offset_shape_is_pareto_alpha:
            return self.browse_offset_shape
        return self.browse_offset_shape - 1.0


def pareto_variate(shape: float, rng: np.random.Generator) -> float:
    """Pareto(shape, x_min=1) draw by inverse transform; consumes one uniform."""
    return (1.0 - rng.random()) ** (-1.0 / shape)


def sample_browse_count(cfg: GenConfig, rng: np.random.Generator) -> int:
    """Per-post view count: round-half-up Normal(n, 1) clamped to >= 0,
    or floor of a Pareto(shape, x_min=1) draw. Consumes one draw either way."""
    if cfg.view_count_dist is ViewCountDist.NORMAL:
        return max(0, math.floor(rng.normal(cfg.browse_ratio_n, 1.0) + 0.5))
    return math.floor(pareto_variate(cfg.pareto_view_shape, rng))


def browse_offset_from_uniform(cfg: GenConfig, cap: int, u: float) -> int:
    """Inverse-CDF power-law offset for uniform u in [0,1), clamped to cap."""
    if cap < cfg.browse_offset_min:
        raise CapTooSmallError(
            f"offset cap {cap} below minimum {cfg.browse_offset_min}"
        )
    x = cfg.browse_offset_min * (1.0 - u) ** (-1.0 / cfg._offset_alpha())
    return min(math.floor(x), cap)


def sample_browse_offset(cfg: GenConfig, cap: int, rng: np.random.Generator) -> int:
    return browse_offset_from_uniform(cfg, cap, rng.random())


def post_substream(seed: int, post_index: int) -> np.random.Generator:
    """The RNG substream consumed by one input post during generation."""
    return np.random.default_rng((seed, POST_STREAM, post_index))


def enumerate_posts(
    a: SiteDataset, b: SiteDataset, gt: GroundTruth
) -> list[tuple[str, str, Timestamp]]:
    """Canonical (tracking_id, site_id, page_time) enumeration of all posts."""
    tid_of_a = {p.user_a: p.tracking_id for p in gt.pairs}
    tid_of_b = {p.user_b: p.tracking_id for p in gt.pairs}
    posts: list[tuple[str, str, Timestamp]] = []
    for site, tid_of in ((a, tid_of_a), (b, tid_of_b)):
        for user in sorted(site.records):
            tid = tid_of.get(user)
            if tid is None:
                raise InvalidGroundTruthError(
                    f"user {user!r} on {site.site_id} has no tracking ID"
                )
            for t in site.records[user]:
                posts.append((tid, site.site_id, t))
    return posts


def generate_tracker_data(
    a: SiteDataset,
    b: SiteDataset,
    gt: GroundTruth,
    cfg: GenConfig,
    threads: int = 1,
) -> TrackerDataset:
    """Build the anonymized tracker dataset from both sites' posts."""
    violations = validate_ground_truth(gt, a, b)
    if violations:
        raise InvalidGroundTruthError(f"{len(violations)} violation(s): {violations[:3]}")

    posts = enumerate_posts(a, b, gt)
    newest = max(t for _, _, t in posts)
    if cfg.now < newest:
        raise HorizonBeforeDataError(f"now={cfg.now} predates newest post {newest}")

    ids = [p.tracking_id for p in gt.pairs]
    post_kind = BehaviorKind.POST if cfg.distinguish_behaviors else BehaviorKind.UNLABELED
    browse_kind = BehaviorKind.BROWSE if cfg.distinguish_behaviors else BehaviorKind.UNLABELED

    def gen_chunk(start: int) -> list[tuple[str, TrackerEvent]]:
        out: list[tuple[str, TrackerEvent]] = []
        for i in range(start, min(start + _CHUNK, len(posts))):
            tid, site, t = posts[i]
            rng = post_substream(cfg.seed, i)
            # clamp keeps tracker times non-negative for tiny page times
            delta = min(int(rng.integers(0, cfg.delta_t_max + 1)), t)
            out.append((tid, TrackerEvent(site, t - delta, post_kind)))
            if cfg.browse_ratio_n == 0:
                continue
            k = sample_browse_count(cfg, rng)
            if k <= 0:
                continue
            us = rng.random(k)
            viewers = rng.integers(0, len(ids), size=k)
            cap = cfg.now - t
            for u, v in zip(us, viewers):
                offset = browse_offset_from_uniform(cfg, cap, float(u))
                out.append((ids[int(v)], TrackerEvent(site, t + offset, browse_kind)))
        return out

    starts = range(0, len(posts), _CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(gen_chunk, starts))
    else:
        chunks = [gen_chunk(s) for s in starts]

    by_id: dict[str, list[TrackerEvent]] = {tid: [] for tid in ids}
    for chunk in chunks:
        for tid, event in chunk:
            by_id[tid].append(event)
    for tid in by_id:
        by_id[tid].sort(key=lambda e: e.time)  # stable: ties keep post order

    return TrackerDataset(events=by_id, label_mode=cfg.distinguish_behaviors)
