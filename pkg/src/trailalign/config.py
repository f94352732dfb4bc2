"""Run configuration: TOML/JSON parsing, defaults, validation.

Every unset field gets a documented default (see README): matching
granularity 60 s, query window 1 day, full coverage, normal view counts,
browse-offset pdf exponent 2. The TRAILALIGN_SEED environment variable,
when set, overrides every configured seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .alignment import AlignmentQuery, CoverageMode
from .attacks import EngagementModel
from .corpus import (
    ActivityProfile,
    CorpusConfig,
    DEFAULT_EPOCH_START,
    DiurnalProfile,
    default_activity_profile,
    default_diurnal_profile,
)
from .datasets import SiteDataset, Timestamp, busiest_day
from .errors import ParseError, UnknownUserError, ValidationError
from .evaluation import SweepSpec
from .tracking import GenConfig, ViewCountDist

SEED_ENV_VAR = "TRAILALIGN_SEED"


@dataclass(frozen=True)
class QuerySpec:
    """An alignment query as configured; t0 may be left for data-driven resolution."""

    username: str
    t0: Timestamp | None = None  # None: noon of the user's busiest source-site day
    window_days: int = 1
    granularity_secs: int = 60
    source_site: str = "siteA"
    target_site: str = "siteB"
    coverage_mode: CoverageMode = CoverageMode.FULL

    def resolve(self, src: SiteDataset, epoch_start: Timestamp) -> AlignmentQuery:
        if self.username not in src.records:
            raise UnknownUserError(f"{self.username!r} not in {src.site_id}")
        t0 = self.t0
        if t0 is None:
            t0 = epoch_start + busiest_day(src, self.username, epoch_start) * 86400 + 43200
        return AlignmentQuery(
            username=self.username,
            t0=t0,
            window_days=self.window_days,
            granularity_secs=self.granularity_secs,
            source_site=self.source_site,
            target_site=self.target_site,
            coverage_mode=self.coverage_mode,
        )


@dataclass(frozen=True)
class DensitySpec:
    buckets: list[int]
    trials_per_bucket: int = 200
    granularity_secs: int = 60
    window_days: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.buckets:
            raise ValidationError("density.buckets", "must be non-empty")
        if self.trials_per_bucket < 1:
            raise ValidationError("density.trials_per_bucket", "must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusConfig
    gen: GenConfig
    queries: list[QuerySpec] = field(default_factory=list)
    engagement: EngagementModel | None = None
    sweep: SweepSpec | None = None
    density: DensitySpec | None = None
    output_dir: str = "out"


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(where, f"unknown key(s): {sorted(unknown)}")


def _typed(section: dict, key: str, types, default, where: str):
    if key not in section:
        return default
    value = section[key]
    if types is bool and not isinstance(value, bool):
        raise ValidationError(f"{where}.{key}", f"expected a boolean, got {value!r}")
    if types is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ValidationError(f"{where}.{key}", f"expected an integer, got {value!r}")
    if types is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{where}.{key}", f"expected a number, got {value!r}")
        value = float(value)
    if types is str and not isinstance(value, str):
        raise ValidationError(f"{where}.{key}", f"expected a string, got {value!r}")
    if types is list and not isinstance(value, list):
        raise ValidationError(f"{where}.{key}", f"expected a list, got {value!r}")
    return value


def _coverage(raw: str, where: str) -> CoverageMode:
    try:
        return CoverageMode(raw)
    except ValueError:
        raise ValidationError(where, f"expected 'full' or 'any', got {raw!r}") from None


def _corpus_from(section: dict, seed_override: int | None) -> CorpusConfig:
    _require_keys(
        section,
        {"n_users", "n_days", "seed", "epoch_start", "activity_buckets", "diurnal_weights"},
        "corpus",
    )
    buckets = section.get("activity_buckets")
    if buckets is None:
        activity = default_activity_profile()
    else:
        try:
            activity = ActivityProfile([(int(c), int(n)) for c, n in buckets])
        except (TypeError, ValueError):
            raise ValidationError(
                "corpus.activity_buckets", "expected [[max_daily_posts, user_count], ...]"
            ) from None
    weights = section.get("diurnal_weights")
    diurnal = default_diurnal_profile() if weights is None else DiurnalProfile(weights)
    seed = seed_override if seed_override is not None else _typed(section, "seed", int, 1, "corpus")
    return CorpusConfig(
        n_users=_typed(section, "n_users", int, 100, "corpus"),
        n_days=_typed(section, "n_days", int, 7, "corpus"),
        activity=activity,
        diurnal=diurnal,
        seed=seed,
        epoch_start=_typed(section, "epoch_start", int, DEFAULT_EPOCH_START, "corpus"),
    )


def _gen_from(section: dict, corpus: CorpusConfig, seed_override: int | None) -> GenConfig:
    _require_keys(
        section,
        {
            "browse_ratio", "delta_t_max", "now", "seed", "view_count_dist",
            "pareto_view_shape", "browse_offset_shape", "browse_offset_min",
            "offset_shape_is_pareto_alpha", "distinguish",
        },
        "gen",
    )
    raw_dist = _typed(section, "view_count_dist", str, "normal", "gen")
    try:
        dist = ViewCountDist(raw_dist)
    except ValueError:
        raise ValidationError(
            "gen.view_count_dist", f"expected 'normal' or 'pareto', got {raw_dist!r}"
        ) from None
    corpus_end = corpus.epoch_start + corpus.n_days * 86400
    seed = seed_override if seed_override is not None else _typed(section, "seed", int, 2, "gen")
    return GenConfig(
        browse_ratio_n=_typed(section, "browse_ratio", float, 10.0, "gen"),
        delta_t_max=_typed(section, "delta_t_max", int, 0, "gen"),
        now=_typed(section, "now", int, corpus_end, "gen"),
        seed=seed,
        view_count_dist=dist,
        pareto_view_shape=_typed(section, "pareto_view_shape", float, 2.0, "gen"),
        browse_offset_shape=_typed(section, "browse_offset_shape", float, 2.0, "gen"),
        browse_offset_min=_typed(section, "browse_offset_min", int, 1, "gen"),
        offset_shape_is_pareto_alpha=_typed(
            section, "offset_shape_is_pareto_alpha", bool, False, "gen"
        ),
        distinguish_behaviors=_typed(section, "distinguish", bool, True, "gen"),
    )


def _query_from(section: dict, index: int) -> QuerySpec:
    where = f"queries[{index}]"
    _require_keys(
        section,
        {"user", "t0", "window_days", "granularity", "mode", "source", "target"},
        where,
    )
    username = section.get("user")
    if not username or not isinstance(username, str):
        raise ValidationError(f"{where}.user", "a username is required")
    t0 = section.get("t0")
    if t0 is not None and (isinstance(t0, bool) or not isinstance(t0, int)):
        raise ValidationError(f"{where}.t0", f"expected an integer, got {t0!r}")
    spec = QuerySpec(
        username=username,
        t0=t0,
        window_days=_typed(section, "window_days", int, 1, where),
        granularity_secs=_typed(section, "granularity", int, 60, where),
        source_site=_typed(section, "source", str, "siteA", where),
        target_site=_typed(section, "target", str, "siteB", where),
        coverage_mode=_coverage(_typed(section, "mode", str, "full", where), f"{where}.mode"),
    )
    if spec.window_days < 1:
        raise ValidationError(f"{where}.window_days", "must be >= 1")
    if spec.granularity_secs < 0:
        raise ValidationError(f"{where}.granularity", "must be >= 0")
    return spec


def _engagement_from(section: dict, seed_override: int | None) -> EngagementModel:
    _require_keys(section, {"p_target", "p_decoy", "rounds", "seed"}, "engagement")
    seed = seed_override if seed_override is not None else _typed(section, "seed", int, 3, "engagement")
    return EngagementModel(
        p_target=_typed(section, "p_target", float, 1.0, "engagement"),
        p_decoy=_typed(section, "p_decoy", float, 0.5, "engagement"),
        rounds=_typed(section, "rounds", int, 1, "engagement"),
        seed=seed,
    )


def _sweep_from(section: dict, seed_override: int | None) -> SweepSpec:
    _require_keys(
        section,
        {
            "granularities", "delta_ts", "browse_ratios", "distinguish_modes",
            "density_filters", "trials_per_cell", "window_days", "mode", "seed",
        },
        "sweep",
    )
    seed = seed_override if seed_override is not None else _typed(section, "seed", int, 4, "sweep")
    return SweepSpec(
        granularities=[int(g) for g in _typed(section, "granularities", list, [60], "sweep")],
        delta_ts=[int(d) for d in _typed(section, "delta_ts", list, [0], "sweep")],
        browse_ratios=[float(r) for r in _typed(section, "browse_ratios", list, [10.0], "sweep")],
        distinguish_modes=[bool(d) for d in _typed(section, "distinguish_modes", list, [True], "sweep")],
        density_filters=[int(f) for f in _typed(section, "density_filters", list, [0], "sweep")],
        trials_per_cell=_typed(section, "trials_per_cell", int, 100, "sweep"),
        window_days=_typed(section, "window_days", int, 30, "sweep"),
        coverage=_coverage(_typed(section, "mode", str, "full", "sweep"), "sweep.mode"),
        seed=seed,
    )


def _density_from(section: dict, seed_override: int | None) -> DensitySpec:
    _require_keys(
        section,
        {"buckets", "trials_per_bucket", "granularity", "window_days", "seed"},
        "density",
    )
    seed = seed_override if seed_override is not None else _typed(section, "seed", int, 5, "density")
    return DensitySpec(
        buckets=[int(b) for b in _typed(section, "buckets", list, [20, 10, 5, 4, 3, 2, 1], "density")],
        trials_per_bucket=_typed(section, "trials_per_bucket", int, 200, "density"),
        granularity_secs=_typed(section, "granularity", int, 60, "density"),
        window_days=_typed(section, "window_days", int, 1, "density"),
        seed=seed,
    )


def seed_override_from_env(env=None) -> int | None:
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV_VAR)
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(SEED_ENV_VAR, f"expected an integer, got {raw!r}") from None
    if value < 0:
        raise ValidationError(SEED_ENV_VAR, "must be non-negative")
    return value


def load_raw_config(path: str | Path) -> dict:
    """Read a TOML or JSON document; empty files mean an empty document."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return {}
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    else:
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(str(path), str(exc)) from None
    if not isinstance(doc, dict):
        raise ParseError(str(path), "top-level value must be a table/object")
    return doc


def config_from_dict(doc: dict, env=None) -> RunConfig:
    if "config" in doc:  # manifest files wrap the resolved config
        doc = doc["config"]
    _require_keys(
        doc,
        {"corpus", "gen", "queries", "engagement", "sweep", "density", "output_dir"},
        "config",
    )
    seed_override = seed_override_from_env(env)
    corpus = _corpus_from(doc.get("corpus", {}), seed_override)
    queries_raw = doc.get("queries", [])
    if not isinstance(queries_raw, list):
        raise ValidationError("queries", "expected a list of query tables")
    return RunConfig(
        corpus=corpus,
        gen=_gen_from(doc.get("gen", {}), corpus, seed_override),
        queries=[_query_from(q, i) for i, q in enumerate(queries_raw)],
        engagement=_engagement_from(doc["engagement"], seed_override) if "engagement" in doc else None,
        sweep=_sweep_from(doc["sweep"], seed_override) if "sweep" in doc else None,
        density=_density_from(doc["density"], seed_override) if "density" in doc else None,
        output_dir=_typed(doc, "output_dir", str, "out", "config"),
    )


def parse_config(path: str | Path, env=None) -> RunConfig:
    """Load and fully validate a run configuration file."""
    return config_from_dict(load_raw_config(path), env)


def parse_corpus_config(path: str | Path, env=None) -> CorpusConfig:
    """Corpus settings from either a full run config or a bare corpus table."""
    doc = load_raw_config(path)
    if "config" in doc:
        doc = doc["config"]
    section = doc["corpus"] if "corpus" in doc else doc
    return _corpus_from(section, seed_override_from_env(env))


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of config_from_dict with every default materialized."""
    doc: dict = {
        "corpus": {
            "n_users": cfg.corpus.n_users,
            "n_days": cfg.corpus.n_days,
            "seed": cfg.corpus.seed,
            "epoch_start": cfg.corpus.epoch_start,
            "activity_buckets": [list(b) for b in cfg.corpus.activity.buckets],
            "diurnal_weights": list(cfg.corpus.diurnal.hour_weights),
        },
        "gen": {
            "browse_ratio": cfg.gen.browse_ratio_n,
            "delta_t_max": cfg.gen.delta_t_max,
            "now": cfg.gen.now,
            "seed": cfg.gen.seed,
            "view_count_dist": cfg.gen.view_count_dist.value,
            "pareto_view_shape": cfg.gen.pareto_view_shape,
            "browse_offset_shape": cfg.gen.browse_offset_shape,
            "browse_offset_min": cfg.gen.browse_offset_min,
            "offset_shape_is_pareto_alpha": cfg.gen.offset_shape_is_pareto_alpha,
            "distinguish": cfg.gen.distinguish_behaviors,
        },
        "queries": [
            {
                "user": q.username,
                **({"t0": q.t0} if q.t0 is not None else {}),
                "window_days": q.window_days,
                "granularity": q.granularity_secs,
                "mode": q.coverage_mode.value,
                "source": q.source_site,
                "target": q.target_site,
            }
            for q in cfg.queries
        ],
        "output_dir": cfg.output_dir,
    }
    if cfg.engagement is not None:
        doc["engagement"] = {
            "p_target": cfg.engagement.p_target,
            "p_decoy": cfg.engagement.p_decoy,
            "rounds": cfg.engagement.rounds,
            "seed": cfg.engagement.seed,
        }
    if cfg.sweep is not None:
        doc["sweep"] = {
            "granularities": list(cfg.sweep.granularities),
            "delta_ts": list(cfg.sweep.delta_ts),
            "browse_ratios": list(cfg.sweep.browse_ratios),
            "distinguish_modes": list(cfg.sweep.distinguish_modes),
            "density_filters": list(cfg.sweep.density_filters),
            "trials_per_cell": cfg.sweep.trials_per_cell,
            "window_days": cfg.sweep.window_days,
            "mode": cfg.sweep.coverage.value,
            "seed": cfg.sweep.seed,
        }
    if cfg.density is not None:
        doc["density"] = {
            "buckets": list(cfg.density.buckets),
            "trials_per_bucket": cfg.density.trials_per_bucket,
            "granularity": cfg.density.granularity_secs,
            "window_days": cfg.density.window_days,
            "seed": cfg.density.seed,
        }
    return doc
