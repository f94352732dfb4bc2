"""Passive and active de-anonymization attacks.

The passive attack is an evaluated alignment run: it wraps align_identity
and scores the candidate list against ground truth. The active attack
refines a passive candidate list through simulated engagement rounds: each
round, candidates respond independently (the true target with p_target,
decoys with p_decoy) and the candidate set is intersected with the
responders. Rounds with no responders leave the set unchanged, so chance
silence never certifies a failure.

Everything here operates on simulated data only; nothing touches a network.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .alignment import AlignmentQuery, align_identity
from .datasets import GroundTruth, SiteDataset, TrackerDataset
from .errors import UnknownUserError, ValidationError

ROUND_STREAM = 301


@dataclass(frozen=True)
class EngagementModel:
    """Bernoulli response model for induced interaction rounds."""

    p_target: float
    p_decoy: float
    rounds: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.p_target <= 1.0:
            raise ValidationError("engagement.p_target", "must be in [0, 1]")
        if not 0.0 <= self.p_decoy <= 1.0:
            raise ValidationError("engagement.p_decoy", "must be in [0, 1]")
        if self.rounds < 1:
            raise ValidationError("engagement.rounds", "must be >= 1")
        if self.seed < 0:
            raise ValidationError("engagement.seed", "must be non-negative")


@dataclass(frozen=True)
class AttackOutcome:
    query: AlignmentQuery
    candidates: list[str]  # sorted target-site usernames
    anonymity_set_size: int  # |S|: all users on the target site
    deanonymized_size: int  # |S'|: len(candidates)
    success: bool  # true target is among the candidates
    true_target: str  # from ground truth; evaluation-only


def resolve_true_target(gt: GroundTruth, username: str) -> str:
    """Ground-truth counterpart of a queried username (either direction)."""
    target = gt.target_of(username)
    if target is None:
        target = gt.source_of(username)
    if target is None:
        raise UnknownUserError(f"{username!r} has no ground-truth pair")
    return target


def run_passive_attack(
    q: AlignmentQuery,
    src: SiteDataset,
    tgt: SiteDataset,
    tracker: TrackerDataset,
    gt: GroundTruth,
) -> AttackOutcome:
    true_target = resolve_true_target(gt, q.username)
    result = align_identity(q, src, tgt, tracker)
    return AttackOutcome(
        query=q,
        candidates=result.matched_users,
        anonymity_set_size=len(tgt.records),
        deanonymized_size=len(result.matched_users),
        success=true_target in result.matched_users,
        true_target=true_target,
    )


def simulate_engagement(
    candidates: list[str],
    true_target: str,
    model: EngagementModel,
    round_index: int,
) -> set[str]:
    """One engagement round: who of the candidates responded."""
    rng = np.random.default_rng((model.seed, ROUND_STREAM, round_index))
    responders: set[str] = set()
    for name in sorted(candidates):
        p = model.p_target if name == true_target else model.p_decoy
        if rng.random() < p:
            responders.add(name)
    return responders


def run_active_attack(outcome: AttackOutcome, model: EngagementModel) -> AttackOutcome:
    """Shrink a passive candidate list through engagement rounds."""
    if not outcome.candidates:
        raise ValueError("active attack requires a non-empty candidate list")
    candidates = list(outcome.candidates)
    for round_index in range(model.rounds):
        if len(candidates) == 1:
            break
        responders = simulate_engagement(candidates, outcome.true_target, model, round_index)
        if responders:
            candidates = sorted(set(candidates) & responders)
    return replace(
        outcome,
        candidates=candidates,
        deanonymized_size=len(candidates),
        success=outcome.true_target in candidates,
    )
