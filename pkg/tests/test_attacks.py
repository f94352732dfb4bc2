import numpy as np
import pytest

from trailalign.alignment import AlignmentQuery
from trailalign.attacks import (
    AttackOutcome,
    EngagementModel,
    run_active_attack,
    run_passive_attack,
    simulate_engagement,
)
from trailalign.errors import NoQueryTimesError, UnknownUserError, ValidationError

from conftest import make_gt, make_site, make_tracker


def model(**overrides):
    base = dict(p_target=1.0, p_decoy=0.5, rounds=1, seed=7)
    base.update(overrides)
    return EngagementModel(**base)


def outcome(candidates, true_target="bob", anonymity=10_655):
    q = AlignmentQuery("alice", t0=1000)
    return AttackOutcome(
        query=q,
        candidates=sorted(candidates),
        anonymity_set_size=anonymity,
        deanonymized_size=len(candidates),
        success=true_target in candidates,
        true_target=true_target,
    )


class TestPassiveAttack:
    def setup_method(self):
        self.src = make_site("siteA", {"alice": [1000, 2000], "amy": [70_000]})
        self.tgt = make_site("siteB", {"bob": [5003], "bea": [90_000]})
        self.tracker = make_tracker(
            [
                ("T1", "siteA", 995, "post"),
                ("T1", "siteA", 1995, "post"),
                ("T1", "siteB", 5000, "post"),
                ("T2", "siteA", 70_000, "post"),
                ("T2", "siteB", 90_000, "post"),
            ]
        )
        self.gt = make_gt([("T1", "alice", "bob"), ("T2", "amy", "bea")])

    def test_success_and_sizes(self):
        q = AlignmentQuery("alice", t0=1500, granularity_secs=10)
        out = run_passive_attack(q, self.src, self.tgt, self.tracker, self.gt)
        assert out.success is True
        assert out.true_target == "bob"
        assert out.candidates == ["bob"]
        assert out.anonymity_set_size == 2
        assert out.deanonymized_size == 1

    def test_no_window_posts_propagates(self):
        q = AlignmentQuery("alice", t0=50_000_000)
        with pytest.raises(NoQueryTimesError):
            run_passive_attack(q, self.src, self.tgt, self.tracker, self.gt)

    def test_user_without_pair_rejected(self):
        gt = make_gt([("T2", "amy", "bea")])
        q = AlignmentQuery("alice", t0=1500)
        with pytest.raises(UnknownUserError):
            run_passive_attack(q, self.src, self.tgt, self.tracker, gt)

    def test_large_anonymity_set_bookkeeping(self):
        # 10,655 target users; exactly 10 of them sit within the matching
        # radius of the candidate ID's target-site event.
        near = {f"n{i:03d}": [5000 + i] for i in range(10)}
        far = {f"f{i:05d}": [900_000 + 7200 * i] for i in range(10_645)}
        tgt = make_site("siteB", {**near, **far})
        gt = make_gt([("T1", "alice", "n003"), ("T2", "amy", "f00000")])
        q = AlignmentQuery("alice", t0=1500, granularity_secs=60)
        out = run_passive_attack(q, self.src, tgt, self.tracker, gt)
        assert out.anonymity_set_size == 10_655
        assert out.deanonymized_size == 10
        assert out.success is True


class TestEngagement:
    def test_degenerate_probabilities(self):
        candidates = ["ann", "bob", "cal"]
        only_target = simulate_engagement(candidates, "bob", model(p_decoy=0.0), 0)
        assert only_target == {"bob"}
        nobody = simulate_engagement(candidates, "bob", model(p_target=0.0, p_decoy=0.0), 0)
        assert nobody == set()
        everyone = simulate_engagement(candidates, "bob", model(p_decoy=1.0), 0)
        assert everyone == set(candidates)

    def test_deterministic_per_round(self):
        candidates = [f"u{i}" for i in range(20)]
        m = model(p_target=0.5, p_decoy=0.5)
        assert simulate_engagement(candidates, "u0", m, 3) == simulate_engagement(
            candidates, "u0", m, 3
        )
        rounds = {
            frozenset(simulate_engagement(candidates, "u0", m, r)) for r in range(8)
        }
        assert len(rounds) > 1

    def test_decoy_response_rate(self):
        decoys = [f"d{i}" for i in range(9)]
        m = model(p_target=0.0, p_decoy=0.5)
        counts = [
            len(simulate_engagement(decoys + ["bob"], "bob", m, r))
            for r in range(10_000)
        ]
        assert abs(np.mean(counts) - 4.5) < 0.1

    def test_probability_validation(self):
        with pytest.raises(ValidationError):
            model(p_target=1.5)
        with pytest.raises(ValidationError):
            model(rounds=0)


class TestActiveAttack:
    def test_responders_shrink_candidates(self):
        out = outcome([f"u{i}" for i in range(9)] + ["bob"])
        refined = run_active_attack(out, model(p_decoy=0.4, rounds=1, seed=3))
        assert refined.deanonymized_size < out.deanonymized_size
        assert set(refined.candidates) <= set(out.candidates)
        assert refined.success is True  # p_target = 1 keeps the target

    def test_no_responders_preserves_set(self):
        out = outcome(["ann", "bob", "cal"])
        refined = run_active_attack(out, model(p_target=0.0, p_decoy=0.0, rounds=5))
        assert refined.candidates == out.candidates
        assert refined.success == out.success

    def test_all_respond_identity(self):
        out = outcome(["ann", "bob", "cal"])
        refined = run_active_attack(out, model(p_decoy=1.0, rounds=4))
        assert refined.candidates == out.candidates

    def test_stops_at_single_candidate(self):
        out = outcome([f"u{i}" for i in range(9)] + ["bob"])
        refined = run_active_attack(out, model(p_decoy=0.0, rounds=10))
        assert refined.candidates == ["bob"]
        assert refined.deanonymized_size == 1
        assert refined.success is True

    def test_never_grows(self):
        rng = np.random.default_rng(55)
        for case in range(200):
            names = [f"u{i}" for i in range(int(rng.integers(1, 15)))]
            true = names[int(rng.integers(0, len(names)))]
            out = outcome(names, true_target=true, anonymity=100)
            m = model(
                p_target=float(rng.random()),
                p_decoy=float(rng.random()),
                rounds=int(rng.integers(1, 5)),
                seed=case,
            )
            refined = run_active_attack(out, m)
            assert refined.deanonymized_size <= out.deanonymized_size
            assert set(refined.candidates) <= set(out.candidates)

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            run_active_attack(outcome([]), model())
