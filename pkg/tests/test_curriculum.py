from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from finforge.curriculum import (
    Batch,
    BatchEntry,
    CurriculumConfig,
    PrunedEntry,
    SampleStats,
    build_batch,
    current_stage,
    estimate_difficulty,
    export_batch,
    prune_zero_variance,
    stats_from_dict,
    stats_to_dict,
    stratum_for,
    update_mastery,
    variance,
)
from finforge.errors import EmptyPoolError, InputError, UnknownIdError
from finforge.records import read_records

CFG = CurriculumConfig()


def _stats(task_id, stratum="learning", mastery=False, rate=None):
    s = SampleStats(task_id=task_id, stratum=stratum, mastery=mastery)
    if rate is not None:
        from finforge.curriculum import PassMeasurement

        s.pass_history.append(PassMeasurement(k=10, successes=int(rate * 10), timestamp=0.0))
    return s


class TestEstimateDifficulty:
    def test_all_pass_is_core(self):
        stats = _stats("t")
        rate, stratum = estimate_difficulty(stats, [1.0] * 10, CFG)
        assert (rate, stratum) == (1.0, "core")
        assert stats.stratum == "core"

    def test_all_fail_is_frontier(self):
        rate, stratum = estimate_difficulty(_stats("t"), [0.0] * 10, CFG)
        assert (rate, stratum) == (0.0, "frontier")

    def test_middling_is_learning(self):
        rate, stratum = estimate_difficulty(_stats("t"), [1.0] * 4 + [0.0] * 6, CFG)
        assert (rate, stratum) == (0.4, "learning")

    def test_wrong_rollout_count(self):
        with pytest.raises(InputError):
            estimate_difficulty(_stats("t"), [1.0] * 9, CFG)

    def test_partial_credit_below_cutoff_fails(self):
        rate, _ = estimate_difficulty(_stats("t"), [0.9] * 10, CFG)
        assert rate == 0.0

    @given(rate=st.floats(min_value=0, max_value=1))
    def test_stratum_pure_function_of_rate(self, rate):
        stratum = stratum_for(rate, CFG)
        if rate >= CFG.core_threshold:
            assert stratum == "core"
        elif rate <= CFG.frontier_threshold:
            assert stratum == "frontier"
        else:
            assert stratum == "learning"


class TestBuildBatch:
    def _pool(self):
        pool = {}
        for i in range(10):
            pool[f"m{i}"] = _stats(f"m{i}", stratum="core", mastery=True, rate=1.0)
        for i in range(30):
            pool[f"l{i}"] = _stats(f"l{i}", stratum="learning", rate=0.4)
        for i in range(10):
            pool[f"f{i}"] = _stats(f"f{i}", stratum="frontier", rate=0.0)
        for i in range(10):
            pool[f"c{i}"] = _stats(f"c{i}", stratum="core", rate=0.9)
        return pool

    def test_empty_pool_errors(self):
        with pytest.raises(EmptyPoolError):
            build_batch({}, CFG, rng_seed=0)

    def test_deterministic_under_seed(self):
        pool = self._pool()
        a = build_batch(pool, CFG, rng_seed=123)
        b = build_batch(pool, CFG, rng_seed=123)
        assert [e.task_id for e in a.entries] == [e.task_id for e in b.entries]
        assert a.composition == b.composition

    def test_composition_counts_sum_to_batch_size(self):
        batch = build_batch(self._pool(), CFG, rng_seed=5)
        assert sum(batch.composition.values()) == CFG.batch_size == len(batch.entries)

    def test_mastery_sampling_frequency(self):
        # 10,000 single-slot draws; mastery frequency within 0.2 +/- 0.02
        # (3-sigma binomial bound is ~0.012).
        pool = self._pool()
        cfg = CurriculumConfig(batch_size=1)
        hits = 0
        for seed in range(10_000):
            batch = build_batch(pool, cfg, rng_seed=seed)
            hits += batch.composition.get("mastery", 0)
        freq = hits / 10_000
        assert abs(freq - cfg.mastery_sample_prob) <= 0.02

    def test_empty_learning_falls_through_to_frontier(self):
        pool = {
            "f0": _stats("f0", stratum="frontier", rate=0.0),
            "f1": _stats("f1", stratum="frontier", rate=0.0),
        }
        batch = build_batch(pool, CFG, rng_seed=9, stage="frontier")
        assert all(e.task_id.startswith("f") for e in batch.entries)
        assert any("fallback from learning" in key for key in batch.composition)

    def test_no_mastery_pool_means_no_mastery_draws(self):
        pool = {f"l{i}": _stats(f"l{i}") for i in range(5)}
        batch = build_batch(pool, CFG, rng_seed=2)
        assert all(not k.startswith("mastery") for k in batch.composition)

    def test_stage_schedule_progression(self):
        cfg = CFG
        core_heavy = {"c0": _stats("c0", stratum="core", rate=0.85)}
        assert current_stage(core_heavy, cfg) == "core"
        done_core = {
            "c0": _stats("c0", stratum="core", rate=1.0),
            "l0": _stats("l0", stratum="learning", rate=0.4),
        }
        assert current_stage(done_core, cfg) == "learning"
        done_all = {
            "c0": _stats("c0", stratum="core", rate=1.0),
            "l0": _stats("l0", stratum="learning", rate=0.9),
        }
        assert current_stage(done_all, cfg) == "frontier"

    def test_unknown_stage_rejected(self):
        with pytest.raises(InputError):
            build_batch(self._pool(), CFG, rng_seed=0, stage="bonus")


class TestPruneZeroVariance:
    def test_saturated_group_pruned(self):
        batch = Batch(entries=[BatchEntry("t", [1.0, 1.0, 1.0, 1.0])])
        out = prune_zero_variance(batch)
        assert out.entries == []
        assert out.pruned[0].reason == "zero_variance_saturated"

    def test_impossible_group_pruned(self):
        batch = Batch(entries=[BatchEntry("t", [0.0, 0.0, 0.0])])
        out = prune_zero_variance(batch)
        assert out.pruned[0].reason == "zero_variance_impossible"

    def test_constant_midscale_counts_as_saturated(self):
        batch = Batch(entries=[BatchEntry("t", [0.5, 0.5])])
        out = prune_zero_variance(batch)
        assert out.pruned[0].reason == "zero_variance_saturated"

    def test_varied_group_retained(self):
        batch = Batch(entries=[BatchEntry("t", [1.0, 0.0, 1.0])])
        out = prune_zero_variance(batch)
        assert [e.task_id for e in out.entries] == ["t"]
        assert out.pruned == []

    def test_single_rollout_rejected(self):
        with pytest.raises(InputError):
            prune_zero_variance(Batch(entries=[BatchEntry("t", [1.0])]))

    @given(
        groups=st.lists(
            st.lists(
                st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), min_size=2, max_size=8
            ),
            min_size=1,
            max_size=20,
        )
    )
    def test_conservation_and_post_variance_property(self, groups):
        batch = Batch(
            entries=[BatchEntry(f"t{i}", rewards) for i, rewards in enumerate(groups)]
        )
        out = prune_zero_variance(batch)
        assert len(out.entries) + len(out.pruned) == len(groups)
        for entry in out.entries:
            assert variance(entry.rollout_rewards) > 0
        retained = {e.task_id for e in out.entries}
        assert retained.isdisjoint({p.task_id for p in out.pruned})


class TestUpdateMastery:
    def test_streak_reaches_mastery(self):
        pool = {"t": _stats("t")}
        for _ in range(3):
            update_mastery(pool, [("t", [1.0, 1.0])], CFG)
        assert pool["t"].mastery is True
        assert pool["t"].consecutive_perfect == 3

    def test_failure_resets_streak(self):
        pool = {"t": _stats("t")}
        update_mastery(pool, [("t", [1.0, 1.0])], CFG)
        update_mastery(pool, [("t", [1.0, 1.0])], CFG)
        update_mastery(pool, [("t", [1.0, 0.0])], CFG)
        assert pool["t"].consecutive_perfect == 0
        assert pool["t"].mastery is False

    def test_mastered_task_demoted_on_failure(self):
        pool = {"t": _stats("t", stratum="core")}
        for _ in range(3):
            update_mastery(pool, [("t", [1.0, 1.0])], CFG)
        update_mastery(pool, [("t", [0.0, 1.0])], CFG)
        assert pool["t"].mastery is False
        assert pool["t"].stratum == "learning"

    def test_unknown_task_rejected(self):
        with pytest.raises(UnknownIdError):
            update_mastery({}, [("ghost", [1.0])], CFG)


class TestConfigAndSerialization:
    def test_threshold_ordering_enforced(self):
        with pytest.raises(InputError):
            CurriculumConfig(core_threshold=0.1, frontier_threshold=0.8)

    def test_stats_dict_roundtrip(self):
        stats = _stats("t", stratum="core", mastery=True, rate=0.9)
        stats.consecutive_perfect = 3
        assert stats_from_dict(stats_to_dict(stats)) == stats

    def test_export_batch_schema(self, tmp_path):
        batch = Batch(entries=[BatchEntry("a", [1.0, 0.0])])
        batch = prune_zero_variance(batch)
        batch.pruned.append(PrunedEntry("b", "zero_variance_impossible"))
        path = tmp_path / "batch.jsonl"
        n = export_batch(path, batch)
        rows = read_records(path)
        assert n == len(rows) == 2
        assert rows[0] == {"task_id": "a", "rollout_rewards": [1.0, 0.0]}
        assert rows[1] == {"task_id": "b", "rollout_rewards": [], "pruned_reason": "zero_variance_impossible"}
