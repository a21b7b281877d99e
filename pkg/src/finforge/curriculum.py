"""Difficulty stratification, batch construction, and gradient hygiene.

Tasks are probed with k rollouts, bucketed into core / learning / frontier
strata by pass rate, and drawn into batches that keep most capacity on the
learning zone while undersampling a mastery pool just enough to prevent
forgetting. Reward groups with zero variance carry no gradient signal and
are pruned before a batch is emitted.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import EmptyPoolError, InputError, UnknownIdError
from .records import write_records

STRATA = ("core", "learning", "frontier")
PRUNE_REASONS = ("zero_variance_saturated", "zero_variance_impossible")

REWARD_MAX = 1.0
REWARD_MIN = 0.0


@dataclass(frozen=True)
class CurriculumConfig:
    k: int = 10
    core_threshold: float = 0.8
    frontier_threshold: float = 0.1
    mastery_sample_prob: float = 0.2
    learning_share: float = 0.8
    mastery_streak: int = 3
    batch_size: int = 32
    success_cutoff: float = 1.0

    def __post_init__(self):
        if not self.frontier_threshold < self.core_threshold:
            raise InputError("frontier_threshold must be below core_threshold")
        for name in ("mastery_sample_prob", "learning_share", "core_threshold", "frontier_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InputError(f"{name} must lie in [0, 1]")
        if self.k < 1 or self.batch_size < 1 or self.mastery_streak < 1:
            raise InputError("k, batch_size, and mastery_streak must be positive")


@dataclass(frozen=True)
class PassMeasurement:
    k: int
    successes: int
    timestamp: float

    def __post_init__(self):
        if self.successes > self.k:
            raise InputError("successes cannot exceed k")


@dataclass
class SampleStats:
    task_id: str
    pass_history: list[PassMeasurement] = field(default_factory=list)
    stratum: str = "learning"
    mastery: bool = False
    consecutive_perfect: int = 0

    def latest_pass_rate(self) -> Optional[float]:
        if not self.pass_history:
            return None
        m = self.pass_history[-1]
        return m.successes / m.k


def estimate_difficulty(
    stats: SampleStats, rollout_rewards: Sequence[float], cfg: CurriculumConfig
) -> tuple[float, str]:
    """Probe difficulty with k rollouts; returns (pass_rate, stratum).

    A rollout passes when its reward reaches the success cutoff. The stats
    record gains a measurement and its stratum is updated in place.
    """
    if len(rollout_rewards) != cfg.k:
        raise InputError(f"expected {cfg.k} rollout rewards, got {len(rollout_rewards)}")
    successes = sum(1 for r in rollout_rewards if r >= cfg.success_cutoff)
    pass_rate = successes / cfg.k
    stratum = stratum_for(pass_rate, cfg)
    stats.pass_history.append(
        PassMeasurement(k=cfg.k, successes=successes, timestamp=time.time())
    )
    stats.stratum = stratum
    return pass_rate, stratum


def stratum_for(pass_rate: float, cfg: CurriculumConfig) -> str:
    if pass_rate >= cfg.core_threshold:
        return "core"
    if pass_rate <= cfg.frontier_threshold:
        return "frontier"
    return "learning"


# ---------------------------------------------------------------------------
# Batch construction


@dataclass
class BatchEntry:
    task_id: str
    rollout_rewards: list[float] = field(default_factory=list)


@dataclass
class PrunedEntry:
    task_id: str
    reason: str

    def __post_init__(self):
        if self.reason not in PRUNE_REASONS:
            raise InputError(f"unknown prune reason {self.reason!r}")


@dataclass
class Batch:
    entries: list[BatchEntry]
    pruned: list[PrunedEntry] = field(default_factory=list)
    composition: dict[str, int] = field(default_factory=dict)


def current_stage(pool: Mapping[str, SampleStats], cfg: CurriculumConfig) -> str:
    """Stage schedule: start on core material, move outward once the active
    stratum's mean pass rate clears the core threshold (or it is empty)."""
    for stage in ("core", "learning"):
        members = [s for s in pool.values() if not s.mastery and s.stratum == stage]
        rates = [r for s in members if (r := s.latest_pass_rate()) is not None]
        if members and (not rates or sum(rates) / len(rates) <= cfg.core_threshold):
            return stage
    return "frontier"


def build_batch(
    pool: Mapping[str, SampleStats],
    cfg: CurriculumConfig,
    rng_seed: int,
    stage: Optional[str] = None,
) -> Batch:
    """Select ``batch_size`` task slots from the stats pool (selection only).

    Each slot independently draws from the mastery pool with the configured
    low probability; other draws go to the learning zone with probability
    ``learning_share`` and to the scheduled stage otherwise. Empty pools fall
    through (learning -> frontier -> core) and the fallback is recorded in
    the composition counts.
    """
    if not pool:
        raise EmptyPoolError("stats pool is empty")
    if stage is None:
        stage = current_stage(pool, cfg)
    elif stage not in STRATA:
        raise InputError(f"unknown stage {stage!r}")

    mastery_pool = sorted(tid for tid, s in pool.items() if s.mastery)
    strata_pools = {
        name: sorted(tid for tid, s in pool.items() if not s.mastery and s.stratum == name)
        for name in STRATA
    }
    rng = random.Random(rng_seed)
    entries: list[BatchEntry] = []
    composition: dict[str, int] = {}

    for _ in range(cfg.batch_size):
        if mastery_pool and rng.random() < cfg.mastery_sample_prob:
            source = "mastery"
            candidates = mastery_pool
        else:
            target = "learning" if rng.random() < cfg.learning_share else stage
            source, candidates = _with_fallback(target, strata_pools)
            if not candidates:
                # Only mastered tasks remain anywhere.
                source, candidates = "mastery (fallback)", mastery_pool
        if not candidates:
            raise EmptyPoolError("no tasks available in any pool")
        entries.append(BatchEntry(task_id=rng.choice(candidates)))
        composition[source] = composition.get(source, 0) + 1

    return Batch(entries=entries, composition=composition)


def _with_fallback(
    target: str, strata_pools: Mapping[str, list[str]]
) -> tuple[str, list[str]]:
    order = [target] + [s for s in ("learning", "frontier", "core") if s != target]
    for name in order:
        if strata_pools[name]:
            source = name if name == target else f"{name} (fallback from {target})"
            return source, strata_pools[name]
    return target, []


# ---------------------------------------------------------------------------
# Zero-variance pruning


def prune_zero_variance(batch: Batch) -> Batch:
    """Move constant-reward entries out of the batch.

    All-identical rollout rewards give a zero-variance group: saturated at
    the reward ceiling, impossible at the floor, and saturated for any other
    constant. Pruned slots are not backfilled, so the batch may shrink; the
    conservation |entries| + |pruned| = |entries before| always holds.
    """
    kept: list[BatchEntry] = []
    pruned = list(batch.pruned)
    for entry in batch.entries:
        rewards = entry.rollout_rewards
        if len(rewards) < 2:
            raise InputError(
                f"entry {entry.task_id!r} has {len(rewards)} rollouts; need at least 2"
            )
        if all(r == rewards[0] for r in rewards):
            reason = (
                "zero_variance_impossible"
                if rewards[0] == REWARD_MIN
                else "zero_variance_saturated"
            )
            pruned.append(PrunedEntry(task_id=entry.task_id, reason=reason))
        else:
            kept.append(entry)
    return Batch(entries=kept, pruned=pruned, composition=dict(batch.composition))


def variance(values: Sequence[float]) -> float:
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / len(values)


# ---------------------------------------------------------------------------
# Mastery pool maintenance


def update_mastery(
    pool: Mapping[str, SampleStats],
    batch_results: Sequence[tuple[str, Sequence[float]]],
    cfg: CurriculumConfig,
) -> list[SampleStats]:
    """Advance mastery streaks from one batch's rollout rewards.

    An all-perfect appearance extends the streak; reaching the configured
    streak flags mastery. Any failed rollout resets the streak, and a
    mastered task that slips is demoted back to the learning zone.
    """
    updated = []
    for task_id, rewards in batch_results:
        stats = pool.get(task_id)
        if stats is None:
            raise UnknownIdError(f"no stats tracked for task {task_id!r}")
        if rewards and all(r >= cfg.success_cutoff for r in rewards):
            stats.consecutive_perfect += 1
            if stats.consecutive_perfect >= cfg.mastery_streak:
                stats.mastery = True
        else:
            stats.consecutive_perfect = 0
            if stats.mastery:
                stats.mastery = False
                stats.stratum = "learning"
        updated.append(stats)
    return updated


# ---------------------------------------------------------------------------
# Serialization


def stats_to_dict(stats: SampleStats) -> dict:
    return {
        "task_id": stats.task_id,
        "pass_history": [
            {"k": m.k, "successes": m.successes, "timestamp": m.timestamp}
            for m in stats.pass_history
        ],
        "stratum": stats.stratum,
        "mastery": stats.mastery,
        "consecutive_perfect": stats.consecutive_perfect,
    }


def stats_from_dict(data: dict) -> SampleStats:
    return SampleStats(
        task_id=data["task_id"],
        pass_history=[
            PassMeasurement(k=m["k"], successes=m["successes"], timestamp=m["timestamp"])
            for m in data.get("pass_history", [])
        ],
        stratum=data.get("stratum", "learning"),
        mastery=bool(data.get("mastery", False)),
        consecutive_perfect=int(data.get("consecutive_perfect", 0)),
    )


def export_batch(path: str | Path, batch: Batch) -> int:
    """Write a batch as line-delimited records for an external trainer."""
    rows = [
        {"task_id": e.task_id, "rollout_rewards": e.rollout_rewards} for e in batch.entries
    ]
    rows += [
        {"task_id": p.task_id, "rollout_rewards": [], "pruned_reason": p.reason}
        for p in batch.pruned
    ]
    return write_records(path, rows)
