"""Pipeline facade: registries + append-only store + module operations.

The service layer and the CLI both drive this class, so every surface has
the same behavior against the same store. All mutations funnel through the
store's single writer; per-task verification is serialized with one lock
per task id.
"""

from __future__ import annotations

import json
import threading
from collections import Counter
from decimal import Decimal
from pathlib import Path
from typing import Optional, Sequence

from . import agentsim, curriculum, funnel, judgeverify, kbgen
from .config import ServiceConfig
from .errors import InputError, UnknownIdError
from .executors import HTTPExecutorClient, LocalPythonExecutor
from .funnel import (
    AdjudicationQueue,
    CandidateResponse,
    GoldAnswer,
    VerificationRecord,
    gold_from_dict,
    gold_to_dict,
)
from .judgeverify import HTTPJudgeClient, MockJudgeClient, ScoringContext, default_routing
from .kbgen import InstructionTask, task_from_dict, task_to_dict
from .records import MalformedLineError, iter_records
from .ruleverify import Fact, FormatRule, GroundTruthFactSet, Unit, rules_for_tags
from .store import JsonlStore


def load_fact_sets(path: str | Path) -> dict[str, GroundTruthFactSet]:
    """Group {fact_set_id, metric, value, unit, period} records into sets."""
    grouped: dict[str, list[Fact]] = {}
    for _, rec in iter_records(path):
        set_id = rec.get("fact_set_id", "default")
        grouped.setdefault(set_id, []).append(
            Fact(
                metric=rec["metric"],
                value=Decimal(str(rec["value"])),
                unit=Unit.parse(rec["unit"]),
                period=rec.get("period"),
            )
        )
    return {set_id: GroundTruthFactSet(facts) for set_id, facts in grouped.items()}


class Engine:
    def __init__(self, config: ServiceConfig, judge_client=None, executor=None):
        self.config = config
        self.store = JsonlStore(config.store_dir)
        self.axioms = kbgen.AxiomRegistry.from_jsonl(config.axioms_path)
        self.kb = kbgen.KnowledgeBase.from_jsonl(config.knowledge_path)
        self.templates = kbgen.TemplateRegistry.from_jsonl(config.templates_path)
        self.format_rules = FormatRule.load_all(config.format_rules_path)
        self.fact_sets = load_fact_sets(config.fact_sets_path)
        self.scenarios = agentsim.load_scenarios(config.scenarios_path)

        if judge_client is not None:
            self.judge = judge_client
        elif config.judge_endpoint:
            self.judge = HTTPJudgeClient(config.judge_endpoint, config.judge_inflight_cap)
        else:
            self.judge = MockJudgeClient()
        if executor is not None:
            self.executor = executor
        elif config.executor_endpoint:
            self.executor = HTTPExecutorClient(config.executor_endpoint)
        else:
            self.executor = LocalPythonExecutor()

        if config.routing:
            self.routing = judgeverify.VerifierRouting(
                entries={
                    t: judgeverify.RoutingEntry(
                        rule_weight=float(e["rule_weight"]),
                        judge_weight=float(e["judge_weight"]),
                        judge_kinds=frozenset(e.get("judge_kinds", [])),
                    )
                    for t, e in config.routing.items()
                }
            )
        else:
            self.routing = default_routing()
        self.weights = config.weights or judgeverify.DEFAULT_COMPONENT_WEIGHTS

        self.tasks: dict[str, InstructionTask] = {}
        self.queue = AdjudicationQueue()
        self.stats_pool: dict[str, curriculum.SampleStats] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._replay_state()

    # -- state ---------------------------------------------------------------

    def _replay_state(self) -> None:
        state = self.store.state()
        for task_id, payload in state["task"].items():
            self.tasks[task_id] = task_from_dict(payload)
        for payload in state["adjudication"].values():
            self.queue.restore(funnel.item_from_dict(payload))
        for task_id, payload in state["stats"].items():
            self.stats_pool[task_id] = curriculum.stats_from_dict(payload)

    def _task_lock(self, task_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(task_id, threading.Lock())

    def _save_task(self, task: InstructionTask) -> None:
        self.tasks[task.id] = task
        self.store.append("task", task.id, task_to_dict(task))
        if task.gold is not None:
            self.store.append("gold", task.id, gold_to_dict(task.gold))

    def get_task(self, task_id: str) -> InstructionTask:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise UnknownIdError(f"no task {task_id!r}") from None

    def get_scenario(self, scenario_id: str) -> agentsim.Scenario:
        try:
            return self.scenarios[scenario_id]
        except KeyError:
            raise UnknownIdError(f"no scenario {scenario_id!r}") from None

    # -- generation ----------------------------------------------------------

    def generate_deduction(
        self,
        axiom_id: Optional[str] = None,
        hidden_symbol: Optional[str] = None,
        count: int = 1,
        seed: Optional[int] = None,
    ) -> list[InstructionTask]:
        if count < 1:
            raise InputError("count must be positive")
        seed = self.config.rng_seed if seed is None else seed
        axiom_ids = [axiom_id] if axiom_id else self.axioms.ids()
        out = []
        for i in range(count):
            aid = axiom_ids[i % len(axiom_ids)]
            axiom = self.axioms.get(aid)
            hidden = hidden_symbol or axiom.lhs
            task = kbgen.generate_deduction_task(self.axioms, aid, hidden, rng_seed=seed + i)
            self._save_task(task)
            self.store.append(
                "verdict",
                f"{task.id}:L1",
                {
                    "task_id": task.id,
                    "level_achieved": "L1",
                    "evidence": json.dumps({"path": "axiom_mint", "axiom_id": aid}),
                },
            )
            out.append(task)
        return out

    def generate_knowledge(
        self,
        domain_tag: Optional[str],
        n_points: int,
        template_id: str,
        task_type: str,
        count: int = 1,
        seed: Optional[int] = None,
    ) -> list[InstructionTask]:
        if count < 1:
            raise InputError("count must be positive")
        seed = self.config.rng_seed if seed is None else seed
        selector = kbgen.PointSelector(domain_tag=domain_tag)
        out = []
        for i in range(count):
            task = kbgen.generate_knowledge_task(
                self.kb, self.templates, selector, n_points, template_id, task_type, seed + i
            )
            self._save_task(task)
            out.append(task)
        return out

    def evolve(
        self,
        task_id: str,
        strategy: kbgen.EvolutionStrategy,
        seed: Optional[int] = None,
        rounds: int = 1,
    ) -> InstructionTask:
        """Apply ``rounds`` successive evolution rewrites (no canonical
        default beyond one; the round count is the caller's knob)."""
        if rounds < 1:
            raise InputError("rounds must be positive")
        current = self.get_task(task_id)
        seed = self.config.rng_seed if seed is None else seed
        for i in range(rounds):
            current = kbgen.evolve_task(current, strategy, seed + i, registry=self.axioms)
            self._save_task(current)
        return current

    # -- verification --------------------------------------------------------

    def verify(
        self,
        task_id: str,
        level: str,
        responses: Optional[Sequence[dict]] = None,
    ) -> dict:
        task = self.get_task(task_id)
        with self._task_lock(task_id):
            if level == "L1":
                record = funnel.verify_l1(
                    task,
                    registry=self.axioms,
                    executor=self.executor,
                    timeout_s=self.config.executor_timeout_s,
                )
                self._persist_record(task, record)
                return {"verified": True, "record": _record_to_dict(record)}
            if level == "L2":
                if not responses:
                    raise InputError("L2 verification requires candidate responses")
                cands = [
                    CandidateResponse(
                        source_model=r.get("source_model", "unknown"), text=r["text"]
                    )
                    for r in responses
                ]
                result = funnel.verify_l2(task, cands, self.config.vote, self.judge)
                if isinstance(result, VerificationRecord):
                    self._persist_record(task, result)
                    return {"verified": True, "record": _record_to_dict(result)}
                item = self.queue.add(result)
                self.store.append("adjudication", item.id, funnel.item_to_dict(item))
                return {"verified": False, "escalated": funnel.item_to_dict(item)}
            raise InputError(f"unknown verification level {level!r}; use L1 or L2")

    def _persist_record(self, task: InstructionTask, record: VerificationRecord) -> None:
        self._save_task(task)
        self.store.append(
            "verdict", f"{task.id}:{record.level_achieved}", _record_to_dict(record)
        )

    def list_adjudication(self, status: Optional[str] = None) -> list[dict]:
        items = self.queue.list(status)
        items.sort(key=lambda i: (i.created_at, i.id))  # oldest first
        return [funnel.item_to_dict(i) for i in items]

    def resolve_adjudication(self, item_id: str, gold: dict, expert_id: str) -> dict:
        item = self.queue.get(item_id)
        task = self.get_task(item.task_id)
        with self._task_lock(task.id):
            decision = _gold_from_wire(gold)
            self.queue.resolve(item_id, decision, expert_id, task)
            self._save_task(task)
            self.store.append("adjudication", item.id, funnel.item_to_dict(item))
            record = VerificationRecord(
                task_id=task.id,
                level_achieved="L3",
                evidence=json.dumps({"path": "human", "item_id": item.id, "expert_id": expert_id}),
            )
            self.store.append("verdict", f"{task.id}:L3", _record_to_dict(record))
        return {"task": task_to_dict(task), "item": funnel.item_to_dict(item)}

    # -- scoring -------------------------------------------------------------

    def _scoring_context(self, task: InstructionTask) -> ScoringContext:
        return ScoringContext(
            judge_client=self.judge,
            routing=self.routing,
            weights=self.weights,
            format_rules=rules_for_tags(self.format_rules, task.all_tags()),
            fact_sets=self.fact_sets,
        )

    def score(self, task_id: str, response: str) -> dict:
        task = self.get_task(task_id)
        breakdown = judgeverify.score_response(task, response, self._scoring_context(task))
        payload = {
            "task_id": task_id,
            "scalar": breakdown.scalar,
            "components": breakdown.components,
            "routing": {
                "rule_weight": breakdown.routing_used.rule_weight,
                "judge_weight": breakdown.routing_used.judge_weight,
            },
            "audit": breakdown.audit,
        }
        self.store.append("verdict", funnel.new_id("score"), payload)
        return payload

    def score_trajectory(self, scenario_id: str, trajectory_records: Sequence[dict]) -> dict:
        scenario = self.get_scenario(scenario_id)
        traj = agentsim.trajectory_from_records(trajectory_records)
        score = agentsim.score_trajectory(traj, scenario)
        payload = {
            "scenario_id": scenario_id,
            "answer_correct": score.answer_correct,
            "tool_necessity": score.tool_necessity,
            "efficiency": score.efficiency,
            "param_accuracy": score.param_accuracy,
            "scalar": score.scalar,
        }
        self.store.append(
            "trajectory",
            funnel.new_id("traj"),
            {"records": list(trajectory_records), "score": payload},
        )
        return payload

    def simulate(self, scenario_id: str, script: Sequence[dict]) -> dict:
        """Run a scripted episode and score it; the script is wire-formatted."""
        scenario = self.get_scenario(scenario_id)
        driver = agentsim.ScriptedDriver([_wire_action(a) for a in script])
        traj = agentsim.run_scenario(scenario, driver)
        records = agentsim.trajectory_to_records(traj)
        result = self.score_trajectory(scenario_id, records)
        result["trajectory"] = records
        result["truncated"] = traj.truncated
        return result

    # -- curriculum ----------------------------------------------------------

    def record_rollouts(self, task_id: str, rollout_rewards: Sequence[float]) -> dict:
        self.get_task(task_id)
        stats = self.stats_pool.setdefault(task_id, curriculum.SampleStats(task_id=task_id))
        pass_rate, stratum = curriculum.estimate_difficulty(
            stats, rollout_rewards, self.config.curriculum
        )
        self.store.append("stats", task_id, curriculum.stats_to_dict(stats))
        return {"task_id": task_id, "pass_rate": pass_rate, "stratum": stratum}

    def ensure_stats(self, task_ids: Sequence[str]) -> int:
        """Track tasks that have no rollout history yet (learning stratum)."""
        added = 0
        for task_id in task_ids:
            if task_id not in self.stats_pool:
                self.get_task(task_id)
                stats = curriculum.SampleStats(task_id=task_id)
                self.stats_pool[task_id] = stats
                self.store.append("stats", task_id, curriculum.stats_to_dict(stats))
                added += 1
        return added

    def next_batch(
        self,
        stage: Optional[str] = None,
        seed: Optional[int] = None,
        size: Optional[int] = None,
        rewards: Optional[dict[str, list[float]]] = None,
    ) -> curriculum.Batch:
        cfg = self.config.curriculum
        if size is not None:
            cfg = curriculum.CurriculumConfig(
                **{**_cfg_dict(cfg), "batch_size": size}
            )
        seed = self.config.rng_seed if seed is None else seed
        batch = curriculum.build_batch(self.stats_pool, cfg, seed, stage=stage)
        if rewards:
            for entry in batch.entries:
                entry.rollout_rewards = list(rewards.get(entry.task_id, []))
            batch = curriculum.prune_zero_variance(batch)
            self.update_mastery(
                [(e.task_id, e.rollout_rewards) for e in batch.entries]
                + [(p.task_id, rewards.get(p.task_id, [])) for p in batch.pruned]
            )
        return batch

    def update_mastery(self, batch_results: Sequence[tuple[str, Sequence[float]]]) -> None:
        updated = curriculum.update_mastery(
            self.stats_pool, batch_results, self.config.curriculum
        )
        for stats in updated:
            self.store.append("stats", stats.task_id, curriculum.stats_to_dict(stats))

    # -- reporting and ingest ------------------------------------------------

    def report(self) -> dict:
        levels = Counter(task.verification_level for task in self.tasks.values())
        strata = Counter(
            s.stratum for s in self.stats_pool.values() if not s.mastery
        )
        return {
            "tasks": len(self.tasks),
            "verification_levels": {
                level: levels.get(level, 0) for level in funnel.LEVELS
            },
            "pending_adjudications": len(self.queue.list("pending")),
            "stratum_distribution": {s: strata.get(s, 0) for s in curriculum.STRATA},
            "mastery_pool_size": sum(1 for s in self.stats_pool.values() if s.mastery),
            "store_counts": self.store.counts(),
        }

    def ingest(self, path: str | Path, kind: str, strict: Optional[bool] = None) -> dict:
        """Append valid records of ``kind`` from a JSONL file.

        Strict mode aborts on the first malformed line (citing it) without
        applying anything; lenient mode skips malformed lines and reports
        them. Records whose id already exists are rejected with their line
        numbers either way.
        """
        strict = self.config.ingest_strict if strict is None else strict
        validator = _INGEST_VALIDATORS.get(kind)
        if validator is None:
            raise InputError(f"cannot ingest kind {kind!r}")
        parsed: list[tuple[int, str, dict]] = []
        malformed: list[dict] = []
        for line_no, rec, err in _scan_lines(path):
            if err is None:
                try:
                    record_id = validator(rec)
                except (InputError, KeyError, TypeError, ValueError) as exc:
                    err = str(exc)
            if err is not None:
                if strict:
                    # Nothing has been appended yet: strict mode applies all or nothing.
                    raise MalformedLineError(str(path), line_no, err)
                malformed.append({"line": line_no, "message": err})
                continue
            parsed.append((line_no, record_id, rec))

        existing = set(self.store.state()[kind])
        added = 0
        duplicates: list[dict] = []
        seen_now: set[str] = set()
        for line_no, record_id, rec in parsed:
            if record_id in existing or record_id in seen_now:
                duplicates.append({"line": line_no, "id": record_id})
                continue
            self.store.append(kind, record_id, rec)
            seen_now.add(record_id)
            added += 1
        if added:
            self._replay_state()
        return {"added": added, "duplicates": duplicates, "malformed": malformed}


def _scan_lines(path):
    """Yield (line_no, record_or_none, error_or_none) for every non-blank line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not an object")
            except ValueError as exc:
                yield line_no, None, f"invalid JSON ({exc})"
                continue
            yield line_no, rec, None


def _validate_task(rec: dict) -> str:
    return task_from_dict(rec).id


def _validate_gold(rec: dict) -> str:
    if "id" not in rec:
        raise InputError("gold records need the task id in field 'id'")
    gold_from_dict({k: v for k, v in rec.items() if k != "id"})
    return rec["id"]


def _validate_adjudication(rec: dict) -> str:
    return funnel.item_from_dict(rec).id


def _validate_stats(rec: dict) -> str:
    return curriculum.stats_from_dict(rec).task_id


def _validate_verdict(rec: dict) -> str:
    if "task_id" not in rec:
        raise InputError("verdict records need task_id")
    return rec.get("id") or f"{rec['task_id']}:{rec.get('level_achieved', 'score')}"


def _validate_trajectory(rec: dict) -> str:
    if "records" not in rec:
        raise InputError("trajectory records need a 'records' list")
    agentsim.trajectory_from_records(rec["records"])
    return rec.get("id") or funnel.new_id("traj")


_INGEST_VALIDATORS = {
    "task": _validate_task,
    "gold": _validate_gold,
    "adjudication": _validate_adjudication,
    "stats": _validate_stats,
    "verdict": _validate_verdict,
    "trajectory": _validate_trajectory,
}


def _record_to_dict(record: VerificationRecord) -> dict:
    return {
        "task_id": record.task_id,
        "level_achieved": record.level_achieved,
        "evidence": record.evidence,
        "timestamp": record.timestamp,
    }


def _gold_from_wire(gold: dict) -> GoldAnswer:
    if "payload" in gold:
        data = dict(gold)
        data.setdefault("method", "human")
        data.setdefault("confidence", "adjudicated")
        return gold_from_dict(data)
    return gold_from_dict({"payload": gold, "method": "human", "confidence": "adjudicated"})


def _wire_action(action: dict):
    if "say" in action:
        return agentsim.Say(action["say"])
    if "answer" in action:
        return agentsim.Answer(action["answer"])
    if "call" in action:
        name = action["call"]
        params_spec = action.get("params", {})

        def make_call(view, _name=name, _spec=params_spec):
            params = {}
            for key, value in _spec.items():
                if isinstance(value, str) and value.startswith("{{revealed:"):
                    fact_key = value[len("{{revealed:") : -2]
                    params[key] = view.revealed.get(fact_key, "")
                else:
                    params[key] = value
            return agentsim.ToolCall(name=_name, params=params)

        return make_call
    raise InputError(f"unknown scripted action {action!r}")


def _cfg_dict(cfg: curriculum.CurriculumConfig) -> dict:
    from dataclasses import asdict

    return asdict(cfg)
