"""Gold-answer assignment through the three-level verification funnel.

L1 is deterministic (identity recompute or sandboxed program execution) and
has absolute priority; L2 is multi-model voting with optional reasoning
consistency; anything that fails consensus escalates to a human adjudication
queue (L3). Levels only ever move forward.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .errors import (
    AlreadyResolvedError,
    ConsistencyFault,
    InputError,
    JudgeUnavailableError,
    UnknownIdError,
)
from .ruleverify import (
    answers_equivalent,
    extract_think,
    final_answer,
    normalize_text_answer,
    parse_number,
)

LEVELS = ("unverified", "L1", "L2", "L3")

# Residual bound for re-deriving an identity-minted gold.
RECOMPUTE_TOL = 1e-9

# Filter ignores prose conclusions longer than this; they are commentary,
# not comparable key facts.
MAX_KEY_FACT_LEN = 40


def level_rank(level: str) -> int:
    return LEVELS.index(level)


# ---------------------------------------------------------------------------
# Gold answers


@dataclass(frozen=True)
class NumericGold:
    value: float
    tolerance_abs: float = 0.01
    tolerance_rel: float = 1e-4


@dataclass(frozen=True)
class ExactTextGold:
    text: str  # stored normalized (unboxed, case-folded)


@dataclass(frozen=True)
class FactSetGold:
    fact_set_id: str


@dataclass(frozen=True)
class RubricGold:
    criteria: str


Payload = NumericGold | ExactTextGold | FactSetGold | RubricGold

_CONFIDENCE_FOR_METHOD = {
    "axiom": "deterministic",
    "code_exec": "deterministic",
    "vote": "consensus",
    "human": "adjudicated",
}


@dataclass(frozen=True)
class GoldAnswer:
    payload: Payload
    method: str  # axiom | code_exec | vote | human
    confidence: str  # deterministic | consensus | adjudicated

    def __post_init__(self):
        expected = _CONFIDENCE_FOR_METHOD.get(self.method)
        if expected is None:
            raise InputError(f"unknown gold method {self.method!r}")
        if self.confidence != expected:
            raise InputError(
                f"method {self.method!r} requires confidence {expected!r}, got {self.confidence!r}"
            )

    @classmethod
    def of(cls, payload: Payload, method: str) -> "GoldAnswer":
        return cls(payload=payload, method=method, confidence=_CONFIDENCE_FOR_METHOD[method])

    @property
    def deterministic(self) -> bool:
        return self.confidence == "deterministic"


def gold_to_dict(gold: GoldAnswer) -> dict:
    p = gold.payload
    if isinstance(p, NumericGold):
        payload = {
            "type": "numeric",
            "value": p.value,
            "tolerance_abs": p.tolerance_abs,
            "tolerance_rel": p.tolerance_rel,
        }
    elif isinstance(p, ExactTextGold):
        payload = {"type": "exact_text", "text": p.text}
    elif isinstance(p, FactSetGold):
        payload = {"type": "fact_set", "fact_set_id": p.fact_set_id}
    else:
        payload = {"type": "rubric", "criteria": p.criteria}
    return {"payload": payload, "method": gold.method, "confidence": gold.confidence}


def gold_from_dict(data: dict) -> GoldAnswer:
    p = data["payload"]
    kind = p.get("type")
    if kind == "numeric":
        payload: Payload = NumericGold(
            value=float(p["value"]),
            tolerance_abs=float(p.get("tolerance_abs", 0.01)),
            tolerance_rel=float(p.get("tolerance_rel", 1e-4)),
        )
    elif kind == "exact_text":
        payload = ExactTextGold(text=p["text"])
    elif kind == "fact_set":
        payload = FactSetGold(fact_set_id=p["fact_set_id"])
    elif kind == "rubric":
        payload = RubricGold(criteria=p["criteria"])
    else:
        raise InputError(f"unknown gold payload type {kind!r}")
    return GoldAnswer(payload=payload, method=data["method"], confidence=data["confidence"])


# ---------------------------------------------------------------------------
# Records, queue items, vote config


@dataclass
class VerificationRecord:
    task_id: str
    level_achieved: str
    evidence: str  # JSON audit blob
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.level_achieved not in ("L1", "L2", "L3"):
            raise InputError(f"bad level {self.level_achieved!r}")
        if not self.evidence:
            raise InputError("evidence must be non-empty")


@dataclass
class AdjudicationItem:
    id: str
    task_id: str
    candidate_answers: list[dict]  # {source_model, answer}
    disagreement_summary: str
    status: str = "pending"
    resolution: Optional[dict] = None  # {"gold": gold dict, "expert_id": str}
    created_at: float = field(default_factory=time.time)

    def __post_init__(self):
        if (self.status == "resolved") != (self.resolution is not None):
            raise InputError("status and resolution must agree")


@dataclass(frozen=True)
class VoteConfig:
    min_responses: int = 5
    agree_fraction: float = 0.8
    require_reasoning_consistency: bool = True

    def __post_init__(self):
        if self.min_responses < 3:
            raise InputError("min_responses must be at least 3")
        if not (0.5 < self.agree_fraction <= 1.0):
            raise InputError("agree_fraction must be in (0.5, 1.0]")


@dataclass(frozen=True)
class CandidateResponse:
    source_model: str
    text: str


class ExecResult(Protocol):
    stdout: str
    exit_status: int


class Executor(Protocol):
    def run(self, program: str, inputs: dict, timeout_s: float) -> "ExecResult": ...


class JudgeClientLike(Protocol):
    def judge(self, request) -> object: ...


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


# ---------------------------------------------------------------------------
# L1: deterministic verification


def verify_l1(
    task,
    registry=None,
    executor: Executor | None = None,
    timeout_s: float = 5.0,
    exec_tolerance_abs: float = 0.01,
) -> VerificationRecord:
    """Assign or confirm a deterministic gold and promote the task to L1.

    Identity-minted tasks are re-derived from their recorded sampled values
    and must agree with the stored gold; disagreement is a consistency fault,
    not a verification failure. Tasks carrying a verification program run it
    through the executor contract (key=value lines on stdin, single answer
    line on stdout) and adopt the program's output as gold.
    """
    minted = _minted_provenance(task)
    if minted is not None:
        if registry is None:
            raise InputError("identity recompute requires the axiom registry")
        axiom = registry.get(minted.axiom_id)
        recomputed = axiom.solve_hidden(minted.sampled_values, minted.hidden_symbol)
        if task.gold is None or not isinstance(task.gold.payload, NumericGold):
            raise ConsistencyFault(f"task {task.id} lacks the numeric gold it was minted with")
        stored = task.gold.payload.value
        if abs(recomputed - stored) > RECOMPUTE_TOL * max(1.0, abs(stored)):
            raise ConsistencyFault(
                f"recompute mismatch for task {task.id}: {recomputed} vs stored {stored}"
            )
        evidence = json.dumps(
            {
                "path": "axiom_recompute",
                "axiom_id": minted.axiom_id,
                "hidden_symbol": minted.hidden_symbol,
                "recomputed": recomputed,
                "stored": stored,
            }
        )
        task.promote("L1")
        return VerificationRecord(task_id=task.id, level_achieved="L1", evidence=evidence)

    if task.program is not None:
        if executor is None:
            raise InputError("program verification requires an executor client")
        result = executor.run(task.program["source"], task.program.get("inputs", {}), timeout_s)
        answer_line = _last_line(result.stdout)
        parsed = parse_number(answer_line)
        if parsed is not None:
            payload: Payload = NumericGold(
                value=parsed, tolerance_abs=exec_tolerance_abs, tolerance_rel=1e-4
            )
        else:
            payload = ExactTextGold(text=normalize_text_answer(answer_line))
        task.gold = GoldAnswer.of(payload, "code_exec")
        task.promote("L1")
        evidence = json.dumps(
            {"path": "code_exec", "stdout": result.stdout[-2000:], "answer": answer_line}
        )
        return VerificationRecord(task_id=task.id, level_achieved="L1", evidence=evidence)

    raise InputError(
        "task has neither identity provenance nor a verification program; not L1-eligible"
    )


def _minted_provenance(task):
    prov = task.provenance
    if getattr(prov, "kind", None) == "axiom":
        return prov
    if getattr(prov, "kind", None) == "evolved" and getattr(prov, "minted", None) is not None:
        return prov.minted
    return None


def _last_line(stdout: str) -> str:
    lines = [ln.strip() for ln in stdout.splitlines() if ln.strip()]
    if not lines:
        raise InputError("verification program produced no answer line")
    return lines[-1]


# ---------------------------------------------------------------------------
# L2: multi-model voting


def verify_l2(
    task,
    responses: Sequence[CandidateResponse],
    cfg: VoteConfig,
    judge_client: JudgeClientLike,
) -> VerificationRecord | AdjudicationItem:
    """Vote over candidate responses; install a consensus gold or escalate.

    Acceptance needs the modal normalized answer to reach ``agree_fraction``
    and, when configured, the judge to confirm pairwise reasoning consistency
    among the agreeing responses. Every non-accepting path returns exactly
    one pending adjudication item. A judge outage escalates; it never
    degrades to result-only voting.
    """
    if len(responses) < cfg.min_responses:
        raise InputError(
            f"need at least {cfg.min_responses} responses, got {len(responses)}"
        )
    if task.gold is not None and task.gold.deterministic:
        raise InputError("task already holds a deterministic gold; L2 not applicable")

    finals = [final_answer(r.text) or "" for r in responses]
    clusters = _group_equivalent(finals)
    modal_rep, modal_members = max(clusters, key=lambda c: len(c[1]))
    share = len(modal_members) / len(responses)
    tally = {rep or "<empty>": len(members) for rep, members in clusters}

    def escalate(reason: str) -> AdjudicationItem:
        summary = json.dumps({"reason": reason, "tally": tally, "modal_share": share})
        return AdjudicationItem(
            id=new_id("adj"),
            task_id=task.id,
            candidate_answers=[
                {"source_model": r.source_model, "answer": finals[i]}
                for i, r in enumerate(responses)
            ],
            disagreement_summary=summary,
        )

    if share < cfg.agree_fraction:
        return escalate("below_agree_fraction")

    if cfg.require_reasoning_consistency and len(modal_members) > 1:
        from .judgeverify import JudgeRequest  # deferred: judgeverify imports none of this

        chains = [_reasoning_text(responses[i].text) for i in modal_members]
        try:
            for i in range(len(chains)):
                for j in range(i + 1, len(chains)):
                    verdict = judge_client.judge(
                        JudgeRequest(
                            kind="reasoning_consistency", source=chains[i], output=chains[j]
                        )
                    )
                    if verdict.score < 0.5:
                        return escalate("reasoning_inconsistent")
        except JudgeUnavailableError:
            return escalate("judge_unavailable")

    parsed = parse_number(modal_rep)
    if parsed is not None:
        payload: Payload = NumericGold(value=parsed, tolerance_abs=0.0, tolerance_rel=1e-6)
    else:
        payload = ExactTextGold(text=normalize_text_answer(modal_rep))
    task.gold = GoldAnswer.of(payload, "vote")
    task.promote("L2")
    evidence = json.dumps(
        {
            "path": "vote",
            "tally": tally,
            "modal_share": share,
            "agree_fraction": cfg.agree_fraction,
            "reasoning_checked": cfg.require_reasoning_consistency,
        }
    )
    return VerificationRecord(task_id=task.id, level_achieved="L2", evidence=evidence)


def _group_equivalent(finals: Sequence[str]) -> list[tuple[str, list[int]]]:
    clusters: list[tuple[str, list[int]]] = []
    for idx, ans in enumerate(finals):
        for rep, members in clusters:
            if ans and rep and answers_equivalent(ans, rep):
                members.append(idx)
                break
        else:
            clusters.append((ans, [idx]))
    return clusters


def _reasoning_text(text: str) -> str:
    think, body = extract_think(text)
    if think is not None and think.strip():
        return think
    return body


# ---------------------------------------------------------------------------
# Semantic consistency filter (synthesis-time QA gate)


def semantic_consistency_filter(
    qa_candidates: Sequence[CandidateResponse],
) -> list[CandidateResponse]:
    """Keep the group only if no two candidates state contradictory key facts.

    A candidate's key fact is its final conclusion: the boxed or stated final
    answer parsed as a number, else the single numeric mention of the closing
    fragment, else (when short) its normalized text. Numeric facts compare
    with tolerance, text facts by equality, and a numeric fact contradicts a
    text one. Long prose conclusions are commentary, not comparable facts.
    """
    facts = [_key_fact(c.text) for c in qa_candidates]
    present = [f for f in facts if f is not None]
    for i in range(len(present)):
        for j in range(i + 1, len(present)):
            if _contradict(present[i], present[j]):
                return []
    return list(qa_candidates)


def _key_fact(text: str):
    raw = final_answer(text)
    if raw is None:
        return None
    value = parse_number(raw)
    if value is not None:
        return ("num", value)
    from .ruleverify import extract_numbers

    mentions = extract_numbers(raw)
    if len(mentions) == 1:
        return ("num", float(mentions[0].value))
    norm = normalize_text_answer(raw)
    if norm and len(norm) <= MAX_KEY_FACT_LEN:
        return ("text", norm)
    return None


def _contradict(a: tuple, b: tuple) -> bool:
    if a[0] != b[0]:
        return True
    if a[0] == "num":
        return abs(a[1] - b[1]) > 1e-6 * max(1.0, abs(a[1]), abs(b[1]))
    return a[1] != b[1]


# ---------------------------------------------------------------------------
# L3: adjudication queue


class AdjudicationQueue:
    """Pending/resolved adjudication items; at most one pending per task."""

    def __init__(self):
        self._items: dict[str, AdjudicationItem] = {}

    def add(self, item: AdjudicationItem) -> AdjudicationItem:
        existing = self.pending_for_task(item.task_id)
        if existing is not None:
            return existing
        self._items[item.id] = item
        return item

    def restore(self, item: AdjudicationItem) -> None:
        """Install an item during store replay, bypassing the pending dedupe."""
        self._items[item.id] = item

    def get(self, item_id: str) -> AdjudicationItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise UnknownIdError(f"no adjudication item {item_id!r}") from None

    def pending_for_task(self, task_id: str) -> Optional[AdjudicationItem]:
        for item in self._items.values():
            if item.task_id == task_id and item.status == "pending":
                return item
        return None

    def list(self, status: Optional[str] = None) -> list[AdjudicationItem]:
        items = list(self._items.values())
        if status is not None:
            items = [i for i in items if i.status == status]
        return items

    def resolve(self, item_id: str, decision: GoldAnswer, expert_id: str, task) -> AdjudicationItem:
        """Apply an expert decision: resolve the item, gold the task, promote L3."""
        item = self.get(item_id)
        if item.status == "resolved":
            raise AlreadyResolvedError(f"adjudication item {item_id!r} already resolved")
        if task.id != item.task_id:
            raise InputError("task does not match adjudication item")
        if task.gold is not None and task.gold.deterministic:
            raise InputError(
                "task gained a deterministic gold while queued; adjudication must not override it"
            )
        gold = GoldAnswer.of(decision.payload, "human")
        task.gold = gold
        task.promote("L3")
        item.status = "resolved"
        item.resolution = {"gold": gold_to_dict(gold), "expert_id": expert_id}
        return item


def item_to_dict(item: AdjudicationItem) -> dict:
    return {
        "id": item.id,
        "task_id": item.task_id,
        "candidate_answers": item.candidate_answers,
        "disagreement_summary": item.disagreement_summary,
        "status": item.status,
        "resolution": item.resolution,
        "created_at": item.created_at,
    }


def item_from_dict(data: dict) -> AdjudicationItem:
    return AdjudicationItem(
        id=data["id"],
        task_id=data["task_id"],
        candidate_answers=list(data.get("candidate_answers", [])),
        disagreement_summary=data.get("disagreement_summary", ""),
        status=data.get("status", "pending"),
        resolution=data.get("resolution"),
        created_at=float(data.get("created_at", 0.0)),
    )
