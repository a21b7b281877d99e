"""LLM-judge orchestration and dual-verifier reward aggregation.

Quantifiable checks stay with the rule verifier; semantic checks go to a
judge client. The routing table decides the blend per task type, and the
aggregate is always recomputable from the stored breakdown. The bundled
mock judge is fully deterministic so the whole reward path runs offline.
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import httpx

from .errors import InputError, JudgeUnavailableError
from .ruleverify import (
    FormatRule,
    GroundTruthFactSet,
    RuleVerdict,
    Tolerance,
    extract_numbers,
    extract_think,
    fact_accuracy,
    format_check,
    match_answer,
)

JUDGE_KINDS = ("consistency", "structure", "style", "reasoning_consistency")

DEFAULT_THEMES = ("profitability", "future outlook")

# Mock-judge heuristics, stated so offline scores are reproducible by hand:
# a claim sentence is supported when some source sentence contains all of its
# numeric mentions and at least MIN_TOKEN_OVERLAP of its content tokens.
MIN_TOKEN_OVERLAP = 0.6
# Style: score = 1 - filler_fraction - overlong_sentence_fraction, clamped.
FILLER_WORDS = frozenset(
    "very really basically actually just quite rather simply somewhat thing stuff "
    "clearly obviously certainly definitely".split()
)
MAX_SENTENCE_WORDS = 40

_STOPWORDS = frozenset(
    "a an the of to in on for by and or is are was were be been with as at from "
    "this that these those it its their his her they we you i".split()
)


@dataclass(frozen=True)
class JudgeRequest:
    kind: str
    source: str
    output: str
    expected_themes: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.kind not in JUDGE_KINDS:
            raise InputError(f"unknown judge kind {self.kind!r}")
        if self.kind == "structure" and not self.expected_themes:
            raise InputError("structure requests must carry expected themes")
        if self.kind != "structure" and self.expected_themes:
            raise InputError(f"{self.kind!r} requests must not carry expected themes")


@dataclass(frozen=True)
class JudgeFlag:
    kind: str
    note: str
    span: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class JudgeVerdict:
    score: float
    flags: tuple[JudgeFlag, ...] = ()
    raw: str = ""

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"judge score {self.score} out of [0, 1]")


# ---------------------------------------------------------------------------
# Judge clients


def _sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+|\n+", text)
    return [p.strip() for p in parts if p.strip()]


def _content_tokens(text: str) -> set[str]:
    return {
        tok
        for tok in re.findall(r"[a-zA-Z][a-zA-Z'-]*", text.lower())
        if tok not in _STOPWORDS
    }


def _mention_counter(text: str) -> Counter:
    return Counter((m.value, str(m.unit)) for m in extract_numbers(text))


class MockJudgeClient:
    """Deterministic lexical judge for offline scoring and tests.

    Counts every call so routing purity is assertable.
    """

    def __init__(self):
        self.calls: list[JudgeRequest] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def judge(self, request: JudgeRequest) -> JudgeVerdict:
        self.calls.append(request)
        if request.kind == "consistency":
            return self._consistency(request.source, request.output)
        if request.kind == "structure":
            return self._structure(request.output, request.expected_themes)
        if request.kind == "style":
            return self._style(request.output)
        return self._reasoning_consistency(request.source, request.output)

    def _consistency(self, source: str, output: str) -> JudgeVerdict:
        claims = _sentences(output)
        if not claims:
            return JudgeVerdict(score=1.0, raw="no claims")
        source_sents = _sentences(source)
        src_mentions = [_mention_counter(s) for s in source_sents]
        src_tokens = [_content_tokens(s) for s in source_sents]
        flags = []
        supported = 0
        offset = 0
        for claim in claims:
            claim_mentions = _mention_counter(claim)
            claim_tokens = _content_tokens(claim)
            ok = False
            for mentions, tokens in zip(src_mentions, src_tokens):
                if claim_mentions - mentions:  # some claimed number absent
                    continue
                if claim_tokens:
                    overlap = len(claim_tokens & tokens) / len(claim_tokens)
                    if overlap < MIN_TOKEN_OVERLAP:
                        continue
                ok = True
                break
            if ok:
                supported += 1
            else:
                start = output.find(claim, offset)
                span = (start, start + len(claim)) if start >= 0 else None
                offset = span[1] if span else offset
                kind = "hallucination" if claim_mentions else "unsupported"
                flags.append(JudgeFlag(kind=kind, note=claim[:80], span=span))
        return JudgeVerdict(
            score=supported / len(claims),
            flags=tuple(flags),
            raw=f"{supported}/{len(claims)} claims supported",
        )

    def _structure(self, output: str, themes: tuple[str, ...]) -> JudgeVerdict:
        paragraphs = [p for p in re.split(r"\n\s*\n", output) if p.strip()]
        if not paragraphs:
            return JudgeVerdict(score=0.0, raw="no paragraphs")
        covered = 0
        flags = []
        for theme in themes:
            if any(theme.casefold() in p.casefold() for p in paragraphs):
                covered += 1
            else:
                flags.append(JudgeFlag(kind="missing_theme", note=theme))
        return JudgeVerdict(
            score=covered / len(themes),
            flags=tuple(flags),
            raw=f"{covered}/{len(themes)} themes covered",
        )

    def _style(self, output: str) -> JudgeVerdict:
        words = output.split()
        if not words:
            return JudgeVerdict(score=0.0, raw="empty")
        filler = sum(1 for w in words if w.strip(".,;:!?").lower() in FILLER_WORDS)
        filler_fraction = filler / len(words)
        sents = _sentences(output)
        overlong = sum(1 for s in sents if len(s.split()) > MAX_SENTENCE_WORDS)
        overlong_fraction = overlong / len(sents) if sents else 0.0
        score = max(0.0, min(1.0, 1.0 - filler_fraction - overlong_fraction))
        flags = []
        if filler:
            flags.append(JudgeFlag(kind="filler", note=f"{filler} filler tokens"))
        if overlong:
            flags.append(JudgeFlag(kind="overlong_sentence", note=f"{overlong} sentences"))
        return JudgeVerdict(score=score, flags=tuple(flags), raw="style heuristic")

    def _reasoning_consistency(self, a: str, b: str) -> JudgeVerdict:
        same = _mention_counter(a) == _mention_counter(b)
        if same:
            return JudgeVerdict(score=1.0, raw="numeric traces agree")
        return JudgeVerdict(
            score=0.0,
            flags=(JudgeFlag(kind="contradiction", note="numeric traces differ"),),
            raw="numeric traces differ",
        )


class HTTPJudgeClient:
    """Wire-level judge: JSON request/response with bounded retries.

    Requests carry a stable id so retries stay idempotent; concurrent calls
    are limited by the configured in-flight cap. Anything other than a strict
    structured verdict is an error, never a default score.
    """

    def __init__(
        self,
        endpoint: str,
        inflight_cap: int = 4,
        max_retries: int = 2,
        backoff_s: float = 0.2,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._sem = threading.Semaphore(inflight_cap)
        self._client = client or httpx.Client(timeout=10.0)

    def judge(self, request: JudgeRequest) -> JudgeVerdict:
        body = {
            "request_id": uuid.uuid4().hex,
            "kind": request.kind,
            "source": request.source,
            "output": request.output,
        }
        if request.expected_themes is not None:
            body["themes"] = list(request.expected_themes)
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_s * attempt)
            try:
                with self._sem:
                    resp = self._client.post(self.endpoint, json=body)
                resp.raise_for_status()
                return self._parse(resp.json())
            except (httpx.HTTPError, ValueError) as exc:
                last_error = exc
        raise JudgeUnavailableError(f"judge endpoint failed: {last_error}")

    @staticmethod
    def _parse(data: dict) -> JudgeVerdict:
        if not isinstance(data, dict) or "score" not in data:
            raise ValueError("judge reply lacks a score")
        score = float(data["score"])
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"judge score {score} out of range")
        flags = tuple(
            JudgeFlag(
                kind=str(f.get("kind", "flag")),
                note=str(f.get("note", "")),
                span=tuple(f["span"]) if f.get("span") else None,
            )
            for f in data.get("flags", [])
        )
        return JudgeVerdict(score=score, flags=flags, raw=str(data.get("raw", "")))


# ---------------------------------------------------------------------------
# Judge operations


def judge_consistency(source: str, output: str, client) -> JudgeVerdict:
    """Semantic support of output claims by the source; flags hallucinations."""
    return client.judge(JudgeRequest(kind="consistency", source=source, output=output))


def judge_structure(output: str, expected_themes: Sequence[str], client) -> JudgeVerdict:
    if not expected_themes:
        raise InputError("expected_themes must be non-empty")
    return client.judge(
        JudgeRequest(
            kind="structure", source="", output=output, expected_themes=tuple(expected_themes)
        )
    )


def judge_style(output: str, client) -> JudgeVerdict:
    return client.judge(JudgeRequest(kind="style", source="", output=output))


# ---------------------------------------------------------------------------
# Routing and aggregation


@dataclass(frozen=True)
class RoutingEntry:
    rule_weight: float
    judge_weight: float
    judge_kinds: frozenset[str] = frozenset()

    def __post_init__(self):
        if not (0 <= self.rule_weight <= 1 and 0 <= self.judge_weight <= 1):
            raise InputError("routing weights must lie in [0, 1]")
        if abs(self.rule_weight + self.judge_weight - 1.0) > 1e-12:
            raise InputError("rule_weight + judge_weight must equal 1")
        bad = set(self.judge_kinds) - set(JUDGE_KINDS)
        if bad:
            raise InputError(f"unknown judge kinds {sorted(bad)}")
        if self.judge_weight == 0 and self.judge_kinds:
            raise InputError("rule-only routes must not list judge kinds")


@dataclass
class VerifierRouting:
    entries: dict[str, RoutingEntry]

    def __post_init__(self):
        calc = self.entries.get("calculation")
        if calc is not None and calc.judge_weight != 0.0:
            raise InputError("calculation must route rule-only")
        intent = self.entries.get("intent")
        if intent is not None and intent.rule_weight != 0.0:
            raise InputError("intent must route judge-only")
        comm = self.entries.get("commenting")
        if comm is not None and (comm.rule_weight == 0.0 or comm.judge_weight == 0.0):
            raise InputError("commenting must blend both verifiers")

    def entry(self, task_type: str) -> RoutingEntry:
        try:
            return self.entries[task_type]
        except KeyError:
            raise InputError(f"no routing defined for task type {task_type!r}") from None


def default_routing() -> VerifierRouting:
    return VerifierRouting(
        entries={
            "calculation": RoutingEntry(1.0, 0.0),
            "table_reasoning": RoutingEntry(1.0, 0.0),
            "compliance": RoutingEntry(1.0, 0.0),
            "intent": RoutingEntry(0.0, 1.0, frozenset({"consistency"})),
            "hallucination_detection": RoutingEntry(0.0, 1.0, frozenset({"consistency"})),
            "commenting": RoutingEntry(
                0.5, 0.5, frozenset({"consistency", "structure", "style"})
            ),
        }
    )


DEFAULT_COMPONENT_WEIGHTS: dict[str, dict[str, dict[str, float]]] = {
    "calculation": {"rule": {"answer_match": 1.0}, "judge": {}},
    "table_reasoning": {"rule": {"answer_match": 1.0}, "judge": {}},
    "compliance": {"rule": {"answer_match": 1.0}, "judge": {}},
    "intent": {"rule": {}, "judge": {"consistency": 1.0}},
    "hallucination_detection": {"rule": {}, "judge": {"consistency": 1.0}},
    "commenting": {
        "rule": {"fact": 0.7, "format": 0.3},
        "judge": {"consistency": 0.5, "structure": 0.3, "style": 0.2},
    },
}


@dataclass
class RewardBreakdown:
    components: dict[str, float]  # e.g. {"rule.fact": 0.9, "judge.style": 1.0}
    scalar: float
    routing_used: RoutingEntry
    audit: str

    def recompute(self) -> float:
        """Re-derive the scalar from the stored components and audit weights."""
        weights = json.loads(self.audit)["weights"]
        rule = sum(
            self.components[f"rule.{name}"] * w for name, w in weights["rule"].items()
        )
        judge = sum(
            self.components[f"judge.{name}"] * w for name, w in weights["judge"].items()
        )
        return self.routing_used.rule_weight * rule + self.routing_used.judge_weight * judge


def aggregate_reward(
    task_type: str,
    rule_components: Mapping[str, float],
    judge_components: Mapping[str, float],
    routing: VerifierRouting,
    weights: Mapping[str, Mapping[str, Mapping[str, float]]] | None = None,
) -> RewardBreakdown:
    """Blend verifier components into the scalar reward for a task type.

    scalar = rule_weight * sum(rule components * weights)
           + judge_weight * sum(judge components * weights)
    Component weights within each active verifier must sum to 1, every
    weighted component must be present and in range, and the stored
    breakdown is sufficient to recompute the scalar.
    """
    entry = routing.entry(task_type)
    weight_table = (weights or DEFAULT_COMPONENT_WEIGHTS).get(task_type)
    if weight_table is None:
        raise InputError(f"no component weights for task type {task_type!r}")

    def side(name: str, available: Mapping[str, float], active: bool) -> float:
        w = weight_table.get(name, {})
        if not active:
            return 0.0
        if not w:
            raise InputError(f"{name} verifier active but has no component weights")
        if abs(sum(w.values()) - 1.0) > 1e-9:
            raise InputError(f"{name} component weights must sum to 1")
        total = 0.0
        for comp, weight in w.items():
            if comp not in available:
                raise InputError(f"missing {name} component {comp!r} required by routing")
            score = available[comp]
            if not 0.0 <= score <= 1.0:
                raise InputError(f"component {name}.{comp} = {score} out of [0, 1]")
            total += score * weight
        return total

    rule_total = side("rule", rule_components, entry.rule_weight > 0)
    judge_total = side("judge", judge_components, entry.judge_weight > 0)
    scalar = entry.rule_weight * rule_total + entry.judge_weight * judge_total

    components: dict[str, float] = {}
    if entry.rule_weight > 0:
        components.update({f"rule.{k}": float(rule_components[k]) for k in weight_table["rule"]})
    if entry.judge_weight > 0:
        components.update({f"judge.{k}": float(judge_components[k]) for k in weight_table["judge"]})
    audit = json.dumps(
        {
            "task_type": task_type,
            "weights": {
                "rule": weight_table.get("rule", {}) if entry.rule_weight > 0 else {},
                "judge": weight_table.get("judge", {}) if entry.judge_weight > 0 else {},
            },
            "rule_weight": entry.rule_weight,
            "judge_weight": entry.judge_weight,
        },
        sort_keys=True,
    )
    return RewardBreakdown(
        components=components, scalar=scalar, routing_used=entry, audit=audit
    )


# ---------------------------------------------------------------------------
# High-level response scoring (dual-verifier dispatch)


@dataclass
class ScoringContext:
    judge_client: object
    routing: VerifierRouting = field(default_factory=default_routing)
    weights: Optional[dict] = None
    format_rules: Sequence[FormatRule] = ()
    fact_sets: Mapping[str, GroundTruthFactSet] = field(default_factory=dict)
    fact_tolerance: Tolerance = field(default_factory=Tolerance)
    themes: tuple[str, ...] = DEFAULT_THEMES


def score_response(task, response: str, ctx: ScoringContext) -> RewardBreakdown:
    """Score one response under the dual-verifier routing for its task type.

    Rule-only routes never touch the judge client; judge components are
    produced only for the kinds the routing entry lists.
    """
    entry = ctx.routing.entry(task.task_type)
    weight_table = (ctx.weights or DEFAULT_COMPONENT_WEIGHTS).get(task.task_type, {})
    _, body = extract_think(response)

    rule_components: dict[str, float] = {}
    if entry.rule_weight > 0:
        needed = weight_table.get("rule", {})
        if "answer_match" in needed:
            if task.gold is None:
                raise InputError(f"task {task.id} has no gold; cannot rule-match")
            rule_components["answer_match"] = 1.0 if match_answer(response, task.gold) else 0.0
        if "fact" in needed:
            gt = _fact_set_for(task, ctx)
            rule_components["fact"] = fact_accuracy(
                extract_numbers(body), gt, ctx.fact_tolerance
            )
        if "format" in needed:
            _, fmt_score = format_check(body, ctx.format_rules)
            rule_components["format"] = fmt_score

    judge_components: dict[str, float] = {}
    if entry.judge_weight > 0:
        source = "\n".join(task.context_docs) if task.context_docs else task.prompt
        for kind in sorted(entry.judge_kinds):
            if kind == "consistency":
                judge_components["consistency"] = judge_consistency(
                    source, body, ctx.judge_client
                ).score
            elif kind == "structure":
                judge_components["structure"] = judge_structure(
                    body, ctx.themes, ctx.judge_client
                ).score
            elif kind == "style":
                judge_components["style"] = judge_style(body, ctx.judge_client).score

    return aggregate_reward(
        task.task_type, rule_components, judge_components, ctx.routing, ctx.weights
    )


def _fact_set_for(task, ctx: ScoringContext) -> GroundTruthFactSet:
    from .funnel import FactSetGold

    if task.gold is not None and isinstance(task.gold.payload, FactSetGold):
        set_id = task.gold.payload.fact_set_id
        try:
            return ctx.fact_sets[set_id]
        except KeyError:
            raise InputError(f"unknown fact set {set_id!r}") from None
    raise InputError(f"task {task.id} has no ground-truth fact set for fact scoring")


def rule_verdict_for(task, response: str, ctx: ScoringContext) -> RuleVerdict:
    """Full rule-side verdict with audit detail.

    answer_match stays None when the task has no rule-matchable gold; the
    fact score defaults to 1.0 when no ground-truth set is attached.
    """
    _, body = extract_think(response)
    violations, fmt_score = format_check(body, ctx.format_rules)
    answer = None
    if task.gold is not None:
        try:
            answer = match_answer(response, task.gold)
        except InputError:
            answer = None
    fact = 1.0
    try:
        gt = _fact_set_for(task, ctx)
        fact = fact_accuracy(extract_numbers(body), gt, ctx.fact_tolerance)
    except InputError:
        pass
    return RuleVerdict(
        fact_score=fact,
        format_violations=violations,
        answer_match=answer,
        details=json.dumps({"format_score": fmt_score}),
    )
