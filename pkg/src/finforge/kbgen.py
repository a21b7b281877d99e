"""Instruction-task generation from a seed knowledge base and identity registry.

Two mint paths: deduction tasks derived from registered financial identities
(gold is analytically forced, so they are born deterministically verified),
and knowledge tasks that inject 3-5 sampled knowledge points into a prompt
template. Existing tasks evolve toward harder variants through deterministic
rewrites: extra constraints, distractor facts, or format transforms.
"""

from __future__ import annotations

import random
import re
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import expr
from .errors import DuplicateIdError, InputError, SolveError, UnknownIdError
from .funnel import ExactTextGold, GoldAnswer, NumericGold, gold_from_dict, gold_to_dict
from .records import read_records
from .ruleverify import normalize_text_answer, parse_number

DOMAIN_TAGS = ("banking", "securities", "insurance", "accounting", "macroeconomics")
TASK_TYPES = (
    "calculation",
    "commenting",
    "compliance",
    "intent",
    "table_reasoning",
    "hallucination_detection",
)
VARIABLE_UNITS = ("currency", "percent", "ratio", "count")
SIGNS = ("any", "nonneg", "positive")
EVOLUTION_KINDS = ("add_constraint", "add_distractor", "transform_format")

RESAMPLE_LIMIT = 16
RESIDUAL_TOL = 1e-9

# Value formatting per unit: decimals shown in prompts and sampled values.
_UNIT_DECIMALS = {"currency": 2, "percent": 1, "ratio": 2, "count": 0}
# Gold matching tolerances per unit of the hidden variable.
_UNIT_GOLD_TOL = {
    "currency": (0.01, 1e-4),
    "percent": (0.01, 0.0),
    "ratio": (0.01, 1e-4),
    "count": (1e-9, 0.0),
}


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class KnowledgePoint:
    id: str
    domain_tag: str
    content: str
    source_ref: str = ""

    def __post_init__(self):
        if not self.content:
            raise InputError(f"knowledge point {self.id!r} has empty content")
        if self.domain_tag not in DOMAIN_TAGS:
            raise InputError(f"unknown domain tag {self.domain_tag!r}")


@dataclass(frozen=True)
class AxiomVariable:
    symbol: str
    unit: str
    range: tuple[float, float]
    sign: str = "any"

    def __post_init__(self):
        if self.unit not in VARIABLE_UNITS:
            raise InputError(f"unknown variable unit {self.unit!r}")
        if self.sign not in SIGNS:
            raise InputError(f"unknown sign constraint {self.sign!r}")
        if not self.range[0] <= self.range[1]:
            raise InputError(f"empty range for {self.symbol!r}")
        if self.sign == "positive" and self.range[1] <= 0:
            raise InputError(f"{self.symbol!r}: positive sign contradicts range {self.range}")
        if self.sign == "nonneg" and self.range[1] < 0:
            raise InputError(f"{self.symbol!r}: nonneg sign contradicts range {self.range}")

    def admits(self, value: float) -> bool:
        lo, hi = self.range
        if not (lo - 1e-12 <= value <= hi + 1e-12):
            return False
        if self.sign == "nonneg" and value < 0:
            return False
        if self.sign == "positive" and value <= 0:
            return False
        return True


@dataclass(frozen=True)
class FinancialAxiom:
    id: str
    name: str
    variables: tuple[AxiomVariable, ...]
    relation: str  # prefix notation, e.g. "(= assets (+ liabilities equity))"
    domain_tag: str = "accounting"

    def __post_init__(self):
        symbols = [v.symbol for v in self.variables]
        dupes = {s for s in symbols if symbols.count(s) > 1}
        if dupes:
            raise InputError(f"duplicate symbol in variables: {sorted(dupes)}")
        lhs, rhs = expr.parse_relation(self.relation)
        declared = set(symbols)
        referenced = expr.symbols(rhs) | {lhs}
        undeclared = referenced - declared
        if undeclared:
            raise InputError(f"relation references undeclared symbols: {sorted(undeclared)}")
        if len(referenced) < 2:
            raise InputError("relation must reference at least two variables")
        if self.domain_tag not in DOMAIN_TAGS:
            raise InputError(f"unknown domain tag {self.domain_tag!r}")

    @property
    def lhs(self) -> str:
        return expr.parse_relation(self.relation)[0]

    @property
    def rhs(self) -> expr.Expr:
        return expr.parse_relation(self.relation)[1]

    def variable(self, symbol: str) -> AxiomVariable:
        for v in self.variables:
            if v.symbol == symbol:
                return v
        raise UnknownIdError(f"axiom {self.id!r} has no variable {symbol!r}")

    def solve_hidden(self, values: dict[str, float], hidden: str) -> float:
        """Value of ``hidden`` forced by the relation given the other values."""
        var = self.variable(hidden)
        return expr.solve(self.lhs, self.rhs, hidden, values, interval=var.range)

    def residual(self, values: dict[str, float]) -> float:
        return expr.residual(self.lhs, self.rhs, values)


# Provenance variants ---------------------------------------------------------


@dataclass(frozen=True)
class AxiomProvenance:
    axiom_id: str
    hidden_symbol: str
    sampled_values: dict
    kind: str = "axiom"


@dataclass(frozen=True)
class KnowledgeProvenance:
    point_ids: tuple[str, ...]
    template_id: str
    kind: str = "knowledge"


@dataclass(frozen=True)
class EvolutionStrategy:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVOLUTION_KINDS:
            raise InputError(f"unknown evolution strategy {self.kind!r}")


@dataclass(frozen=True)
class EvolvedProvenance:
    parent_id: str
    strategy: EvolutionStrategy
    # When a constrained child is re-minted through the identity path, the
    # mint details ride along so deterministic recompute still works.
    minted: Optional[AxiomProvenance] = None
    kind: str = "evolved"


Provenance = AxiomProvenance | KnowledgeProvenance | EvolvedProvenance


@dataclass
class InstructionTask:
    id: str
    task_type: str
    prompt: str
    context_docs: list[str]
    provenance: Provenance
    domain_tag: str
    gold: Optional[GoldAnswer] = None
    verification_level: str = "unverified"
    options: Optional[dict[str, str]] = None  # multiple-choice letter -> content
    tags: list[str] = field(default_factory=list)
    program: Optional[dict] = None  # {"source": str, "inputs": {..}}

    def __post_init__(self):
        if self.task_type not in TASK_TYPES:
            raise InputError(f"unknown task type {self.task_type!r}")
        if self.domain_tag not in DOMAIN_TAGS:
            raise InputError(f"unknown domain tag {self.domain_tag!r}")
        if isinstance(self.provenance, AxiomProvenance) and self.gold is None:
            raise InputError("identity-minted tasks must carry a gold answer at creation")

    def promote(self, level: str) -> None:
        """Raise the verification level; levels never regress."""
        from .funnel import level_rank

        if level_rank(level) < level_rank(self.verification_level):
            raise InputError(
                f"verification level cannot regress ({self.verification_level} -> {level})"
            )
        self.verification_level = level

    def all_tags(self) -> list[str]:
        return [self.task_type, self.domain_tag, *self.tags]


def task_to_dict(task: InstructionTask) -> dict:
    prov = task.provenance
    if isinstance(prov, AxiomProvenance):
        prov_d = {
            "kind": "axiom",
            "axiom_id": prov.axiom_id,
            "hidden_symbol": prov.hidden_symbol,
            "sampled_values": prov.sampled_values,
        }
    elif isinstance(prov, KnowledgeProvenance):
        prov_d = {
            "kind": "knowledge",
            "point_ids": list(prov.point_ids),
            "template_id": prov.template_id,
        }
    else:
        prov_d = {
            "kind": "evolved",
            "parent_id": prov.parent_id,
            "strategy": {"kind": prov.strategy.kind, "params": prov.strategy.params},
        }
        if prov.minted is not None:
            prov_d["minted"] = {
                "axiom_id": prov.minted.axiom_id,
                "hidden_symbol": prov.minted.hidden_symbol,
                "sampled_values": prov.minted.sampled_values,
            }
    return {
        "id": task.id,
        "task_type": task.task_type,
        "prompt": task.prompt,
        "context_docs": task.context_docs,
        "provenance": prov_d,
        "domain_tag": task.domain_tag,
        "gold": gold_to_dict(task.gold) if task.gold else None,
        "verification_level": task.verification_level,
        "options": task.options,
        "tags": task.tags,
        "program": task.program,
    }


def task_from_dict(data: dict) -> InstructionTask:
    prov_d = data["provenance"]
    kind = prov_d["kind"]
    if kind == "axiom":
        prov: Provenance = AxiomProvenance(
            axiom_id=prov_d["axiom_id"],
            hidden_symbol=prov_d["hidden_symbol"],
            sampled_values=dict(prov_d["sampled_values"]),
        )
    elif kind == "knowledge":
        prov = KnowledgeProvenance(
            point_ids=tuple(prov_d["point_ids"]), template_id=prov_d["template_id"]
        )
    elif kind == "evolved":
        minted = None
        if prov_d.get("minted"):
            m = prov_d["minted"]
            minted = AxiomProvenance(
                axiom_id=m["axiom_id"],
                hidden_symbol=m["hidden_symbol"],
                sampled_values=dict(m["sampled_values"]),
            )
        strat = prov_d["strategy"]
        prov = EvolvedProvenance(
            parent_id=prov_d["parent_id"],
            strategy=EvolutionStrategy(kind=strat["kind"], params=dict(strat.get("params", {}))),
            minted=minted,
        )
    else:
        raise InputError(f"unknown provenance kind {kind!r}")
    return InstructionTask(
        id=data["id"],
        task_type=data["task_type"],
        prompt=data["prompt"],
        context_docs=list(data.get("context_docs", [])),
        provenance=prov,
        domain_tag=data["domain_tag"],
        gold=gold_from_dict(data["gold"]) if data.get("gold") else None,
        verification_level=data.get("verification_level", "unverified"),
        options=data.get("options"),
        tags=list(data.get("tags", [])),
        program=data.get("program"),
    )


# ---------------------------------------------------------------------------
# Registries


class AxiomRegistry:
    """Write-once identity registry; registration is idempotent on equal
    definitions and rejects redefinition under an existing id."""

    def __init__(self):
        self._axioms: dict[str, FinancialAxiom] = {}

    def register(self, definition: FinancialAxiom) -> str:
        existing = self._axioms.get(definition.id)
        if existing is not None:
            if existing == definition:
                return definition.id
            raise DuplicateIdError(f"axiom {definition.id!r} already registered differently")
        self._axioms[definition.id] = definition
        return definition.id

    def get(self, axiom_id: str) -> FinancialAxiom:
        try:
            return self._axioms[axiom_id]
        except KeyError:
            raise UnknownIdError(f"no axiom {axiom_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._axioms)

    def __len__(self) -> int:
        return len(self._axioms)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "AxiomRegistry":
        reg = cls()
        for rec in read_records(path):
            reg.register(axiom_from_dict(rec))
        return reg


def axiom_from_dict(rec: dict) -> FinancialAxiom:
    return FinancialAxiom(
        id=rec["id"],
        name=rec["name"],
        variables=tuple(
            AxiomVariable(
                symbol=v["symbol"],
                unit=v["unit"],
                range=(float(v["range"][0]), float(v["range"][1])),
                sign=v.get("sign", "any"),
            )
            for v in rec["variables"]
        ),
        relation=rec["relation"],
        domain_tag=rec.get("domain_tag", "accounting"),
    )


def axiom_to_dict(axiom: FinancialAxiom) -> dict:
    return {
        "id": axiom.id,
        "name": axiom.name,
        "variables": [
            {"symbol": v.symbol, "unit": v.unit, "range": list(v.range), "sign": v.sign}
            for v in axiom.variables
        ],
        "relation": axiom.relation,
        "domain_tag": axiom.domain_tag,
    }


class KnowledgeBase:
    def __init__(self, points: Sequence[KnowledgePoint] = ()):
        self._points: dict[str, KnowledgePoint] = {}
        for p in points:
            self.add(p)

    def add(self, point: KnowledgePoint) -> None:
        if point.id in self._points:
            raise DuplicateIdError(f"knowledge point {point.id!r} already present")
        self._points[point.id] = point

    def get(self, point_id: str) -> KnowledgePoint:
        try:
            return self._points[point_id]
        except KeyError:
            raise UnknownIdError(f"no knowledge point {point_id!r}") from None

    def matching(self, selector: "PointSelector") -> list[KnowledgePoint]:
        points = sorted(self._points.values(), key=lambda p: p.id)
        return [p for p in points if selector.matches(p)]

    def __len__(self) -> int:
        return len(self._points)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "KnowledgeBase":
        kb = cls()
        for rec in read_records(path):
            kb.add(
                KnowledgePoint(
                    id=rec["id"],
                    domain_tag=rec["domain_tag"],
                    content=rec["content"],
                    source_ref=rec.get("source_ref", ""),
                )
            )
        return kb


@dataclass(frozen=True)
class PointSelector:
    domain_tag: Optional[str] = None
    ids: Optional[tuple[str, ...]] = None
    content_contains: Optional[str] = None

    def matches(self, point: KnowledgePoint) -> bool:
        if self.domain_tag is not None and point.domain_tag != self.domain_tag:
            return False
        if self.ids is not None and point.id not in self.ids:
            return False
        if self.content_contains is not None and self.content_contains not in point.content:
            return False
        return True


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    task_type: str
    body: str  # uses {{point_k}} and {{question}} placeholders
    question: str
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.task_type not in TASK_TYPES:
            raise InputError(f"template {self.id!r}: unknown task type {self.task_type!r}")


class TemplateRegistry:
    def __init__(self, templates: Sequence[PromptTemplate] = ()):
        self._templates: dict[str, PromptTemplate] = {}
        for t in templates:
            self.add(t)

    def add(self, template: PromptTemplate) -> None:
        if template.id in self._templates:
            raise DuplicateIdError(f"template {template.id!r} already present")
        self._templates[template.id] = template

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownIdError(f"no template {template_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._templates)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "TemplateRegistry":
        reg = cls()
        for rec in read_records(path):
            reg.add(
                PromptTemplate(
                    id=rec["id"],
                    task_type=rec["task_type"],
                    body=rec["body"],
                    question=rec["question"],
                    tags=tuple(rec.get("tags", [])),
                )
            )
        return reg


# ---------------------------------------------------------------------------
# Deduction-task generation


def format_value(value: float, unit: str) -> str:
    decimals = _UNIT_DECIMALS[unit]
    text = f"{value:,.{decimals}f}"
    if unit == "percent":
        text += "%"
    return text


def _sample_value(rng: random.Random, var: AxiomVariable) -> float:
    lo, hi = var.range
    decimals = _UNIT_DECIMALS[var.unit]
    quantum = 10.0 **-decimals
    if var.sign == "nonneg":
        lo = max(lo, 0.0)
    elif var.sign == "positive":
        lo = max(lo, quantum)
    value = round(rng.uniform(lo, hi), decimals)
    return min(max(value, lo), hi)


def generate_deduction_task(
    registry: AxiomRegistry,
    axiom_id: str,
    hidden_symbol: str,
    rng_seed: int,
    id_factory: Callable[[], str] | None = None,
) -> InstructionTask:
    """Mint a deduction task whose gold is forced by a registered identity.

    Visible variables are sampled from their declared intervals, the hidden
    one is solved from the relation, and the substitution residual is checked
    before the task is accepted. Sampling retries a bounded number of times
    when the solution lands outside the hidden variable's admissible range.
    """
    axiom = registry.get(axiom_id)
    hidden_var = axiom.variable(hidden_symbol)
    referenced = expr.symbols(axiom.rhs) | {axiom.lhs}
    if hidden_symbol not in referenced:
        raise InputError(f"hidden symbol {hidden_symbol!r} not referenced by the relation")
    rng = random.Random(rng_seed)

    last_error = "no admissible solution"
    for _ in range(RESAMPLE_LIMIT):
        values = {
            v.symbol: _sample_value(rng, v)
            for v in axiom.variables
            if v.symbol != hidden_symbol and v.symbol in referenced
        }
        try:
            solution = axiom.solve_hidden(values, hidden_symbol)
        except SolveError as exc:
            last_error = str(exc)
            continue
        full = dict(values)
        full[hidden_symbol] = solution
        if not hidden_var.admits(solution):
            last_error = f"solution {solution} outside declared range of {hidden_symbol!r}"
            continue
        if axiom.residual(full) > RESIDUAL_TOL:
            last_error = "residual above tolerance"
            continue

        values_text = "; ".join(
            f"{s} = {format_value(values[s], axiom.variable(s).unit)}" for s in sorted(values)
        )
        prompt = (
            f"{axiom.name}. Given {values_text}, compute the value of {hidden_symbol}. "
            f"Answer with the number only."
        )
        tol_abs, tol_rel = _UNIT_GOLD_TOL[hidden_var.unit]
        gold = GoldAnswer.of(
            NumericGold(value=solution, tolerance_abs=tol_abs, tolerance_rel=tol_rel), "axiom"
        )
        make_id = id_factory or (lambda: new_id("task"))
        return InstructionTask(
            id=make_id(),
            task_type="calculation",
            prompt=prompt,
            context_docs=[],
            provenance=AxiomProvenance(
                axiom_id=axiom_id, hidden_symbol=hidden_symbol, sampled_values=values
            ),
            domain_tag=axiom.domain_tag,
            gold=gold,
            verification_level="L1",
            tags=["deduction", axiom.id],
        )
    raise SolveError(
        f"could not mint a task for {axiom_id!r} hiding {hidden_symbol!r} "
        f"after {RESAMPLE_LIMIT} resamples: {last_error}"
    )


# ---------------------------------------------------------------------------
# Knowledge-task generation

_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


def generate_knowledge_task(
    kb: KnowledgeBase,
    templates: TemplateRegistry,
    point_selector: PointSelector,
    n_points: int,
    template_id: str,
    task_type: str,
    rng_seed: int,
    id_factory: Callable[[], str] | None = None,
) -> InstructionTask:
    """Context injection: render 3-5 sampled knowledge points through a template."""
    if not 3 <= n_points <= 5:
        raise InputError(f"n_points must be within [3, 5], got {n_points}")
    template = templates.get(template_id)
    if template.task_type != task_type:
        raise InputError(
            f"template {template_id!r} is for {template.task_type!r}, not {task_type!r}"
        )
    candidates = kb.matching(point_selector)
    if len(candidates) < n_points:
        raise InputError(
            f"selector matches only {len(candidates)} points, need {n_points}"
        )
    rng = random.Random(rng_seed)
    chosen = rng.sample(candidates, n_points)

    filled: dict[str, str] = {"question": template.question}
    for k, point in enumerate(chosen, start=1):
        filled[f"point_{k}"] = point.content

    lines = []
    for line in template.body.splitlines():
        names = _PLACEHOLDER.findall(line)
        unfilled = [n for n in names if n not in filled]
        if unfilled and all(re.fullmatch(r"point_\d+", n) for n in unfilled):
            continue  # slot for a point beyond n_points
        if unfilled:
            raise InputError(f"template {template_id!r} uses unknown placeholder {unfilled[0]!r}")
        lines.append(_PLACEHOLDER.sub(lambda m: filled[m.group(1)], line))
    prompt = "\n".join(lines)

    for point in chosen:
        if point.content not in prompt:
            raise InputError(
                f"template {template_id!r} lacks a slot for point {point.id!r}; "
                f"raise its point_k coverage to at least {n_points}"
            )

    make_id = id_factory or (lambda: new_id("task"))
    return InstructionTask(
        id=make_id(),
        task_type=task_type,
        prompt=prompt,
        context_docs=[p.content for p in chosen],
        provenance=KnowledgeProvenance(
            point_ids=tuple(p.id for p in chosen), template_id=template_id
        ),
        domain_tag=point_selector.domain_tag or chosen[0].domain_tag,
        tags=list(template.tags),
    )


# ---------------------------------------------------------------------------
# Evolution

_DISTRACTOR_BANK = (
    "For reference, the company's marketing budget last quarter was {amount} CNY.",
    "Unrelated note: headcount at the regional office stands at {count} employees.",
    "Aside: the annual office lease renews at {amount} CNY, unchanged from last year.",
)


def evolve_task(
    task: InstructionTask,
    strategy: EvolutionStrategy,
    rng_seed: int,
    registry: AxiomRegistry | None = None,
    id_factory: Callable[[], str] | None = None,
) -> InstructionTask:
    """Produce a harder child variant of ``task`` under a deterministic rewrite.

    Distractor insertion and format transforms preserve the normalized gold
    value; constraint addition re-mints the child through an extended
    multi-period identity and assigns a fresh deterministic gold.
    """
    make_id = id_factory or (lambda: new_id("task"))
    rng = random.Random(rng_seed)
    if strategy.kind == "add_distractor":
        return _add_distractor(task, strategy, rng, make_id)
    if strategy.kind == "transform_format":
        return _transform_format(task, strategy, rng, make_id)
    if strategy.kind == "add_constraint":
        if registry is None:
            raise InputError("add_constraint requires the axiom registry")
        return _add_constraint(task, strategy, rng_seed, registry, make_id)
    raise InputError(f"unknown evolution strategy {strategy.kind!r}")


def _child(task: InstructionTask, strategy: EvolutionStrategy, make_id, **changes) -> InstructionTask:
    base = replace(
        task,
        id=make_id(),
        provenance=EvolvedProvenance(parent_id=task.id, strategy=strategy),
    )
    return replace(base, **changes)


def _add_distractor(task, strategy, rng, make_id) -> InstructionTask:
    fact = strategy.params.get("fact")
    if fact is None:
        template = rng.choice(_DISTRACTOR_BANK)
        fact = template.format(
            amount=f"{rng.uniform(10_000, 900_000):,.2f}", count=rng.randint(12, 480)
        )
    prompt = f"{task.prompt}\n{fact}"
    return _child(
        task,
        strategy,
        make_id,
        prompt=prompt,
        context_docs=[*task.context_docs, fact],
    )


def _transform_format(task, strategy, rng, make_id) -> InstructionTask:
    if task.gold is None:
        raise InputError("transform_format requires a task with a gold answer")
    target = strategy.params.get("to", "multiple_choice")
    if target == "multiple_choice":
        return _to_multiple_choice(task, strategy, rng, make_id)
    if target == "fill_in":
        return _to_fill_in(task, strategy, make_id)
    raise InputError(f"unknown transform_format target {target!r}")


def _to_multiple_choice(task, strategy, rng, make_id) -> InstructionTask:
    payload = task.gold.payload
    if isinstance(payload, NumericGold):
        correct_text = _render_plain(payload.value)
        distractors = []
        for factor in (0.5, 1.5, 2.0):
            cand = _render_plain(payload.value * factor if payload.value != 0 else factor)
            if cand != correct_text and cand not in distractors:
                distractors.append(cand)
        while len(distractors) < 3:
            cand = _render_plain(payload.value + len(distractors) + 1)
            if cand != correct_text and cand not in distractors:
                distractors.append(cand)
    elif isinstance(payload, ExactTextGold):
        correct_text = payload.text
        distractors = [f"not {payload.text}", "none of the above", "cannot be determined"]
    else:
        raise InputError("multiple-choice transform needs a numeric or text gold")
    contents = distractors[:3]
    slot = rng.randrange(len(contents) + 1)
    contents.insert(slot, correct_text)
    letters = "abcd"
    options = {letters[i]: contents[i] for i in range(len(contents))}
    correct_letter = letters[slot]
    option_lines = "\n".join(f"({letter}) {text}" for letter, text in options.items())
    prompt = f"{task.prompt}\nChoose one option and answer with its letter.\n{option_lines}"
    gold = GoldAnswer.of(ExactTextGold(text=correct_letter), task.gold.method)
    return _child(task, strategy, make_id, prompt=prompt, options=options, gold=gold)


def _to_fill_in(task, strategy, make_id) -> InstructionTask:
    payload = task.gold.payload
    if task.options and isinstance(payload, ExactTextGold):
        letter = payload.text
        if letter not in task.options:
            raise InputError(f"gold letter {letter!r} not among options")
        content = task.options[letter]
        prompt = re.sub(r"\nChoose one option.*", "", task.prompt, flags=re.DOTALL)
        value = parse_number(content)
        if value is not None:
            gold = GoldAnswer.of(NumericGold(value=value), task.gold.method)
        else:
            gold = GoldAnswer.of(ExactTextGold(text=normalize_text_answer(content)), task.gold.method)
        return _child(task, strategy, make_id, prompt=prompt, options=None, gold=gold)
    # Already free-form: restate the ask, keep the gold untouched.
    prompt = f"{task.prompt}\nState the exact value; do not give ranges or options."
    return _child(task, strategy, make_id, prompt=prompt)


def _render_plain(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.12g}"


def _suffix_expr(tree: expr.Expr, suffix: str) -> expr.Expr:
    if isinstance(tree, expr.Sym):
        return expr.Sym(tree.name + suffix)
    if isinstance(tree, expr.Call):
        return expr.Call(tree.op, tuple(_suffix_expr(a, suffix) for a in tree.args))
    return tree


def extend_axiom(axiom: FinancialAxiom, periods: int) -> FinancialAxiom:
    """Multi-period composite of an identity: total = sum of per-period values."""
    if periods < 2:
        raise InputError("composite identities need at least two periods")
    lhs, rhs = expr.parse_relation(axiom.relation)
    terms = tuple(_suffix_expr(rhs, f"_p{i}") for i in range(1, periods + 1))
    total_sym = f"{lhs}_total"
    lhs_var = axiom.variable(lhs)
    lo, hi = lhs_var.range
    new_vars = [
        AxiomVariable(
            symbol=total_sym,
            unit=lhs_var.unit,
            range=(lo * periods if lo < 0 else lo, hi * periods),
            sign=lhs_var.sign,
        )
    ]
    for i in range(1, periods + 1):
        for v in axiom.variables:
            if v.symbol == lhs:
                continue
            new_vars.append(replace(v, symbol=f"{v.symbol}_p{i}"))
    relation = expr.render_relation(total_sym, expr.Call("+", terms))
    return FinancialAxiom(
        id=f"{axiom.id}__x{periods}",
        name=f"{axiom.name}, {periods}-period composite",
        variables=tuple(new_vars),
        relation=relation,
        domain_tag=axiom.domain_tag,
    )


def _add_constraint(task, strategy, rng_seed, registry, make_id) -> InstructionTask:
    prov = task.provenance
    if not isinstance(prov, AxiomProvenance):
        raise InputError("add_constraint requires an identity-minted parent task")
    periods = int(strategy.params.get("periods", 2))
    composite = extend_axiom(registry.get(prov.axiom_id), periods)
    registry.register(composite)
    minted = generate_deduction_task(registry, composite.id, composite.lhs, rng_seed)
    minted_prov = minted.provenance
    return InstructionTask(
        id=make_id(),
        task_type=task.task_type,
        prompt=minted.prompt,
        context_docs=minted.context_docs,
        provenance=EvolvedProvenance(parent_id=task.id, strategy=strategy, minted=minted_prov),
        domain_tag=task.domain_tag,
        gold=minted.gold,
        verification_level="L1",
        tags=[*task.tags, "composite"],
    )


def normalized_gold_value(task: InstructionTask):
    """Comparison form of a task's gold: a float for numeric answers (with
    multiple-choice letters resolved through the option map), else the
    normalized text."""
    if task.gold is None:
        return None
    payload = task.gold.payload
    if isinstance(payload, NumericGold):
        return payload.value
    if isinstance(payload, ExactTextGold):
        text = payload.text
        if task.options and text in task.options:
            text = task.options[text]
        value = parse_number(text)
        return value if value is not None else normalize_text_answer(text)
    raise InputError("gold payload has no normalized scalar form")


# ---------------------------------------------------------------------------
# Weakness diagnosis


@dataclass(frozen=True)
class WeaknessCluster:
    tag: str
    failure_count: int
    failure_rate: float


@dataclass(frozen=True)
class WeaknessReport:
    clusters: tuple[WeaknessCluster, ...]


def diagnose_weakness(
    results: Sequence[tuple[InstructionTask, float]],
    success_cutoff: float = 1.0,
) -> WeaknessReport:
    """Cluster failures by tag to target the next evolution round.

    A result fails when its reward is below the cutoff. Tags are the union
    of task type, domain tag, and template tags; tags with no failures are
    omitted, so an all-pass batch yields an empty report.
    """
    attempts: dict[str, int] = {}
    failures: dict[str, int] = {}
    for task, reward in results:
        failed = reward < success_cutoff
        for tag in task.all_tags():
            attempts[tag] = attempts.get(tag, 0) + 1
            if failed:
                failures[tag] = failures.get(tag, 0) + 1
    clusters = [
        WeaknessCluster(tag=tag, failure_count=n, failure_rate=n / attempts[tag])
        for tag, n in failures.items()
    ]
    clusters.sort(key=lambda c: (-c.failure_rate, c.tag))
    return WeaknessReport(clusters=tuple(clusters))
