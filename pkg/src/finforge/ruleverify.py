"""Rule-based verifier: deterministic extraction and checking.

Covers the quantifiable half of the reward system: reasoning-tag parsing,
numeric mention extraction from commentary, fact accuracy against a
ground-truth set, declarative format rules, and final-answer matching.
All functions are pure; identical inputs give identical verdicts.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence

from .errors import InputError, MalformedOutputError
from .records import read_records

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"

CONTEXT_WINDOW = 40

# Currency markers. Symbols attach before the number, words/codes after.
_CURRENCY_SYMBOLS = {"$": "USD", "¥": "CNY", "€": "EUR", "£": "GBP"}
_CURRENCY_WORDS = {
    "cny": "CNY",
    "rmb": "CNY",
    "yuan": "CNY",
    "usd": "USD",
    "dollar": "USD",
    "dollars": "USD",
    "eur": "EUR",
    "euro": "EUR",
    "euros": "EUR",
    "gbp": "GBP",
}

_MENTION = re.compile(
    r"""
    (?P<currsym>[$¥€£])?
    (?P<sign>[+\-\u2212])?
    (?P<body>\d{1,3}(?:,\d{3})+|\d+)
    (?P<frac>\.\d+)?
    (?P<marker>
        \s?%
      | \s?(?i:pct|pp)\b
      | \s(?i:cny|rmb|yuan|usd|dollars?|eur|euros?|gbp)\b
    )?
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Unit:
    kind: str  # "plain" | "percent" | "percentage_point" | "currency"
    currency: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("plain", "percent", "percentage_point", "currency"):
            raise InputError(f"unknown unit kind {self.kind!r}")
        if (self.kind == "currency") != (self.currency is not None):
            raise InputError("currency units carry a code, others must not")

    def __str__(self) -> str:
        return f"currency:{self.currency}" if self.kind == "currency" else self.kind

    @classmethod
    def parse(cls, text: str) -> "Unit":
        text = text.strip()
        if text.startswith("currency:"):
            return cls("currency", text.split(":", 1)[1])
        if text == "currency":
            raise InputError("currency unit needs a code, e.g. 'currency:CNY'")
        return cls(text)


PLAIN = Unit("plain")
PERCENT = Unit("percent")
PERCENTAGE_POINT = Unit("percentage_point")


def currency(code: str) -> Unit:
    return Unit("currency", code.upper())


@dataclass(frozen=True)
class NumericMention:
    value: Decimal
    unit: Unit
    span: tuple[int, int]
    context: str

    def render(self) -> str:
        """Canonical text that re-extracts to the same (value, unit)."""
        if self.unit.kind == "percent":
            return f"{self.value}%"
        if self.unit.kind == "percentage_point":
            return f"{self.value} pp"
        if self.unit.kind == "currency":
            return f"{self.value} {self.unit.currency}"
        return str(self.value)


def extract_think(text: str) -> tuple[Optional[str], str]:
    """Split output into the reasoning segment and the visible body.

    Returns (think, body). Output without tags is the non-thinking mode and
    comes back as (None, text). An opening tag without its close (or the
    reverse) is a protocol violation.
    """
    opens = text.count(THINK_OPEN)
    closes = text.count(THINK_CLOSE)
    if opens != closes:
        raise MalformedOutputError("unbalanced reasoning tags")
    if opens == 0:
        return None, text
    start = text.index(THINK_OPEN)
    close = text.find(THINK_CLOSE, start + len(THINK_OPEN))
    if close < 0:
        raise MalformedOutputError("closing tag precedes opening tag")
    think = text[start + len(THINK_OPEN) : close]
    body = text[:start] + text[close + len(THINK_CLOSE) :]
    return think, body


def extract_numbers(text: str) -> list[NumericMention]:
    """Tokenize every numeric mention in reading order.

    Handles thousands separators, signs (ASCII and unicode minus), percent
    signs, pct/pp markers, and currency symbols or code words. Fragments
    that do not parse cleanly are skipped, never guessed.
    """
    mentions: list[NumericMention] = []
    for m in _MENTION.finditer(text):
        start, end = m.span()
        # Reject matches glued to identifiers or longer numbers (e.g. "Q1x",
        # "1.2.3"); a trailing sentence period is fine.
        if start > 0 and (text[start - 1].isalnum() or text[start - 1] in "._"):
            continue
        if end < len(text) and (
            text[end].isdigit()
            or (text[end] == "." and end + 1 < len(text) and text[end + 1].isdigit())
        ):
            continue
        digits = m.group("body").replace(",", "") + (m.group("frac") or "")
        sign = "-" if m.group("sign") in ("-", "\u2212") else ""
        try:
            value = Decimal(sign + digits)
        except InvalidOperation:
            continue
        marker = (m.group("marker") or "").strip().lower()
        if m.group("currsym"):
            unit = currency(_CURRENCY_SYMBOLS[m.group("currsym")])
        elif marker == "%":
            unit = PERCENT
        elif marker in ("pct", "pp"):
            unit = PERCENTAGE_POINT
        elif marker in _CURRENCY_WORDS:
            unit = currency(_CURRENCY_WORDS[marker])
        else:
            unit = PLAIN
        ctx = text[max(0, start - CONTEXT_WINDOW) : min(len(text), end + CONTEXT_WINDOW)]
        mentions.append(NumericMention(value=value, unit=unit, span=(start, end), context=ctx))
    return mentions


@dataclass(frozen=True)
class Fact:
    metric: str
    value: Decimal
    unit: Unit
    period: Optional[str] = None


@dataclass
class GroundTruthFactSet:
    facts: list[Fact]

    def __post_init__(self):
        seen = set()
        for f in self.facts:
            key = (f.metric, f.period)
            if key in seen:
                raise InputError(f"duplicate fact for metric/period {key}")
            seen.add(key)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "GroundTruthFactSet":
        facts = [
            Fact(
                metric=rec["metric"],
                value=Decimal(str(rec["value"])),
                unit=Unit.parse(rec["unit"]),
                period=rec.get("period"),
            )
            for rec in read_records(path)
        ]
        return cls(facts)


@dataclass(frozen=True)
class Tolerance:
    abs: float = 0.01
    rel: float = 1e-4

    def allows(self, delta: float, reference: float) -> bool:
        return abs(delta) <= max(self.abs, self.rel * abs(reference))


def fact_accuracy(
    claims: Sequence[NumericMention], gt: GroundTruthFactSet, tol: Tolerance
) -> float:
    """Fraction of numeric claims backed by the ground-truth set.

    Matching is greedy in claim span order; each fact backs at most one
    claim. A claim and fact match when their units agree and the value
    difference is inside the tolerance. No claims at all scores 1.0.
    """
    if not claims:
        return 1.0
    available = list(gt.facts)
    matched = 0
    for claim in sorted(claims, key=lambda c: c.span):
        for fact in available:
            if fact.unit != claim.unit:
                continue
            if tol.allows(float(claim.value - fact.value), float(fact.value)):
                available.remove(fact)
                matched += 1
                break
    return matched / len(claims)


@dataclass
class FormatRule:
    id: str
    description: str
    detector: dict
    severity: str = "error"
    applies_tags: tuple[str, ...] = ()  # empty: applies to every task
    _violation_re: Optional[re.Pattern] = field(default=None, repr=False)
    _sites_re: Optional[re.Pattern] = field(default=None, repr=False)

    def __post_init__(self):
        if self.severity not in ("error", "warn"):
            raise InputError(f"rule {self.id}: unknown severity {self.severity!r}")
        kind = self.detector.get("kind", "regex")
        if kind == "regex":
            flags = re.IGNORECASE if "i" in self.detector.get("flags", "") else 0
            try:
                self._violation_re = re.compile(self.detector["pattern"], flags)
                sites = self.detector.get("sites")
                self._sites_re = re.compile(sites, flags) if sites else None
            except (re.error, KeyError) as exc:
                raise InputError(f"rule {self.id}: detector does not compile: {exc}")
        elif kind != "json_only":
            raise InputError(f"rule {self.id}: unknown detector kind {kind!r}")

    def apply(self, text: str) -> tuple[list[tuple[int, int]], int]:
        """Return (violation spans, applicable site count)."""
        if self.detector.get("kind", "regex") == "json_only":
            return _check_json_only(text), 1
        violations = []
        for m in self._violation_re.finditer(text):
            # Alternation branches mark the offending span with groups v1, v2, ...
            span = m.span()
            for name, value in (m.groupdict() or {}).items():
                if name.startswith("v") and value is not None:
                    span = m.span(name)
                    break
            violations.append(span)
        if self._sites_re is not None:
            sites = sum(1 for _ in self._sites_re.finditer(text))
        else:
            sites = len(violations)
        return violations, max(sites, len(violations))

    @staticmethod
    def load_all(path: str | Path) -> list["FormatRule"]:
        return [
            FormatRule(
                id=rec["id"],
                description=rec.get("description", ""),
                detector=rec["detector"],
                severity=rec.get("severity", "error"),
                applies_tags=tuple(rec.get("applies_tags", [])),
            )
            for rec in read_records(path)
        ]


def rules_for_tags(rules: Sequence[FormatRule], tags: Sequence[str]) -> list[FormatRule]:
    """Rules with no tag scope apply everywhere; scoped rules need a tag hit."""
    tag_set = set(tags)
    return [r for r in rules if not r.applies_tags or tag_set & set(r.applies_tags)]


def _check_json_only(text: str) -> list[tuple[int, int]]:
    stripped = text.strip()
    if not stripped:
        return [(0, max(len(text), 1))]
    try:
        json.loads(stripped)
        return []
    except json.JSONDecodeError:
        pass
    # Locate an embedded JSON value and flag the prose around it.
    decoder = json.JSONDecoder()
    for opener in "{[":
        idx = text.find(opener)
        if idx < 0:
            continue
        try:
            _, end = decoder.raw_decode(text[idx:])
        except json.JSONDecodeError:
            continue
        if text[:idx].strip():
            return [(0, idx)]
        return [(idx + end, len(text))]
    return [(0, len(text))]


@dataclass
class RuleVerdict:
    fact_score: float
    format_violations: list[tuple[str, tuple[int, int]]]
    answer_match: Optional[bool]
    details: str


def format_check(
    text: str, rules: Sequence[FormatRule]
) -> tuple[list[tuple[str, tuple[int, int]]], float]:
    """Apply format rules; score counts only error-severity violations.

    score = 1 - error_violations / applicable_rule_sites, clamped to [0, 1].
    Warn-severity rules report violations but never move the score.
    """
    all_violations: list[tuple[str, tuple[int, int]]] = []
    err_violations = 0
    err_sites = 0
    for rule in rules:
        spans, sites = rule.apply(text)
        all_violations.extend((rule.id, span) for span in spans)
        if rule.severity == "error":
            err_violations += len(spans)
            err_sites += sites
    if err_sites == 0:
        score = 1.0
    else:
        score = 1.0 - err_violations / err_sites
    return all_violations, min(1.0, max(0.0, score))


_BOXED = re.compile(r"\\boxed\{([^{}]*)\}")
_MARKUP = re.compile(r"[*_`$]")


def strip_markup(text: str) -> str:
    text = _MARKUP.sub("", text)
    return text.strip().strip(".:;,")


def unbox(text: str) -> str:
    matches = _BOXED.findall(text)
    return matches[-1].strip() if matches else text


def normalize_text_answer(text: str) -> str:
    """Whitespace/markup strip, unbox, case fold. Comparison form for text golds."""
    return strip_markup(unbox(text.strip())).casefold()


def parse_number(text: str) -> Optional[float]:
    """Parse one numeric answer at face value ("11.67%" -> 11.67).

    Returns None when the fragment is not a clean number; callers fall back
    to mention extraction rather than guessing.
    """
    s = strip_markup(unbox(text.strip()))
    s = s.replace("\u2212", "-").replace(",", "")
    s = re.sub(r"(?i)\s*(%|pct\b|pp\b)", "", s)
    for sym in _CURRENCY_SYMBOLS:
        s = s.replace(sym, "")
    s = re.sub(r"(?i)\s*(cny|rmb|yuan|usd|dollars?|eur|euros?|gbp)\b", "", s)
    s = s.strip()
    try:
        return float(s)
    except ValueError:
        return None


def final_answer(text: str) -> Optional[str]:
    """Pull the final-answer fragment out of a full model response."""
    try:
        _, body = extract_think(text)
    except MalformedOutputError:
        body = text
    body = body.strip()
    if not body:
        return None
    boxed = _BOXED.findall(body)
    if boxed:
        return boxed[-1].strip()
    m = None
    for m in re.finditer(r"(?im)^.*?(?:final answer|answer)\s*(?:is|:)\s*(.+?)\s*$", body):
        pass
    if m:
        return m.group(1)
    lines = [ln.strip() for ln in body.splitlines() if ln.strip()]
    return lines[-1] if lines else None


def answers_equivalent(a: str, b: str, rel_tol: float = 1e-6) -> bool:
    """Meaning-level equality used by voting and the consistency filter."""
    na, nb = parse_number(a), parse_number(b)
    if na is not None and nb is not None:
        return abs(na - nb) <= rel_tol * max(1.0, abs(na), abs(nb))
    return normalize_text_answer(a) == normalize_text_answer(b)


def match_answer(candidate: str, gold, tol: Optional[Tolerance] = None) -> bool:
    """Check a candidate response against a numeric or exact-text gold.

    Numeric golds compare after parsing, within the gold's stored tolerances
    unless ``tol`` overrides them. Text golds compare after normalization.
    Fact-set and rubric golds are not rule-matchable.
    """
    from .funnel import ExactTextGold, NumericGold  # local import: no cycle at runtime

    payload = gold.payload if hasattr(gold, "payload") else gold
    if isinstance(payload, NumericGold):
        parsed = parse_number(final_answer(candidate) or "")
        if parsed is None:
            try:
                _, body = extract_think(candidate)
            except MalformedOutputError:
                body = candidate
            mentions = extract_numbers(body)
            if not mentions:
                return False
            parsed = float(mentions[-1].value)
        tol_abs = tol.abs if tol else payload.tolerance_abs
        tol_rel = tol.rel if tol else payload.tolerance_rel
        return abs(parsed - payload.value) <= max(tol_abs, tol_rel * abs(payload.value))
    if isinstance(payload, ExactTextGold):
        fragment = final_answer(candidate)
        if fragment is not None and normalize_text_answer(fragment) == payload.text:
            return True
        return normalize_text_answer(candidate) == payload.text
    raise InputError(f"gold payload {type(payload).__name__} is not rule-matchable")
