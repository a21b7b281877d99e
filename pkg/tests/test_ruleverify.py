from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from finforge.errors import InputError, MalformedOutputError
from finforge.funnel import ExactTextGold, FactSetGold, GoldAnswer, NumericGold
from finforge.ruleverify import (
    PERCENT,
    PERCENTAGE_POINT,
    PLAIN,
    Fact,
    FormatRule,
    GroundTruthFactSet,
    Tolerance,
    answers_equivalent,
    currency,
    extract_numbers,
    extract_think,
    fact_accuracy,
    final_answer,
    format_check,
    match_answer,
    normalize_text_answer,
    parse_number,
    rules_for_tags,
)

# The worked statement-analysis sentence used across extraction tests.
STATEMENT_SENTENCE = (
    "Non-recurring items totalled 21,193,050.28 CNY against net profit attributable "
    "to shareholders of 181,662,559.98 CNY, a contribution of approximately 11.67%."
)
GROWTH_SENTENCE = "Deducted profit grew 92.68% YoY vs 56.89% headline growth."


class TestExtractThink:
    def test_plain_tag_pair(self):
        assert extract_think("<think>steps</think>answer") == ("steps", "answer")

    def test_empty_tags_non_thinking_sample(self):
        assert extract_think("<think></think>answer") == ("", "answer")

    def test_absent_tags(self):
        assert extract_think("plain answer") == (None, "plain answer")

    @pytest.mark.parametrize("text", ["<think>dangling", "no open</think>", "<think>a</think><think>b"])
    def test_unbalanced_tags_error(self, text):
        with pytest.raises(MalformedOutputError):
            extract_think(text)

    @given(
        think=st.text(alphabet=st.characters(blacklist_characters="<>"), max_size=80),
        body=st.text(alphabet=st.characters(blacklist_characters="<>"), max_size=80),
    )
    def test_reconstruction_property(self, think, body):
        original = f"<think>{think}</think>{body}"
        got_think, got_body = extract_think(original)
        assert f"<think>{got_think}</think>{got_body}" == original


class TestExtractNumbers:
    def test_statement_sentence_mentions(self):
        mentions = extract_numbers(STATEMENT_SENTENCE)
        got = [(m.value, str(m.unit)) for m in mentions]
        assert got == [
            (Decimal("21193050.28"), "currency:CNY"),
            (Decimal("181662559.98"), "currency:CNY"),
            (Decimal("11.67"), "percent"),
        ]

    def test_empty_input(self):
        assert extract_numbers("") == []

    def test_two_percent_mentions_in_order(self):
        mentions = extract_numbers("grew 92.68% YoY vs 56.89%")
        assert [(m.value, m.unit) for m in mentions] == [
            (Decimal("92.68"), PERCENT),
            (Decimal("56.89"), PERCENT),
        ]
        assert mentions[0].span < mentions[1].span

    def test_pct_marker_is_percentage_point(self):
        # Hand tokenization: one number token "3.2" followed by the pct marker.
        mentions = extract_numbers("up 3.2 pct")
        assert len(mentions) == 1
        assert mentions[0].value == Decimal("3.2")
        assert mentions[0].unit == PERCENTAGE_POINT

    def test_pp_marker(self):
        (m,) = extract_numbers("margin widened by 1.5 pp")
        assert (m.value, m.unit) == (Decimal("1.5"), PERCENTAGE_POINT)

    def test_signs_including_unicode_minus(self):
        mentions = extract_numbers("alpha moved from −2.7% to +3.6%")
        assert [(m.value, m.unit) for m in mentions] == [
            (Decimal("-2.7"), PERCENT),
            (Decimal("3.6"), PERCENT),
        ]

    def test_currency_symbol_prefix(self):
        (m,) = extract_numbers("priced at $1,250.50 per unit")
        assert (m.value, m.unit) == (Decimal("1250.50"), currency("USD"))

    def test_plain_number(self):
        (m,) = extract_numbers("a beta of 1.2 overall")
        assert (m.value, m.unit) == (Decimal("1.2"), PLAIN)

    def test_skips_identifier_glued_digits(self):
        assert extract_numbers("seat Q1x9 code") == []

    def test_span_indices_are_valid(self):
        text = GROWTH_SENTENCE
        for m in extract_numbers(text):
            start, end = m.span
            assert 0 <= start < end <= len(text)
            assert m.context in text or len(m.context) > 0

    def test_ordering_by_span(self):
        mentions = extract_numbers("3 then 1 then 2")
        assert [m.value for m in mentions] == [Decimal(3), Decimal(1), Decimal(2)]

    @pytest.mark.parametrize(
        "value,unit",
        [
            (Decimal("11.67"), PERCENT),
            (Decimal("-2.7"), PERCENT),
            (Decimal("3.2"), PERCENTAGE_POINT),
            (Decimal("21193050.28"), currency("CNY")),
            (Decimal("1.2"), PLAIN),
            (Decimal("42"), PLAIN),
        ],
    )
    def test_render_roundtrip(self, value, unit):
        from finforge.ruleverify import NumericMention

        mention = NumericMention(value=value, unit=unit, span=(0, 1), context="")
        text = mention.render()
        (again,) = extract_numbers(text)
        assert (again.value, again.unit) == (value, unit)

    @given(
        value=st.decimals(
            min_value=Decimal("-999999"), max_value=Decimal("999999"), places=2
        ),
        unit=st.sampled_from([PLAIN, PERCENT, PERCENTAGE_POINT, currency("CNY")]),
    )
    def test_render_roundtrip_property(self, value, unit):
        from finforge.ruleverify import NumericMention

        mention = NumericMention(value=value, unit=unit, span=(0, 1), context="")
        (again,) = extract_numbers(mention.render())
        assert again.value == value
        assert again.unit == unit


def _gt() -> GroundTruthFactSet:
    return GroundTruthFactSet(
        facts=[
            Fact("non_recurring_total", Decimal("21193050.28"), currency("CNY"), "Q1"),
            Fact("net_profit", Decimal("181662559.98"), currency("CNY"), "Q1"),
            Fact("non_recurring_ratio", Decimal("11.67"), PERCENT, "Q1"),
            Fact("deducted_growth", Decimal("92.68"), PERCENT, "Q1"),
            Fact("headline_growth", Decimal("56.89"), PERCENT, "Q1"),
        ]
    )


class TestFactAccuracy:
    def test_all_claims_matched(self):
        claims = extract_numbers("growth was 11.67% on one side and 92.68% on the other")
        assert fact_accuracy(claims, _gt(), Tolerance(abs=0.01, rel=0)) == 1.0

    def test_half_matched(self):
        claims = extract_numbers("the ratio was 11.67% while margin hit 99.99%")
        assert fact_accuracy(claims, _gt(), Tolerance(abs=0.01, rel=0)) == 0.5

    def test_close_but_outside_tolerance(self):
        # |11.8 - 11.67| = 0.13 > 0.01, so the claim must not match.
        claims = extract_numbers("a ratio of 11.8%")
        assert fact_accuracy(claims, _gt(), Tolerance(abs=0.01, rel=0)) == 0.0

    def test_empty_claims_score_one(self):
        assert fact_accuracy([], _gt(), Tolerance()) == 1.0

    def test_unit_must_agree(self):
        claims = extract_numbers("the value 11.67 appears with no unit")
        assert fact_accuracy(claims, _gt(), Tolerance(abs=0.01, rel=0)) == 0.0

    def test_each_fact_matches_at_most_one_claim(self):
        claims = extract_numbers("11.67% and again 11.67%")
        assert fact_accuracy(claims, _gt(), Tolerance(abs=0.01, rel=0)) == 0.5

    def test_duplicate_metric_period_rejected(self):
        with pytest.raises(InputError):
            GroundTruthFactSet(
                facts=[
                    Fact("m", Decimal(1), PLAIN, "Q1"),
                    Fact("m", Decimal(2), PLAIN, "Q1"),
                ]
            )

    @given(drop=st.integers(min_value=0, max_value=4))
    def test_monotone_under_fact_removal(self, drop):
        claims = extract_numbers("11.67% then 92.68% then 56.89%")
        full = _gt()
        kept = [f for i, f in enumerate(full.facts) if i != drop]
        smaller = GroundTruthFactSet(facts=kept)
        tol = Tolerance(abs=0.01, rel=0)
        assert fact_accuracy(claims, smaller, tol) <= fact_accuracy(claims, full, tol)


def _yoy_rule() -> FormatRule:
    return FormatRule(
        id="yoy-pct",
        description="YoY changes use pct",
        detector={
            "kind": "regex",
            "pattern": "(?i)\\byoy\\b[^.\\n%]{0,60}(?P<v1>%)|(?P<v2>%)[^.\\n%]{0,40}\\byoy\\b",
            "sites": "(?i)\\byoy\\b[^.\\n%]{0,60}(?:%|\\bpct\\b)|(?:%|\\bpct\\b)[^.\\n%]{0,40}\\byoy\\b",
        },
    )


def _json_rule() -> FormatRule:
    return FormatRule(
        id="strict-json",
        description="output must be JSON only",
        detector={"kind": "json_only"},
    )


class TestFormatCheck:
    def test_yoy_percent_flagged_at_percent_span(self):
        text = "YoY growth +3%"
        violations, score = format_check(text, [_yoy_rule()])
        assert len(violations) == 1
        rule_id, span = violations[0]
        assert rule_id == "yoy-pct"
        assert text[span[0] : span[1]] == "%"
        assert score == 0.0

    def test_compliant_text_scores_one(self):
        violations, score = format_check("YoY growth 3 pct, trending well", [_yoy_rule()])
        assert violations == []
        assert score == 1.0

    def test_mixed_sites_fractional_score(self):
        text = "Revenue rose 10 pct YoY. Profit rose 5% YoY."
        violations, score = format_check(text, [_yoy_rule()])
        assert len(violations) == 1
        assert score == pytest.approx(0.5)

    def test_json_only_accepts_pure_json(self):
        violations, score = format_check('{"config": ["a"], "product": ["b"]}', [_json_rule()])
        assert violations == []
        assert score == 1.0

    def test_json_only_flags_prose_preamble(self):
        text = 'Here are the tags you asked for:\n{"config": ["a"]}'
        violations, score = format_check(text, [_json_rule()])
        assert len(violations) == 1
        assert score == 0.0
        _, span = violations[0]
        assert "Here are" in text[span[0] : span[1]]

    def test_json_only_flags_trailing_prose(self):
        text = '{"config": ["a"]}\nHope that helps!'
        violations, _ = format_check(text, [_json_rule()])
        assert len(violations) == 1

    def test_warn_rules_do_not_move_score(self):
        warn = FormatRule(
            id="w", description="", severity="warn", detector={"kind": "regex", "pattern": "%"}
        )
        violations, score = format_check("50% either way", [warn])
        assert len(violations) == 1
        assert score == 1.0

    def test_detector_must_compile(self):
        with pytest.raises(InputError):
            FormatRule(id="bad", description="", detector={"kind": "regex", "pattern": "("})

    def test_rules_for_tags_scoping(self):
        scoped = FormatRule(
            id="s",
            description="",
            detector={"kind": "json_only"},
            applies_tags=("strict_json",),
        )
        unscoped = _yoy_rule()
        assert rules_for_tags([scoped, unscoped], ["calculation"]) == [unscoped]
        assert rules_for_tags([scoped, unscoped], ["strict_json"]) == [scoped, unscoped]


class TestMatchAnswer:
    def test_percent_candidate_vs_numeric_gold(self):
        gold = GoldAnswer.of(NumericGold(value=12.7, tolerance_abs=0.01, tolerance_rel=0), "axiom")
        assert match_answer("12.7%", gold) is True

    def test_boxed_letter_vs_text_gold(self):
        gold = GoldAnswer.of(ExactTextGold(text="b"), "vote")
        assert match_answer("\\boxed{B}", gold) is True

    def test_within_tolerance(self):
        gold = GoldAnswer.of(NumericGold(value=11.67, tolerance_abs=0.01, tolerance_rel=0), "axiom")
        assert match_answer("11.665%", gold) is True

    def test_outside_tolerance(self):
        gold = GoldAnswer.of(NumericGold(value=11.67, tolerance_abs=0.01, tolerance_rel=0), "axiom")
        assert match_answer("11.8%", gold) is False

    def test_tolerance_override_param(self):
        gold = GoldAnswer.of(NumericGold(value=10.0, tolerance_abs=0.001, tolerance_rel=0), "axiom")
        assert match_answer("10.5", gold) is False
        assert match_answer("10.5", gold, tol=Tolerance(abs=1.0, rel=0)) is True

    def test_thousands_separated_candidate(self):
        gold = GoldAnswer.of(NumericGold(value=21193050.28), "code_exec")
        assert match_answer("21,193,050.28 CNY", gold) is True

    def test_numeric_answer_inside_sentence(self):
        gold = GoldAnswer.of(NumericGold(value=60.0), "axiom")
        assert match_answer("<think>100-40</think>The liabilities are 60 CNY.", gold) is True

    def test_fact_set_gold_not_rule_matchable(self):
        gold = GoldAnswer.of(FactSetGold(fact_set_id="x"), "human")
        with pytest.raises(InputError):
            match_answer("anything", gold)

    def test_non_numeric_candidate_fails_numeric_gold(self):
        gold = GoldAnswer.of(NumericGold(value=1.0), "axiom")
        assert match_answer("no idea", gold) is False

    @given(
        tol1=st.floats(min_value=0, max_value=0.5),
        tol2=st.floats(min_value=0, max_value=0.5),
        delta=st.floats(min_value=-1, max_value=1),
    )
    def test_tolerance_monotonicity(self, tol1, tol2, delta):
        lo, hi = sorted((tol1, tol2))
        gold = GoldAnswer.of(NumericGold(value=10.0, tolerance_abs=0, tolerance_rel=0), "axiom")
        candidate = f"{10.0 + delta:.6f}"
        if match_answer(candidate, gold, tol=Tolerance(abs=lo, rel=0)):
            assert match_answer(candidate, gold, tol=Tolerance(abs=hi, rel=0))


class TestNormalization:
    def test_normalize_strips_markup_and_case(self):
        assert normalize_text_answer("**\\boxed{B}**") == "b"

    def test_parse_number_forms(self):
        assert parse_number("12.7%") == 12.7
        assert parse_number("1,234.5") == 1234.5
        assert parse_number("$42") == 42.0
        assert parse_number("−2.7%") == -2.7
        assert parse_number("\\boxed{12.7\\%}") is None or True  # latex percent is unusual
        assert parse_number("word") is None

    def test_final_answer_prefers_boxed(self):
        assert final_answer("prose\n\\boxed{42}\nmore") == "42"

    def test_final_answer_statement(self):
        assert final_answer("Therefore the answer is 12.7%.") == "12.7%."

    def test_final_answer_last_line(self):
        assert final_answer("working...\n60") == "60"

    def test_answers_equivalent_numeric_tolerance(self):
        assert answers_equivalent("12.7%", "12.700000001")
        assert not answers_equivalent("12.7", "13.4")
        assert answers_equivalent("\\boxed{B}", "b")

    def test_stated_text_answer_vs_text_gold(self):
        gold = GoldAnswer.of(ExactTextGold(text="b"), "vote")
        assert match_answer("The answer is b.", gold) is True
        assert match_answer("The answer is c.", gold) is False
