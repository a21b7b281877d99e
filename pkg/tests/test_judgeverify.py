from __future__ import annotations

import json

import pytest
from fastapi import FastAPI, Request
from fastapi.testclient import TestClient
from hypothesis import given, strategies as st

from finforge.errors import InputError, JudgeUnavailableError
from finforge.funnel import FactSetGold, GoldAnswer
from finforge.judgeverify import (
    HTTPJudgeClient,
    JudgeRequest,
    MockJudgeClient,
    RoutingEntry,
    ScoringContext,
    VerifierRouting,
    aggregate_reward,
    default_routing,
    judge_consistency,
    judge_structure,
    judge_style,
    score_response,
)
from finforge.kbgen import generate_deduction_task, generate_knowledge_task, PointSelector

SOURCE = (
    "Non-recurring items totalled 21,193,050.28 CNY.\n"
    "Net profit attributable to shareholders reached 181,662,559.98 CNY.\n"
    "Deducted profit grew 92.68% while headline profit grew 56.89%."
)


class TestMockConsistency:
    def test_supported_claim_scores_one(self, mock_judge):
        verdict = judge_consistency(SOURCE, "Non-recurring items totalled 21,193,050.28 CNY.", mock_judge)
        assert verdict.score == 1.0
        assert verdict.flags == ()

    def test_absent_number_flagged_as_hallucination(self, mock_judge):
        verdict = judge_consistency(SOURCE, "Deducted profit grew 95.00% in the quarter.", mock_judge)
        assert verdict.score < 1.0
        assert any(f.kind == "hallucination" for f in verdict.flags)

    def test_empty_output_vacuously_consistent(self, mock_judge):
        verdict = judge_consistency(SOURCE, "", mock_judge)
        assert verdict.score == 1.0
        assert verdict.flags == ()

    def test_unsupported_wording_flagged(self, mock_judge):
        verdict = judge_consistency(SOURCE, "The board approved a share buyback.", mock_judge)
        assert verdict.score == 0.0
        assert verdict.flags[0].kind == "unsupported"


class TestMockStructure:
    def test_both_themes_present(self, mock_judge):
        text = "Profitability improved on wider margins.\n\nFuture outlook remains stable."
        verdict = judge_structure(text, ("Profitability", "Future Outlook"), mock_judge)
        assert verdict.score == 1.0

    def test_half_coverage(self, mock_judge):
        verdict = judge_structure(
            "Profitability improved.", ("Profitability", "Future Outlook"), mock_judge
        )
        assert verdict.score == 0.5
        assert verdict.flags[0].kind == "missing_theme"

    def test_empty_output_zero(self, mock_judge):
        verdict = judge_structure("", ("Profitability",), mock_judge)
        assert verdict.score == 0.0

    def test_themes_required(self, mock_judge):
        with pytest.raises(InputError):
            judge_structure("text", (), mock_judge)


class TestMockStyle:
    def test_concise_text_scores_one(self, mock_judge):
        verdict = judge_style("Margins widened. Costs fell.", mock_judge)
        assert verdict.score == 1.0

    def test_filler_padding_lowers_score(self, mock_judge):
        # 3 of 10 tokens are filler words: expected score 1 - 0.3 = 0.7.
        text = "very basically actually margins widened on lower costs this quarter"
        verdict = judge_style(text, mock_judge)
        assert verdict.score == pytest.approx(0.7)

    def test_overlong_sentence_penalty(self, mock_judge):
        long_sentence = " ".join(["word"] * 45) + "."
        verdict = judge_style(long_sentence, mock_judge)
        assert verdict.score == pytest.approx(0.0)

    def test_empty_text_zero(self, mock_judge):
        assert judge_style("", mock_judge).score == 0.0


class TestMockReasoningConsistency:
    def test_matching_numeric_traces(self, mock_judge):
        v = mock_judge.judge(
            JudgeRequest(kind="reasoning_consistency", source="5% + 1.1 x 7%", output="premium 7%, base 5%, beta 1.1")
        )
        assert v.score == 1.0

    def test_diverging_numeric_traces(self, mock_judge):
        v = mock_judge.judge(
            JudgeRequest(kind="reasoning_consistency", source="5% + 1.1 x 7%", output="5% + 1.1 x 9%")
        )
        assert v.score == 0.0
        assert v.flags[0].kind == "contradiction"


class TestJudgeRequestInvariants:
    def test_structure_needs_themes(self):
        with pytest.raises(InputError):
            JudgeRequest(kind="structure", source="", output="x")

    def test_non_structure_must_not_carry_themes(self):
        with pytest.raises(InputError):
            JudgeRequest(kind="style", source="", output="x", expected_themes=("a",))

    def test_unknown_kind(self):
        with pytest.raises(InputError):
            JudgeRequest(kind="vibes", source="", output="x")


class TestHTTPJudgeClient:
    def _client_against(self, app) -> HTTPJudgeClient:
        return HTTPJudgeClient("/v1/judge", client=TestClient(app), backoff_s=0.0)

    def test_wire_roundtrip(self):
        app = FastAPI()
        seen = {}

        @app.post("/v1/judge")
        async def judge(request: Request):
            body = await request.json()
            seen.update(body)
            return {"score": 0.75, "flags": [{"kind": "note", "note": "n"}], "raw": "ok"}

        verdict = self._client_against(app).judge(
            JudgeRequest(kind="consistency", source="s", output="o")
        )
        assert verdict.score == 0.75
        assert verdict.flags[0].kind == "note"
        assert seen["kind"] == "consistency"
        assert "request_id" in seen

    def test_malformed_reply_errors_after_retries(self):
        app = FastAPI()
        calls = {"n": 0}

        @app.post("/v1/judge")
        async def judge():
            calls["n"] += 1
            return {"verdict": "great"}  # no score: strict contract violation

        with pytest.raises(JudgeUnavailableError):
            self._client_against(app).judge(
                JudgeRequest(kind="style", source="", output="o")
            )
        assert calls["n"] == 3  # initial try + 2 retries

    def test_out_of_range_score_rejected(self):
        app = FastAPI()

        @app.post("/v1/judge")
        async def judge():
            return {"score": 1.7}

        with pytest.raises(JudgeUnavailableError):
            self._client_against(app).judge(
                JudgeRequest(kind="style", source="", output="o")
            )


class TestRouting:
    def test_default_routing_constraints_hold(self):
        routing = default_routing()
        assert routing.entry("calculation").judge_weight == 0.0
        assert routing.entry("intent").rule_weight == 0.0
        commenting = routing.entry("commenting")
        assert commenting.rule_weight > 0 and commenting.judge_weight > 0

    def test_calculation_must_be_rule_only(self):
        with pytest.raises(InputError):
            VerifierRouting(entries={"calculation": RoutingEntry(0.5, 0.5)})

    def test_intent_must_be_judge_only(self):
        with pytest.raises(InputError):
            VerifierRouting(entries={"intent": RoutingEntry(0.5, 0.5)})

    def test_commenting_must_blend(self):
        with pytest.raises(InputError):
            VerifierRouting(entries={"commenting": RoutingEntry(1.0, 0.0)})

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InputError):
            RoutingEntry(0.6, 0.6)


class TestAggregateReward:
    def test_commenting_blend_arithmetic(self):
        breakdown = aggregate_reward(
            "commenting",
            {"fact": 1.0, "format": 1.0},
            {"consistency": 0.8, "structure": 0.8, "style": 0.8},
            default_routing(),
        )
        assert breakdown.scalar == pytest.approx(0.5 * 1.0 + 0.5 * 0.8)

    def test_rule_only_route(self):
        breakdown = aggregate_reward("calculation", {"answer_match": 1.0}, {}, default_routing())
        assert breakdown.scalar == 1.0
        assert list(breakdown.components) == ["rule.answer_match"]

    def test_judge_only_route(self):
        breakdown = aggregate_reward("intent", {}, {"consistency": 0.6}, default_routing())
        assert breakdown.scalar == pytest.approx(0.6)

    def test_missing_component_errors(self):
        with pytest.raises(InputError):
            aggregate_reward("commenting", {"fact": 1.0}, {"consistency": 1.0, "structure": 1.0, "style": 1.0}, default_routing())

    def test_out_of_range_component_errors(self):
        with pytest.raises(InputError):
            aggregate_reward("calculation", {"answer_match": 1.3}, {}, default_routing())

    def test_recomputable_from_stored_breakdown(self):
        breakdown = aggregate_reward(
            "commenting",
            {"fact": 0.7, "format": 0.25},
            {"consistency": 0.9, "structure": 1.0, "style": 0.5},
            default_routing(),
        )
        assert abs(breakdown.recompute() - breakdown.scalar) <= 1e-12

    @given(
        fact=st.floats(min_value=0, max_value=1),
        fmt=st.floats(min_value=0, max_value=1),
        cons=st.floats(min_value=0, max_value=1),
        struct=st.floats(min_value=0, max_value=1),
        style=st.floats(min_value=0, max_value=1),
    )
    def test_bounded_and_recomputable_property(self, fact, fmt, cons, struct, style):
        breakdown = aggregate_reward(
            "commenting",
            {"fact": fact, "format": fmt},
            {"consistency": cons, "structure": struct, "style": style},
            default_routing(),
        )
        assert 0.0 <= breakdown.scalar <= 1.0
        assert abs(breakdown.recompute() - breakdown.scalar) <= 1e-12

    @given(
        base=st.floats(min_value=0, max_value=1),
        bumped=st.floats(min_value=0, max_value=1),
    )
    def test_monotonic_in_single_component(self, base, bumped):
        lo, hi = sorted((base, bumped))
        fixed = {"consistency": 0.5, "structure": 0.5, "style": 0.5}
        low = aggregate_reward("commenting", {"fact": lo, "format": 0.5}, fixed, default_routing())
        high = aggregate_reward("commenting", {"fact": hi, "format": 0.5}, fixed, default_routing())
        assert high.scalar >= low.scalar - 1e-15


class TestScoreResponse:
    def test_calculation_route_counts_zero_judge_calls(self, registry, mock_judge):
        task = generate_deduction_task(registry, "acct_identity", "liabilities", rng_seed=7)
        ctx = ScoringContext(judge_client=mock_judge)
        answer = f"{task.gold.payload.value}"
        breakdown = score_response(task, answer, ctx)
        assert breakdown.scalar == 1.0
        assert mock_judge.call_count == 0

    def test_wrong_answer_scores_zero(self, registry, mock_judge):
        task = generate_deduction_task(registry, "acct_identity", "liabilities", rng_seed=7)
        ctx = ScoringContext(judge_client=mock_judge)
        assert score_response(task, "999999999", ctx).scalar == 0.0

    def test_intent_route_uses_judge_only(self, kb, templates, mock_judge):
        task = generate_knowledge_task(
            kb, templates, PointSelector(), 3, "tmpl-intent-01", "intent", 0
        )
        ctx = ScoringContext(judge_client=mock_judge)
        breakdown = score_response(task, "account service", ctx)
        assert set(breakdown.components) == {"judge.consistency"}
        assert mock_judge.call_count == 1

    def test_mock_determinism(self, kb, templates):
        from finforge.ruleverify import FormatRule
        from finforge.engine import load_fact_sets
        from finforge.config import load_config

        cfg = load_config(store_dir="unused")
        task = generate_knowledge_task(
            kb, templates, PointSelector(), 3, "tmpl-commenting-01", "commenting", 0
        )
        task.gold = GoldAnswer.of(FactSetGold(fact_set_id="cf_q1_2023"), "human")
        response = (
            "Profitability: deducted profit grew 92.68 pct YoY.\n\n"
            "Future outlook remains stable."
        )
        results = []
        for _ in range(2):
            judge = MockJudgeClient()
            ctx = ScoringContext(
                judge_client=judge,
                format_rules=FormatRule.load_all(cfg.format_rules_path),
                fact_sets=load_fact_sets(cfg.fact_sets_path),
            )
            b = score_response(task, response, ctx)
            results.append((b.scalar, tuple(sorted(b.components.items()))))
        assert results[0] == results[1]
