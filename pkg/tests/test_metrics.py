"""Tests for the scoring primitives and the batch evaluation harness."""

from __future__ import annotations

import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from netcfg_agent.core import Intent, parse_configuration
from netcfg_agent.metrics import (
    CaseMeasurement,
    EvalCase,
    MetricsRecord,
    build_records,
    complexity_score,
    evaluate_batch,
    goal_accuracy,
    load_cases,
    min_max_normalize,
    summarize,
    total_dura_time,
    total_len,
    write_records,
    write_summary_csv,
)
from netcfg_agent.verifier import PatternSyntaxError
from netcfg_agent.agent import run_session

from conftest import OAM_CONFIG, scripted_mock

OAM_PATTERN = (
    "ethernet oam remote-failure {critical-event|dying-gasp|link-fault} "
    "action error-block-interface"
)


def _case(mandatory, relevant=(), text="Configure link fault handling"):
    return EvalCase(
        intent=Intent(id="c1", text=text),
        mandatory_patterns=tuple(mandatory),
        relevant_patterns=tuple(relevant),
    )


def _oam_config():
    return parse_configuration(OAM_CONFIG, "c1")


class TestGoalAccuracy:
    def test_full_satisfaction(self):
        assert goal_accuracy(_oam_config(), _case([OAM_PATTERN])) == 1

    def test_partial_when_mandatory_missing(self):
        # oracle: set inclusion of matched patterns
        case = _case([OAM_PATTERN, "ethernet oam enable"])
        config = _oam_config()
        matched = {OAM_PATTERN}  # the only mandatory pattern present in the config
        assert matched != set(case.mandatory_patterns)
        assert matched & set(case.mandatory_patterns)
        assert goal_accuracy(config, case) == 0

    def test_fail_when_disjoint(self):
        case = _case(["router bgp <as:integer-range>"])
        assert goal_accuracy(_oam_config(), case) == -1

    def test_relevant_pattern_gives_partial(self):
        case = _case(
            ["router bgp <as:integer-range>"],
            relevant=["interface <n:interface-id>"],
        )
        assert goal_accuracy(_oam_config(), case) == 0

    def test_placeholders_match_by_class(self):
        case = _case(["interface <n:interface-id>"])
        assert goal_accuracy(_oam_config(), case) == 1

    def test_line_and_block_order_irrelevant(self):
        rng = random.Random(3)
        case = _case([OAM_PATTERN, "configure terminal"])
        lines = OAM_CONFIG.splitlines()
        for _ in range(25):
            rng.shuffle(lines)
            config = parse_configuration("\n".join(lines), "c1")
            assert goal_accuracy(config, case) == 1

    def test_bad_pattern_raises(self):
        with pytest.raises(PatternSyntaxError):
            goal_accuracy(_oam_config(), _case(["ip address <oops>"]))

    def test_mandatory_patterns_required(self):
        with pytest.raises(ValueError):
            _case([])


class TestArithmetic:
    @pytest.mark.parametrize("a,b,expected", [(120, 380, 500), (0, 0, 0), (1, 0, 1)])
    def test_total_len(self, a, b, expected):
        assert total_len(a, b) == expected

    def test_total_len_rejects_negative(self):
        with pytest.raises(ValueError):
            total_len(-1, 5)

    @pytest.mark.parametrize(
        "values,expected",
        [
            ([10, 20, 30], [0.0, 0.5, 1.0]),
            ([5, 5, 5], [0.0, 0.0, 0.0]),
            ([3, 9], [0.0, 1.0]),
        ],
    )
    def test_min_max_normalize(self, values, expected):
        assert min_max_normalize(values) == expected

    def test_min_max_empty_rejected(self):
        with pytest.raises(ValueError):
            min_max_normalize([])

    @pytest.mark.parametrize("t,c,expected", [(90, 30, 2.0), (0, 0, 0.0), (60, 0, 1.0)])
    def test_total_dura_time(self, t, c, expected):
        assert total_dura_time(t, c) == expected

    @pytest.mark.parametrize("l,t,expected", [(0.4, 0.6, 0.5), (0, 0, 0.0), (1, 1, 1.0)])
    def test_complexity_score(self, l, t, expected):
        assert complexity_score(l, t) == expected

    def test_complexity_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            complexity_score(1.2, 0.5)
        with pytest.raises(ValueError):
            complexity_score(0.5, -0.1)


@given(st.lists(st.floats(min_value=0, max_value=1e9), min_size=1, max_size=50))
def test_normalization_bounds(values):
    normalized = min_max_normalize(values)
    assert all(0.0 <= v <= 1.0 for v in normalized)
    if max(values) > min(values):
        assert normalized[values.index(min(values))] == 0.0
        assert normalized[values.index(max(values))] == 1.0


@given(
    st.lists(st.integers(min_value=0, max_value=10**6), min_size=2, max_size=30),
    st.integers(min_value=1, max_value=1000),
)
def test_normalization_scale_invariance(values, factor):
    scaled = [v * factor for v in values]
    assert min_max_normalize([float(v) for v in values]) == pytest.approx(
        min_max_normalize([float(v) for v in scaled])
    )


class TestRecords:
    def test_record_invariants(self):
        with pytest.raises(ValueError):
            MetricsRecord(
                intent_id="x",
                syntax_score=1,
                goal_score=1,
                trans_len=10,
                config_len=10,
                total_len=30,
                total_dura_time=1.0,
                norm_total_len=0.0,
                norm_total_dura_time=0.0,
                complexity_score=0.0,
            )
        with pytest.raises(ValueError):
            MetricsRecord(
                intent_id="x",
                syntax_score=1,
                goal_score=1,
                trans_len=10,
                config_len=10,
                total_len=20,
                total_dura_time=1.0,
                norm_total_len=0.5,
                norm_total_dura_time=0.5,
                complexity_score=0.9,
            )

    def test_two_case_hand_computation(self):
        # oracle: direct arithmetic over the two measurements
        measurements = [
            CaseMeasurement("a", 1, 1, 40, 60, 2.0, False, "approved"),
            CaseMeasurement("b", 1, 1, 100, 200, 2.0, False, "approved"),
        ]
        records = build_records(measurements)
        assert [r.total_len for r in records] == [100, 300]
        assert [r.norm_total_len for r in records] == [0.0, 1.0]
        assert [r.norm_total_dura_time for r in records] == [0.0, 0.0]
        assert [r.complexity_score for r in records] == [0.0, 0.5]


def _runner(grammar):
    def run(intent: Intent):
        mock = scripted_mock(generate=OAM_CONFIG)
        return run_session(intent, mock, grammar)

    return run


class TestEvaluateBatch:
    def test_identical_configs_degenerate_normalization(self, grammar):
        cases = [
            EvalCase(
                intent=Intent(id=f"i{n}", text="Configure link fault handling"),
                mandatory_patterns=(OAM_PATTERN,),
            )
            for n in range(3)
        ]
        records, summary = evaluate_batch(cases, _runner(grammar), grammar)
        assert all(r.complexity_score == 0.0 for r in records)
        assert summary.syntax.correct == 3
        assert summary.goal.correct == 3

    def test_failed_runner_is_flagged_not_fatal(self, grammar):
        cases = [
            EvalCase(
                intent=Intent(id="ok", text="Configure link fault handling"),
                mandatory_patterns=(OAM_PATTERN,),
            ),
            EvalCase(
                intent=Intent(id="boom", text="explode"),
                mandatory_patterns=(OAM_PATTERN,),
            ),
        ]

        def runner(intent: Intent):
            if intent.id == "boom":
                raise RuntimeError("runner crashed")
            return _runner(grammar)(intent)

        records, summary = evaluate_batch(cases, runner, grammar)
        flagged = [r for r in records if r.failed]
        assert len(flagged) == 1
        assert flagged[0].intent_id == "boom"
        assert flagged[0].syntax_score == -1
        assert flagged[0].goal_score == -1
        assert summary.failed_count == 1

    def test_concurrent_jobs_preserve_order(self, grammar):
        cases = [
            EvalCase(
                intent=Intent(id=f"i{n}", text="Configure link fault handling"),
                mandatory_patterns=(OAM_PATTERN,),
            )
            for n in range(6)
        ]
        records, _ = evaluate_batch(cases, _runner(grammar), grammar, jobs=3)
        assert [r.intent_id for r in records] == [f"i{n}" for n in range(6)]

    def test_empty_batch_rejected(self, grammar):
        with pytest.raises(ValueError):
            evaluate_batch([], _runner(grammar), grammar)


class TestSummary:
    def test_fractions_sum_to_one(self):
        rng = random.Random(11)
        measurements = [
            CaseMeasurement(
                f"i{n}",
                rng.choice([-1, 0, 1]),
                rng.choice([-1, 0, 1]),
                rng.randint(0, 500),
                rng.randint(0, 500),
                rng.random() * 10,
                False,
                "approved",
            )
            for n in range(37)
        ]
        summary = summarize(build_records(measurements))
        for breakdown in (summary.syntax, summary.goal):
            assert sum(breakdown.fractions().values()) == pytest.approx(1.0, rel=1e-12)

    def test_render_table_mentions_counts(self):
        measurements = [
            CaseMeasurement("a", 1, 1, 10, 10, 1.0, False, "approved"),
            CaseMeasurement("b", 0, 0, 20, 20, 2.0, False, "exhausted"),
        ]
        table = summarize(build_records(measurements)).render_table()
        assert "cases: 2" in table
        assert "correct 50% (1)" in table


class TestFiles:
    def test_load_cases(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        path.write_text(
            json.dumps(
                {
                    "id": "c1",
                    "text": "Enable OSPF",
                    "form": "requirement",
                    "mandatory_patterns": ["router ospf <n:integer-range>"],
                    "relevant_patterns": ["network <a:ipv4>"],
                }
            )
            + "\n"
        )
        cases = load_cases(path)
        assert cases[0].intent.id == "c1"
        assert cases[0].mandatory_patterns == ("router ospf <n:integer-range>",)

    def test_write_records_and_summary(self, tmp_path):
        measurements = [CaseMeasurement("a", 1, 1, 10, 10, 1.0, False, "approved")]
        records = build_records(measurements)
        write_records(records, tmp_path / "records.jsonl")
        parsed = [json.loads(l) for l in (tmp_path / "records.jsonl").read_text().splitlines()]
        assert parsed[0]["intent_id"] == "a"
        assert parsed[0]["total_len"] == 20
        write_summary_csv(summarize(records), tmp_path / "summary.csv")
        content = (tmp_path / "summary.csv").read_text()
        assert "metric,key,value" in content
        assert "syntax,count_correct,1" in content
