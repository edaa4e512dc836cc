"""Tests for the grammar loader, line validation, and verification reports."""

from __future__ import annotations

import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from netcfg_agent.core import ConfigLine, parse_configuration
from netcfg_agent.verifier import (
    DuplicateEntryError,
    EmptyConfigurationError,
    Finding,
    GrammarParseError,
    LineVerdict,
    VerificationReport,
    build_report,
    default_grammar,
    load_grammar,
    parse_grammar,
    parse_pattern,
    syntax_score,
    validate_line,
    verify_config,
)

from conftest import OAM_CONFIG, OSPF_CONFIG


def _verify_text(text, grammar):
    return verify_config(parse_configuration(text, "test"), grammar)


class TestGrammarLoading:
    def test_shipped_grammar_size(self, grammar):
        # oracle: count the entry lines in the authored file itself
        data = (
            Path(__file__).parent.parent
            / "src"
            / "netcfg_agent"
            / "data"
            / "grammar.cfg"
        ).read_text()
        expected = sum(
            1
            for line in data.splitlines()
            if line.strip() and not line.strip().startswith(("#", "["))
        )
        assert grammar.entry_count == expected
        assert grammar.entry_count >= 40

    def test_duplicate_entry_rejected(self):
        text = "[mode: exec]\nenable -> privileged\nenable -> privileged\n"
        with pytest.raises(DuplicateEntryError) as info:
            parse_grammar(text)
        assert info.value.line_no == 3

    def test_duplicates_detected_across_placeholder_names(self):
        text = (
            "[mode: exec]\nping <a:ipv4>\nping <b:ipv4>\n"
        )
        with pytest.raises(DuplicateEntryError):
            parse_grammar(text)

    def test_parse_error_carries_location(self):
        with pytest.raises(GrammarParseError) as info:
            parse_grammar("[mode: exec]\nping <target>\n", source="bad.cfg")
        assert info.value.line_no == 2
        assert "bad.cfg" in str(info.value)

    def test_entry_before_header_rejected(self):
        with pytest.raises(GrammarParseError):
            parse_grammar("enable\n")

    def test_unknown_mode_rejected(self):
        with pytest.raises(GrammarParseError):
            parse_grammar("[mode: kernel]\nenable\n")

    def test_unknown_value_class_rejected(self):
        with pytest.raises(GrammarParseError):
            parse_grammar("[mode: exec]\nping <t:ipv6>\n")

    def test_excludes_must_reference_existing_entry(self):
        with pytest.raises(GrammarParseError):
            parse_grammar('[mode: exec]\nenable !excludes="disable"\n')

    def test_annotation_placeholder_must_exist(self):
        with pytest.raises(GrammarParseError):
            parse_grammar("[mode: exec]\nenable !declares=x:nope\n")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "g.cfg"
        path.write_text("[mode: exec]\nenable -> privileged\n")
        assert load_grammar(path).entry_count == 1


class TestPatternSyntax:
    def test_choice_and_placeholder_roundtrip(self):
        tokens = parse_pattern("ip route <a:ipv4> {fast|slow}")
        assert len(tokens) == 4

    def test_malformed_tokens_raise(self):
        for bad in ("{}", "<x>", "<x:>", "{a|}", "a>b"):
            with pytest.raises(Exception):
                parse_pattern(bad)


class TestValidateLine:
    def test_full_match_in_interface_mode(self, grammar):
        line = ConfigLine(
            "ethernet oam remote-failure link-fault action error-block-interface", 0
        )
        verdict, mode = validate_line(line, "interface-config", grammar)
        assert verdict.value == 1
        assert mode == "interface-config"

    def test_strict_prefix_scores_zero(self, grammar):
        verdict, _ = validate_line(ConfigLine("interface", 0), "global-config", grammar)
        assert verdict.value == 0
        assert "incomplete" in verdict.detail

    def test_unknown_command_scores_minus_one(self, grammar):
        for mode in ("exec", "privileged", "global-config"):
            verdict, _ = validate_line(ConfigLine("frobnicate now", 0), mode, grammar)
            assert verdict.value == -1

    def test_mode_transition_followed(self, grammar):
        verdict, mode = validate_line(ConfigLine("enable", 0), "exec", grammar)
        assert verdict.value == 1
        assert mode == "privileged"

    def test_failed_class_scores_zero(self, grammar):
        verdict, _ = validate_line(
            ConfigLine("destination-ip 300.1.1.300", 0), "subsystem-config", grammar
        )
        assert verdict.value == 0
        assert verdict.failed_placeholder is not None

    def test_deterministic(self, grammar):
        line = ConfigLine("ip access-group 101 in", 0)
        first = validate_line(line, "interface-config", grammar)
        second = validate_line(line, "interface-config", grammar)
        assert first == second


class TestVerifyConfig:
    def test_valid_mode_chain_approved(self, grammar):
        report = _verify_text(OAM_CONFIG, grammar)
        assert report.approved
        assert report.syntax_score == 1
        assert report.findings == ()

    def test_missing_mode_entry_is_mode_error(self, grammar):
        # oracle: hand trace of the mode machine.
        #   enable            exec -> privileged
        #   interface ...     not a privileged command, but valid in global-config
        lines = OAM_CONFIG.splitlines()
        del lines[1]  # drop "configure terminal"
        report = _verify_text("\n".join(lines), grammar)
        assert not report.approved
        mode_errors = [f for f in report.findings if f.kind == "mode-error"]
        assert mode_errors
        assert any(
            "interface GigabitEthernet0/1" in f.message and "global-config" in f.message
            for f in mode_errors
        )

    def test_unknown_command_yields_syntax_finding(self, grammar):
        report = _verify_text("enable\nfrobnicate now", grammar)
        assert report.syntax_score == -1
        syntax = [f for f in report.findings if f.kind == "syntax"]
        assert len(syntax) == 1
        assert syntax[0].suggestion

    def test_empty_configuration_rejected(self, grammar):
        with pytest.raises(EmptyConfigurationError):
            verify_config(parse_configuration("", "x"), grammar)

    def test_blocks_validated_independently(self, grammar):
        # identical block twice, split by the delimiter: both start in exec
        text = f"{OAM_CONFIG}\n~~~\n{OAM_CONFIG}"
        report = _verify_text(text, grammar)
        assert report.approved
        assert len(report.line_verdicts) == 2

    def test_mode_neutral_lines_commute(self, grammar):
        base = "enable\nconfigure terminal\ninterface GigabitEthernet0/1"
        a = _verify_text(f"{base}\nduplex auto\nspeed 100", grammar)
        b = _verify_text(f"{base}\nspeed 100\nduplex auto", grammar)
        assert sorted(v.value for blk in a.line_verdicts for v in blk) == sorted(
            v.value for blk in b.line_verdicts for v in blk
        )


class TestSemanticRules:
    def test_missing_sla_declaration(self, grammar):
        # oracle: symbol-table walk over the block
        text = "enable\nconfigure terminal\nip sla schedule 5 life forever start-time now"
        declared = set()
        expected_missing = []
        for line in text.splitlines():
            tokens = line.split()
            if tokens[:2] == ["ip", "sla"] and tokens[2].isdigit():
                declared.add(tokens[2])
            if tokens[:3] == ["ip", "sla", "schedule"] and tokens[3] not in declared:
                expected_missing.append(tokens[3])
        assert expected_missing == ["5"]

        report = _verify_text(text, grammar)
        deps = [f for f in report.findings if f.kind == "semantic-dependency"]
        assert len(deps) == 1
        assert "ip-sla 5" in deps[0].message
        assert "ip sla 5" in deps[0].suggestion

    def test_declared_sla_passes(self, grammar):
        text = (
            "enable\nconfigure terminal\nip sla 5\nicmp-echo 10.1.1.1\nexit\n"
            "ip sla schedule 5 life forever start-time now"
        )
        report = _verify_text(text, grammar)
        assert not [f for f in report.findings if f.kind == "semantic-dependency"]
        assert report.approved

    def test_ospf_network_under_router_clean(self, grammar):
        report = _verify_text(OSPF_CONFIG, grammar)
        assert report.approved

    def test_out_of_range_octet_flagged(self, grammar):
        text = (
            "enable\nconfigure terminal\ninterface GigabitEthernet0/1\n"
            "ip address 300.1.1.1 255.255.255.0"
        )
        report = _verify_text(text, grammar)
        assert report.syntax_score == 0
        value_findings = [f for f in report.findings if "octet" in f.message]
        assert len(value_findings) == 1
        assert value_findings[0].kind == "incomplete"

    def test_shutdown_conflict_same_span(self, grammar):
        text = (
            "enable\nconfigure terminal\ninterface GigabitEthernet0/1\n"
            "shutdown\nno shutdown"
        )
        report = _verify_text(text, grammar)
        conflicts = [f for f in report.findings if f.kind == "semantic-conflict"]
        assert len(conflicts) == 1
        assert "shutdown" in conflicts[0].message

    def test_no_conflict_across_mode_spans(self, grammar):
        text = (
            "enable\nconfigure terminal\ninterface GigabitEthernet0/1\nshutdown\nexit\n"
            "interface GigabitEthernet0/1\nno shutdown"
        )
        report = _verify_text(text, grammar)
        assert not [f for f in report.findings if f.kind == "semantic-conflict"]


def _syntax_score_oracle(values):
    # direct three-case reading of the aggregation rule
    if all(v == 1 for v in values):
        return 1
    if any(v == -1 for v in values):
        return -1
    return 0


@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=40))
def test_syntax_score_matches_case_analysis(values):
    assert syntax_score(values) == _syntax_score_oracle(values)


def test_syntax_score_empty_is_valid():
    assert syntax_score([]) == 1


class TestReports:
    def test_approved_requires_no_findings(self):
        finding = Finding(
            kind="syntax", severity="high", block=0, line=0, message="m", suggestion="s"
        )
        with pytest.raises(ValueError):
            VerificationReport(
                approved=True,
                line_verdicts=((LineVerdict(-1, None, "x"),),),
                findings=(finding,),
                syntax_score=-1,
            )

    def test_verdict_one_requires_matched_entry(self):
        with pytest.raises(ValueError):
            LineVerdict(1, None, "claims full match without an entry")

    def test_score_consistency_enforced(self):
        verdicts = ((LineVerdict(-1, None, "bad"),),)
        with pytest.raises(ValueError):
            VerificationReport(
                approved=False,
                line_verdicts=verdicts,
                findings=(
                    Finding(
                        kind="syntax",
                        severity="high",
                        block=0,
                        line=0,
                        message="m",
                        suggestion="s",
                    ),
                ),
                syntax_score=1,
            )

    def test_build_report_derives_fields(self, grammar):
        report = _verify_text("enable\nfrobnicate now", grammar)
        assert not report.approved
        assert report.syntax_score == -1

    def test_approval_implies_valid_syntax(self, grammar):
        report = _verify_text(OAM_CONFIG, grammar)
        assert report.approved and report.syntax_score == 1

    def test_finding_requires_suggestion(self):
        with pytest.raises(ValueError):
            Finding(
                kind="syntax", severity="high", block=0, line=0, message="m", suggestion=" "
            )

    def test_semantic_findings_allowed_with_valid_syntax(self, grammar):
        # valid lines, but a dependency violation: score 1, unapproved
        text = "enable\nconfigure terminal\nip sla schedule 9 start-time now"
        report = _verify_text(text, grammar)
        assert report.syntax_score == 1
        assert not report.approved


def test_mode_neutral_permutations_preserve_approval(grammar):
    rng = random.Random(7)
    prefix = ["enable", "configure terminal", "interface GigabitEthernet0/1"]
    neutral = ["duplex auto", "speed 100", "mtu 1500", "bandwidth 1000", "ethernet oam"]
    for _ in range(20):
        shuffled = prefix + rng.sample(neutral, len(neutral))
        report = _verify_text("\n".join(shuffled), grammar)
        assert report.approved
