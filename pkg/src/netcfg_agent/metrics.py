"""Accuracy, length/time, and complexity scoring, plus the batch harness.

Scores per configuration: the syntax score aggregates per-line verdicts
(1 all valid / 0 incomplete present / -1 any invalid), goal accuracy checks
a case's mandatory command checklist against the generated lines
(1 all mandatory matched / 0 partially matched / -1 nothing matched), and
the complexity score is the mean of the min-max-normalized total text
length and total duration in minutes, both normalized over the evaluated
batch.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

from .agent import STATUS_FAILED, SessionResult
from .core import GeneratedConfiguration, Intent
from .verifier import CommandGrammar, match_tokens, parse_pattern, verify_config

SessionRunner = Callable[[Intent], SessionResult]


@dataclass(frozen=True)
class EvalCase:
    """One benchmark intent with its goal checklist.

    ``mandatory_patterns`` must all match for full goal satisfaction;
    ``relevant_patterns`` count toward partial credit only.  Patterns use
    the grammar token syntax (literals, ``{a|b}`` choices, ``<name:class>``
    placeholders).
    """

    intent: Intent
    mandatory_patterns: tuple[str, ...]
    relevant_patterns: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.mandatory_patterns:
            raise ValueError("a scored case needs at least one mandatory pattern")


@dataclass(frozen=True)
class MetricsRecord:
    intent_id: str
    syntax_score: int
    goal_score: int
    trans_len: int
    config_len: int
    total_len: int
    total_dura_time: float
    norm_total_len: float
    norm_total_dura_time: float
    complexity_score: float
    failed: bool = False
    status: str = ""

    def __post_init__(self) -> None:
        if self.total_len != self.trans_len + self.config_len:
            raise ValueError("total_len must equal trans_len + config_len")
        if self.complexity_score != (self.norm_total_len + self.norm_total_dura_time) / 2:
            raise ValueError("complexity_score must be the mean of the normalized parts")


def goal_accuracy(config: GeneratedConfiguration, case: EvalCase) -> int:
    """Score a configuration against a case's checklist.

    1 when every mandatory pattern matches some line (in any block, any
    order); 0 when not all mandatory match but at least one mandatory or
    relevant pattern does; -1 when nothing matches.
    """
    mandatory = [parse_pattern(p) for p in case.mandatory_patterns]
    relevant = [parse_pattern(p) for p in case.relevant_patterns]
    all_lines = [line.raw.split() for _, line in config.iter_lines()]

    def matched(pattern) -> bool:
        return any(match_tokens(pattern, tokens).status == "full" for tokens in all_lines)

    mandatory_hits = [matched(p) for p in mandatory]
    if all(mandatory_hits):
        return 1
    if any(mandatory_hits) or any(matched(p) for p in relevant):
        return 0
    return -1


def total_len(trans_len: int, config_len: int) -> int:
    """Total text length: translated requirement plus generated configuration."""
    if trans_len < 0 or config_len < 0:
        raise ValueError("lengths must be >= 0")
    return trans_len + config_len


def min_max_normalize(values: Sequence[float]) -> list[float]:
    """Scale values into [0, 1]; a constant batch maps to all zeros."""
    if not values:
        raise ValueError("cannot normalize an empty list")
    if any(v < 0 for v in values):
        raise ValueError("values must be non-negative")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def total_dura_time(translation_time: float, configuration_time: float) -> float:
    """Total duration in minutes from the two phase durations in seconds."""
    if translation_time < 0 or configuration_time < 0:
        raise ValueError("durations must be >= 0")
    return (translation_time + configuration_time) / 60


def complexity_score(norm_len: float, norm_time: float) -> float:
    """Mean of the two normalized components; both must be within [0, 1]."""
    for value in (norm_len, norm_time):
        if not 0 <= value <= 1:
            raise ValueError("normalized inputs must be within [0, 1]")
    return (norm_len + norm_time) / 2


# ---------------------------------------------------------------------------
# Batch evaluation


@dataclass(frozen=True)
class ScoreBreakdown:
    """Counts per score level (1 / 0 / -1) for one metric."""

    correct: int
    partial: int
    incorrect: int

    @property
    def total(self) -> int:
        return self.correct + self.partial + self.incorrect

    def fractions(self) -> dict[str, float]:
        return {
            "correct": self.correct / self.total,
            "partial": self.partial / self.total,
            "incorrect": self.incorrect / self.total,
        }

    def percent(self, level: str) -> int:
        # Floor percentages so a 57-of-99 split reads as 57%.
        count = getattr(self, level)
        return (count * 100) // self.total


def _breakdown(scores: Sequence[int]) -> ScoreBreakdown:
    return ScoreBreakdown(
        correct=sum(1 for s in scores if s == 1),
        partial=sum(1 for s in scores if s == 0),
        incorrect=sum(1 for s in scores if s == -1),
    )


@dataclass(frozen=True)
class DistributionStats:
    minimum: float
    mean: float
    maximum: float


def _stats(values: Sequence[float]) -> DistributionStats:
    return DistributionStats(
        minimum=min(values), mean=sum(values) / len(values), maximum=max(values)
    )


@dataclass(frozen=True)
class BatchSummary:
    n_cases: int
    failed_count: int
    syntax: ScoreBreakdown
    goal: ScoreBreakdown
    complexity: DistributionStats
    duration_minutes: DistributionStats

    def render_table(self) -> str:
        lines = [f"cases: {self.n_cases} (failed: {self.failed_count})"]
        for name, breakdown in (("syntax", self.syntax), ("goal", self.goal)):
            lines.append(
                f"{name:<10} correct {breakdown.percent('correct')}% ({breakdown.correct})  "
                f"partial {breakdown.percent('partial')}% ({breakdown.partial})  "
                f"incorrect {breakdown.percent('incorrect')}% ({breakdown.incorrect})"
            )
        for name, stats in (
            ("complexity", self.complexity),
            ("duration_minutes", self.duration_minutes),
        ):
            lines.append(
                f"{name:<16} min {stats.minimum:.4f}  mean {stats.mean:.4f}  "
                f"max {stats.maximum:.4f}"
            )
        return "\n".join(lines)


@dataclass(frozen=True)
class CaseMeasurement:
    """Raw per-case measurements before batch normalization."""

    intent_id: str
    syntax: int
    goal: int
    trans_len: int
    config_len: int
    dura_minutes: float
    failed: bool
    status: str


def _measure_case(
    case: EvalCase, runner: SessionRunner, grammar: CommandGrammar
) -> CaseMeasurement:
    try:
        result = runner(case.intent)
    except Exception as exc:  # a crashed runner flags the case, never the batch
        return CaseMeasurement(
            intent_id=case.intent.id,
            syntax=-1,
            goal=-1,
            trans_len=len(case.intent.text),
            config_len=0,
            dura_minutes=0.0,
            failed=True,
            status=f"runner-error: {exc}",
        )
    config = result.final_config
    failed = result.status == STATUS_FAILED or config is None
    plan_text = result.plan.text if result.plan else ""
    return CaseMeasurement(
        intent_id=case.intent.id,
        syntax=-1 if config is None else verify_config(config, grammar).syntax_score,
        goal=-1 if config is None else goal_accuracy(config, case),
        trans_len=len(case.intent.text) + len(plan_text),
        config_len=0 if config is None else len(config.command_text),
        dura_minutes=total_dura_time(
            result.timings.translation_time, result.timings.configuration_time
        ),
        failed=failed,
        status=result.status,
    )


def build_records(measurements: Sequence[CaseMeasurement]) -> list[MetricsRecord]:
    """Assemble records, normalizing lengths and durations over the batch."""
    totals = [total_len(m.trans_len, m.config_len) for m in measurements]
    norm_lens = min_max_normalize(totals)
    norm_times = min_max_normalize([m.dura_minutes for m in measurements])
    records = []
    for m, total, norm_len, norm_time in zip(measurements, totals, norm_lens, norm_times):
        records.append(
            MetricsRecord(
                intent_id=m.intent_id,
                syntax_score=m.syntax,
                goal_score=m.goal,
                trans_len=m.trans_len,
                config_len=m.config_len,
                total_len=total,
                total_dura_time=m.dura_minutes,
                norm_total_len=norm_len,
                norm_total_dura_time=norm_time,
                complexity_score=complexity_score(norm_len, norm_time),
                failed=m.failed,
                status=m.status,
            )
        )
    return records


def summarize(records: Sequence[MetricsRecord]) -> BatchSummary:
    return BatchSummary(
        n_cases=len(records),
        failed_count=sum(1 for r in records if r.failed),
        syntax=_breakdown([r.syntax_score for r in records]),
        goal=_breakdown([r.goal_score for r in records]),
        complexity=_stats([r.complexity_score for r in records]),
        duration_minutes=_stats([r.total_dura_time for r in records]),
    )


def evaluate_batch(
    cases: Sequence[EvalCase],
    runner: SessionRunner,
    grammar: CommandGrammar,
    *,
    jobs: int = 1,
) -> tuple[list[MetricsRecord], BatchSummary]:
    """Run one session per case and score the whole batch.

    Normalizations use the batch itself as the min-max population.  A case
    whose session fails (or whose runner raises) is flagged and scored
    syntax=-1 / goal=-1; the batch always completes.
    """
    if not cases:
        raise ValueError("cases must be non-empty")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if jobs == 1:
        measurements = [_measure_case(case, runner, grammar) for case in cases]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            measurements = list(
                pool.map(lambda case: _measure_case(case, runner, grammar), cases)
            )
    records = build_records(measurements)
    return records, summarize(records)


# ---------------------------------------------------------------------------
# Files


def load_cases(path: str | Path) -> list[EvalCase]:
    """Read eval cases from a JSON-lines file.

    Record fields: ``text``, ``mandatory_patterns`` (required), ``id``,
    ``form``, ``context``, ``relevant_patterns`` (optional).
    """
    cases = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        record = json.loads(line)
        intent = Intent(
            id=str(record.get("id") or line_no),
            text=record["text"],
            form=record.get("form", "requirement"),
            context=str(record.get("context") or ""),
        )
        cases.append(
            EvalCase(
                intent=intent,
                mandatory_patterns=tuple(record["mandatory_patterns"]),
                relevant_patterns=tuple(record.get("relevant_patterns") or ()),
            )
        )
    return cases


def write_records(records: Sequence[MetricsRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(asdict(record)) + "\n")


def write_summary_csv(summary: BatchSummary, path: str | Path) -> None:
    """Machine-readable summary: one (metric, key, value) row per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "key", "value"])
        writer.writerow(["cases", "total", summary.n_cases])
        writer.writerow(["cases", "failed", summary.failed_count])
        for name, breakdown in (("syntax", summary.syntax), ("goal", summary.goal)):
            fractions = breakdown.fractions()
            for level in ("correct", "partial", "incorrect"):
                writer.writerow([name, f"count_{level}", getattr(breakdown, level)])
                writer.writerow([name, f"fraction_{level}", repr(fractions[level])])
        for name, stats in (
            ("complexity", summary.complexity),
            ("duration_minutes", summary.duration_minutes),
        ):
            writer.writerow([name, "min", repr(stats.minimum)])
            writer.writerow([name, "mean", repr(stats.mean)])
            writer.writerow([name, "max", repr(stats.maximum)])
