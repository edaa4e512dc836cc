"""Closed-loop session orchestration, plus intent loading and persistence.

A session runs classify -> plan -> generate -> verify, then refines the
configuration on verifier feedback until it is approved or the iteration
cap is reached.  Classification and planning run once per session; only
generation is repeated.  Every intermediate prompt, response, and report is
captured in the session transcript for the result logger, and approved
configurations are stored in a versioned on-disk repository.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .backend import BackendError, ChatBackend, CompletionRequest, CompletionResult
from .core import ChatMessage, GeneratedConfiguration, Intent, IntentKind, parse_configuration
from .prompts import (
    NoStepsFoundError,
    StepsPlan,
    TemplateSet,
    UnknownLabelError,
    build_classifier_prompt,
    build_config_prompt,
    build_refinement_prompt,
    build_steps_prompt,
    default_templates,
    parse_classifier_response,
    parse_steps_response,
)
from .verifier import (
    KIND_SYNTAX,
    SEVERITY_HIGH,
    CommandGrammar,
    EmptyConfigurationError,
    Finding,
    VerificationReport,
    build_report,
    verify_config,
)

STATUS_APPROVED = "approved"
STATUS_EXHAUSTED = "exhausted"
STATUS_FAILED = "failed"

DEFAULT_MAX_ITERATIONS = 3
DEFAULT_FALLBACK_LABEL = "device-setup"
DEFAULT_LABELS: tuple[str, ...] = (
    "device-setup",
    "routing",
    "acl",
    "monitoring",
    "tunneling",
    "admission-control",
)


class NotApprovedError(ValueError):
    """Only approved session results may be stored in the repository."""


class RepoVerificationError(RuntimeError):
    """A configuration failed re-verification at store time."""


class RequirementsParseError(ValueError):
    def __init__(self, message: str, path: str, line_no: int) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


class EmptyRequirementsError(ValueError):
    """The requirements file contains no records."""


@dataclass(frozen=True)
class GenerationSettings:
    """Sampling settings applied to every completion call of a session."""

    model_name: str = "local-model"
    temperature: float = 0.0
    max_tokens: int = 1024


@dataclass(frozen=True)
class Timings:
    """Seconds spent in model calls, split by phase.

    ``translation_time`` covers the classify and plan calls,
    ``configuration_time`` the generate and refine calls.
    """

    translation_time: float
    configuration_time: float

    def __post_init__(self) -> None:
        if self.translation_time < 0 or self.configuration_time < 0:
            raise ValueError("timings must be >= 0")


@dataclass(frozen=True)
class SessionResult:
    intent_id: str
    status: str
    iterations_used: int
    final_config: GeneratedConfiguration | None
    final_report: VerificationReport | None
    classification: IntentKind | None
    plan: StepsPlan | None
    timings: Timings
    transcript: tuple[dict, ...]
    error: str = ""

    def __post_init__(self) -> None:
        if self.status not in (STATUS_APPROVED, STATUS_EXHAUSTED, STATUS_FAILED):
            raise ValueError(f"unknown status {self.status!r}")
        if self.iterations_used < 1:
            raise ValueError("iterations_used must be >= 1")
        if self.status == STATUS_APPROVED:
            if self.final_report is None or not self.final_report.approved:
                raise ValueError("approved results must carry an approved report")


def _prompt_dicts(messages: Sequence[ChatMessage]) -> list[dict[str, str]]:
    return [m.as_dict() for m in messages]


def _report_event(report: VerificationReport, attempt: int) -> dict:
    return {
        "stage": "verify",
        "attempt": attempt,
        "approved": report.approved,
        "syntax_score": report.syntax_score,
        "findings": [asdict(f) for f in report.findings],
    }


def _empty_output_report() -> VerificationReport:
    finding = Finding(
        kind=KIND_SYNTAX,
        severity=SEVERITY_HIGH,
        block=0,
        line=0,
        message="model output contained no configuration commands",
        suggestion="Output the configuration commands only, one per line.",
    )
    return build_report([], [finding])


def run_session(
    intent: Intent,
    backend: ChatBackend,
    grammar: CommandGrammar,
    *,
    templates: TemplateSet | None = None,
    labels: Sequence[str] = DEFAULT_LABELS,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    fallback_label: str = DEFAULT_FALLBACK_LABEL,
    settings: GenerationSettings | None = None,
    logger: "ResultLogger | None" = None,
) -> SessionResult:
    """Run one intent through the full loop and return its outcome.

    Performs exactly one classify call and one plan call, then up to
    ``max_iterations`` generate attempts, each followed by verification;
    rejections feed the next attempt through a refinement prompt built from
    the report.  Backend failures produce a ``failed`` result rather than
    an exception.  When a logger is given, the finished result (including
    the full transcript) is appended to it.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    templates = templates or default_templates()
    settings = settings or GenerationSettings()
    transcript: list[dict] = []
    translation_time = 0.0
    configuration_time = 0.0
    classification: IntentKind | None = None
    plan: StepsPlan | None = None
    config: GeneratedConfiguration | None = None
    report: VerificationReport | None = None
    attempt = 1

    def call(messages: list[ChatMessage]) -> CompletionResult:
        request = CompletionRequest(
            messages=tuple(messages),
            temperature=settings.temperature,
            max_tokens=settings.max_tokens,
            model_name=settings.model_name,
        )
        return backend.complete(request)

    def finish(status: str, error: str = "") -> SessionResult:
        result = SessionResult(
            intent_id=intent.id,
            status=status,
            iterations_used=attempt,
            final_config=config,
            final_report=report,
            classification=classification,
            plan=plan,
            timings=Timings(translation_time, configuration_time),
            transcript=tuple(transcript),
            error=error,
        )
        if logger is not None:
            logger.log(result)
        return result

    try:
        # Classification and planning happen once; refinements reuse them.
        messages = build_classifier_prompt(intent, list(labels), templates)
        completion = call(messages)
        translation_time += completion.latency
        transcript.append(
            {
                "stage": "classify",
                "prompt": _prompt_dicts(messages),
                "response": completion.text,
                "latency": completion.latency,
            }
        )
        try:
            classification = parse_classifier_response(completion.text, list(labels))
        except UnknownLabelError as exc:
            classification = IntentKind(label=fallback_label)
            transcript.append(
                {
                    "stage": "warning",
                    "message": f"unknown classification label ({exc.line!r}); "
                    f"falling back to {fallback_label!r}",
                }
            )

        messages = build_steps_prompt(intent, classification, templates)
        completion = call(messages)
        translation_time += completion.latency
        transcript.append(
            {
                "stage": "steps",
                "prompt": _prompt_dicts(messages),
                "response": completion.text,
                "latency": completion.latency,
            }
        )
        try:
            plan = parse_steps_response(completion.text)
        except NoStepsFoundError:
            fallback_step = " ".join(completion.text.split()) or intent.text
            plan = StepsPlan(steps=(fallback_step,))
            transcript.append(
                {
                    "stage": "warning",
                    "message": "steps response had no list items; using it as a single step",
                }
            )

        for attempt in range(1, max_iterations + 1):
            if attempt == 1 or config is None or report is None:
                messages = build_config_prompt(intent, plan, templates)
                stage = "generate"
            else:
                messages = build_refinement_prompt(intent, config, report, templates)
                stage = "refine"
            completion = call(messages)
            configuration_time += completion.latency
            transcript.append(
                {
                    "stage": stage,
                    "attempt": attempt,
                    "prompt": _prompt_dicts(messages),
                    "response": completion.text,
                    "latency": completion.latency,
                }
            )
            config = parse_configuration(completion.text, intent.id)
            try:
                report = verify_config(config, grammar)
            except EmptyConfigurationError:
                report = _empty_output_report()
            transcript.append(_report_event(report, attempt))
            if report.approved:
                return finish(STATUS_APPROVED)
        return finish(STATUS_EXHAUSTED)
    except BackendError as exc:
        transcript.append({"stage": "error", "message": str(exc)})
        return finish(STATUS_FAILED, error=str(exc))


# ---------------------------------------------------------------------------
# Requirement loading


def load_requirements(path: str | Path) -> list[Intent]:
    """Read intents from a JSON-lines file, one record per line.

    Record fields: ``text`` and ``form`` (required), ``id`` and ``context``
    (optional; missing ids default to the line number).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    intents: list[Intent] = []
    seen_ids: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RequirementsParseError(f"invalid JSON: {exc.msg}", str(path), line_no) from exc
        if not isinstance(record, dict):
            raise RequirementsParseError("record must be a JSON object", str(path), line_no)
        if not isinstance(record.get("text"), str) or not record["text"].strip():
            raise RequirementsParseError("record is missing the text field", str(path), line_no)
        if "form" not in record:
            raise RequirementsParseError("record is missing the form field", str(path), line_no)
        intent_id = str(record.get("id") or line_no)
        if intent_id in seen_ids:
            raise RequirementsParseError(
                f"duplicate-id: {intent_id!r} already used on line {seen_ids[intent_id]}",
                str(path),
                line_no,
            )
        seen_ids[intent_id] = line_no
        try:
            intents.append(
                Intent(
                    id=intent_id,
                    text=record["text"],
                    form=record["form"],
                    context=str(record.get("context") or ""),
                )
            )
        except ValueError as exc:
            raise RequirementsParseError(str(exc), str(path), line_no) from exc
    if not intents:
        raise EmptyRequirementsError(f"{path}: no requirement records found")
    return intents


# ---------------------------------------------------------------------------
# ConfigsRepo


@dataclass(frozen=True)
class RepoEntry:
    intent_id: str
    stored_at: str
    config_text: str
    report_digest: str
    metadata: dict


def _report_digest(report: VerificationReport) -> str:
    payload = {
        "approved": report.approved,
        "syntax_score": report.syntax_score,
        "findings": [asdict(f) for f in report.findings],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def store_config(
    repo_root: str | Path,
    result: SessionResult,
    grammar: CommandGrammar | None = None,
) -> RepoEntry:
    """Persist an approved configuration under ``<root>/<intent_id>/v<N>/``.

    Writes are atomic (staged directory renamed into place) and re-storing
    the same intent creates a new version instead of overwriting.  When a
    grammar is supplied the configuration is re-verified first, so the repo
    can never hold a configuration that fails under that grammar.
    """
    if result.status != STATUS_APPROVED or result.final_config is None or result.final_report is None:
        raise NotApprovedError(f"cannot store a {result.status} result")
    if grammar is not None:
        recheck = verify_config(result.final_config, grammar)
        if not recheck.approved:
            raise RepoVerificationError(
                f"configuration for {result.intent_id} failed re-verification at store time"
            )

    intent_dir = Path(repo_root) / result.intent_id
    intent_dir.mkdir(parents=True, exist_ok=True)
    stored_at = datetime.now(timezone.utc).isoformat()
    entry = RepoEntry(
        intent_id=result.intent_id,
        stored_at=stored_at,
        config_text=result.final_config.command_text,
        report_digest=_report_digest(result.final_report),
        metadata={
            "classification": result.classification.label if result.classification else "",
            "iterations": result.iterations_used,
        },
    )
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=intent_dir))
    try:
        (staging / "config.txt").write_text(entry.config_text + "\n", encoding="utf-8")
        meta = {
            "intent_id": entry.intent_id,
            "stored_at": entry.stored_at,
            "report_digest": entry.report_digest,
            **entry.metadata,
        }
        (staging / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        while True:
            version = 1 + max(
                (int(p.name[1:]) for p in intent_dir.glob("v*") if p.name[1:].isdigit()),
                default=0,
            )
            try:
                os.rename(staging, intent_dir / f"v{version}")
                break
            except OSError:
                if not (intent_dir / f"v{version}").exists():
                    raise
    finally:
        if staging.exists():
            for leftover in staging.iterdir():
                leftover.unlink()
            staging.rmdir()
    return entry


def stored_versions(repo_root: str | Path, intent_id: str) -> list[int]:
    intent_dir = Path(repo_root) / intent_id
    if not intent_dir.is_dir():
        return []
    return sorted(int(p.name[1:]) for p in intent_dir.glob("v*") if p.name[1:].isdigit())


def read_stored_config(repo_root: str | Path, intent_id: str, version: int | None = None) -> str:
    versions = stored_versions(repo_root, intent_id)
    if not versions:
        raise FileNotFoundError(f"no stored configuration for {intent_id!r}")
    chosen = version if version is not None else versions[-1]
    path = Path(repo_root) / intent_id / f"v{chosen}" / "config.txt"
    return path.read_text(encoding="utf-8").rstrip("\n")


# ---------------------------------------------------------------------------
# Result logging


class ResultLogger:
    """Append-only JSON-lines sink for session results.

    Each record is written as a single line in one write call under a lock,
    so concurrent sessions in one process never interleave records.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def log(self, result: SessionResult) -> None:
        record = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "intent_id": result.intent_id,
            "status": result.status,
            "iterations_used": result.iterations_used,
            "classification": result.classification.label if result.classification else None,
            "plan": list(result.plan.steps) if result.plan else None,
            "timings": {
                "translation_time": result.timings.translation_time,
                "configuration_time": result.timings.configuration_time,
            },
            "error": result.error,
            "final_config": result.final_config.command_text if result.final_config else None,
            "final_report": None
            if result.final_report is None
            else {
                "approved": result.final_report.approved,
                "syntax_score": result.final_report.syntax_score,
                "findings": [asdict(f) for f in result.final_report.findings],
            },
            "transcript": list(result.transcript),
        }
        line = json.dumps(record, ensure_ascii=False) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line)


def log_result(result: SessionResult, sink: "ResultLogger | str | Path") -> None:
    """Append one session record to the given logger or log-file path."""
    logger = sink if isinstance(sink, ResultLogger) else ResultLogger(sink)
    logger.log(result)
