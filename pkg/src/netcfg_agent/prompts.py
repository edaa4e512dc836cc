"""Prompt construction and response parsing.

Every prompt follows the same three-role discipline: a system message that
states the task, an assistant message that pins the output format, and a
user message that carries the inputs.  Templates live in an editable INI
file (one section per prompt type) so wording can change without touching
code; builders stay pure, so identical inputs produce byte-identical
messages.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .core import ChatMessage, GeneratedConfiguration, Intent, IntentKind

if TYPE_CHECKING:
    from .verifier import VerificationReport

TEMPLATE_NAMES = ("classifier", "steps", "config_generator", "refinement")

#: Placeholders allowed in the user text of each template.
USER_PLACEHOLDERS = frozenset(
    {"intent", "context", "labels", "steps", "previous_config", "feedback"}
)
_EXTRA_SECTION_PLACEHOLDERS = {
    "enhancement": frozenset({"chunk"}),
    "question_rephrase": frozenset({"requirement"}),
}

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")

_SEVERITY_RANK = {"high": 0, "low": 1}


class TemplateError(ValueError):
    """Template file missing, malformed, or using an unknown placeholder."""


class EmptyLabelSetError(ValueError):
    """A classifier prompt was requested with no labels."""


class UnknownLabelError(ValueError):
    """Classifier output did not start with one of the allowed labels."""

    def __init__(self, line: str, labels: Sequence[str]) -> None:
        super().__init__(f"first line {line!r} matches none of {list(labels)}")
        self.line = line


class NoStepsFoundError(ValueError):
    """Steps output contained no recognizable list items."""


class RefinementOfApprovedError(ValueError):
    """A refinement prompt was requested for an already-approved report."""


@dataclass(frozen=True)
class PromptTemplate:
    """Texts for one prompt type; user_template placeholders are validated."""

    name: str
    system_text: str
    assistant_text: str
    user_template: str

    def __post_init__(self) -> None:
        if self.name not in TEMPLATE_NAMES:
            raise TemplateError(f"unknown template name {self.name!r}")
        for placeholder in _PLACEHOLDER_RE.findall(self.user_template):
            if placeholder not in USER_PLACEHOLDERS:
                raise TemplateError(
                    f"template {self.name!r} uses undeclared placeholder {{{placeholder}}}"
                )


@dataclass(frozen=True)
class StepsPlan:
    """Ordered preparation steps decomposed from an intent."""

    steps: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("a steps plan must contain at least one step")
        if any(not step.strip() for step in self.steps):
            raise ValueError("steps must be non-empty")

    @property
    def text(self) -> str:
        return "\n".join(self.steps)

    @property
    def numbered_text(self) -> str:
        return "\n".join(f"{i}. {step}" for i, step in enumerate(self.steps, start=1))


def render(template_text: str, values: dict[str, str]) -> str:
    """Substitute {name} placeholders that appear in ``values``.

    Unknown braces are left alone, so literal brace syntax inside prompt
    wording (e.g. choice sets) survives rendering.
    """

    def _sub(match: re.Match[str]) -> str:
        name = match.group(1)
        return values[name] if name in values else match.group(0)

    return _PLACEHOLDER_RE.sub(_sub, template_text)


class TemplateSet:
    """All prompt sections loaded from one INI file."""

    def __init__(self, sections: dict[str, dict[str, str]]) -> None:
        self._sections = sections
        for name in TEMPLATE_NAMES:
            if name not in sections:
                raise TemplateError(f"template file is missing section [{name}]")
        self.templates = {
            name: PromptTemplate(
                name=name,
                system_text=sections[name]["system"],
                assistant_text=sections[name]["assistant"],
                user_template=sections[name]["user"],
            )
            for name in TEMPLATE_NAMES
        }
        for name, allowed in _EXTRA_SECTION_PLACEHOLDERS.items():
            if name not in sections:
                continue
            for placeholder in _PLACEHOLDER_RE.findall(sections[name]["user"]):
                if placeholder not in allowed:
                    raise TemplateError(
                        f"template {name!r} uses undeclared placeholder {{{placeholder}}}"
                    )

    @classmethod
    def from_string(cls, text: str) -> "TemplateSet":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise TemplateError(f"cannot parse template file: {exc}") from exc
        sections: dict[str, dict[str, str]] = {}
        for section in parser.sections():
            entry = {}
            for key in ("system", "assistant", "user"):
                if not parser.has_option(section, key):
                    raise TemplateError(f"section [{section}] is missing the {key} text")
                entry[key] = parser.get(section, key)
            sections[section] = entry
        return cls(sections)

    @classmethod
    def load(cls, path: str | Path) -> "TemplateSet":
        return cls.from_string(Path(path).read_text(encoding="utf-8"))

    def __getitem__(self, name: str) -> PromptTemplate:
        return self.templates[name]

    def section(self, name: str) -> dict[str, str]:
        """Raw (system, assistant, user) texts for any section, built-in or extra."""
        if name not in self._sections:
            raise TemplateError(f"template file has no section [{name}]")
        return self._sections[name]

    def build(self, name: str, values: dict[str, str]) -> list[ChatMessage]:
        """Render a section into the standard three-role message list."""
        section = self.section(name)
        return [
            ChatMessage("system", render(section["system"], values)),
            ChatMessage("assistant", render(section["assistant"], values)),
            ChatMessage("user", render(section["user"], values)),
        ]


_default_set: TemplateSet | None = None


def default_templates() -> TemplateSet:
    """The template set shipped with the package (cached)."""
    global _default_set
    if _default_set is None:
        text = resources.files("netcfg_agent.data").joinpath("templates.ini").read_text("utf-8")
        _default_set = TemplateSet.from_string(text)
    return _default_set


def _context_section(intent: Intent) -> str:
    if not intent.context.strip():
        return ""
    return f"\nContext: {intent.context.strip()}"


def build_classifier_prompt(
    intent: Intent,
    labels: Sequence[str],
    templates: TemplateSet | None = None,
) -> list[ChatMessage]:
    """Prompt the model to pick one label for the intent.

    The user message carries both the intent text and the full label set;
    the assistant message demands the chosen type on the first output line.
    """
    if not labels:
        raise EmptyLabelSetError("classifier needs at least one label")
    if len(set(labels)) != len(list(labels)):
        raise ValueError("classifier labels must be distinct")
    templates = templates or default_templates()
    return templates.build(
        "classifier",
        {"intent": intent.text, "labels": ", ".join(labels)},
    )


def parse_classifier_response(text: str, labels: Sequence[str]) -> IntentKind:
    """Read the label from the first non-empty line of the model output."""
    first_line = ""
    for line in text.splitlines():
        if line.strip():
            first_line = line.strip()
            break
    normalized = first_line.lower()
    for label in labels:
        if normalized == label.lower():
            return IntentKind(label=label)
    raise UnknownLabelError(first_line, labels)


def build_steps_prompt(
    intent: Intent,
    kind: IntentKind,
    templates: TemplateSet | None = None,
) -> list[ChatMessage]:
    """Prompt the model to decompose the intent into ordered steps.

    The context section is omitted entirely when the intent carries no
    context; the classified kind parameterizes the system text.
    """
    templates = templates or default_templates()
    return templates.build(
        "steps",
        {
            "intent": intent.text,
            "context": _context_section(intent),
            "kind": kind.label,
        },
    )


_STEP_MARKER_RE = re.compile(r"^\s*(?:\d+\s*[.)]\s*|-\s+)(.*)$")


def parse_steps_response(text: str) -> StepsPlan:
    """Parse a numbered or dashed list into a StepsPlan.

    Lines starting with an ordinal marker ("1.", "2)", "-") open a new step;
    other non-empty lines attach to the previous step as continuations.
    Preamble lines before the first marker are discarded.
    """
    steps: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        match = _STEP_MARKER_RE.match(line)
        if match:
            content = match.group(1).strip()
            if content:
                steps.append(content)
        elif steps:
            steps[-1] = f"{steps[-1]} {line.strip()}"
    if not steps:
        raise NoStepsFoundError(f"no list items found in {text!r}")
    return StepsPlan(steps=tuple(steps))


def build_config_prompt(
    intent: Intent,
    plan: StepsPlan,
    templates: TemplateSet | None = None,
) -> list[ChatMessage]:
    """Prompt the model to emit commands only, with the multi-device delimiter."""
    templates = templates or default_templates()
    return templates.build(
        "config_generator",
        {"intent": intent.text, "steps": plan.numbered_text},
    )


def format_findings(report: "VerificationReport") -> str:
    """Render report findings ordered by severity (high first) then line index."""
    ordered = sorted(
        report.findings,
        key=lambda f: (_SEVERITY_RANK.get(f.severity, 9), f.line, f.block),
    )
    lines = [
        f"- [{f.kind}] device {f.block} line {f.line + 1}: {f.message} "
        f"Suggestion: {f.suggestion}"
        for f in ordered
    ]
    return "\n".join(lines)


def build_refinement_prompt(
    intent: Intent,
    previous: GeneratedConfiguration,
    report: "VerificationReport",
    templates: TemplateSet | None = None,
) -> list[ChatMessage]:
    """Prompt the model to regenerate a rejected configuration.

    Embeds the prior configuration and every finding's message and
    suggestion so each retry carries the evidence it must fix.
    """
    if report.approved:
        raise RefinementOfApprovedError("report is already approved; nothing to refine")
    templates = templates or default_templates()
    return templates.build(
        "refinement",
        {
            "intent": intent.text,
            "previous_config": previous.command_text,
            "feedback": format_findings(report),
        },
    )
