"""Grammar-driven validation of generated Cisco IOS configurations.

A command grammar (see ``data/grammar.cfg`` for the shipped one and the file
format) assigns every configuration line a verdict: 1 when it fully matches
an entry of the current configuration mode, 0 when it is incomplete or
carries an unusual placeholder value, and -1 when nothing matches.  Blocks
are validated sequentially from exec mode with mode transitions threaded
line to line, then semantic rules check mode reachability, reference
integrity, address sanity, and declared command conflicts.  The result is a
report whose findings carry actionable suggestions for the refinement loop.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .core import ConfigLine, GeneratedConfiguration

MODE_EXEC = "exec"
MODE_PRIVILEGED = "privileged"
MODE_GLOBAL = "global-config"
MODE_INTERFACE = "interface-config"
MODE_SUBSYSTEM = "subsystem-config"
MODES = (MODE_EXEC, MODE_PRIVILEGED, MODE_GLOBAL, MODE_INTERFACE, MODE_SUBSYSTEM)

VERDICT_VALID = 1
VERDICT_UNUSUAL = 0
VERDICT_INVALID = -1

KIND_SYNTAX = "syntax"
KIND_INCOMPLETE = "incomplete"
KIND_DEPENDENCY = "semantic-dependency"
KIND_CONFLICT = "semantic-conflict"
KIND_MODE_ERROR = "mode-error"
FINDING_KINDS = (KIND_SYNTAX, KIND_INCOMPLETE, KIND_DEPENDENCY, KIND_CONFLICT, KIND_MODE_ERROR)

SEVERITY_HIGH = "high"
SEVERITY_LOW = "low"

_MODE_ENTRY_HINTS = {
    MODE_PRIVILEGED: "'enable'",
    MODE_GLOBAL: "'configure terminal'",
    MODE_INTERFACE: "'interface <name>'",
    MODE_SUBSYSTEM: "a subsystem command such as 'router ospf <id>' or 'ip sla <id>'",
}


class GrammarError(Exception):
    """Base class for grammar file problems."""


class GrammarParseError(GrammarError):
    def __init__(self, message: str, source: str, line_no: int) -> None:
        super().__init__(f"{source}:{line_no}: {message}")
        self.source = source
        self.line_no = line_no


class DuplicateEntryError(GrammarError):
    def __init__(self, message: str, source: str, line_no: int) -> None:
        super().__init__(f"{source}:{line_no}: {message}")
        self.line_no = line_no


class PatternSyntaxError(ValueError):
    """A token pattern (grammar entry or goal checklist pattern) is malformed."""


class EmptyConfigurationError(ValueError):
    """verify_config was called on a configuration with no blocks."""


# ---------------------------------------------------------------------------
# Pattern tokens


@dataclass(frozen=True)
class LiteralToken:
    text: str

    def canonical(self) -> str:
        return self.text.lower()


@dataclass(frozen=True)
class ChoiceToken:
    options: tuple[str, ...]

    def canonical(self) -> str:
        return "{" + "|".join(o.lower() for o in self.options) + "}"


@dataclass(frozen=True)
class PlaceholderToken:
    name: str
    value_class: str

    def canonical(self) -> str:
        return f"<{self.value_class}>"


Token = LiteralToken | ChoiceToken | PlaceholderToken

_IFACE_RE = re.compile(r"^[A-Za-z][A-Za-z-]*\d+(?:/\d+)*(?:\.\d+)?$")


def _check_dotted_quad(value: str) -> bool:
    parts = value.split(".")
    if len(parts) != 4:
        return False
    for part in parts:
        if not part.isdigit() or len(part) > 3 or int(part) > 255:
            return False
    return True


VALUE_CLASSES: dict[str, Callable[[str], bool]] = {
    "interface-id": lambda v: bool(_IFACE_RE.match(v)),
    "ipv4": _check_dotted_quad,
    "ipv4-wildcard": _check_dotted_quad,
    "integer-range": str.isdigit,
    "word": lambda v: bool(v),
}


def parse_pattern(text: str) -> tuple[Token, ...]:
    """Parse a whitespace-separated token pattern.

    Bare words are literals, ``{a|b|c}`` is a choice set, ``<name:class>``
    is a placeholder with one of the declared value classes.
    """
    tokens: list[Token] = []
    for raw in text.split():
        if raw.startswith("{"):
            if not raw.endswith("}") or len(raw) < 3:
                raise PatternSyntaxError(f"malformed choice token {raw!r}")
            options = tuple(part.strip() for part in raw[1:-1].split("|"))
            if not options or any(not o for o in options):
                raise PatternSyntaxError(f"empty option in choice token {raw!r}")
            tokens.append(ChoiceToken(options=options))
        elif raw.startswith("<"):
            if not raw.endswith(">") or ":" not in raw:
                raise PatternSyntaxError(f"malformed placeholder token {raw!r}")
            name, _, value_class = raw[1:-1].partition(":")
            if not name or value_class not in VALUE_CLASSES:
                raise PatternSyntaxError(
                    f"placeholder {raw!r} needs a name and a class from {sorted(VALUE_CLASSES)}"
                )
            tokens.append(PlaceholderToken(name=name, value_class=value_class))
        elif ">" in raw or "}" in raw:
            raise PatternSyntaxError(f"malformed token {raw!r}")
        else:
            tokens.append(LiteralToken(text=raw))
    if not tokens:
        raise PatternSyntaxError("pattern must contain at least one token")
    return tuple(tokens)


def canonical_key(tokens: Sequence[Token]) -> str:
    """Name-blind canonical form used for duplicate detection and excludes refs."""
    return " ".join(token.canonical() for token in tokens)


# ---------------------------------------------------------------------------
# Grammar


@dataclass(frozen=True)
class GrammarEntry:
    mode: str
    tokens: tuple[Token, ...]
    pattern: str
    transition: str | None = None
    excludes: tuple[str, ...] = ()
    declares: tuple[str, str] | None = None
    requires: tuple[str, str] | None = None
    line_no: int = 0

    @property
    def key(self) -> str:
        return canonical_key(self.tokens)

    @property
    def literal_count(self) -> int:
        return sum(1 for t in self.tokens if not isinstance(t, PlaceholderToken))


class CommandGrammar:
    """Immutable set of grammar entries, indexed by mode."""

    def __init__(self, entries: Sequence[GrammarEntry]) -> None:
        self.entries: tuple[GrammarEntry, ...] = tuple(entries)
        by_mode: dict[str, list[GrammarEntry]] = {mode: [] for mode in MODES}
        for entry in self.entries:
            by_mode[entry.mode].append(entry)
        self._by_mode = {mode: tuple(items) for mode, items in by_mode.items()}

    @property
    def entry_count(self) -> int:
        return len(self.entries)

    def entries_for(self, mode: str) -> tuple[GrammarEntry, ...]:
        if mode not in self._by_mode:
            raise ValueError(f"unknown mode {mode!r}")
        return self._by_mode[mode]

    def declaring_entry(self, namespace: str) -> GrammarEntry | None:
        for entry in self.entries:
            if entry.declares and entry.declares[0] == namespace:
                return entry
        return None


def _parse_annotation(raw: str, source: str, line_no: int) -> tuple[str, str]:
    body = raw[1:]
    key, sep, value = body.partition("=")
    if not sep or not value:
        raise GrammarParseError(f"annotation {raw!r} must be !key=value", source, line_no)
    if key not in ("excludes", "declares", "requires"):
        raise GrammarParseError(f"unknown annotation !{key}", source, line_no)
    return key, value


def _parse_entry_line(line: str, mode: str, source: str, line_no: int) -> GrammarEntry:
    try:
        parts = shlex.split(line)
    except ValueError as exc:
        raise GrammarParseError(f"unbalanced quoting: {exc}", source, line_no) from exc
    pattern_parts: list[str] = []
    transition: str | None = None
    excludes: list[str] = []
    declares: tuple[str, str] | None = None
    requires: tuple[str, str] | None = None

    i = 0
    while i < len(parts):
        part = parts[i]
        if part == "->":
            if transition is not None or i + 1 >= len(parts):
                raise GrammarParseError("misplaced '->' transition", source, line_no)
            transition = parts[i + 1]
            if transition not in MODES:
                raise GrammarParseError(f"unknown target mode {transition!r}", source, line_no)
            i += 2
        elif part.startswith("!"):
            key, value = _parse_annotation(part, source, line_no)
            if key == "excludes":
                excludes.append(value)
            else:
                namespace, sep, placeholder = value.partition(":")
                if not sep or not namespace or not placeholder:
                    raise GrammarParseError(
                        f"!{key} value must be <namespace>:<placeholder>", source, line_no
                    )
                if key == "declares":
                    declares = (namespace, placeholder)
                else:
                    requires = (namespace, placeholder)
            i += 1
        else:
            if transition is not None or excludes or declares or requires:
                raise GrammarParseError(
                    "pattern tokens must precede '->' and annotations", source, line_no
                )
            pattern_parts.append(part)
            i += 1

    try:
        tokens = parse_pattern(" ".join(pattern_parts))
    except PatternSyntaxError as exc:
        raise GrammarParseError(str(exc), source, line_no) from exc

    placeholder_names = {t.name for t in tokens if isinstance(t, PlaceholderToken)}
    for ref in (declares, requires):
        if ref and ref[1] not in placeholder_names:
            raise GrammarParseError(
                f"annotation references unknown placeholder {ref[1]!r}", source, line_no
            )
    exclude_keys = []
    for pattern_text in excludes:
        try:
            exclude_keys.append(canonical_key(parse_pattern(pattern_text)))
        except PatternSyntaxError as exc:
            raise GrammarParseError(f"bad !excludes pattern: {exc}", source, line_no) from exc

    return GrammarEntry(
        mode=mode,
        tokens=tokens,
        pattern=" ".join(pattern_parts),
        transition=transition,
        excludes=tuple(exclude_keys),
        declares=declares,
        requires=requires,
        line_no=line_no,
    )


_HEADER_RE = re.compile(r"^\[mode:\s*([a-z-]+)\s*\]$")


def parse_grammar(text: str, source: str = "<string>") -> CommandGrammar:
    """Parse grammar text; see the shipped file for the format."""
    entries: list[GrammarEntry] = []
    seen: dict[tuple[str, str], int] = {}
    mode: str | None = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        header = _HEADER_RE.match(line)
        if header:
            mode = header.group(1)
            if mode not in MODES:
                raise GrammarParseError(f"unknown mode {mode!r}", source, line_no)
            continue
        if line.startswith("["):
            raise GrammarParseError(f"malformed section header {line!r}", source, line_no)
        if mode is None:
            raise GrammarParseError("entry appears before any [mode: ...] header", source, line_no)
        entry = _parse_entry_line(line, mode, source, line_no)
        dupe_key = (mode, entry.key)
        if dupe_key in seen:
            raise DuplicateEntryError(
                f"pattern '{entry.pattern}' duplicates line {seen[dupe_key]} in mode {mode}",
                source,
                line_no,
            )
        seen[dupe_key] = line_no
        entries.append(entry)
    if not entries:
        raise GrammarParseError("grammar file defines no entries", source, 1)

    keys_by_mode: dict[str, set[str]] = {}
    for entry in entries:
        keys_by_mode.setdefault(entry.mode, set()).add(entry.key)
    for entry in entries:
        for key in entry.excludes:
            if key not in keys_by_mode.get(entry.mode, set()):
                raise GrammarParseError(
                    f"!excludes target '{key}' has no entry in mode {entry.mode}",
                    source,
                    entry.line_no,
                )
    return CommandGrammar(entries)


def load_grammar(path: str | Path) -> CommandGrammar:
    path = Path(path)
    return parse_grammar(path.read_text(encoding="utf-8"), source=str(path))


_default_grammar: CommandGrammar | None = None


def default_grammar() -> CommandGrammar:
    """The grammar shipped with the package (cached)."""
    global _default_grammar
    if _default_grammar is None:
        text = resources.files("netcfg_agent.data").joinpath("grammar.cfg").read_text("utf-8")
        _default_grammar = parse_grammar(text, source="grammar.cfg")
    return _default_grammar


# ---------------------------------------------------------------------------
# Line matching


@dataclass(frozen=True)
class MatchOutcome:
    status: str  # full | class-fail | prefix | none
    bindings: Mapping[str, str] = field(default_factory=dict)
    failed: tuple[str, str, str] | None = None  # (placeholder, class, value)


def match_tokens(pattern: Sequence[Token], line_tokens: Sequence[str]) -> MatchOutcome:
    """Match line tokens against a pattern.

    ``full``: every pattern position matched with all value classes passing.
    ``class-fail``: keywords align but a placeholder value fails its class.
    ``prefix``: the line is a strict prefix of the pattern.
    ``none``: a keyword mismatch, or the line is longer than the pattern.
    """
    if not line_tokens or len(line_tokens) > len(pattern):
        return MatchOutcome(status="none")
    bindings: dict[str, str] = {}
    failed: tuple[str, str, str] | None = None
    for token, value in zip(pattern, line_tokens):
        if isinstance(token, LiteralToken):
            if value.lower() != token.text.lower():
                return MatchOutcome(status="none")
        elif isinstance(token, ChoiceToken):
            if value.lower() not in (o.lower() for o in token.options):
                return MatchOutcome(status="none")
        else:
            check = VALUE_CLASSES[token.value_class]
            if check(value):
                bindings[token.name] = value
            elif failed is None:
                failed = (token.name, token.value_class, value)
    if failed is not None:
        return MatchOutcome(status="class-fail", bindings=bindings, failed=failed)
    if len(line_tokens) < len(pattern):
        return MatchOutcome(status="prefix", bindings=bindings)
    return MatchOutcome(status="full", bindings=bindings)


@dataclass(frozen=True)
class LineVerdict:
    """Per-line validity: 1 valid, 0 incomplete/unusual, -1 invalid."""

    value: int
    matched_entry: GrammarEntry | None
    detail: str
    bindings: Mapping[str, str] = field(default_factory=dict)
    near_miss: GrammarEntry | None = None
    failed_placeholder: tuple[str, str, str] | None = None

    def __post_init__(self) -> None:
        if self.value not in (VERDICT_VALID, VERDICT_UNUSUAL, VERDICT_INVALID):
            raise ValueError("verdict value must be 1, 0 or -1")
        if (self.value == VERDICT_VALID) != (self.matched_entry is not None):
            raise ValueError("verdict 1 requires a complete matched entry, and only then")


def _best_full_match(
    candidates: list[tuple[GrammarEntry, MatchOutcome]],
) -> tuple[GrammarEntry, MatchOutcome]:
    # Prefer the most keyword-specific entry; file order breaks ties.
    return max(enumerate(candidates), key=lambda item: (item[1][0].literal_count, -item[0]))[1]


def validate_line(
    line: ConfigLine, mode: str, grammar: CommandGrammar
) -> tuple[LineVerdict, str]:
    """Validate one line in the given mode; returns the verdict and next mode.

    Deterministic and independent of any other line: the next mode follows
    the matched entry's transition, or stays unchanged on any non-match.
    """
    tokens = line.raw.split()
    if not tokens:
        return LineVerdict(VERDICT_INVALID, None, "blank line"), mode

    full: list[tuple[GrammarEntry, MatchOutcome]] = []
    class_fail: tuple[GrammarEntry, MatchOutcome] | None = None
    prefix: GrammarEntry | None = None
    for entry in grammar.entries_for(mode):
        outcome = match_tokens(entry.tokens, tokens)
        if outcome.status == "full":
            full.append((entry, outcome))
        elif outcome.status == "class-fail" and class_fail is None:
            class_fail = (entry, outcome)
        elif outcome.status == "prefix" and prefix is None:
            prefix = entry

    if full:
        entry, outcome = _best_full_match(full)
        verdict = LineVerdict(
            VERDICT_VALID,
            entry,
            f"matches '{entry.pattern}'",
            bindings=dict(outcome.bindings),
        )
        return verdict, entry.transition or mode

    if class_fail is not None:
        entry, outcome = class_fail
        name, value_class, value = outcome.failed  # type: ignore[misc]
        verdict = LineVerdict(
            VERDICT_UNUSUAL,
            None,
            f"unusual value: {value!r} is not a valid {value_class} for <{name}> in '{entry.pattern}'",
            near_miss=entry,
            failed_placeholder=outcome.failed,
        )
        return verdict, mode

    if prefix is not None:
        verdict = LineVerdict(
            VERDICT_UNUSUAL,
            None,
            f"incomplete command: expected continuation of '{prefix.pattern}'",
            near_miss=prefix,
        )
        return verdict, mode

    return LineVerdict(VERDICT_INVALID, None, f"no {mode} command matches"), mode


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class Finding:
    """One verifier complaint, always with an actionable suggestion."""

    kind: str
    severity: str
    block: int
    line: int
    message: str
    suggestion: str

    def __post_init__(self) -> None:
        if self.kind not in FINDING_KINDS:
            raise ValueError(f"unknown finding kind {self.kind!r}")
        if self.severity not in (SEVERITY_HIGH, SEVERITY_LOW):
            raise ValueError(f"unknown severity {self.severity!r}")
        if not self.suggestion.strip():
            raise ValueError("finding suggestion must be non-empty")


def syntax_score(values: Iterable[int]) -> int:
    """Aggregate per-line verdicts into the configuration-level score.

    1 when every line is valid; -1 as soon as any line is invalid; 0 when
    the worst defect is an incomplete/unusual line.  An empty verdict list
    scores 1 (vacuously all-valid).
    """
    vals = list(values)
    if not vals:
        return VERDICT_VALID
    return min(vals)


@dataclass(frozen=True)
class VerificationReport:
    approved: bool
    line_verdicts: tuple[tuple[LineVerdict, ...], ...]
    findings: tuple[Finding, ...]
    syntax_score: int

    def __post_init__(self) -> None:
        if self.approved != (len(self.findings) == 0):
            raise ValueError("approved must hold exactly when there are no findings")
        expected = syntax_score(v.value for block in self.line_verdicts for v in block)
        if self.syntax_score != expected:
            raise ValueError("syntax_score is inconsistent with the line verdicts")
        if self.approved and self.syntax_score != VERDICT_VALID:
            raise ValueError("approval is strictly stronger than syntactic validity")


def build_report(
    line_verdicts: Sequence[Sequence[LineVerdict]],
    findings: Sequence[Finding],
) -> VerificationReport:
    """Assemble a report, deriving approval and the syntax score."""
    verdict_blocks = tuple(tuple(block) for block in line_verdicts)
    ordered = tuple(
        sorted(findings, key=lambda f: (f.block, f.line, FINDING_KINDS.index(f.kind), f.message))
    )
    return VerificationReport(
        approved=not ordered,
        line_verdicts=verdict_blocks,
        findings=ordered,
        syntax_score=syntax_score(v.value for block in verdict_blocks for v in block),
    )


@dataclass(frozen=True)
class AnnotatedLine:
    """A validated line with the mode context it was checked in."""

    block: int
    line: ConfigLine
    verdict: LineVerdict
    mode_before: str
    mode_after: str


def _example_declaration(grammar: CommandGrammar, namespace: str, value: str) -> str:
    entry = grammar.declaring_entry(namespace)
    if entry is None:
        return f"declare {namespace} {value}"
    parts = []
    for token in entry.tokens:
        if isinstance(token, LiteralToken):
            parts.append(token.text)
        elif isinstance(token, ChoiceToken):
            parts.append(token.options[0])
        elif entry.declares and token.name == entry.declares[1]:
            parts.append(value)
        else:
            parts.append(f"<{token.name}>")
    return "'" + " ".join(parts) + "'"


def _mode_error_findings(
    annotated: Sequence[Sequence[AnnotatedLine]], grammar: CommandGrammar
) -> list[Finding]:
    findings = []
    for block in annotated:
        for al in block:
            if al.verdict.value != VERDICT_INVALID:
                continue
            tokens = al.line.raw.split()
            home_mode = next(
                (
                    mode
                    for mode in MODES
                    if mode != al.mode_before
                    and any(
                        match_tokens(e.tokens, tokens).status == "full"
                        for e in grammar.entries_for(mode)
                    )
                ),
                None,
            )
            if home_mode is None:
                continue
            hint = _MODE_ENTRY_HINTS.get(home_mode, f"the {home_mode} mode")
            findings.append(
                Finding(
                    kind=KIND_MODE_ERROR,
                    severity=SEVERITY_HIGH,
                    block=al.block,
                    line=al.line.index,
                    message=(
                        f"'{al.line.raw}' is a {home_mode} command but appears in "
                        f"{al.mode_before} mode"
                    ),
                    suggestion=f"Enter {home_mode} mode first, e.g. via {hint}.",
                )
            )
    return findings


def _dependency_findings(
    annotated: Sequence[Sequence[AnnotatedLine]], grammar: CommandGrammar
) -> list[Finding]:
    findings = []
    for block in annotated:
        declared: set[tuple[str, str]] = set()
        for al in block:
            entry = al.verdict.matched_entry
            if entry is None:
                continue
            if entry.requires:
                namespace, placeholder = entry.requires
                value = al.verdict.bindings.get(placeholder, "")
                if (namespace, value) not in declared:
                    example = _example_declaration(grammar, namespace, value)
                    findings.append(
                        Finding(
                            kind=KIND_DEPENDENCY,
                            severity=SEVERITY_HIGH,
                            block=al.block,
                            line=al.line.index,
                            message=(
                                f"'{al.line.raw}' references {namespace} {value}, which is "
                                f"not declared earlier in this device block"
                            ),
                            suggestion=f"Add {example} before this command.",
                        )
                    )
            if entry.declares:
                namespace, placeholder = entry.declares
                value = al.verdict.bindings.get(placeholder, "")
                declared.add((namespace, value))
    return findings


def _value_sanity_findings(annotated: Sequence[Sequence[AnnotatedLine]]) -> list[Finding]:
    findings = []
    for block in annotated:
        for al in block:
            failed = al.verdict.failed_placeholder
            if al.verdict.value != VERDICT_UNUSUAL or failed is None:
                continue
            name, value_class, value = failed
            if value_class not in ("ipv4", "ipv4-wildcard"):
                continue
            parts = value.split(".")
            if len(parts) == 4 and all(p.isdigit() for p in parts):
                message = (
                    f"address value {value!r} for <{name}> is out of range: "
                    f"each octet must be between 0 and 255"
                )
            else:
                message = f"value {value!r} for <{name}> does not parse as a dotted-quad address"
            findings.append(
                Finding(
                    kind=KIND_INCOMPLETE,
                    severity=SEVERITY_LOW,
                    block=al.block,
                    line=al.line.index,
                    message=message,
                    suggestion="Use a dotted-quad address with each octet between 0 and 255.",
                )
            )
    return findings


def _conflict_findings(annotated: Sequence[Sequence[AnnotatedLine]]) -> list[Finding]:
    findings = []
    for block in annotated:
        span = 0
        seen: dict[tuple[int, str], str] = {}
        for al in block:
            entry = al.verdict.matched_entry
            if entry is not None:
                for excluded_key in entry.excludes:
                    other = seen.get((span, excluded_key))
                    if other is not None:
                        findings.append(
                            Finding(
                                kind=KIND_CONFLICT,
                                severity=SEVERITY_HIGH,
                                block=al.block,
                                line=al.line.index,
                                message=(
                                    f"'{al.line.raw}' conflicts with '{other}' earlier in the "
                                    f"same {al.mode_before} section"
                                ),
                                suggestion=(
                                    f"Keep either '{other}' or '{al.line.raw}', not both."
                                ),
                            )
                        )
                seen[(span, entry.key)] = al.line.raw
            if al.mode_after != al.mode_before:
                span += 1
    return findings


def run_semantic_rules(
    annotated: Sequence[Sequence[AnnotatedLine]], grammar: CommandGrammar
) -> list[Finding]:
    """Semantic pass over validated blocks.

    Emits mode-reachability errors for commands that belong to a different
    mode than the one established by the preceding lines, missing-declaration
    findings for reference annotations, out-of-range address findings, and
    conflicts between mutually exclusive commands within one mode span.
    """
    findings = _mode_error_findings(annotated, grammar)
    findings += _dependency_findings(annotated, grammar)
    findings += _value_sanity_findings(annotated)
    findings += _conflict_findings(annotated)
    return findings


def _base_finding(al: AnnotatedLine) -> Finding:
    if al.verdict.value == VERDICT_INVALID:
        return Finding(
            kind=KIND_SYNTAX,
            severity=SEVERITY_HIGH,
            block=al.block,
            line=al.line.index,
            message=f"'{al.line.raw}': {al.verdict.detail}",
            suggestion="Remove this line or replace it with a supported command.",
        )
    near = al.verdict.near_miss
    if al.verdict.failed_placeholder is not None:
        name, value_class, _value = al.verdict.failed_placeholder
        suggestion = f"Provide a valid {value_class} value for <{name}>."
    elif near is not None:
        suggestion = f"Complete the command to match '{near.pattern}'."
    else:
        suggestion = "Complete the command."
    return Finding(
        kind=KIND_INCOMPLETE,
        severity=SEVERITY_LOW,
        block=al.block,
        line=al.line.index,
        message=f"'{al.line.raw}': {al.verdict.detail}",
        suggestion=suggestion,
    )


def annotate_config(
    config: GeneratedConfiguration, grammar: CommandGrammar
) -> list[list[AnnotatedLine]]:
    """Validate every block line by line, threading modes from exec."""
    annotated_blocks: list[list[AnnotatedLine]] = []
    for block in config.blocks:
        mode = MODE_EXEC
        annotated: list[AnnotatedLine] = []
        for line in block.lines:
            verdict, next_mode = validate_line(line, mode, grammar)
            annotated.append(
                AnnotatedLine(
                    block=block.device_ordinal,
                    line=line,
                    verdict=verdict,
                    mode_before=mode,
                    mode_after=next_mode,
                )
            )
            mode = next_mode
        annotated_blocks.append(annotated)
    return annotated_blocks


def verify_config(config: GeneratedConfiguration, grammar: CommandGrammar) -> VerificationReport:
    """Full verification: line verdicts, semantic rules, and the report.

    Every imperfect line yields exactly one finding: semantic rules take
    precedence for lines they explain (wrong mode, bad address value), and
    the remaining 0/-1 verdicts fall back to incomplete/syntax findings.
    """
    if not config.blocks:
        raise EmptyConfigurationError("configuration has no device blocks")
    annotated = annotate_config(config, grammar)
    findings = run_semantic_rules(annotated, grammar)
    covered = {
        (f.block, f.line)
        for f in findings
        if f.kind in (KIND_MODE_ERROR, KIND_INCOMPLETE)
    }
    for block in annotated:
        for al in block:
            if al.verdict.value == VERDICT_VALID:
                continue
            if (al.block, al.line.index) in covered:
                continue
            findings.append(_base_finding(al))
    verdicts = [[al.verdict for al in block] for block in annotated]
    return build_report(verdicts, findings)
