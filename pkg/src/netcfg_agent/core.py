"""Domain types shared across the package, plus configuration-text parsing.

Model output is plain text: one Cisco IOS command per line, with separate
devices delimited by a line containing only ``~~~``.  The helpers here turn
that raw text into structured, immutable value objects that the verifier,
metrics, and persistence layers consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

#: Literal token separating per-device configuration blocks in model output.
DEVICE_DELIMITER = "~~~"

FORM_REQUIREMENT = "requirement"
FORM_QUESTION = "question"
INTENT_FORMS = frozenset({FORM_REQUIREMENT, FORM_QUESTION})

CHAT_ROLES = ("system", "assistant", "user")

#: Line prefixes treated as prose rather than configuration commands.
#: Case-insensitive; extend or replace via strip_non_command_text(prose_prefixes=...).
DEFAULT_PROSE_PREFIXES: tuple[str, ...] = (
    "here",
    "the following",
    "this ",
    "these ",
    "note:",
    "note that",
    "explanation",
    "sure",
    "certainly",
    "of course",
    "as requested",
    "to ",
    "you ",
    "i ",
    "we ",
    "below ",
    "in summary",
    "first,",
    "finally,",
    "please ",
)


@dataclass(frozen=True)
class Intent:
    """A natural-language configuration request.

    ``form`` distinguishes declarative requirements ("Configure a port
    for ...") from questions ("How do I enable ...").  ``context`` carries
    optional free text such as network status or dependencies.
    """

    id: str
    text: str
    form: str = FORM_REQUIREMENT
    context: str = ""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("intent text must be non-empty")
        if self.form not in INTENT_FORMS:
            raise ValueError(f"intent form must be one of {sorted(INTENT_FORMS)}, got {self.form!r}")


@dataclass(frozen=True)
class IntentKind:
    """Classification label for an intent, drawn from a configured label set."""

    label: str

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise ValueError("intent kind label must be non-empty")


@dataclass(frozen=True)
class ChatMessage:
    """One message of a chat-completion conversation."""

    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in CHAT_ROLES:
            raise ValueError(f"role must be one of {CHAT_ROLES}, got {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")

    def as_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ConfigLine:
    """A single configuration command line within a device block."""

    raw: str
    index: int

    def __post_init__(self) -> None:
        if "\n" in self.raw or "\r" in self.raw:
            raise ValueError("config line must not contain newline characters")


@dataclass(frozen=True)
class DeviceBlock:
    """Ordered commands for one device; never empty."""

    lines: tuple[ConfigLine, ...]
    device_ordinal: int

    def __post_init__(self) -> None:
        if not self.lines:
            raise ValueError("device block must contain at least one line")

    @property
    def text(self) -> str:
        return "\n".join(line.raw for line in self.lines)


@dataclass(frozen=True)
class GeneratedConfiguration:
    """Model-produced configuration, split into per-device blocks.

    ``raw_text`` holds the command text the blocks were parsed from (after
    prose stripping), so joining the blocks with the delimiter reproduces
    its command content.
    """

    blocks: tuple[DeviceBlock, ...]
    source_intent_id: str
    raw_text: str

    def __post_init__(self) -> None:
        if self.raw_text.strip() and not self.blocks:
            raise ValueError("non-empty configuration text must yield at least one block")

    @property
    def command_text(self) -> str:
        """Canonical text form: blocks joined by the device delimiter."""
        return f"\n{DEVICE_DELIMITER}\n".join(block.text for block in self.blocks)

    def iter_lines(self) -> Iterator[tuple[int, ConfigLine]]:
        """Yield (block ordinal, line) pairs across all blocks."""
        for block in self.blocks:
            for line in block.lines:
                yield block.device_ordinal, line


def split_device_blocks(raw_text: str) -> list[DeviceBlock]:
    """Split raw configuration text into per-device blocks.

    The delimiter is matched line-anchored: a line is a separator only when
    it contains nothing but ``~~~`` (surrounding whitespace ignored), so
    tilde runs inside a command never split it.  Each line is trimmed, blank
    lines are dropped, and blocks that end up empty are not emitted.
    """
    groups: list[list[str]] = [[]]
    for line in raw_text.splitlines():
        stripped = line.strip()
        if stripped == DEVICE_DELIMITER:
            groups.append([])
        elif stripped:
            groups[-1].append(stripped)

    blocks: list[DeviceBlock] = []
    for group in groups:
        if not group:
            continue
        ordinal = len(blocks)
        lines = tuple(ConfigLine(raw=text, index=i) for i, text in enumerate(group))
        blocks.append(DeviceBlock(lines=lines, device_ordinal=ordinal))
    return blocks


def _is_prose(line: str, prefixes: Sequence[str]) -> bool:
    stripped = line.strip()
    if not stripped:
        return False
    if stripped == DEVICE_DELIMITER:
        return False
    if stripped.endswith(":"):
        return True
    lowered = stripped.lower()
    return any(lowered.startswith(prefix) for prefix in prefixes)


def strip_non_command_text(
    raw_text: str,
    prose_prefixes: Sequence[str] = DEFAULT_PROSE_PREFIXES,
) -> str:
    """Remove code-fence markers and prose lines from model output.

    Kept lines are preserved verbatim.  A line is dropped when it is a code
    fence marker, ends with ':', or begins with one of the configured prose
    prefixes (case-insensitive).  Idempotent.
    """
    kept = []
    for line in raw_text.splitlines():
        stripped = line.strip()
        if stripped.startswith("```"):
            continue
        if _is_prose(line, prose_prefixes):
            continue
        kept.append(line)
    return "\n".join(kept)


def parse_configuration(
    raw_text: str,
    source_intent_id: str,
    prose_prefixes: Sequence[str] = DEFAULT_PROSE_PREFIXES,
) -> GeneratedConfiguration:
    """Strip prose from model output and parse it into device blocks."""
    cleaned = strip_non_command_text(raw_text, prose_prefixes)
    blocks = tuple(split_device_blocks(cleaned))
    return GeneratedConfiguration(blocks=blocks, source_intent_id=source_intent_id, raw_text=cleaned)
