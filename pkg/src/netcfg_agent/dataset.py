"""Pipeline that turns vendor-guide text into training datasets.

Stages: page extraction from pre-extracted text (form-feed page markers),
boundary-preserving chunking to at most 1000 characters, model-driven
enhancement into requirement/configuration pairs, placeholder cleaning,
question rephrasing, and CSV or record-per-line output.  Each stage is a
pure function over files or value objects so the CLI can run any single
stage or the whole chain.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .backend import BackendError, ChatBackend, CompletionRequest
from .prompts import TemplateSet, default_templates

log = logging.getLogger(__name__)

PAGE_BREAK = "\f"
DEFAULT_CHUNK_LIMIT = 1000
MIN_CHUNK_LIMIT = 100

#: Placeholder values that mark a pair as incomplete or invalid.
DEFAULT_REJECTIONS: tuple[str, ...] = ("None specified in this text", "N/A")

FORMAT_CSV = "csv"
FORMAT_RECORDS = "records"

SCHEMA_REQUIREMENT = "requirement"
SCHEMA_QUESTION = "question"


class EmptyDocumentError(ValueError):
    """The input document contains no text at all."""


@dataclass(frozen=True)
class PageText:
    """Text of one source page; blank pages are preserved for numbering."""

    page_number: int
    text: str

    def __post_init__(self) -> None:
        if self.page_number < 1:
            raise ValueError("page numbers are 1-based")


@dataclass(frozen=True)
class Provenance:
    page: int
    ordinal: int


@dataclass(frozen=True)
class Chunk:
    text: str
    source_page: int
    ordinal: int

    def __post_init__(self) -> None:
        if len(self.text) > DEFAULT_CHUNK_LIMIT:
            raise ValueError(f"chunk exceeds {DEFAULT_CHUNK_LIMIT} characters")


@dataclass(frozen=True)
class RequirementConfigPair:
    """One dataset row; fields may still be dirty before the cleaning stage."""

    requirement: str
    configuration: str
    provenance: Provenance


@dataclass(frozen=True)
class QuestionConfigPair:
    question: str
    configuration: str
    provenance: Provenance

    def __post_init__(self) -> None:
        if not self.question.endswith("?"):
            raise ValueError("questions must end with '?'")


def extract_pages(document: str) -> list[PageText]:
    """Split a pre-extracted document into pages on form-feed markers.

    Intra-page line structure is preserved verbatim; pages are numbered
    sequentially from 1.
    """
    if document == "":
        raise EmptyDocumentError("document is empty")
    return [
        PageText(page_number=number, text=text)
        for number, text in enumerate(document.split(PAGE_BREAK), start=1)
    ]


def _best_cut(text: str, max_len: int) -> int:
    """Largest cut position <= max_len, preferring natural boundaries.

    Sentence boundaries ('.', '!', '?' followed by whitespace or end of
    text) and newlines win over plain spaces; with neither in reach the cut
    is forced at max_len.
    """
    window = text[:max_len]
    for i in range(len(window) - 1, -1, -1):
        ch = window[i]
        if ch == "\n":
            return i + 1
        if ch in ".!?" and (i + 1 >= len(text) or text[i + 1].isspace()):
            return i + 1
    for i in range(len(window) - 1, -1, -1):
        if window[i].isspace():
            return i + 1
    return max_len


def chunk_text(page: PageText, max_len: int = DEFAULT_CHUNK_LIMIT) -> list[Chunk]:
    """Greedily pack a page into chunks of at most ``max_len`` characters.

    Each chunk takes the longest prefix that ends at a sentence boundary or
    newline, falling back to the last space and finally to a hard cut when a
    single token exceeds the limit.  Whitespace at the cut points is
    consumed, so joining the chunks reproduces the page text up to
    whitespace runs.
    """
    if not MIN_CHUNK_LIMIT <= max_len <= DEFAULT_CHUNK_LIMIT:
        raise ValueError(
            f"max_len must be between {MIN_CHUNK_LIMIT} and {DEFAULT_CHUNK_LIMIT}"
        )
    work = page.text.strip()
    chunks: list[Chunk] = []
    while work:
        if len(work) <= max_len:
            piece, work = work, ""
        else:
            cut = _best_cut(work, max_len)
            piece = work[:cut].rstrip()
            work = work[cut:].lstrip()
        if piece:
            chunks.append(Chunk(text=piece, source_page=page.page_number, ordinal=len(chunks)))
    return chunks


# ---------------------------------------------------------------------------
# Enhancement


def parse_labeled_pairs(text: str) -> list[tuple[str, str]]:
    """Parse ``requirement:`` / ``configuration:`` labeled sections.

    Lenient by design: responses with no labels yield an empty list, and a
    missing side yields an empty field for the cleaning stage to drop.
    """
    pairs: list[tuple[str, str]] = []
    requirement: list[str] | None = None
    configuration: list[str] | None = None

    def close() -> None:
        nonlocal requirement, configuration
        if requirement is not None or configuration is not None:
            req = " ".join(part for part in (requirement or []) if part)
            cfg = "\n".join(part for part in (configuration or []) if part)
            if req or cfg:
                pairs.append((req, cfg))
        requirement = None
        configuration = None

    for raw_line in text.splitlines():
        line = raw_line.strip()
        lowered = line.lower()
        if lowered.startswith("requirement:"):
            close()
            requirement = [line[len("requirement:"):].strip()]
        elif lowered.startswith("configuration:"):
            if requirement is None:
                requirement = [""]
            configuration = [line[len("configuration:"):].strip()]
        elif configuration is not None and line:
            configuration.append(line)
        elif requirement is not None and line:
            requirement.append(line)
    close()
    return pairs


def _three_role_request(messages, settings: "DatasetSettings") -> CompletionRequest:
    return CompletionRequest(
        messages=tuple(messages),
        temperature=settings.temperature,
        max_tokens=settings.max_tokens,
        model_name=settings.model_name,
    )


@dataclass(frozen=True)
class DatasetSettings:
    """Sampling settings for the enhancement and rephrasing calls."""

    model_name: str = "local-model"
    temperature: float = 0.0
    max_tokens: int = 1024


def enhance_chunk(
    chunk: Chunk,
    backend: ChatBackend,
    templates: TemplateSet | None = None,
    settings: DatasetSettings | None = None,
) -> list[RequirementConfigPair]:
    """Ask the model to separate requirements from configurations in a chunk.

    Backend errors propagate so the pipeline driver can fail just this
    chunk; unparseable responses log a warning and yield no pairs.
    """
    templates = templates or default_templates()
    settings = settings or DatasetSettings()
    messages = templates.build("enhancement", {"chunk": chunk.text})
    completion = backend.complete(_three_role_request(messages, settings))
    parsed = parse_labeled_pairs(completion.text)
    if not parsed and completion.text.strip():
        log.warning(
            "enhancement response for page %d chunk %d had no labeled pairs",
            chunk.source_page,
            chunk.ordinal,
        )
    provenance = Provenance(page=chunk.source_page, ordinal=chunk.ordinal)
    return [
        RequirementConfigPair(requirement=req, configuration=cfg, provenance=provenance)
        for req, cfg in parsed
    ]


def clean_pairs(
    pairs: Sequence[RequirementConfigPair],
    rejection_list: Sequence[str] = DEFAULT_REJECTIONS,
) -> tuple[list[RequirementConfigPair], int]:
    """Drop incomplete or placeholder pairs; returns (kept, removed count).

    A pair is removed when either field is empty, whitespace-only, or
    case-insensitively equals a rejection-list entry.  Order is preserved
    and kept + removed always equals the input count.
    """
    lowered = {entry.strip().lower() for entry in rejection_list}
    for required in DEFAULT_REJECTIONS:
        if required.lower() not in lowered:
            raise ValueError(f"rejection list must include {required!r}")
    kept: list[RequirementConfigPair] = []
    removed = 0
    for pair in pairs:
        fields = (pair.requirement, pair.configuration)
        if any(not f.strip() or f.strip().lower() in lowered for f in fields):
            removed += 1
        else:
            kept.append(pair)
    return kept, removed


def refine_to_questions(
    pairs: Sequence[RequirementConfigPair],
    backend: ChatBackend,
    templates: TemplateSet | None = None,
    settings: DatasetSettings | None = None,
) -> tuple[list[QuestionConfigPair], int]:
    """Rephrase each requirement as a question; returns (pairs, drop count).

    Configurations pass through byte-for-byte.  A trailing '?' is appended
    when the model omits it; a pair is dropped after one retry if the call
    errors or returns nothing usable.
    """
    templates = templates or default_templates()
    settings = settings or DatasetSettings()
    questions: list[QuestionConfigPair] = []
    dropped = 0
    for pair in pairs:
        question_text = ""
        for _ in range(2):
            try:
                messages = templates.build(
                    "question_rephrase", {"requirement": pair.requirement}
                )
                completion = backend.complete(_three_role_request(messages, settings))
            except BackendError:
                continue
            for line in completion.text.splitlines():
                if line.strip():
                    question_text = line.strip()
                    break
            if question_text:
                break
        if not question_text:
            dropped += 1
            continue
        if not question_text.endswith("?"):
            question_text += "?"
        questions.append(
            QuestionConfigPair(
                question=question_text,
                configuration=pair.configuration,
                provenance=pair.provenance,
            )
        )
    return questions, dropped


# ---------------------------------------------------------------------------
# Output formats


def _schema_field(pair: RequirementConfigPair | QuestionConfigPair, schema: str) -> str:
    return getattr(pair, schema)


def _check_schema(schema: str) -> None:
    if schema not in (SCHEMA_REQUIREMENT, SCHEMA_QUESTION):
        raise ValueError(f"schema must be {SCHEMA_REQUIREMENT!r} or {SCHEMA_QUESTION!r}")


def write_dataset(
    pairs: Sequence[RequirementConfigPair | QuestionConfigPair],
    path: str | Path,
    schema: str,
    fmt: str = FORMAT_CSV,
) -> None:
    """Write pairs as CSV (``<schema>,configuration`` header, RFC-4180
    quoting) or as JSON records, one per line, with provenance."""
    _check_schema(schema)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == FORMAT_CSV:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow([schema, "configuration"])
            for pair in pairs:
                writer.writerow([_schema_field(pair, schema), pair.configuration])
    elif fmt == FORMAT_RECORDS:
        with open(path, "w", encoding="utf-8") as handle:
            for pair in pairs:
                record = {
                    schema: _schema_field(pair, schema),
                    "configuration": pair.configuration,
                    "page": pair.provenance.page,
                    "ordinal": pair.provenance.ordinal,
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _pair_from_fields(
    schema: str, value: str, configuration: str, provenance: Provenance
) -> RequirementConfigPair | QuestionConfigPair:
    if schema == SCHEMA_QUESTION:
        return QuestionConfigPair(
            question=value, configuration=configuration, provenance=provenance
        )
    return RequirementConfigPair(
        requirement=value, configuration=configuration, provenance=provenance
    )


def read_dataset(
    path: str | Path, schema: str
) -> list[RequirementConfigPair | QuestionConfigPair]:
    """Read a dataset written by write_dataset; the format is sniffed.

    CSV files carry no provenance, so rows read back with page 0 and their
    row index as ordinal.
    """
    _check_schema(schema)
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        first = handle.read(1)
        handle.seek(0)
        if first == "{":
            pairs = []
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                pairs.append(
                    _pair_from_fields(
                        schema,
                        record[schema],
                        record["configuration"],
                        Provenance(page=record.get("page", 0), ordinal=record.get("ordinal", 0)),
                    )
                )
            return pairs
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != [schema, "configuration"]:
            raise ValueError(f"{path}: expected header '{schema},configuration', got {header}")
        return [
            _pair_from_fields(schema, row[0], row[1], Provenance(page=0, ordinal=i))
            for i, row in enumerate(reader)
        ]


# ---------------------------------------------------------------------------
# File-level stage drivers (used by the CLI)


def run_extract(in_path: str | Path, out_path: str | Path) -> dict[str, int]:
    document = Path(in_path).read_text(encoding="utf-8")
    pages = extract_pages(document)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as handle:
        for page in pages:
            handle.write(json.dumps({"page": page.page_number, "text": page.text}) + "\n")
    return {"pages": len(pages)}


def _read_pages(path: str | Path) -> list[PageText]:
    pages = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            record = json.loads(line)
            pages.append(PageText(page_number=record["page"], text=record["text"]))
    return pages


def run_chunk(
    in_path: str | Path, out_path: str | Path, max_len: int = DEFAULT_CHUNK_LIMIT
) -> dict[str, int]:
    chunks: list[Chunk] = []
    for page in _read_pages(in_path):
        chunks.extend(chunk_text(page, max_len))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as handle:
        for chunk in chunks:
            handle.write(
                json.dumps(
                    {"page": chunk.source_page, "ordinal": chunk.ordinal, "text": chunk.text}
                )
                + "\n"
            )
    return {"chunks": len(chunks)}


def _read_chunks(path: str | Path) -> list[Chunk]:
    chunks = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            record = json.loads(line)
            chunks.append(
                Chunk(text=record["text"], source_page=record["page"], ordinal=record["ordinal"])
            )
    return chunks


def run_enhance(
    in_path: str | Path,
    out_path: str | Path,
    backend: ChatBackend,
    templates: TemplateSet | None = None,
    fmt: str = FORMAT_RECORDS,
) -> dict[str, int]:
    """Enhance every chunk; a backend failure skips that chunk only."""
    pairs: list[RequirementConfigPair] = []
    failed_chunks = 0
    for chunk in _read_chunks(in_path):
        try:
            pairs.extend(enhance_chunk(chunk, backend, templates))
        except BackendError as exc:
            failed_chunks += 1
            log.warning(
                "enhancement failed for page %d chunk %d: %s",
                chunk.source_page,
                chunk.ordinal,
                exc,
            )
    write_dataset(pairs, out_path, SCHEMA_REQUIREMENT, fmt)
    return {"pairs": len(pairs), "failed_chunks": failed_chunks}


def run_clean(
    in_path: str | Path,
    out_path: str | Path,
    rejection_list: Sequence[str] = DEFAULT_REJECTIONS,
    fmt: str = FORMAT_RECORDS,
) -> dict[str, int]:
    pairs = read_dataset(in_path, SCHEMA_REQUIREMENT)
    kept, removed = clean_pairs(pairs, rejection_list)
    write_dataset(kept, out_path, SCHEMA_REQUIREMENT, fmt)
    return {"kept": len(kept), "removed": removed}


def run_refine(
    in_path: str | Path,
    out_path: str | Path,
    backend: ChatBackend,
    templates: TemplateSet | None = None,
    fmt: str = FORMAT_RECORDS,
) -> dict[str, int]:
    pairs = read_dataset(in_path, SCHEMA_REQUIREMENT)
    questions, dropped = refine_to_questions(pairs, backend, templates)
    write_dataset(questions, out_path, SCHEMA_QUESTION, fmt)
    return {"kept": len(questions), "dropped": dropped}


def run_all(
    in_path: str | Path,
    out_dir: str | Path,
    backend: ChatBackend,
    templates: TemplateSet | None = None,
    fmt: str = FORMAT_CSV,
    max_len: int = DEFAULT_CHUNK_LIMIT,
) -> dict[str, int]:
    """Run the whole pipeline, leaving every intermediate file in out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    extension = "csv" if fmt == FORMAT_CSV else "jsonl"
    stats = run_extract(in_path, out_dir / "pages.jsonl")
    stats |= run_chunk(out_dir / "pages.jsonl", out_dir / "chunks.jsonl", max_len)
    stats |= run_enhance(out_dir / "chunks.jsonl", out_dir / "pairs_raw.jsonl", backend, templates)
    clean_stats = run_clean(out_dir / "pairs_raw.jsonl", out_dir / f"requirements.{extension}", fmt=fmt)
    stats |= {"kept": clean_stats["kept"], "removed": clean_stats["removed"]}
    refine_stats = run_refine(
        out_dir / f"requirements.{extension}",
        out_dir / f"questions.{extension}",
        backend,
        templates,
        fmt=fmt,
    )
    stats |= {"questions": refine_stats["kept"], "dropped": refine_stats["dropped"]}
    return stats
