"""Command-line interface: translate, verify, eval, dataset, repl.

Settings resolve in precedence order: built-in defaults, then the JSON
config file given via --config, then environment variables (NETCFG_*), then
explicit flags.  stdout carries only machine-consumable payload (generated
configurations, verdict listings, statistics); everything else goes to
stderr.  Exit codes: 0 success/approved, 1 failure, 2 refinement budget
exhausted, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import agent, dataset, metrics
from .backend import BACKEND_URL_ENV, BackendError, create_backend
from .core import GeneratedConfiguration, Intent, split_device_blocks
from .prompts import TemplateError, TemplateSet, default_templates
from .verifier import (
    CommandGrammar,
    GrammarError,
    VerificationReport,
    default_grammar,
    load_grammar,
    verify_config,
)

GRAMMAR_ENV = "NETCFG_GRAMMAR"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_EXHAUSTED = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass(frozen=True)
class CliConfig:
    backend_url: str = "http://127.0.0.1:8000"
    model_name: str = "local-model"
    temperature: float = 0.0
    timeout: float = 60.0
    retries: int = 2
    grammar_path: str = ""
    template_path: str = ""
    max_iterations: int = 3
    repo_root: str = "configs-repo"
    log_path: str = ""
    labels: tuple[str, ...] = agent.DEFAULT_LABELS

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


_CONFIG_KEYS = {
    "backend_url": "backend_url",
    "model": "model_name",
    "temperature": "temperature",
    "timeout": "timeout",
    "retries": "retries",
    "grammar": "grammar_path",
    "templates": "template_path",
    "max_iterations": "max_iterations",
    "repo": "repo_root",
    "log": "log_path",
    "labels": "labels",
}


def resolve_config(args: argparse.Namespace) -> CliConfig:
    """Merge defaults, config file, environment, and flags (lowest to highest)."""
    values: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        if not Path(config_path).is_file():
            raise UsageError(f"config file not found: {config_path}")
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        for key, field_name in _CONFIG_KEYS.items():
            if key in data:
                values[field_name] = data[key]
    if os.environ.get(BACKEND_URL_ENV):
        values["backend_url"] = os.environ[BACKEND_URL_ENV]
    if os.environ.get(GRAMMAR_ENV):
        values["grammar_path"] = os.environ[GRAMMAR_ENV]
    flag_map = {
        "backend_url": "backend_url",
        "model": "model_name",
        "grammar": "grammar_path",
        "templates": "template_path",
        "max_iter": "max_iterations",
        "repo": "repo_root",
        "log": "log_path",
    }
    for flag, field_name in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[field_name] = value
    if "labels" in values:
        values["labels"] = tuple(values["labels"])
    return CliConfig(**values)


def _load_grammar(config: CliConfig) -> CommandGrammar:
    if config.grammar_path:
        return load_grammar(config.grammar_path)
    return default_grammar()


def _load_templates(config: CliConfig) -> TemplateSet:
    if config.template_path:
        return TemplateSet.load(config.template_path)
    return default_templates()


def _make_backend(config: CliConfig):
    return create_backend(config.backend_url, timeout=config.timeout, retries=config.retries)


def _settings(config: CliConfig) -> agent.GenerationSettings:
    return agent.GenerationSettings(
        model_name=config.model_name, temperature=config.temperature
    )


def render_report(report: VerificationReport) -> str:
    lines = [
        f"approved: {'yes' if report.approved else 'no'}",
        f"syntax_score: {report.syntax_score}",
    ]
    for block_no, block in enumerate(report.line_verdicts):
        for verdict in block:
            lines.append(f"verdict block={block_no} value={verdict.value:+d} {verdict.detail}")
    for f in report.findings:
        lines.append(
            f"finding kind={f.kind} severity={f.severity} block={f.block} line={f.line + 1} "
            f"message={f.message!r} suggestion={f.suggestion!r}"
        )
    return "\n".join(lines)


def _run_one_session(config: CliConfig, intent: Intent, store: bool) -> int:
    grammar = _load_grammar(config)
    templates = _load_templates(config)
    backend = _make_backend(config)
    logger = agent.ResultLogger(config.log_path) if config.log_path else None
    result = agent.run_session(
        intent,
        backend,
        grammar,
        templates=templates,
        labels=config.labels,
        max_iterations=config.max_iterations,
        settings=_settings(config),
        logger=logger,
    )
    if result.final_report is not None:
        print(render_report(result.final_report), file=sys.stderr)
    if result.error:
        print(f"session failed: {result.error}", file=sys.stderr)
    if result.final_config is not None:
        print(result.final_config.command_text)
    if result.status == agent.STATUS_APPROVED:
        if store:
            entry = agent.store_config(config.repo_root, result, grammar)
            print(f"stored {entry.intent_id} at {config.repo_root}", file=sys.stderr)
        return EXIT_OK
    if result.status == agent.STATUS_EXHAUSTED:
        return EXIT_EXHAUSTED
    return EXIT_FAILURE


def cmd_translate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if bool(args.text) == bool(args.file):
        raise UsageError("provide exactly one of --text or --file")
    if args.file:
        if not Path(args.file).is_file():
            raise UsageError(f"intent file not found: {args.file}")
        text = Path(args.file).read_text(encoding="utf-8").strip()
    else:
        text = args.text
    intent = Intent(id=args.id, text=text, form=args.form, context=args.context or "")
    return _run_one_session(config, intent, store=args.store)


def cmd_verify(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    path = Path(args.config_file)
    if not path.is_file():
        raise UsageError(f"configuration file not found: {path}")
    text = path.read_text(encoding="utf-8")
    blocks = split_device_blocks(text)
    if not blocks:
        raise UsageError(f"configuration file is empty: {path}")
    generated = GeneratedConfiguration(
        blocks=tuple(blocks),
        source_intent_id=path.stem,
        raw_text="\n".join(block.text for block in blocks),
    )
    report = verify_config(generated, _load_grammar(config))
    print(render_report(report))
    return EXIT_OK if report.approved else EXIT_FAILURE


def cmd_eval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    cases_path = Path(args.cases_file)
    if not cases_path.is_file():
        raise UsageError(f"cases file not found: {cases_path}")
    cases = metrics.load_cases(cases_path)
    if not cases:
        raise UsageError(f"cases file has no records: {cases_path}")
    grammar = _load_grammar(config)
    templates = _load_templates(config)
    backend = _make_backend(config)

    def runner(intent: Intent) -> agent.SessionResult:
        return agent.run_session(
            intent,
            backend,
            grammar,
            templates=templates,
            labels=config.labels,
            max_iterations=config.max_iterations,
            settings=_settings(config),
        )

    records, summary = metrics.evaluate_batch(cases, runner, grammar, jobs=args.jobs)
    out_dir = Path(args.out)
    metrics.write_records(records, out_dir / "records.jsonl")
    metrics.write_summary_csv(summary, out_dir / "summary.csv")
    print(summary.render_table())
    print(f"wrote {out_dir / 'records.jsonl'} and {out_dir / 'summary.csv'}", file=sys.stderr)
    return EXIT_OK


def cmd_dataset(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    in_path = Path(args.in_path)
    if not in_path.is_file():
        raise UsageError(f"input file not found: {in_path}")
    fmt = args.format
    templates = _load_templates(config)
    stage = args.stage
    if stage == "extract":
        stats = dataset.run_extract(in_path, args.out)
    elif stage == "chunk":
        stats = dataset.run_chunk(in_path, args.out, args.chunk_size)
    elif stage == "enhance":
        stats = dataset.run_enhance(in_path, args.out, _make_backend(config), templates, fmt)
    elif stage == "clean":
        stats = dataset.run_clean(in_path, args.out, fmt=fmt)
    elif stage == "refine":
        stats = dataset.run_refine(in_path, args.out, _make_backend(config), templates, fmt)
    else:
        stats = dataset.run_all(
            in_path, args.out, _make_backend(config), templates, fmt, args.chunk_size
        )
    for key, value in stats.items():
        print(f"{key}={value}")
    return EXIT_OK


def cmd_repl(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    print("enter one intent per line (EOF to quit)", file=sys.stderr)
    counter = 0
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        counter += 1
        intent = Intent(id=f"repl-{counter}", text=text, form=args.form)
        _run_one_session(config, intent, store=False)
        sys.stdout.flush()
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--backend-url", dest="backend_url", help="chat-completion endpoint or mock://script.json")
    parser.add_argument("--model", help="model name sent with each request")
    parser.add_argument("--grammar", help="path to a command grammar file")
    parser.add_argument("--templates", help="path to a prompt template file")
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="generation attempts per session")
    parser.add_argument("--repo", help="root directory of the configuration repository")
    parser.add_argument("--log", help="append session records to this file")


def build_parser() -> _Parser:
    parser = _Parser(prog="netcfg", description="intent-to-configuration agent")
    sub = parser.add_subparsers(dest="command", required=True)

    p_translate = sub.add_parser("translate", help="translate one intent into a configuration")
    p_translate.add_argument("--text", help="intent text")
    p_translate.add_argument("--file", help="file containing the intent text")
    p_translate.add_argument("--form", choices=["requirement", "question"], default="requirement")
    p_translate.add_argument("--context", help="optional context for the intent")
    p_translate.add_argument("--id", default="cli", help="intent id used for storage and logs")
    p_translate.add_argument("--store", action="store_true", help="store approved configs in the repo")
    _add_common_flags(p_translate)
    p_translate.set_defaults(func=cmd_translate)

    p_verify = sub.add_parser("verify", help="verify a configuration file")
    p_verify.add_argument("config_file", help="file with configuration commands")
    _add_common_flags(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_eval = sub.add_parser("eval", help="run the evaluation harness over a cases file")
    p_eval.add_argument("cases_file", help="JSON-lines eval cases")
    p_eval.add_argument("--out", default="eval-out", help="directory for report files")
    p_eval.add_argument("--jobs", type=int, default=1, help="concurrent sessions")
    _add_common_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_dataset = sub.add_parser("dataset", help="run dataset pipeline stages")
    p_dataset.add_argument(
        "stage", choices=["extract", "chunk", "enhance", "clean", "refine", "all"]
    )
    p_dataset.add_argument("--in", dest="in_path", required=True, help="input file")
    p_dataset.add_argument("--out", required=True, help="output file (directory for 'all')")
    p_dataset.add_argument(
        "--format",
        choices=[dataset.FORMAT_CSV, dataset.FORMAT_RECORDS],
        default=dataset.FORMAT_CSV,
        help="output format for pair datasets",
    )
    p_dataset.add_argument("--chunk-size", type=int, default=dataset.DEFAULT_CHUNK_LIMIT)
    _add_common_flags(p_dataset)
    p_dataset.set_defaults(func=cmd_dataset)

    p_repl = sub.add_parser("repl", help="read intents from stdin, print configurations")
    p_repl.add_argument("--form", choices=["requirement", "question"], default="requirement")
    _add_common_flags(p_repl)
    p_repl.set_defaults(func=cmd_repl)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"netcfg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GrammarError, TemplateError, BackendError, dataset.EmptyDocumentError) as exc:
        print(f"netcfg: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, ValueError) as exc:
        print(f"netcfg: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
