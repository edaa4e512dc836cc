"""Closed-loop translation of network intents into verified IOS configurations."""

from .agent import (
    DEFAULT_LABELS,
    GenerationSettings,
    ResultLogger,
    SessionResult,
    Timings,
    load_requirements,
    log_result,
    run_session,
    store_config,
)
from .backend import (
    CompletionRequest,
    CompletionResult,
    HttpChatBackend,
    MockChatBackend,
    create_backend,
)
from .core import (
    ChatMessage,
    ConfigLine,
    DeviceBlock,
    GeneratedConfiguration,
    Intent,
    IntentKind,
    parse_configuration,
    split_device_blocks,
    strip_non_command_text,
)
from .dataset import (
    Chunk,
    PageText,
    QuestionConfigPair,
    RequirementConfigPair,
    chunk_text,
    clean_pairs,
    enhance_chunk,
    extract_pages,
    refine_to_questions,
    write_dataset,
)
from .metrics import (
    EvalCase,
    MetricsRecord,
    complexity_score,
    evaluate_batch,
    goal_accuracy,
    min_max_normalize,
    total_dura_time,
    total_len,
)
from .prompts import (
    StepsPlan,
    TemplateSet,
    build_classifier_prompt,
    build_config_prompt,
    build_refinement_prompt,
    build_steps_prompt,
    parse_classifier_response,
    parse_steps_response,
)
from .verifier import (
    CommandGrammar,
    Finding,
    LineVerdict,
    VerificationReport,
    default_grammar,
    load_grammar,
    syntax_score,
    validate_line,
    verify_config,
)

__version__ = "0.1.0"
