"""Workbench for iterative translation refinement with black-box LLMs.

Pieces: prompt rendering for the five querying strategies, a caching
chat-completions gateway with a deterministic mock, the iterative
refinement pipeline with reference-free best-iteration selection,
toolkit-compatible corpus metrics (BLEU, chrF++), report assembly, and
a blind pairwise human-evaluation service.
"""

from .config import RunConfig, load_config
from .corpus import LanguagePair, SampledSet, TestInstance, load_parallel_corpus, sample_instances
from .gateway import BackendConfig, ChatExchange, Gateway, MockBackend, sanitize_response
from .metrics import bleu_corpus, chrf_corpus, neural_score
from .pipeline import (
    RefinementTrace,
    Strategy,
    assign_random_targets,
    refine_external,
    run_refinement,
    run_translate,
    select_best_iteration,
)
from .prompts import PromptKind, RenderedPrompt, render_prompt
from .runner import run_experiment

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "ChatExchange",
    "Gateway",
    "LanguagePair",
    "MockBackend",
    "PromptKind",
    "RefinementTrace",
    "RenderedPrompt",
    "RunConfig",
    "SampledSet",
    "Strategy",
    "TestInstance",
    "assign_random_targets",
    "bleu_corpus",
    "chrf_corpus",
    "load_config",
    "load_parallel_corpus",
    "neural_score",
    "refine_external",
    "render_prompt",
    "run_experiment",
    "run_refinement",
    "run_translate",
    "sample_instances",
    "sanitize_response",
    "select_best_iteration",
    "__version__",
]
