"""Corpus metrics (BLEU, chrF++), tokenizers, and neural-scorer clients."""

from .bleu import AlignmentError, BleuScore, bleu_corpus, compute_bleu
from .chrf import ChrFScore, chrf_corpus
from .scorers import NeuralScore, ScorerConfig, ScoringError, neural_score
from .tokenizers import (
    TokenizerHookError,
    default_tokenizer_for,
    tokenize,
    tokenize_13a,
    tokenize_lines,
    tokenize_zh,
)

__all__ = [
    "AlignmentError",
    "BleuScore",
    "ChrFScore",
    "NeuralScore",
    "ScorerConfig",
    "ScoringError",
    "TokenizerHookError",
    "bleu_corpus",
    "chrf_corpus",
    "compute_bleu",
    "default_tokenizer_for",
    "neural_score",
    "tokenize",
    "tokenize_13a",
    "tokenize_lines",
    "tokenize_zh",
]
