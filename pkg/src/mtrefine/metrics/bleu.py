"""Corpus BLEU with the standard toolkit's exponential smoothing.

Statistics follow the common reference implementation: clipped n-gram
counts up to order 4, closest-reference length (ties favor the shorter
reference), exponential smoothing for zero-match orders, and a log
floor that sends the score to zero when any order has no n-grams at
all.  Precisions are kept on a [0,1] scale; the score is reported on
the usual 0-100 scale.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .tokenizers import tokenize_lines

NGRAM_ORDER = 4

# Log floor the toolkit applies to zero precisions; exp of any mean
# containing it underflows to exactly 0.0.
_LOG_FLOOR = -9999999999


class AlignmentError(ValueError):
    """Hypothesis and reference streams differ in length or are empty."""


def _my_log(num: float) -> float:
    if num == 0.0:
        return _LOG_FLOOR
    return math.log(num)


def extract_ngrams(tokens: Sequence[str], max_order: int = NGRAM_ORDER) -> Counter:
    """Counts of token n-grams for 1 <= n <= max_order."""
    ngrams: Counter = Counter()
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            ngrams[tuple(tokens[i:i + n])] += 1
    return ngrams


@dataclass(frozen=True)
class BleuScore:
    """Corpus BLEU and its sufficient statistics.

    ``precisions`` are modified (smoothed) n-gram precisions in [0,1];
    ``all_empty`` marks the degenerate case of a hypothesis stream with
    no visible text, which scores 0 by convention.
    """

    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hypothesis_length: int
    reference_length: int
    all_empty: bool = False

    def format(self) -> str:
        precisions = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        return (
            f"BLEU = {self.score:.2f} {precisions} "
            f"(BP = {self.brevity_penalty:.3f} "
            f"hyp_len = {self.hypothesis_length} "
            f"ref_len = {self.reference_length})"
        )


def _corpus_statistics(
    hyp_tokens: Iterable[Sequence[str]],
    ref_tokens: Iterable[Sequence[str]],
) -> tuple[list[int], list[int], int, int]:
    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyp_tokens, ref_tokens):
        hyp_len += len(hyp)
        ref_len += len(ref)
        ref_ngrams = extract_ngrams(ref)
        for ngram, count in extract_ngrams(hyp).items():
            n = len(ngram)
            correct[n - 1] += min(count, ref_ngrams.get(ngram, 0))
            total[n - 1] += count
    return correct, total, hyp_len, ref_len


def compute_bleu(
    correct: Sequence[int],
    total: Sequence[int],
    hyp_len: int,
    ref_len: int,
    all_empty: bool = False,
) -> BleuScore:
    """BLEU from sufficient statistics, exponential smoothing only.

    A zero-match order n contributes 1 / (2^k * total_n) where k counts
    the zero-match orders seen so far; an order with no n-grams at all
    stops the loop and leaves its precision at the log-floored zero.
    """
    precisions = [0.0] * NGRAM_ORDER
    smooth_mteval = 1.0
    for n in range(1, NGRAM_ORDER + 1):
        if total[n - 1] == 0:
            break
        if correct[n - 1] == 0:
            smooth_mteval *= 2
            precisions[n - 1] = 1.0 / (smooth_mteval * total[n - 1])
        else:
            precisions[n - 1] = correct[n - 1] / total[n - 1]

    brevity_penalty = 1.0
    if hyp_len < ref_len:
        brevity_penalty = math.exp(1 - ref_len / hyp_len) if hyp_len > 0 else 0.0

    mean_log = sum(map(_my_log, precisions)) / NGRAM_ORDER
    score = 100.0 * brevity_penalty * math.exp(mean_log)
    return BleuScore(
        score=score,
        precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        hypothesis_length=hyp_len,
        reference_length=ref_len,
        all_empty=all_empty,
    )


def bleu_corpus_tokens(
    hyp_tokens: list[Sequence[str]],
    ref_tokens: list[Sequence[str]],
) -> BleuScore:
    """Corpus BLEU over pre-tokenized, line-aligned streams."""
    if len(hyp_tokens) != len(ref_tokens):
        raise AlignmentError(
            f"hypothesis stream has {len(hyp_tokens)} segments, reference "
            f"stream has {len(ref_tokens)}"
        )
    if not hyp_tokens:
        raise AlignmentError("cannot score an empty stream")
    all_empty = all(not toks for toks in hyp_tokens)
    correct, total, hyp_len, ref_len = _corpus_statistics(hyp_tokens, ref_tokens)
    return compute_bleu(correct, total, hyp_len, ref_len, all_empty=all_empty)


def bleu_corpus(
    hypotheses: list[str],
    references: list[str],
    tokenizer: str = "13a",
    hook_command: list[str] | None = None,
) -> BleuScore:
    """Corpus BLEU over raw text streams, single reference per segment."""
    if len(hypotheses) != len(references):
        raise AlignmentError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise AlignmentError("cannot score an empty stream")
    hyp_tokens = tokenize_lines([h.rstrip() for h in hypotheses], tokenizer, hook_command)
    ref_tokens = tokenize_lines([r.rstrip() for r in references], tokenizer, hook_command)
    return bleu_corpus_tokens(hyp_tokens, ref_tokens)
