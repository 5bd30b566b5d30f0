"""Corpus chrF++: character n-gram F-score with word n-grams added.

Matches the standard toolkit's defaults for the ++ variant: character
orders 1..6 computed on whitespace-stripped text, word orders 1..2 on
tokens with edge punctuation split off, statistics summed over the
corpus, per-order F-beta (beta=2) averaged over the orders that have
both hypothesis and reference n-grams.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass

from .bleu import AlignmentError

CHAR_ORDER = 6
WORD_ORDER = 2
BETA = 2

_PUNCTS = set(string.punctuation)


@dataclass(frozen=True)
class ChrFScore:
    """Corpus chrF++ on the 0-100 scale."""

    score: float
    char_order: int = CHAR_ORDER
    word_order: int = WORD_ORDER
    beta: int = BETA

    def format(self) -> str:
        return f"{self.score:.2f}"


def _char_ngrams(text: str, n: int) -> Counter:
    return Counter(text[i:i + n] for i in range(len(text) - n + 1))


def _word_ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _split_edge_punctuation(line: str) -> list[str]:
    """Split one leading or trailing punctuation mark off each word.

    Single-character words pass through; a trailing mark takes priority
    over a leading one, and only one mark is split per word ("!!!"
    becomes "!!", "!").
    """
    tokens: list[str] = []
    for word in line.split():
        if len(word) == 1:
            tokens.append(word)
        elif word[-1] in _PUNCTS:
            tokens.extend([word[:-1], word[-1]])
        elif word[0] in _PUNCTS:
            tokens.extend([word[0], word[1:]])
        else:
            tokens.append(word)
    return tokens


def _segment_statistics(hypothesis: str, reference: str) -> list[int]:
    """Per-order (hyp_count, ref_count, match_count) triples, flattened.

    Character orders come first, then word orders.
    """
    stats: list[int] = []
    hyp_chars = "".join(hypothesis.split())
    ref_chars = "".join(reference.split())
    for n in range(1, CHAR_ORDER + 1):
        hyp_ngrams = _char_ngrams(hyp_chars, n)
        ref_ngrams = _char_ngrams(ref_chars, n)
        matches = hyp_ngrams & ref_ngrams
        stats += [
            sum(hyp_ngrams.values()),
            sum(ref_ngrams.values()),
            sum(matches.values()),
        ]
    hyp_words = _split_edge_punctuation(hypothesis)
    ref_words = _split_edge_punctuation(reference)
    for n in range(1, WORD_ORDER + 1):
        hyp_ngrams = _word_ngrams(hyp_words, n)
        ref_ngrams = _word_ngrams(ref_words, n)
        matches = hyp_ngrams & ref_ngrams
        stats += [
            sum(hyp_ngrams.values()),
            sum(ref_ngrams.values()),
            sum(matches.values()),
        ]
    return stats


def _f_score(statistics: list[int]) -> float:
    """Average per-order F-beta over orders with any n-grams on both sides."""
    factor = BETA ** 2
    score_sum = 0.0
    effective_order = 0
    for i in range(CHAR_ORDER + WORD_ORDER):
        n_hyp, n_ref, n_match = statistics[3 * i:3 * i + 3]
        prec = n_match / n_hyp if n_hyp > 0 else 0.0
        rec = n_match / n_ref if n_ref > 0 else 0.0
        denom = factor * prec + rec
        order_score = (1 + factor) * prec * rec / denom if denom > 0 else 0.0
        if n_hyp > 0 and n_ref > 0:
            score_sum += order_score
            effective_order += 1
    if effective_order == 0:
        return 0.0
    return 100.0 * score_sum / effective_order


def chrf_corpus(hypotheses: list[str], references: list[str]) -> ChrFScore:
    """Corpus chrF++ over raw text, single reference per segment."""
    if len(hypotheses) != len(references):
        raise AlignmentError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise AlignmentError("cannot score an empty stream")
    totals = [0] * (3 * (CHAR_ORDER + WORD_ORDER))
    for hyp, ref in zip(hypotheses, references):
        for i, value in enumerate(_segment_statistics(hyp, ref)):
            totals[i] += value
    return ChrFScore(score=_f_score(totals))
