"""Neural segment-score clients: built-in stubs, subprocess, and HTTP.

Learned metrics (reference-based DA-style and reference-free QE-style)
run in their own environments; this module only moves segments out and
decimals back.  Two wire contracts are supported, chosen per
deployment:

- subprocess: command reads tab-separated ``source\thypothesis\treference``
  lines on stdin (reference column empty for QE) and writes one decimal
  per line;
- HTTP: JSON POST with parallel ``source``/``mt`` lists (plus ``ref``
  when reference-based), response carries a ``scores`` list.

Two deterministic built-in stubs keep the full pipeline runnable and
testable offline: an edit-distance similarity standing in for a
reference-based metric, and a length-ratio heuristic standing in for a
reference-free one.
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass

import httpx


class ScoringError(RuntimeError):
    """Scorer unavailable, misaligned, or returning non-finite values."""


@dataclass(frozen=True)
class ScorerConfig:
    """How to reach one neural scorer and what it needs.

    ``scorer_id`` is a free-form identifier recorded with every score;
    ``reference_based`` decides whether references are required and
    shipped.  ``mode`` picks the contract: builtin, subprocess, http.
    """

    scorer_id: str
    reference_based: bool
    mode: str = "builtin"
    command: tuple[str, ...] = ()
    url: str = ""
    batch_size: int = 64
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.mode not in ("builtin", "subprocess", "http"):
            raise ValueError(f"unknown scorer mode {self.mode!r}")
        if self.mode == "subprocess" and not self.command:
            raise ValueError("subprocess scorer needs a command")
        if self.mode == "http" and not self.url:
            raise ValueError("http scorer needs a url")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        object.__setattr__(self, "command", tuple(self.command))


@dataclass(frozen=True)
class NeuralScore:
    """One segment-level score from a named scorer."""

    value: float
    scorer_id: str
    reference_based: bool


def _edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, O(len(a) * len(b)) with two rows."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


def edit_similarity_stub(source: str, hypothesis: str, reference: str) -> float:
    """Reference-based stand-in: 1 minus normalized edit distance."""
    if not hypothesis and not reference:
        return 1.0
    longest = max(len(hypothesis), len(reference))
    return 1.0 - _edit_distance(hypothesis, reference) / longest


def length_ratio_stub(source: str, hypothesis: str, reference: str = "") -> float:
    """Reference-free stand-in: length agreement between source and output."""
    if not source and not hypothesis:
        return 1.0
    if not source or not hypothesis:
        return 0.0
    return min(len(source), len(hypothesis)) / max(len(source), len(hypothesis))


_BUILTIN_STUBS = {
    "edit-similarity": edit_similarity_stub,
    "length-ratio": length_ratio_stub,
}


def _score_builtin(cfg, sources, hypotheses, references):
    try:
        fn = _BUILTIN_STUBS[cfg.scorer_id]
    except KeyError:
        raise ScoringError(
            f"unknown builtin scorer {cfg.scorer_id!r}; "
            f"known: {sorted(_BUILTIN_STUBS)}"
        ) from None
    refs = references if references is not None else [""] * len(sources)
    return [fn(s, h, r) for s, h, r in zip(sources, hypotheses, refs)]


def _score_subprocess(cfg, sources, hypotheses, references):
    refs = references if references is not None else [""] * len(sources)
    rows = []
    for src, hyp, ref in zip(sources, hypotheses, refs):
        for name, text in (("source", src), ("hypothesis", hyp), ("reference", ref)):
            if "\t" in text or "\n" in text:
                raise ScoringError(
                    f"{name} segment contains a tab or newline; the "
                    "subprocess contract is line- and tab-delimited"
                )
        rows.append(f"{src}\t{hyp}\t{ref}")
    try:
        proc = subprocess.run(
            list(cfg.command),
            input="\n".join(rows) + "\n",
            capture_output=True,
            text=True,
            timeout=cfg.timeout,
            check=False,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ScoringError(f"scorer {cfg.scorer_id!r} unavailable: {exc}") from exc
    if proc.returncode != 0:
        raise ScoringError(
            f"scorer {cfg.scorer_id!r} exited with {proc.returncode}: "
            f"{proc.stderr.strip()[:200]}"
        )
    lines = proc.stdout.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != len(rows):
        raise ScoringError(
            f"scorer {cfg.scorer_id!r} returned {len(lines)} scores for "
            f"{len(rows)} segments"
        )
    try:
        return [float(line.strip()) for line in lines]
    except ValueError as exc:
        raise ScoringError(f"scorer {cfg.scorer_id!r} emitted a non-number: {exc}") from exc


def _score_http(cfg, sources, hypotheses, references):
    values: list[float] = []
    with httpx.Client(timeout=cfg.timeout) as client:
        for start in range(0, len(sources), cfg.batch_size):
            stop = start + cfg.batch_size
            body: dict = {
                "source": sources[start:stop],
                "mt": hypotheses[start:stop],
            }
            if references is not None:
                body["ref"] = references[start:stop]
            try:
                reply = client.post(cfg.url, json=body)
            except httpx.HTTPError as exc:
                raise ScoringError(
                    f"scorer {cfg.scorer_id!r} unavailable: {exc}"
                ) from exc
            if reply.status_code != 200:
                raise ScoringError(
                    f"scorer {cfg.scorer_id!r} returned {reply.status_code}: "
                    f"{reply.text[:200]}"
                )
            try:
                batch = reply.json()["scores"]
            except (KeyError, ValueError) as exc:
                raise ScoringError(
                    f"scorer {cfg.scorer_id!r} response missing scores: {exc}"
                ) from exc
            if len(batch) != len(body["mt"]):
                raise ScoringError(
                    f"scorer {cfg.scorer_id!r} returned {len(batch)} scores "
                    f"for a batch of {len(body['mt'])}"
                )
            values.extend(float(v) for v in batch)
    return values


def neural_score(
    sources: list[str],
    hypotheses: list[str],
    references: list[str] | None,
    cfg: ScorerConfig,
) -> tuple[list[NeuralScore], float]:
    """Score aligned segments; returns per-segment scores and their mean.

    References are mandatory for reference-based scorers and ignored
    otherwise.  Any non-finite value fails loudly with the segment
    index rather than polluting downstream selection.
    """
    if len(sources) != len(hypotheses):
        raise ScoringError(
            f"{len(sources)} sources vs {len(hypotheses)} hypotheses"
        )
    if not sources:
        raise ScoringError("cannot score an empty batch")
    if cfg.reference_based:
        if references is None or len(references) != len(sources):
            raise ScoringError(
                f"scorer {cfg.scorer_id!r} is reference-based and needs "
                "references aligned with the sources"
            )
    else:
        references = None

    if cfg.mode == "builtin":
        values = _score_builtin(cfg, sources, hypotheses, references)
    elif cfg.mode == "subprocess":
        values = _score_subprocess(cfg, sources, hypotheses, references)
    else:
        values = _score_http(cfg, sources, hypotheses, references)

    scores = []
    for i, value in enumerate(values):
        if not math.isfinite(value):
            raise ScoringError(
                f"scorer {cfg.scorer_id!r} returned non-finite value "
                f"{value!r} at segment {i}"
            )
        scores.append(
            NeuralScore(
                value=value,
                scorer_id=cfg.scorer_id,
                reference_based=cfg.reference_based,
            )
        )
    mean = sum(s.value for s in scores) / len(scores)
    return scores, mean
