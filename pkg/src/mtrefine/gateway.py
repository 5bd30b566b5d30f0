"""Chat-completions access: transport, retries, caching, sanitizing.

The gateway speaks the common chat-completions wire shape (JSON POST
with a ``messages`` list, response under ``choices[0].message.content``)
so any compatible server works.  Every query carries exactly one
user-role message and no history; the iterative loop feeds prior output
back only through the prompt text itself.

A persistent response cache makes reruns free and deterministic: hits
never touch the network, and the cache key covers everything that can
change a completion except provider-side sampling.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx
from filelock import FileLock

from .prompts import RenderedPrompt

logger = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    """Base for completion-layer failures."""


class TransportError(GatewayError):
    """Network failure or retryable server error that outlived retries."""


class ProtocolError(GatewayError):
    """Non-retryable HTTP error or a response body of unexpected shape."""


class EmptyResponseError(GatewayError):
    """The server returned a completion with no visible text."""


@dataclass(frozen=True)
class BackendConfig:
    """Connection and decoding settings for one completion server.

    ``credential_env`` names an environment variable; the secret itself
    is never stored, logged, or written to any artifact.  ``max_tokens``
    of None defers to the server default and is recorded as null.
    """

    endpoint: str
    model: str
    temperature: float = 1.0
    max_tokens: int | None = None
    timeout: float = 60.0
    max_retries: int = 3
    retry_backoff: float = 0.5
    min_request_interval: float = 0.0
    credential_env: str = "OPENAI_API_KEY"

    def __post_init__(self) -> None:
        if not self.endpoint:
            raise ValueError("endpoint must be non-empty")
        if not self.model:
            raise ValueError("model must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.min_request_interval < 0:
            raise ValueError("min_request_interval must be >= 0")

    def snapshot(self) -> dict:
        """Manifest-safe view: everything except the credential value."""
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "min_request_interval": self.min_request_interval,
            "credential_env": self.credential_env,
        }


def cache_key(cfg: BackendConfig, prompt_text: str) -> str:
    """Stable digest over everything that identifies a completion request."""
    material = json.dumps(
        [cfg.endpoint, cfg.model, cfg.temperature, cfg.max_tokens, prompt_text],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


# --- response sanitizing ------------------------------------------------

_QUOTE_PAIRS = {
    ('"', '"'),
    ("'", "'"),
    ("“", "”"),  # curly double
    ("‘", "’"),  # curly single
    ("„", "“"),  # low-high double
    ("«", "»"),  # guillemets
}
_LEADING_LABELS = ("better translation:", "translation:", "paraphrase:")
_NEWLINE_RUN = re.compile(r"[ \t]*\n\s*")


def sanitize_response(text: str) -> str:
    """Normalize a raw completion into a single-line candidate.

    Trims edge whitespace, removes one wrapping quote pair per pass when
    a pair encloses the entire text, drops a leading task label
    (case-insensitive), and collapses interior newline runs to single
    spaces.  Passes repeat until nothing changes, so the function is
    idempotent; interior characters are never altered otherwise.
    """
    out = text
    prev = None
    while out != prev:
        prev = out
        out = out.strip()
        out = _NEWLINE_RUN.sub(" ", out)
        if len(out) >= 2 and (out[0], out[-1]) in _QUOTE_PAIRS:
            out = out[1:-1]
            continue
        low = out.lower()
        for label in _LEADING_LABELS:
            if low.startswith(label):
                out = out[len(label):]
                break
    return out


@dataclass(frozen=True)
class ChatExchange:
    """One completed query: prompt, raw and sanitized text, bookkeeping.

    ``response`` is never empty when ``raw_response`` has visible text;
    if sanitizing eats everything (say, a reply of two bare quotes) the
    trimmed raw text stands in.
    """

    prompt: RenderedPrompt
    model: str
    endpoint: str
    temperature: float
    max_tokens: int | None
    raw_response: str
    response: str = ""
    latency: float = 0.0
    from_cache: bool = False
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if not self.raw_response.strip():
            raise EmptyResponseError("exchange constructed from blank completion")
        if not self.response:
            sanitized = sanitize_response(self.raw_response)
            object.__setattr__(
                self, "response", sanitized or self.raw_response.strip()
            )


# --- persistent response cache ------------------------------------------

class ResponseCache:
    """Append-only JSONL store of raw completions, multi-process safe.

    Writers serialize on a sidecar file lock and fsync before releasing,
    so concurrent runs sharing a cache directory cannot interleave
    partial lines.  Reads come from an in-memory index loaded at open;
    last line wins for a repeated key.
    """

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.path = self.directory / "responses.jsonl"
        self._lock = FileLock(str(self.path) + ".lock")
        self._mutex = threading.Lock()
        self._entries: dict[str, str] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    self._entries[record["key"]] = record["raw_response"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    logger.warning("skipping malformed cache line %d", lineno)

    def get(self, key: str) -> str | None:
        with self._mutex:
            return self._entries.get(key)

    def put(self, key: str, raw_response: str, meta: Mapping | None = None) -> None:
        record = {"key": key, "raw_response": raw_response, **dict(meta or {})}
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())
        with self._mutex:
            self._entries[key] = raw_response

    def __len__(self) -> int:
        with self._mutex:
            return len(self._entries)


# --- backends -------------------------------------------------------------

class Backend(Protocol):
    """Anything that can turn prompt text into completion text."""

    cfg: BackendConfig

    def complete_text(self, prompt_text: str) -> str: ...


_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class OpenAIChatBackend:
    """HTTP client for a chat-completions endpoint.

    Retries transport failures and retryable statuses (429 and 5xx) with
    exponential backoff; a global minimum interval between requests is
    enforced across threads.
    """

    def __init__(
        self,
        cfg: BackendConfig,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.cfg = cfg
        self._client = httpx.Client(timeout=cfg.timeout, transport=transport)
        self._pace_lock = threading.Lock()
        self._last_request = 0.0

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        secret = os.environ.get(self.cfg.credential_env, "")
        if secret:
            headers["Authorization"] = f"Bearer {secret}"
        return headers

    def _pace(self) -> None:
        if self.cfg.min_request_interval <= 0:
            return
        with self._pace_lock:
            wait = self.cfg.min_request_interval - (time.monotonic() - self._last_request)
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def complete_text(self, prompt_text: str) -> str:
        body: dict = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": self.cfg.temperature,
        }
        if self.cfg.max_tokens is not None:
            body["max_tokens"] = self.cfg.max_tokens

        attempts = self.cfg.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = self.cfg.retry_backoff * (2 ** (attempt - 1))
                logger.info("retrying in %.2fs (attempt %d)", delay, attempt + 1)
                time.sleep(delay)
            self._pace()
            try:
                reply = self._client.post(
                    self.cfg.endpoint, json=body, headers=self._headers()
                )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if reply.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(
                    f"server returned {reply.status_code}: {reply.text[:200]}"
                )
                continue
            if reply.status_code != 200:
                raise ProtocolError(
                    f"server returned {reply.status_code}: {reply.text[:200]}"
                )
            return _parse_completion(reply)
        raise TransportError(
            f"request failed after {attempts} attempts: {last_error}"
        ) from last_error

    def close(self) -> None:
        self._client.close()


def _parse_completion(reply: httpx.Response) -> str:
    try:
        data = reply.json()
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"response body is not JSON: {reply.text[:200]}") from exc
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError(
            f"response body missing choices[0].message.content: "
            f"{json.dumps(data)[:200]}"
        ) from None
    if not isinstance(content, str):
        raise ProtocolError(f"completion content is not text: {content!r}")
    return content


class MockBackend:
    """Deterministic offline backend driven by a script function.

    The script is a pure function of the prompt text, so identical
    prompts always yield identical completions and full runs are
    byte-reproducible without any server.
    """

    def __init__(
        self,
        script: Callable[[str], str],
        cfg: BackendConfig | None = None,
    ) -> None:
        self.script = script
        self.cfg = cfg or BackendConfig(endpoint="mock://local", model="mock")
        self.prompts: list[str] = []
        self._mutex = threading.Lock()

    def complete_text(self, prompt_text: str) -> str:
        with self._mutex:
            self.prompts.append(prompt_text)
        return self.script(prompt_text)


# --- mock scripts ---------------------------------------------------------

_PAYLOAD_LABELS = ("Translation: ", "Bad translation: ", "Sentence: ")


def extract_payload(prompt_text: str) -> str:
    """Pull the text a default-template prompt is asking about.

    Refinement and paraphrase prompts carry the candidate under a label
    line; translation prompts carry only the source line.  Unknown
    shapes fall back to the whole prompt.
    """
    lines = prompt_text.split("\n")
    for label in _PAYLOAD_LABELS:
        for line in lines:
            if line.startswith(label):
                return line[len(label):]
    for line in lines:
        if line.startswith("Source: "):
            return line[len("Source: "):]
    return prompt_text


def identity_script(prompt_text: str) -> str:
    """Echo the embedded payload unchanged."""
    return extract_payload(prompt_text)


def drift_script(marker: str = " +") -> Callable[[str], str]:
    """Echo the payload with ``marker`` appended.

    Because each round feeds the previous output back in, round t's
    completion carries exactly t markers, which keeps every prompt in an
    iterative run unique and lets tests count rounds from text alone.
    """

    def script(prompt_text: str) -> str:
        return extract_payload(prompt_text) + marker

    return script


def shuffle_script(seed: int) -> Callable[[str], str]:
    """Deterministically reorder the payload's words.

    Seeded per payload, so the same text always shuffles the same way
    regardless of call order.
    """

    def script(prompt_text: str) -> str:
        payload = extract_payload(prompt_text)
        words = payload.split(" ")
        rng = random.Random(f"{seed}:{payload}")
        rng.shuffle(words)
        return " ".join(words)

    return script


def make_mock_script(name: str, seed: int = 0, marker: str = " +") -> Callable[[str], str]:
    """Resolve a script by config name."""
    if name == "identity":
        return identity_script
    if name == "drift":
        return drift_script(marker)
    if name == "shuffle":
        return shuffle_script(seed)
    raise ValueError(f"unknown mock script {name!r}; known: identity, drift, shuffle")


# --- the gateway ----------------------------------------------------------

@dataclass
class Gateway:
    """Caching front door every pipeline query goes through.

    Counts network calls (cache misses that reached the backend) and
    keeps an in-memory log of every exchange for trace writing.
    """

    backend: Backend
    cache: ResponseCache | None = None
    network_calls: int = 0
    exchange_log: list[ChatExchange] = field(default_factory=list)
    _mutex: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def complete(self, prompt: RenderedPrompt) -> ChatExchange:
        cfg = self.backend.cfg
        key = cache_key(cfg, prompt.text)

        cached = self.cache.get(key) if self.cache else None
        if cached is not None:
            raw = cached
            from_cache = True
            latency = 0.0
        else:
            started = time.monotonic()
            raw = self.backend.complete_text(prompt.text)
            latency = time.monotonic() - started
            from_cache = False
            with self._mutex:
                self.network_calls += 1
            if not raw.strip():
                raise EmptyResponseError(
                    f"blank completion for {prompt.kind.label} prompt"
                )
            if self.cache is not None:
                self.cache.put(
                    key, raw, meta={"model": cfg.model, "endpoint": cfg.endpoint}
                )

        exchange = ChatExchange(
            prompt=prompt,
            model=cfg.model,
            endpoint=cfg.endpoint,
            temperature=cfg.temperature,
            max_tokens=cfg.max_tokens,
            raw_response=raw,
            latency=latency,
            from_cache=from_cache,
            timestamp=time.time(),
        )
        with self._mutex:
            self.exchange_log.append(exchange)
        return exchange
