"""Chat-completion and embedding access with a deterministic offline stub.

The remote provider speaks the OpenAI-compatible chat-completions protocol.
The stub provider answers from a script file (prompt kind -> canned text) or,
without a script, from pure-text heuristics, making the whole pipeline a
deterministic function of its inputs.
"""

from __future__ import annotations

import json
import math
import re
import threading
import time
import zlib
from dataclasses import dataclass, replace
from pathlib import Path

import requests

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_TOKENS = 4096
RETRY_BACKOFF_S = 0.5

ENDPOINT_ENV = "RELAUG_LLM_ENDPOINT"
API_KEY_ENV = "RELAUG_LLM_API_KEY"

# Prompt kinds, recognized by stable phrases in the system message.
KIND_DESCRIPTIONS = "descriptions"
KIND_TABLE_SCORING = "table_scoring"
KIND_FEATURE_RANKING = "feature_ranking"
_KIND_MARKERS = [
    (KIND_DESCRIPTIONS, "analyzing database schemas"),
    (KIND_TABLE_SCORING, "table relevance assessment"),
    (KIND_FEATURE_RANKING, "performing feature selection"),
]


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    """Network-level failure that survived the retry."""


class AuthenticationError(GatewayError):
    pass


class ProviderError(GatewayError):
    """The provider answered with an error payload."""


class JsonExtractError(GatewayError):
    """No parseable JSON object/array found in a completion."""


@dataclass(frozen=True)
class ChatPrompt:
    system: str
    user: str
    temperature: float = DEFAULT_TEMPERATURE
    model: str = "gpt-4o-mini"

    def __post_init__(self) -> None:
        if not self.system or not self.user:
            raise ValueError("system and user messages must be non-empty")


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    provider: str
    latency_ms: int


def classify_prompt(prompt: ChatPrompt) -> str:
    for kind, marker in _KIND_MARKERS:
        if marker in prompt.system:
            return kind
    return "other"


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


# --- JSON extraction -------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_-]*\n)?(.*?)```", re.DOTALL)


def extract_json(raw_text: str):
    """Return the first well-formed JSON object or array embedded in text.

    Markdown code fences are tried first, then the raw text is scanned from
    every opening brace/bracket. Numbers come back exactly as json.loads
    produces them.
    """
    candidates = [m.group(1) for m in _FENCE_RE.finditer(raw_text)]
    candidates.append(raw_text)
    decoder = json.JSONDecoder()
    for text in candidates:
        for i, ch in enumerate(text):
            if ch not in "{[":
                continue
            try:
                value, _ = decoder.raw_decode(text[i:])
            except ValueError:
                continue
            if isinstance(value, (dict, list)):
                return value
    raise JsonExtractError("no JSON object or array found in response")


# --- embeddings ------------------------------------------------------------

EMBED_DIM = 256


def embed_text(text: str, dim: int = EMBED_DIM) -> list[float]:
    """L2-normalized hashed character-trigram frequency vector.

    Deterministic across processes (crc32 hashing, not PYTHONHASHSEED).
    """
    lowered = text.lower()
    grams = [lowered[i : i + 3] for i in range(len(lowered) - 2)] or [lowered]
    vec = [0.0] * dim
    for gram in grams:
        vec[zlib.crc32(gram.encode("utf-8")) % dim] += 1.0
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0.0:
        return vec
    return [x / norm for x in vec]


def cosine(a: list[float], b: list[float]) -> float:
    return sum(x * y for x, y in zip(a, b))


# --- providers -------------------------------------------------------------


class RemoteProvider:
    """OpenAI-compatible chat-completions client with a single retry."""

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        max_tokens: int = DEFAULT_MAX_TOKENS,
        backoff_s: float = RETRY_BACKOFF_S,
        timeout_s: float = 60.0,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.max_tokens = max_tokens
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s

    def _post(self, prompt: ChatPrompt) -> requests.Response:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": prompt.model,
            "temperature": prompt.temperature,
            "max_tokens": self.max_tokens,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        }
        return requests.post(
            self.endpoint, headers=headers, json=body, timeout=self.timeout_s
        )

    def complete(self, prompt: ChatPrompt) -> str:
        attempt_err: Exception | None = None
        for attempt in range(2):
            if attempt:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = self._post(prompt)
            except requests.RequestException as exc:
                attempt_err = exc
                continue
            if resp.status_code == 401:
                raise AuthenticationError("authentication failed (HTTP 401)")
            if resp.status_code >= 500:
                attempt_err = ProviderError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:500]}")
            payload = resp.json()
            if "error" in payload:
                raise ProviderError(f"provider error payload: {payload['error']}")
            try:
                return payload["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"malformed completion payload: {exc}") from exc
        raise TransportError(f"transport failure after retry: {attempt_err}")


def _tokens(text: str) -> set[str]:
    return {t for t in re.split(r"[^a-z0-9]+", text.lower()) if t}


_SCHEMA_LINE_RE = re.compile(r"^([^\s:]+): \[(.*)\]$")


def _schema_lines(section: str) -> list[tuple[str, str]]:
    out = []
    for line in section.splitlines():
        m = _SCHEMA_LINE_RE.match(line.strip().rstrip(","))
        if m:
            out.append((m.group(1), m.group(2)))
    return out


class StubProvider:
    """Deterministic offline provider.

    With a script (mapping prompt kind -> canned response text) it replays
    the canned answers; otherwise it falls back to token-overlap heuristics
    so property tests have a stable oracle.
    """

    name = "stub"

    def __init__(self, script: dict[str, str] | str | Path | None = None):
        if isinstance(script, (str, Path)):
            with open(script, encoding="utf-8") as fh:
                script = json.load(fh)
        self.script: dict[str, str] = dict(script or {})

    def complete(self, prompt: ChatPrompt) -> str:
        kind = classify_prompt(prompt)
        if kind in self.script:
            return self.script[kind]
        if kind == KIND_DESCRIPTIONS:
            return self._describe(prompt)
        if kind == KIND_TABLE_SCORING:
            return self._score_tables(prompt)
        if kind == KIND_FEATURE_RANKING:
            return self._rank_features(prompt)
        return "{}"

    @staticmethod
    def _humanize(name: str) -> str:
        words = re.sub(r"([a-z0-9])([A-Z])", r"\1 \2", name)
        words = re.sub(r"[_\-.]+", " ", words)
        return words.lower()

    def _describe(self, prompt: ChatPrompt) -> str:
        result: dict[str, str] = {}
        for table, body in _schema_lines(prompt.user):
            for part in body.split(", "):
                feature = part.split(" (")[0].strip()
                if feature:
                    result[f"{table}.{feature}"] = (
                        f"{self._humanize(feature)} of each {table} record"
                    )
        return json.dumps(result)

    def _score_tables(self, prompt: ChatPrompt) -> str:
        target_tokens: set[str] = set()
        for line in prompt.user.splitlines():
            if line.startswith("Task: ") or line.startswith("Target: "):
                target_tokens |= _tokens(line.split(": ", 1)[1])
        section = prompt.user.split("Candidate tables:", 1)
        candidates = _schema_lines(section[1]) if len(section) == 2 else []
        scores: dict[str, int] = {}
        for table, body in candidates:
            schema_tokens = _tokens(table) | _tokens(body)
            overlap = len(target_tokens & schema_tokens)
            scores[table] = min(100, round(100 * overlap / max(1, len(target_tokens))))
        return json.dumps(scores)

    def _rank_features(self, prompt: ChatPrompt) -> str:
        names = re.findall(r'"name": "([^"]+)"', prompt.user)
        return json.dumps(names)


class Gateway:
    """Provider wrapper with audit logging, call counters, and helpers."""

    def __init__(
        self,
        provider,
        audit_path: str | Path | None = None,
        model: str | None = None,
    ):
        self.provider = provider
        self.audit_path = Path(audit_path) if audit_path else None
        self.model = model
        self.calls_total = 0
        self.calls_by_kind: dict[str, int] = {}
        self._audit_lock = threading.Lock()

    def complete(self, prompt: ChatPrompt) -> LlmResponse:
        if self.model and prompt.model != self.model:
            prompt = replace(prompt, model=self.model)
        start = time.perf_counter()
        text = self.provider.complete(prompt)
        latency_ms = int((time.perf_counter() - start) * 1000)
        kind = classify_prompt(prompt)
        self.calls_total += 1
        self.calls_by_kind[kind] = self.calls_by_kind.get(kind, 0) + 1
        response = LlmResponse(
            raw_text=text, provider=self.provider.name, latency_ms=latency_ms
        )
        self._audit(prompt, response, kind)
        return response

    def complete_json(self, prompt: ChatPrompt):
        """Complete and parse; on a parse failure re-ask once with an explicit
        JSON instruction. Raises JsonExtractError after the second failure."""
        response = self.complete(prompt)
        try:
            return extract_json(response.raw_text)
        except JsonExtractError:
            pass
        retry = replace(prompt, user=prompt.user + "\n\nReturn only valid JSON.")
        response = self.complete(retry)
        return extract_json(response.raw_text)

    def embed(self, text: str) -> list[float]:
        embedder = getattr(self.provider, "embed", None)
        if embedder is not None:
            return embedder(text)
        return embed_text(text)

    def _audit(self, prompt: ChatPrompt, response: LlmResponse, kind: str) -> None:
        if self.audit_path is None:
            return
        record = {
            "kind": kind,
            "model": prompt.model,
            "temperature": prompt.temperature,
            "system": prompt.system,
            "user": prompt.user,
            "raw_text": response.raw_text,
            "provider": response.provider,
            "latency_ms": response.latency_ms,
        }
        with self._audit_lock:
            with open(self.audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
