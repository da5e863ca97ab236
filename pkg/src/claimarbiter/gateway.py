"""Model gateway: one choke point for every completion the pipeline requests.

Three interchangeable backends sit behind the same interface. Live talks to
an OpenAI-style chat endpoint. Replay answers from a cassette, a
line-delimited JSON file of {digest, template_id, response, recorded_at}
records keyed by request fingerprint; a missing fingerprint is a hard error
because it means the replayed prompt differs from the recorded one. Scripted
answers from an in-memory policy table and exists for tests.

A request fingerprint is a stable hash of (template id, canonicalized
variables, model id). It is independent of variable insertion order and of
platform, so a cassette recorded on one machine replays on another.

Responses are parsed by taking the last JSON object in the response body,
which tolerates models that wrap their answer in prose. A response that
stays unparseable gets exactly one retry with an appended format reminder;
the reminder changes the variables and therefore the fingerprint, so both
attempts coexist in a cassette.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

from claimarbiter.core import JudgeSignal, Stance
from claimarbiter.errors import (
    BackendUnreachable,
    CassetteMiss,
    MalformedResponse,
    PolicyMiss,
)
from claimarbiter.prompts import PromptInstance, TemplateId, render

logger = logging.getLogger(__name__)

CASSETTE_FILENAME = "cassette.jsonl"

FORMAT_REMINDER = (
    "\nReminder: respond with only the JSON object described above, with no"
    "\nsurrounding prose."
)


def fingerprint(template_id: TemplateId, variables: Mapping[str, str], model_id: str) -> str:
    """Stable digest of a request; insensitive to variable insertion order."""
    payload = json.dumps(
        {"template": template_id.value, "variables": dict(variables), "model": model_id},
        sort_keys=True,
        ensure_ascii=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def cassette_path(path: str | Path) -> Path:
    """Resolve a cassette location; directories use a conventional filename."""
    path = Path(path)
    if path.is_dir() or not path.suffix:
        return path / CASSETTE_FILENAME
    return path


def load_cassette(path: str | Path) -> dict[str, str]:
    """Load digest -> response pairs; a missing file is an empty store."""
    resolved = cassette_path(path)
    store: dict[str, str] = {}
    if not resolved.exists():
        return store
    with resolved.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                store[record["digest"]] = record["response"]
            except (json.JSONDecodeError, TypeError, KeyError) as exc:
                raise CassetteMiss(f"{resolved}:{line_no}: unreadable cassette record: {exc}")
    return store


def _last_json_object(raw: str) -> dict:
    """Return the last top-level JSON object embedded in raw text."""
    decoder = json.JSONDecoder()
    found: dict | None = None
    index = 0
    while True:
        start = raw.find("{", index)
        if start < 0:
            break
        try:
            candidate, end = decoder.raw_decode(raw, start)
        except ValueError:
            index = start + 1
            continue
        if isinstance(candidate, dict):
            found = candidate
            index = end
        else:
            index = start + 1
    if found is None:
        raise MalformedResponse("no JSON object found in model response")
    return found


def _require(obj: dict, name: str):
    if name not in obj:
        raise MalformedResponse(f"response missing required field {name!r}")
    return obj[name]


def _string_list(value, name: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(item, str) for item in value):
        raise MalformedResponse(f"field {name!r} must be a list of strings")
    return value


def _parse_stance(value, name: str) -> Stance:
    if isinstance(value, str):
        try:
            return Stance(value.strip().lower())
        except ValueError:
            pass
    raise MalformedResponse(f"field {name!r} must be 'support' or 'refute', got {value!r}")


def _parse_entities(obj: dict) -> dict:
    return {"entities": _string_list(_require(obj, "entities"), "entities")}


def _parse_queries(obj: dict) -> dict:
    return {"queries": _string_list(_require(obj, "queries"), "queries")}


def _parse_assessment(obj: dict) -> dict:
    relevance = _require(obj, "relevance")
    if isinstance(relevance, bool):
        relevance = int(relevance)
    if relevance not in (0, 1):
        raise MalformedResponse(f"field 'relevance' must be 0 or 1, got {relevance!r}")
    attributes = _string_list(_require(obj, "attributes"), "attributes")
    verdict = _parse_stance(_require(obj, "verdict"), "verdict")
    return {"relevance": int(relevance), "attributes": list(attributes), "verdict": verdict}


def _parse_passages(obj: dict) -> dict:
    raw = _require(obj, "passages")
    if not isinstance(raw, list):
        raise MalformedResponse("field 'passages' must be a list")
    passages: list[tuple[str, str]] = []
    for item in raw:
        if not isinstance(item, dict) or not isinstance(item.get("passage"), str):
            raise MalformedResponse("each passage must be an object with a 'passage' string")
        reason = item.get("reason", "")
        if not isinstance(reason, str):
            raise MalformedResponse("passage 'reason' must be a string")
        passages.append((item["passage"], reason))
    return {"passages": passages}


def _parse_statement(obj: dict) -> dict:
    statement = _require(obj, "statement")
    if not isinstance(statement, str) or not statement.strip():
        raise MalformedResponse("field 'statement' must be a non-empty string")
    return {"statement": statement}


def _parse_judgement(obj: dict) -> dict:
    decision = _require(obj, "decision")
    if isinstance(decision, str):
        try:
            signal = JudgeSignal(decision.strip().lower())
        except ValueError:
            signal = None
    else:
        signal = None
    if signal is None:
        raise MalformedResponse(
            f"field 'decision' must be 'support', 'refute' or 'continue', got {decision!r}"
        )
    rationale = obj.get("rationale", "")
    if not isinstance(rationale, str):
        raise MalformedResponse("field 'rationale' must be a string")
    return {"decision": signal, "rationale": rationale}


_SCHEMAS: dict[TemplateId, Callable[[dict], dict]] = {
    TemplateId.EXTRACT_ENTITIES: _parse_entities,
    TemplateId.GENERATE_QUERIES: _parse_queries,
    TemplateId.ASSESS_ARTICLE: _parse_assessment,
    TemplateId.EXTRACT_PASSAGES: _parse_passages,
    TemplateId.OPENING_STATEMENT: _parse_statement,
    TemplateId.REBUTTAL: _parse_statement,
    TemplateId.JUDGE_ROUND: _parse_judgement,
    TemplateId.JUDGE_FORCED_VERDICT: _parse_judgement,
}


def parse_structured(raw: str, template_id: TemplateId) -> dict:
    """Extract and validate the structured payload of a model response.

    Unknown fields are ignored; anything missing or mistyped raises
    MalformedResponse.
    """
    return _SCHEMAS[template_id](_last_json_object(raw))


class ScriptedBackend:
    """Answers from a policy table; used by tests, owns no transport.

    Policy values may be a single string (returned every time), a sequence of
    strings (consumed in order, exhausting it is a PolicyMiss) or a callable
    taking the prompt variables and returning a response string (raising
    LookupError signals a PolicyMiss). Every prompt handed to the backend is
    journaled on .calls so tests can inspect exactly what each agent saw.
    """

    deterministic = True

    def __init__(self, policies: Mapping[TemplateId, str | Sequence[str] | Callable]):
        self._policies: dict[TemplateId, object] = {}
        for template_id, entry in policies.items():
            if isinstance(entry, str) or callable(entry):
                self._policies[template_id] = entry
            else:
                self._policies[template_id] = deque(entry)
        self._lock = threading.Lock()
        self.calls: list[PromptInstance] = []

    def complete(self, prompt: PromptInstance, digest: str, model_id: str,
                 temperature: float) -> str:
        with self._lock:
            self.calls.append(prompt)
            entry = self._policies.get(prompt.template_id)
            if entry is None:
                raise PolicyMiss(f"no scripted policy for template {prompt.template_id.value}")
            if isinstance(entry, str):
                return entry
            if isinstance(entry, deque):
                if not entry:
                    raise PolicyMiss(
                        f"scripted responses exhausted for template {prompt.template_id.value}"
                    )
                return entry.popleft()
        try:
            return entry(prompt.variables)
        except LookupError as exc:
            raise PolicyMiss(
                f"scripted policy for {prompt.template_id.value} has no answer: {exc}"
            ) from exc


class ReplayBackend:
    """Answers from a recorded cassette; any miss is fatal by design."""

    deterministic = True

    def __init__(self, path: str | Path):
        self._path = cassette_path(path)
        self._store = load_cassette(self._path)

    def complete(self, prompt: PromptInstance, digest: str, model_id: str,
                 temperature: float) -> str:
        try:
            return self._store[digest]
        except KeyError:
            raise CassetteMiss(
                f"cassette {self._path} has no response for {prompt.template_id.value} "
                f"request {digest[:12]}; the prompt differs from the recorded run"
            ) from None


class LiveBackend:
    """OpenAI-style chat completion endpoint with bounded transport retries."""

    deterministic = False

    def __init__(self, endpoint: str, credential_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0, max_attempts: int = 3):
        self._endpoint = endpoint.rstrip("/")
        self._credential_env = credential_env
        self._timeout = timeout
        self._max_attempts = max_attempts

    def complete(self, prompt: PromptInstance, digest: str, model_id: str,
                 temperature: float) -> str:
        credential = os.environ.get(self._credential_env)
        if not credential:
            raise BackendUnreachable(
                f"credential environment variable {self._credential_env} is not set"
            )
        payload = {
            "model": model_id,
            "messages": [{"role": "user", "content": prompt.rendered}],
            "temperature": temperature,
        }
        last_error: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            try:
                response = requests.post(
                    f"{self._endpoint}/chat/completions",
                    json=payload,
                    headers={"Authorization": f"Bearer {credential}"},
                    timeout=self._timeout,
                )
                response.raise_for_status()
                return response.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt < self._max_attempts:
                    # capped exponential backoff: 0.5s, 1s, 2s, ...
                    time.sleep(min(0.5 * 2 ** (attempt - 1), 4.0))
        raise BackendUnreachable(
            f"completion endpoint failed after {self._max_attempts} attempts: {last_error}"
        ) from last_error


@dataclass(frozen=True)
class LlmCall:
    """One completed gateway attempt, as seen by the audit trail."""

    template_id: str
    digest: str
    attempt: int
    ok: bool


@dataclass(frozen=True)
class StructuredReply:
    """Validated fields plus provenance of the winning attempt."""

    fields: dict
    digest: str
    raw: str
    attempts: int


class LlmGateway:
    """Renders prompts, dispatches to a backend, parses and records replies."""

    def __init__(self, backend, model_id: str = "gpt-4o", temperature: float = 0.0,
                 record_path: str | Path | None = None):
        self.backend = backend
        self.model_id = model_id
        self.temperature = temperature
        self._record_path = cassette_path(record_path) if record_path else None
        self._record_lock = threading.Lock()

    @property
    def deterministic(self) -> bool:
        return bool(getattr(self.backend, "deterministic", False))

    def complete(self, prompt: PromptInstance) -> tuple[str, str]:
        """Run one completion; returns (response text, request digest)."""
        digest = fingerprint(prompt.template_id, prompt.variables, self.model_id)
        text = self.backend.complete(prompt, digest, self.model_id, self.temperature)
        if self._record_path is not None:
            self._append_record(digest, prompt.template_id, text)
        return text, digest

    def structured(self, template_id: TemplateId, variables: Mapping[str, str],
                   recorder: Callable[[LlmCall], None] | None = None) -> StructuredReply:
        """Request a structured reply, retrying once on a malformed response."""
        base = dict(variables)
        base["format_reminder"] = ""
        last_error: MalformedResponse | None = None
        for attempt in (1, 2):
            if attempt == 2:
                base = dict(base, format_reminder=FORMAT_REMINDER)
            prompt = render(template_id, base)
            raw, digest = self.complete(prompt)
            try:
                fields = parse_structured(raw, template_id)
            except MalformedResponse as exc:
                last_error = exc
                if recorder is not None:
                    recorder(LlmCall(template_id.value, digest, attempt, ok=False))
                logger.debug("malformed %s response (attempt %d): %s",
                             template_id.value, attempt, exc)
                continue
            if recorder is not None:
                recorder(LlmCall(template_id.value, digest, attempt, ok=True))
            return StructuredReply(fields=fields, digest=digest, raw=raw, attempts=attempt)
        raise MalformedResponse(
            f"{template_id.value} response stayed malformed after retry: {last_error}"
        )

    def session(self, on_call: Callable[[LlmCall], None] | None = None) -> "ClaimSession":
        return ClaimSession(self, on_call=on_call)

    def _append_record(self, digest: str, template_id: TemplateId, response: str) -> None:
        record = {
            "digest": digest,
            "template_id": template_id.value,
            "response": response,
            "recorded_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        with self._record_lock:
            self._record_path.parent.mkdir(parents=True, exist_ok=True)
            with self._record_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


class ClaimSession:
    """Per-claim view of a shared gateway that journals every call it makes."""

    def __init__(self, gateway: LlmGateway, on_call: Callable[[LlmCall], None] | None = None):
        self._gateway = gateway
        self._on_call = on_call
        self._lock = threading.Lock()
        self.calls: list[LlmCall] = []

    @property
    def deterministic(self) -> bool:
        return self._gateway.deterministic

    @property
    def model_id(self) -> str:
        return self._gateway.model_id

    def structured(self, template_id: TemplateId, variables: Mapping[str, str],
                   recorder: Callable[[LlmCall], None] | None = None) -> StructuredReply:
        def record(call: LlmCall) -> None:
            with self._lock:
                self.calls.append(call)
            if self._on_call is not None:
                self._on_call(call)
            if recorder is not None:
                recorder(call)

        return self._gateway.structured(template_id, variables, recorder=record)
