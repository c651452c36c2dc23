"""LLM session loop: submit queries, validate replies, re-inject the
initial prompt after every completed turn, and run the reset/correction
flow over a pluggable backend.

Two backends exist: a remote chat-completions endpoint and the offline
deterministic resolver. Selection is configuration; temperature defaults
to 0 because a safety-adjacent tool prefers determinism.
"""

from __future__ import annotations

import logging
import os
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

import httpx

from .dispatch import FunctionCall, Registry, RESET_FUNCTION, parse_call_text
from .errors import (
    BackendError,
    BackendTimeout,
    BackendUnavailable,
    FormatError,
    InvalidCorrectionResult,
    SessionClosed,
)
from .prompt import (
    Correction,
    ExampleStore,
    PromptDocument,
    append_correction,
    build_initial_prompt,
    render_json,
)
from .proximity import DistanceMatrix
from .resolver import ResolverContext, resolve
from .scene import PatientCase

logger = logging.getLogger(__name__)

API_KEY_ENV = "SCOPEVOICE_LLM_KEY"


class Backend(Protocol):
    name: str

    def probe(self) -> None: ...

    def complete(self, messages: list[dict]) -> str: ...


class DeterministicBackend:
    """Resolves queries from the newest prompt injection in the transcript."""

    name = "deterministic"

    def probe(self) -> None:
        return None

    def complete(self, messages: list[dict]) -> str:
        prompt_text = None
        for msg in reversed(messages):
            if msg["role"] == "system":
                prompt_text = msg["content"]
                break
        if prompt_text is None:
            raise BackendError("no initial prompt in transcript")
        query = None
        for msg in reversed(messages):
            if msg["role"] == "user":
                query = msg["content"]
                break
        if query is None:
            raise BackendError("no user query in transcript")
        ctx = ResolverContext.from_prompt_text(prompt_text)
        calls = resolve(ctx, query)
        if calls is None:
            return "I could not map that request to any of the executable methods."
        return "\n".join(c.render() for c in calls)


@dataclass
class RemoteBackend:
    """Chat-completions-compatible HTTP endpoint."""

    url: str
    model: str
    temperature: float = 0.0
    timeout_s: float = 10.0
    name: str = "remote"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def probe(self) -> None:
        try:
            # any HTTP response proves reachability; auth problems surface later
            httpx.head(self.url, timeout=self.timeout_s)
        except httpx.HTTPError as e:
            raise BackendUnavailable(f"{self.url}: {e}") from e

    def complete(self, messages: list[dict]) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
            "temperature": self.temperature,
        }
        try:
            response = httpx.post(self.url, json=body, headers=self._headers(),
                                  timeout=self.timeout_s)
        except httpx.TimeoutException as e:
            raise BackendTimeout(str(e)) from e
        except httpx.HTTPError as e:
            raise BackendUnavailable(str(e)) from e
        if response.status_code != 200:
            raise BackendError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as e:
            raise BackendError(f"malformed completion payload: {e}") from e


@dataclass
class TranscriptEntry:
    role: str  # system | user | assistant
    text: str
    at: float


@dataclass
class ChatSession:
    session_id: str
    backend: Backend
    doc: PromptDocument
    prompt_text: str
    transcript: list[TranscriptEntry] = field(default_factory=list)
    turn_count: int = 0
    closed: bool = False

    def messages(self) -> list[dict]:
        return [{"role": t.role, "content": t.text} for t in self.transcript]

    def reinjection_count(self) -> int:
        return sum(1 for t in self.transcript if t.role == "system") - 1


class OutcomeKind(str, Enum):
    EXECUTED = "executed"
    RETRY = "retry"
    RESET_PERFORMED = "reset_performed"


@dataclass(frozen=True)
class RouterOutcome:
    kind: OutcomeKind
    calls: tuple[FunctionCall, ...] = ()
    new_session: Optional[ChatSession] = None
    diagnostic: Optional[str] = None


def parse_response(text: str) -> list[FunctionCall]:
    """Call list from a backend reply; FormatError when none is present."""
    calls = parse_call_text(text)
    if not calls:
        raise FormatError(f"no function call in reply: {text[:120]!r}")
    return calls


class IntentRouter:
    """Owns prompt rebuilds and session lifecycle for one case."""

    def __init__(self, backend: Backend, registry: Registry, case: PatientCase,
                 matrix: DistanceMatrix, store: ExampleStore):
        self.backend = backend
        self.registry = registry
        self.case = case
        self.matrix = matrix
        self.store = store

    def _build_document(self) -> PromptDocument:
        return build_initial_prompt(self.case, self.matrix, self.registry, self.store)

    def start_session(self) -> ChatSession:
        self.backend.probe()
        doc = self._build_document()
        text = render_json(doc)
        session = ChatSession(
            session_id=uuid.uuid4().hex,
            backend=self.backend,
            doc=doc,
            prompt_text=text,
        )
        session.transcript.append(TranscriptEntry("system", text, time.time()))
        return session

    def submit_query(self, session: ChatSession, query: str) -> RouterOutcome:
        if session.closed:
            raise SessionClosed(session.session_id)
        session.transcript.append(TranscriptEntry("user", query, time.time()))
        try:
            reply = session.backend.complete(session.messages())
        except (BackendTimeout, BackendUnavailable, BackendError) as e:
            # timeouts and transport faults surface as Retry with a diagnostic;
            # the turn never completed, so no prompt re-injection happens
            logger.warning("backend failure for session %s: %s", session.session_id, e)
            return RouterOutcome(OutcomeKind.RETRY, diagnostic=f"{type(e).__name__}: {e}")
        session.transcript.append(TranscriptEntry("assistant", reply, time.time()))
        session.turn_count += 1
        # anti-drift: the current initial prompt follows every completed turn,
        # invisible to the caller
        session.transcript.append(TranscriptEntry("system", session.prompt_text, time.time()))

        try:
            calls = parse_response(reply)
        except FormatError as e:
            return RouterOutcome(OutcomeKind.RETRY, diagnostic=str(e))

        reset_calls = [c for c in calls if c.name == RESET_FUNCTION]
        if reset_calls:
            reset = reset_calls[0]
            if len(reset.args) != 2:
                return RouterOutcome(OutcomeKind.RETRY,
                                     diagnostic="reset_chat needs (sentence, result)")
            sentence, result_text = reset.args
            result = parse_call_text(result_text)
            try:
                new_session = self.handle_reset(session, (sentence, result))
            except InvalidCorrectionResult as e:
                return RouterOutcome(OutcomeKind.RETRY, diagnostic=str(e))
            return RouterOutcome(OutcomeKind.RESET_PERFORMED, new_session=new_session)

        reasons = [r for r in (self.registry.validate_call(c) for c in calls) if r]
        if reasons:
            return RouterOutcome(OutcomeKind.RETRY, diagnostic="; ".join(reasons))
        return RouterOutcome(OutcomeKind.EXECUTED, calls=tuple(calls))

    def handle_reset(self, session: ChatSession,
                     correction: tuple[str, list[FunctionCall]]) -> ChatSession:
        """Store the correction, close the session, reseed a fresh one."""
        sentence, result = correction
        for call in result:
            if call.name == RESET_FUNCTION:
                raise InvalidCorrectionResult("a correction cannot contain reset_chat")
        append_correction(self.store, sentence, result, self.registry)
        session.closed = True
        return self.start_session()

    def stored_corrections(self) -> list[Correction]:
        return list(self.store.corrections)
