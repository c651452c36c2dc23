"""Network boundary and operational glue.

REST for commands, one WebSocket event stream per session, JSON-lines
effect logs for audit/replay. Sessions are mode-isolated: grammar
sessions never construct or contact an LLM backend.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, UploadFile, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import dictation
from .config import ServiceConfig
from .dispatch import (
    Effect,
    EffectKind,
    FunctionCall,
    Registry,
    RejectedBatch,
    parse_call_text,
    standard_registry,
)
from .errors import (
    BackendUnavailable,
    InvalidCorrectionResult,
    ScopeVoiceError,
    SessionClosed,
    UnknownSession,
)
from .grammar import Lexicon, build_lexicon, parse_utterance
from .prompt import ExampleStore, open_example_store
from .proximity import DistanceMatrix, distance_matrix
from .router import (
    Backend,
    ChatSession,
    DeterministicBackend,
    IntentRouter,
    OutcomeKind,
    RemoteBackend,
)
from .scene import PatientCase, SceneState, advance_ct, initial_state, load_case, state_hash, state_snapshot
from .textnorm import norm_phrase

logger = logging.getLogger(__name__)

TICK_INTERVAL_S = 0.1


@dataclass
class CaseBundle:
    case: PatientCase
    matrix: DistanceMatrix
    registry: Registry
    lexicon: Lexicon
    store: ExampleStore


@dataclass
class SessionRecord:
    session_id: str
    case_id: str
    mode: str  # grammar | llm
    profile: dictation.ListeningProfile
    scene: SceneState
    machine: Optional[dictation.DictationMachine] = None
    chat: Optional[ChatSession] = None
    router: Optional[IntentRouter] = None
    seq: int = 0
    events: list[dict] = field(default_factory=list)
    effect_log: Optional[Path] = None
    closed: bool = False


class VoiceService:
    """In-process core; the FastAPI app is a thin shell over this."""

    def __init__(self, config: ServiceConfig, backend: Optional[Backend] = None):
        self.config = config
        self._backend_override = backend
        self.cases: dict[str, CaseBundle] = {}
        self.sessions: dict[str, SessionRecord] = {}

    # -- case management -------------------------------------------------

    def load_cases_dir(self, directory: str | Path | None = None) -> list[str]:
        directory = Path(directory if directory is not None else self.config.cases_path)
        loaded = []
        if directory.is_dir():
            for case_file in sorted(directory.glob("*/case.json")):
                loaded.append(self.add_case(case_file))
        return loaded

    def add_case(self, case_file: str | Path) -> str:
        case = load_case(case_file)
        matrix = distance_matrix(case)
        registry = standard_registry(case)
        store = open_example_store(
            case.case_id, self.config.data_path / "corrections"
        )
        self.cases[case.case_id] = CaseBundle(
            case=case,
            matrix=matrix,
            registry=registry,
            lexicon=build_lexicon(case),
            store=store,
        )
        logger.info("case %s loaded (%d segments)", case.case_id, len(case.segments))
        return case.case_id

    def _bundle(self, case_id: str) -> CaseBundle:
        bundle = self.cases.get(case_id)
        if bundle is None:
            raise UnknownSession(f"unknown case '{case_id}'")
        return bundle

    def _make_backend(self) -> Backend:
        if self._backend_override is not None:
            return self._backend_override
        cfg = self.config.backend
        if cfg.kind == "remote":
            return RemoteBackend(url=cfg.url, model=cfg.model,
                                 temperature=cfg.temperature, timeout_s=cfg.timeout_s)
        return DeterministicBackend()

    # -- session lifecycle -------------------------------------------------

    def create_session(self, case_id: str, mode: str,
                       profile: Optional[str] = None) -> SessionRecord:
        bundle = self._bundle(case_id)
        if mode not in ("grammar", "llm"):
            raise ScopeVoiceError(f"unknown mode '{mode}'")
        profile_name = profile or self.config.profile
        listening = dictation.PROFILES.get(profile_name)
        if listening is None:
            raise ScopeVoiceError(f"unknown listening profile '{profile_name}'")
        record = SessionRecord(
            session_id=uuid.uuid4().hex,
            case_id=case_id,
            mode=mode,
            profile=listening,
            scene=initial_state(bundle.case),
        )
        log_dir = self.config.data_path / "effect_logs"
        log_dir.mkdir(parents=True, exist_ok=True)
        record.effect_log = log_dir / f"{record.session_id}.jsonl"
        if mode == "llm":
            record.machine = dictation.new_machine(listening)
            record.router = IntentRouter(
                backend=self._make_backend(),
                registry=bundle.registry,
                case=bundle.case,
                matrix=bundle.matrix,
                store=bundle.store,
            )
            record.chat = record.router.start_session()
        self.sessions[record.session_id] = record
        self._emit(record, "StateSnapshot", self._snapshot_payload(record))
        return record

    def _record(self, session_id: str) -> SessionRecord:
        record = self.sessions.get(session_id)
        if record is None or record.closed:
            raise UnknownSession(session_id)
        return record

    def delete_session(self, session_id: str) -> None:
        record = self._record(session_id)
        record.closed = True
        if record.chat is not None:
            record.chat.closed = True
        del self.sessions[session_id]

    # -- events ------------------------------------------------------------

    def _emit(self, record: SessionRecord, kind: str, payload: dict) -> dict:
        record.seq += 1
        frame = {"seq": record.seq, "kind": kind, "payload": payload}
        record.events.append(frame)
        return frame

    def _snapshot_payload(self, record: SessionRecord) -> dict:
        return {"state": state_snapshot(record.scene), "hash": state_hash(record.scene)}

    def _log_execution(self, record: SessionRecord, calls: list[FunctionCall],
                       effects: list[Effect]) -> None:
        if record.effect_log is None:
            return
        with record.effect_log.open("a") as fh:
            fh.write(json.dumps({
                "seq": record.seq,
                "calls": [{"name": c.name, "args": list(c.args)} for c in calls],
                "effects": [e.to_json() for e in effects],
            }) + "\n")

    def _execute(self, record: SessionRecord, bundle: CaseBundle,
                 calls: list[FunctionCall]) -> dict:
        try:
            new_state, effects = bundle.registry.execute(record.scene, calls)
        except RejectedBatch as e:
            self._emit(record, "Rejected", {"reasons": e.reasons})
            self._emit(record, "Feedback", {"text": dictation.FEEDBACK_RETRY, "kind": "retry"})
            return {"outcome": "rejected", "reasons": e.reasons}
        record.scene = new_state
        for effect in effects:
            self._emit(record, "Effect", effect.to_json())
        self._log_execution(record, calls, effects)
        self._emit(record, "StateSnapshot", self._snapshot_payload(record))
        return {
            "outcome": "executed",
            "calls": [c.render() for c in calls],
            "effects": [e.to_json() for e in effects],
        }

    # -- utterances ----------------------------------------------------------

    def handle_utterance(self, session_id: str, text: str, at_ms: int) -> dict:
        record = self._record(session_id)
        bundle = self._bundle(record.case_id)
        if record.mode == "grammar":
            return self._handle_grammar(record, bundle, text)
        return self._handle_llm(record, bundle, text, at_ms / 1000.0)

    def _handle_grammar(self, record: SessionRecord, bundle: CaseBundle, text: str) -> dict:
        parse = parse_utterance(bundle.lexicon, text)
        if parse is None:
            self._emit(record, "NoMatch", {"utterance": text})
            return {"outcome": "no_match"}
        self._emit(record, "KeywordRecognized", {"phrase": parse.matched_phrase,
                                                 "mode": parse.mode})
        summary = self._execute(record, bundle, [parse.to_call()])
        summary["matched_phrase"] = parse.matched_phrase
        return summary

    def _handle_llm(self, record: SessionRecord, bundle: CaseBundle,
                    text: str, at_s: float) -> dict:
        assert record.machine is not None
        # client clocks may lag the ticker; dictation time never runs backwards
        at_s = max(at_s, record.machine.last_seen)
        if norm_phrase(text) == norm_phrase(record.profile.activation_phrase):
            event: dictation.DictationEvent = dictation.Activation(at=at_s)
        else:
            event = dictation.Fragment(at=at_s, text=text)
        record.machine, out = dictation.on_event(record.machine, event)
        return self._pump_dictation(record, bundle, out)

    def tick(self, session_id: str, at_ms: int) -> dict:
        """Advance session time: dictation windows and CT scrolling."""
        record = self._record(session_id)
        bundle = self._bundle(record.case_id)
        scrolled = advance_ct(record.scene)
        if scrolled is not record.scene:
            record.scene = scrolled
            # CT advance must reach the effect log too, or replaying the log
            # would not reproduce the final state
            effect = Effect(EffectKind.CONTROL_APPLIED,
                            {"action": "ct_advance", "fields": {"ct_index": scrolled.ct_index}})
            self._emit(record, "Effect", effect.to_json())
            self._log_execution(record, [], [effect])
            self._emit(record, "StateSnapshot", self._snapshot_payload(record))
        if record.machine is None:
            return {"outcome": "tick"}
        at_s = max(at_ms / 1000.0, record.machine.last_seen)
        record.machine, out = dictation.on_event(record.machine, dictation.Tick(at=at_s))
        return self._pump_dictation(record, bundle, out)

    def _pump_dictation(self, record: SessionRecord, bundle: CaseBundle,
                        out: list[dictation.SessionEvent]) -> dict:
        summary: dict = {"outcome": "listening"}
        for event in out:
            if isinstance(event, dictation.Feedback):
                self._emit(record, "Feedback", {"text": event.text, "kind": event.kind})
                summary = {"outcome": "activated"}
            elif isinstance(event, dictation.QueryEmpty):
                self._emit(record, "QueryEmpty", {"at": event.at})
                self._emit(record, "Feedback", {"text": dictation.FEEDBACK_RETRY, "kind": "retry"})
                summary = {"outcome": "query_empty"}
            elif isinstance(event, dictation.QueryReady):
                self._emit(record, "QueryReady", {"text": event.text, "at": event.at})
                summary = self._submit(record, bundle, event.text)
        return summary

    def _submit(self, record: SessionRecord, bundle: CaseBundle, query: str) -> dict:
        assert record.router is not None and record.chat is not None
        try:
            outcome = record.router.submit_query(record.chat, query)
        except SessionClosed:
            raise UnknownSession(record.session_id) from None
        if outcome.kind is OutcomeKind.EXECUTED:
            return self._execute(record, bundle, list(outcome.calls))
        if outcome.kind is OutcomeKind.RESET_PERFORMED:
            assert outcome.new_session is not None
            record.chat = outcome.new_session
            payload = {
                "message": "session refreshed",
                "example_count": len(record.chat.doc.examples),
            }
            self._emit(record, "ResetPerformed", payload)
            return {"outcome": "reset", **payload}
        if outcome.diagnostic:
            self._emit(record, "Diagnostic", {"message": outcome.diagnostic})
        self._emit(record, "Feedback", {"text": dictation.FEEDBACK_RETRY, "kind": "retry"})
        return {"outcome": "retry", "diagnostic": outcome.diagnostic}

    # -- correction flow -----------------------------------------------------

    def apply_correction(self, session_id: str, sentence: str,
                         result: list[FunctionCall]) -> dict:
        record = self._record(session_id)
        if record.mode != "llm" or record.router is None or record.chat is None:
            raise ScopeVoiceError("corrections require an llm session")
        new_session = record.router.handle_reset(record.chat, (sentence, result))
        record.chat = new_session
        payload = {
            "message": "session refreshed",
            "example_count": len(new_session.doc.examples),
        }
        self._emit(record, "ResetPerformed", payload)
        return {"outcome": "reset", **payload}

    # -- views -----------------------------------------------------------------

    def state_view(self, session_id: str) -> dict:
        record = self._record(session_id)
        return {"seq": record.seq, **self._snapshot_payload(record)}

    def prompt_view(self, session_id: str) -> dict:
        record = self._record(session_id)
        if record.chat is None:
            raise ScopeVoiceError("grammar sessions have no prompt")
        return {
            "text": record.chat.prompt_text,
            "example_count": len(record.chat.doc.examples),
            "turn_count": record.chat.turn_count,
        }

    def case_view(self, case_id: str) -> dict:
        bundle = self._bundle(case_id)
        case = bundle.case
        return {
            "case_id": case.case_id,
            "diagnosis": case.diagnosis,
            "resection_margin_mm": case.resection_margin_mm,
            "segments": [
                {
                    "id": s.id,
                    "display_name": s.display_name,
                    "category": s.category.value,
                    "synonyms": list(s.synonyms),
                }
                for s in case.segments
            ],
            "guidelines": [
                {"rule_id": r.rule_id, "kind": r.kind.value, "description": r.description}
                for r in case.guidelines
            ],
        }


# -- HTTP layer ---------------------------------------------------------------


class SessionIn(BaseModel):
    case_id: str
    mode: str
    profile: Optional[str] = None


class UtteranceIn(BaseModel):
    text: str
    at_ms: int


class TickIn(BaseModel):
    at_ms: int


class CorrectionIn(BaseModel):
    sentence: str
    result: list[str]


def create_app(service: VoiceService, ticker: bool = False,
               console_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="scopevoice", version="0.1.0")
    app.state.service = service

    @app.exception_handler(ScopeVoiceError)
    async def _domain_error(request, exc: ScopeVoiceError):
        status = 404 if isinstance(exc, UnknownSession) else 422
        if isinstance(exc, BackendUnavailable):
            status = 503
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    if ticker:
        @app.on_event("startup")
        async def _start_ticker():
            async def run():
                while True:
                    now_ms = int(time.time() * 1000)
                    for sid in list(service.sessions):
                        try:
                            service.tick(sid, now_ms)
                        except UnknownSession:
                            pass
                    await asyncio.sleep(TICK_INTERVAL_S)
            app.state.ticker_task = asyncio.create_task(run())

        @app.on_event("shutdown")
        async def _stop_ticker():
            task = getattr(app.state, "ticker_task", None)
            if task is not None:
                task.cancel()

    @app.get("/cases")
    def list_cases():
        return [{"case_id": cid, "segments": len(b.case.segments)}
                for cid, b in service.cases.items()]

    @app.get("/cases/{case_id}")
    def get_case(case_id: str):
        return service.case_view(case_id)

    @app.post("/cases", status_code=201)
    async def upload_case(case: UploadFile, meshes: list[UploadFile]):
        stage = service.config.data_path / "uploaded_cases" / uuid.uuid4().hex
        (stage / "meshes").mkdir(parents=True)
        case_path = stage / "case.json"
        case_path.write_bytes(await case.read())
        for mesh in meshes:
            name = Path(mesh.filename or "mesh.obj").name
            (stage / "meshes" / name).write_bytes(await mesh.read())
        case_id = service.add_case(case_path)
        return {"case_id": case_id}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionIn):
        record = service.create_session(body.case_id, body.mode, body.profile)
        return {
            "session_id": record.session_id,
            "case_id": record.case_id,
            "mode": record.mode,
            "profile": record.profile.name,
            "state": state_snapshot(record.scene),
        }

    @app.post("/sessions/{session_id}/utterance")
    def utterance(session_id: str, body: UtteranceIn):
        return service.handle_utterance(session_id, body.text, body.at_ms)

    @app.post("/sessions/{session_id}/tick")
    def tick(session_id: str, body: TickIn):
        return service.tick(session_id, body.at_ms)

    @app.post("/sessions/{session_id}/correction")
    def correction(session_id: str, body: CorrectionIn):
        calls: list[FunctionCall] = []
        for item in body.result:
            parsed = parse_call_text(item)
            if not parsed:
                raise InvalidCorrectionResult(f"not a function call: {item!r}")
            calls.extend(parsed)
        return service.apply_correction(session_id, body.sentence, calls)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        return service.state_view(session_id)

    @app.get("/sessions/{session_id}/prompt")
    def get_prompt(session_id: str):
        return service.prompt_view(session_id)

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        service.delete_session(session_id)

    @app.websocket("/sessions/{session_id}/events")
    async def events(ws: WebSocket, session_id: str, since: int = 0):
        await ws.accept()
        cursor = since
        try:
            while True:
                record = service.sessions.get(session_id)
                if record is None:
                    await ws.close(code=4404)
                    return
                pending = [e for e in record.events if e["seq"] > cursor]
                for frame in pending:
                    await ws.send_json(frame)
                    cursor = frame["seq"]
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return

    if console_dir is not None and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=str(console_dir), html=True),
                  name="console")

    return app
