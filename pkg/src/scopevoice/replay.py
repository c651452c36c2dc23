"""Scenario replay: scripted utterances against a fresh session.

Scripts are JSON-lines. Utterance lines carry {at_ms, utterance};
checkpoint lines carry {at_ms, expect_visible: [...], task?}. Lines run
in timestamp order; the harness injects 100 ms ticks to cover the gaps,
so dictation windows close exactly as they would live.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .config import ServiceConfig
from .errors import ScriptParseError
from .router import Backend
from .service import VoiceService

TICK_MS = 100


@dataclass(frozen=True)
class ScriptLine:
    at_ms: int
    utterance: Optional[str] = None
    expect_visible: Optional[frozenset[str]] = None
    task: Optional[str] = None


@dataclass
class TaskResult:
    task: str
    expected: set[str]
    actual: set[str]
    passed: bool
    elapsed_s: float
    attempts: int


@dataclass
class ReplayReport:
    script: str
    case_id: str
    mode: str
    results: list[TaskResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def render(self) -> str:
        lines = [f"replay {self.script} — case {self.case_id}, mode {self.mode}"]
        for r in self.results:
            mark = "PASS" if r.passed else "FAIL"
            lines.append(
                f"  [{mark}] {r.task}: expected {sorted(r.expected)}, got {sorted(r.actual)}"
                f" ({r.elapsed_s:.1f}s simulated, {r.attempts} attempt(s))"
            )
        tally = sum(1 for r in self.results if r.passed)
        lines.append(f"  {tally}/{len(self.results)} checkpoints passed")
        return "\n".join(lines)


def parse_script(path: str | Path) -> list[ScriptLine]:
    path = Path(path)
    lines: list[ScriptLine] = []
    last_at = -1
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            row = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ScriptParseError(f"not valid JSON ({e.msg})", line_no) from e
        if not isinstance(row, dict):
            raise ScriptParseError("expected an object", line_no)
        if "at_ms" not in row or not isinstance(row["at_ms"], int):
            raise ScriptParseError("missing integer at_ms", line_no)
        at_ms = row["at_ms"]
        if at_ms < last_at:
            raise ScriptParseError("timestamps must be non-decreasing", line_no)
        last_at = at_ms
        if "utterance" in row:
            if not isinstance(row["utterance"], str):
                raise ScriptParseError("utterance must be a string", line_no)
            lines.append(ScriptLine(at_ms=at_ms, utterance=row["utterance"]))
        elif "expect_visible" in row:
            ids = row["expect_visible"]
            if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
                raise ScriptParseError("expect_visible must be a list of segment ids", line_no)
            lines.append(ScriptLine(at_ms=at_ms, expect_visible=frozenset(ids),
                                    task=row.get("task")))
        else:
            raise ScriptParseError("line needs either utterance or expect_visible", line_no)
    if not any(l.expect_visible is not None for l in lines):
        raise ScriptParseError("script has no checkpoints", len(lines) or 1)
    return lines


def _count_attempts(events: list[dict], since_seq: int, mode: str) -> int:
    kind = "QueryReady" if mode == "llm" else "KeywordRecognized"
    return sum(1 for e in events if e["seq"] > since_seq and e["kind"] == kind)


def run_script(script_path: str | Path, case_file: str | Path, mode: str,
               backend: Optional[Backend] = None, profile: str = "study",
               data_dir: str | Path | None = None) -> ReplayReport:
    """Replay one script on a fresh session; returns the per-task report."""
    lines = parse_script(script_path)
    config = ServiceConfig(data_dir=str(data_dir) if data_dir else "var")
    service = VoiceService(config, backend=backend)
    case_id = service.add_case(case_file)
    record = service.create_session(case_id, mode, profile)

    report = ReplayReport(script=Path(script_path).name, case_id=case_id, mode=mode)
    clock_ms = 0
    task_no = 0
    last_checkpoint_seq = record.seq
    last_checkpoint_ms = 0

    def advance_to(target_ms: int) -> None:
        nonlocal clock_ms
        while clock_ms < target_ms:
            clock_ms = min(clock_ms + TICK_MS, target_ms)
            service.tick(record.session_id, clock_ms)

    for line in lines:
        advance_to(line.at_ms)
        if line.utterance is not None:
            service.handle_utterance(record.session_id, line.utterance, line.at_ms)
            continue
        task_no += 1
        actual = record.scene.visible_ids()
        expected = set(line.expect_visible or ())
        report.results.append(TaskResult(
            task=line.task or f"checkpoint {task_no}",
            expected=expected,
            actual=actual,
            passed=actual == expected,
            elapsed_s=(line.at_ms - last_checkpoint_ms) / 1000.0,
            attempts=_count_attempts(record.events, last_checkpoint_seq, mode),
        ))
        last_checkpoint_seq = record.seq
        last_checkpoint_ms = line.at_ms
    return report
