"""Timed listening window between activation and query emission.

All time arrives through events (a virtual clock), so every timing rule
is unit-testable; the service layer feeds real-time ticks at 100 ms.

Emission time is max(activated_at + min_listen, last_fragment + silence_tail).
With the study profile (10 s / 2 s) that reads: emit at the 10 s mark if no
speech is ongoing there, else at the first 2 s silence gap. The refined
profile (0 s / 1.5 s) emits 1.5 s after speech stops. A window that never
hears speech gives up after EMPTY_WINDOW_S and emits QueryEmpty; for the
study profile that coincides with the 10 s listening floor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

from .errors import OutOfOrderEvent

ACTIVATION_PHRASE = "assistant"

FEEDBACK_OK = "OK"
FEEDBACK_RETRY = "Please state your request differently"

# give-up time for a window that never hears a fragment
EMPTY_WINDOW_S = 10.0


@dataclass(frozen=True)
class ListeningProfile:
    name: str
    min_listen_s: float
    silence_tail_s: float
    activation_phrase: str = ACTIVATION_PHRASE


STUDY_PROFILE = ListeningProfile("study", 10.0, 2.0)
REFINED_PROFILE = ListeningProfile("refined", 0.0, 1.5)

PROFILES = {p.name: p for p in (STUDY_PROFILE, REFINED_PROFILE)}


# input events
@dataclass(frozen=True)
class Activation:
    at: float


@dataclass(frozen=True)
class Fragment:
    at: float
    text: str


@dataclass(frozen=True)
class Tick:
    at: float


DictationEvent = Union[Activation, Fragment, Tick]


# output events
@dataclass(frozen=True)
class Feedback:
    at: float
    text: str
    kind: str = "chime"


@dataclass(frozen=True)
class QueryReady:
    at: float
    text: str


@dataclass(frozen=True)
class QueryEmpty:
    at: float


SessionEvent = Union[Feedback, QueryReady, QueryEmpty]


@dataclass(frozen=True)
class DictationMachine:
    profile: ListeningProfile
    state: str = "idle"  # idle | listening
    activated_at: Optional[float] = None
    fragments: tuple[tuple[float, str], ...] = ()
    last_seen: float = float("-inf")


def new_machine(profile: ListeningProfile) -> DictationMachine:
    return DictationMachine(profile=profile)


def emission_due(m: DictationMachine) -> Optional[float]:
    """Instant the current window closes; None when idle."""
    if m.state != "listening" or m.activated_at is None:
        return None
    if not m.fragments:
        return m.activated_at + max(m.profile.min_listen_s, EMPTY_WINDOW_S)
    return max(m.activated_at + m.profile.min_listen_s,
               m.fragments[-1][0] + m.profile.silence_tail_s)


def _emit(m: DictationMachine, due: float) -> tuple[DictationMachine, SessionEvent]:
    if m.fragments:
        text = " ".join(frag for _, frag in m.fragments)
        event: SessionEvent = QueryReady(at=due, text=text)
    else:
        event = QueryEmpty(at=due)
    return replace(m, state="idle", activated_at=None, fragments=()), event


def on_event(m: DictationMachine, e: DictationEvent) -> tuple[DictationMachine, list[SessionEvent]]:
    """Advance the machine; returns the new machine and any emitted events.

    A fragment landing exactly on the emission instant keeps the window
    open (the speaker is still speaking); a tick at that instant closes it.
    """
    if e.at < m.last_seen:
        raise OutOfOrderEvent(f"event at {e.at} after {m.last_seen}")
    out: list[SessionEvent] = []

    due = emission_due(m)
    if due is not None:
        close_now = due < e.at or (isinstance(e, Tick) and due <= e.at)
        if close_now:
            m, terminal = _emit(m, due)
            out.append(terminal)

    if isinstance(e, Activation):
        if m.state == "idle":
            m = replace(m, state="listening", activated_at=e.at, fragments=(), last_seen=e.at)
            out.append(Feedback(at=e.at, text=FEEDBACK_OK))
        else:
            # activation is honored only in idle; mid-window repeats are noise
            m = replace(m, last_seen=e.at)
    elif isinstance(e, Fragment):
        if m.state == "listening":
            m = replace(m, fragments=m.fragments + ((e.at, e.text),), last_seen=e.at)
        else:
            m = replace(m, last_seen=e.at)  # speech with no active window is ignored
    else:
        m = replace(m, last_seen=e.at)

    return m, out
