"""Keyword-spotting voice front end: per-structure names with synonyms,
artery/vein groups, control phrases, and the trailing on/off extension.

Matching is case-insensitive on whitespace-normalized tokens; the longest
lexicon phrase wins, leftmost on ties; one command per utterance.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import AliasCollision
from .dispatch import FunctionCall
from .scene import Category, ControlAction, PatientCase
from .textnorm import norm_tokens


class BindingKind(str, Enum):
    SEGMENT = "segment"
    GROUP = "group"
    CONTROL = "control"


@dataclass(frozen=True)
class Binding:
    kind: BindingKind
    target: str  # segment id, category name, or control action

    @property
    def allows_onoff(self) -> bool:
        return self.kind in (BindingKind.SEGMENT, BindingKind.GROUP)

    def to_call(self, mode: str) -> FunctionCall:
        if self.kind is BindingKind.SEGMENT:
            return FunctionCall("set_visibility", (self.target, mode))
        if self.kind is BindingKind.GROUP:
            return FunctionCall("set_group_visibility", (self.target, mode))
        return FunctionCall("control", (self.target,))


@dataclass(frozen=True)
class LexiconEntry:
    phrase: str  # display form
    tokens: tuple[str, ...]
    binding: Binding


@dataclass(frozen=True)
class Lexicon:
    entries: tuple[LexiconEntry, ...]
    index: dict[tuple[str, ...], LexiconEntry]
    max_len: int

    def phrases(self) -> list[str]:
        return [e.phrase for e in self.entries]


@dataclass(frozen=True)
class CommandParse:
    binding: Binding
    mode: str  # on | off | toggle | n/a
    matched_phrase: str

    def to_call(self) -> FunctionCall:
        return self.binding.to_call(self.mode)


# Control vocabulary shared by every case (Table-2 style command set).
_CONTROL_PHRASES: list[tuple[str, Binding]] = [
    ("patient history", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_PATIENT_INFO.value)),
    ("diagnosis", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_PATIENT_INFO.value)),
    ("medication", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_PATIENT_INFO.value)),
    ("ct", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_CT.value)),
    ("ct image", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_CT.value)),
    ("tomography", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_CT.value)),
    ("computed tomography", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_CT.value)),
    ("ct scans", Binding(BindingKind.CONTROL, ControlAction.TOGGLE_CT.value)),
    ("go up", Binding(BindingKind.CONTROL, ControlAction.SCROLL_UP.value)),
    ("go down", Binding(BindingKind.CONTROL, ControlAction.SCROLL_DOWN.value)),
    ("stop", Binding(BindingKind.CONTROL, ControlAction.SCROLL_STOP.value)),
    ("capture photo", Binding(BindingKind.CONTROL, ControlAction.CAPTURE_PHOTO.value)),
    ("capture hologram", Binding(BindingKind.CONTROL, ControlAction.CAPTURE_HOLOGRAM.value)),
    ("freeze", Binding(BindingKind.CONTROL, ControlAction.FREEZE.value)),
    ("marker tracking", Binding(BindingKind.CONTROL, ControlAction.MARKER_TRACKING.value)),
    ("reset", Binding(BindingKind.CONTROL, ControlAction.RESET_POSE.value)),
]

_GROUP_PHRASES: list[tuple[str, Binding]] = [
    ("arteries", Binding(BindingKind.GROUP, Category.ARTERY.value)),
    ("veins", Binding(BindingKind.GROUP, Category.VEIN.value)),
]


def build_lexicon(case: PatientCase) -> Lexicon:
    """One entry per segment name/synonym plus the fixed command set."""
    entries: list[LexiconEntry] = []
    index: dict[tuple[str, ...], LexiconEntry] = {}

    def add(phrase: str, binding: Binding) -> None:
        tokens = tuple(norm_tokens(phrase))
        if not tokens:
            return
        existing = index.get(tokens)
        if existing is not None:
            if existing.binding != binding:
                raise AliasCollision(
                    f"phrase '{phrase}' bound to both {existing.binding.target} and {binding.target}"
                )
            return
        entry = LexiconEntry(phrase=phrase, tokens=tokens, binding=binding)
        index[tokens] = entry
        entries.append(entry)

    for seg in case.segments:
        binding = Binding(BindingKind.SEGMENT, seg.id)
        add(seg.id.replace("_", " "), binding)
        add(seg.display_name, binding)
        for syn in seg.synonyms:
            add(syn, binding)
    for phrase, binding in _GROUP_PHRASES:
        add(phrase, binding)
    for phrase, binding in _CONTROL_PHRASES:
        add(phrase, binding)

    return Lexicon(
        entries=tuple(entries),
        index=index,
        max_len=max(len(e.tokens) for e in entries),
    )


_ONOFF = {"on": "on", "off": "off"}


def parse_utterance(lex: Lexicon, text: str) -> Optional[CommandParse]:
    """Longest matching phrase wins, leftmost on ties; returns None on no match."""
    tokens = norm_tokens(text)
    best: Optional[tuple[int, int, LexiconEntry]] = None  # (length, start, entry)
    for start in range(len(tokens)):
        top = min(lex.max_len, len(tokens) - start)
        for length in range(top, 0, -1):
            if best is not None and length <= best[0]:
                break  # cannot beat the current best from here
            entry = lex.index.get(tuple(tokens[start:start + length]))
            if entry is not None:
                best = (length, start, entry)
                break
    if best is None:
        return None
    length, start, entry = best
    mode = "n/a"
    if entry.binding.allows_onoff:
        mode = "toggle"
        nxt = start + length
        if nxt < len(tokens) and tokens[nxt] in _ONOFF:
            mode = _ONOFF[tokens[nxt]]
    return CommandParse(binding=entry.binding, mode=mode, matched_phrase=" ".join(entry.tokens))
