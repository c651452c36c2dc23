"""Function registry and execution engine.

The single place where validated calls mutate scene state. Batches are
all-or-nothing: one bad call rejects the lot and the state is untouched.
`reset_chat` never executes here; the router must intercept it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .errors import ContractViolation, DuplicateName, RejectedBatch, ScopeVoiceError
from .scene import (
    CaptureEffect,
    ControlAction,
    PatientCase,
    PoseResetEffect,
    SceneState,
    VisibilityMode,
    control,
    exclusive_visibility,
    set_visibility,
)

RESET_FUNCTION = "reset_chat"


_BARE_ARG = re.compile(r"[A-Za-z0-9_.\-]+")


@dataclass(frozen=True)
class FunctionCall:
    name: str
    args: tuple[str, ...] = ()

    def render(self) -> str:
        parts = []
        for arg in self.args:
            if _BARE_ARG.fullmatch(arg):
                parts.append(arg)
            else:
                parts.append('"' + arg.replace('"', "'") + '"')
        return f"{self.name}({', '.join(parts)})"


class EffectKind(str, Enum):
    VISIBILITY_CHANGED = "VisibilityChanged"
    CONTROL_APPLIED = "ControlApplied"
    CAPTURE_REQUESTED = "CaptureRequested"
    POSE_RESET = "PoseReset"
    CHAT_RESET = "ChatReset"


@dataclass(frozen=True)
class Effect:
    kind: EffectKind
    detail: dict

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "detail": self.detail}


def effect_from_json(doc: dict) -> Effect:
    return Effect(kind=EffectKind(doc["kind"]), detail=doc["detail"])


class ArgDomain(str, Enum):
    SEGMENT = "segment_id"
    CATEGORY = "category"
    MODE = "mode"
    ACTION = "action"
    TEXT = "text"


VARIADIC = -1


@dataclass(frozen=True)
class FunctionDescriptor:
    name: str
    arity: int  # VARIADIC means one or more args
    arg_domains: tuple[ArgDomain, ...]  # variadic: single repeated domain
    signature: str
    apply: Optional[Callable[[SceneState, tuple[str, ...]], tuple[SceneState, Effect]]]


class Registry:
    """Descriptors by name; exported verbatim into the initial prompt."""

    def __init__(self) -> None:
        self._by_name: dict[str, FunctionDescriptor] = {}
        self.segment_ids: frozenset[str] = frozenset()
        self.categories: frozenset[str] = frozenset(("artery", "vein"))

    def register(self, d: FunctionDescriptor) -> None:
        if d.name in self._by_name:
            raise DuplicateName(d.name)
        self._by_name[d.name] = d

    def finalize(self) -> "Registry":
        if RESET_FUNCTION not in self._by_name:
            raise ScopeVoiceError(f"registry must contain {RESET_FUNCTION} exactly once")
        return self

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __len__(self) -> int:
        return len(self._by_name)

    def get(self, name: str) -> Optional[FunctionDescriptor]:
        return self._by_name.get(name)

    def signatures(self) -> list[str]:
        return [d.signature for d in self._by_name.values()]

    def validate_call(self, call: FunctionCall) -> Optional[str]:
        """None when valid, otherwise a human-readable reason."""
        d = self._by_name.get(call.name)
        if d is None:
            return f"unknown function '{call.name}'"
        if d.arity == VARIADIC:
            if len(call.args) < 1:
                return f"{call.name}: expected at least one argument"
            domains = (d.arg_domains[0],) * len(call.args)
        else:
            if len(call.args) != d.arity:
                return f"{call.name}: expected {d.arity} argument(s), got {len(call.args)}"
            domains = d.arg_domains
        for value, domain in zip(call.args, domains):
            reason = self._check_domain(call.name, value, domain)
            if reason:
                return reason
        return None

    def _check_domain(self, fn: str, value: str, domain: ArgDomain) -> Optional[str]:
        if domain is ArgDomain.SEGMENT and value not in self.segment_ids:
            return f"{fn}: unknown segment '{value}'"
        if domain is ArgDomain.CATEGORY and value not in self.categories:
            return f"{fn}: unknown category '{value}'"
        if domain is ArgDomain.MODE and value not in ("on", "off", "toggle"):
            return f"{fn}: bad mode '{value}'"
        if domain is ArgDomain.ACTION:
            try:
                ControlAction(value)
            except ValueError:
                return f"{fn}: unknown control action '{value}'"
        return None

    def execute(self, state: SceneState, calls: list[FunctionCall]) -> tuple[SceneState, list[Effect]]:
        """Validate everything first; apply in order only if all pass."""
        reasons = []
        for call in calls:
            if call.name == RESET_FUNCTION:
                raise ContractViolation("reset_chat reached the executor; the router must intercept it")
            reason = self.validate_call(call)
            if reason:
                reasons.append(reason)
        if reasons:
            raise RejectedBatch(reasons)
        effects: list[Effect] = []
        current = state
        try:
            for call in calls:
                d = self._by_name[call.name]
                assert d.apply is not None
                current, effect = d.apply(current, call.args)
                effects.append(effect)
        except ScopeVoiceError as e:
            # runtime precondition failures (e.g. scrolling without the CT
            # panel) reject the whole batch; nothing leaked because states
            # are values
            raise RejectedBatch([str(e)]) from e
        return current, effects


def _apply_set_visibility(state: SceneState, args: tuple[str, ...]) -> tuple[SceneState, Effect]:
    target, mode = args
    new_state = set_visibility(state, target, VisibilityMode(mode))
    changes = {sid: new_state.visible[sid] for sid in new_state.visible if new_state.visible[sid] != state.visible[sid]}
    if not changes and target in state.visible:
        # forced on/off that was already in effect: record the resolved value
        changes = {target: new_state.visible[target]}
    return new_state, Effect(EffectKind.VISIBILITY_CHANGED, {"target": target, "mode": mode, "changes": changes})


def _apply_group_visibility(state: SceneState, args: tuple[str, ...]) -> tuple[SceneState, Effect]:
    category, mode = args
    new_state = set_visibility(state, category, VisibilityMode(mode))
    changes = {
        sid: new_state.visible[sid]
        for sid, cat in new_state.categories.items()
        if cat.value == category
    }
    return new_state, Effect(EffectKind.VISIBILITY_CHANGED, {"target": category, "mode": mode, "changes": changes})


def _apply_exclusive(state: SceneState, args: tuple[str, ...]) -> tuple[SceneState, Effect]:
    new_state = exclusive_visibility(state, list(args))
    changes = dict(new_state.visible)
    return new_state, Effect(
        EffectKind.VISIBILITY_CHANGED, {"target": "exclusive", "mode": "only", "changes": changes}
    )


_CONTROL_FIELDS = ("frozen", "marker_tracking", "ct_panel_open", "patient_panel_open", "ct_scroll")


def _apply_control(state: SceneState, args: tuple[str, ...]) -> tuple[SceneState, Effect]:
    (action,) = args
    new_state, record = control(state, ControlAction(action))
    if isinstance(record, CaptureEffect):
        return new_state, Effect(EffectKind.CAPTURE_REQUESTED, {"capture": record.kind})
    if isinstance(record, PoseResetEffect):
        return new_state, Effect(EffectKind.POSE_RESET, {})
    fields = {}
    for name in _CONTROL_FIELDS:
        before = getattr(state, name)
        after = getattr(new_state, name)
        if before != after:
            fields[name] = after.value if isinstance(after, Enum) else after
    return new_state, Effect(EffectKind.CONTROL_APPLIED, {"action": action, "fields": fields})


def standard_registry(case: PatientCase) -> Registry:
    """The shipped function surface, arg domains bound to the case."""
    registry = Registry()
    registry.segment_ids = frozenset(case.segment_ids)
    registry.register(FunctionDescriptor(
        name="set_visibility", arity=2,
        arg_domains=(ArgDomain.SEGMENT, ArgDomain.MODE),
        signature="set_visibility(segment_id, on|off|toggle)",
        apply=_apply_set_visibility,
    ))
    registry.register(FunctionDescriptor(
        name="set_group_visibility", arity=2,
        arg_domains=(ArgDomain.CATEGORY, ArgDomain.MODE),
        signature="set_group_visibility(artery|vein, on|off|toggle)",
        apply=_apply_group_visibility,
    ))
    registry.register(FunctionDescriptor(
        name="exclusive_visibility", arity=VARIADIC,
        arg_domains=(ArgDomain.SEGMENT,),
        signature="exclusive_visibility(segment_id, ...)",
        apply=_apply_exclusive,
    ))
    registry.register(FunctionDescriptor(
        name="control", arity=1,
        arg_domains=(ArgDomain.ACTION,),
        signature="control(freeze|marker_tracking|reset_pose|scroll_up|scroll_down|scroll_stop|"
                  "capture_photo|capture_hologram|toggle_ct|toggle_patient_info)",
        apply=_apply_control,
    ))
    registry.register(FunctionDescriptor(
        name=RESET_FUNCTION, arity=2,
        arg_domains=(ArgDomain.TEXT, ArgDomain.TEXT),
        signature='reset_chat("wrong sentence", "corrected function calls")',
        apply=None,
    ))
    return registry.finalize()


def replay_effects(state: SceneState, effects: list[Effect]) -> SceneState:
    """Reapply a logged effect stream; reproduces the original final state."""
    from dataclasses import replace

    from .scene import CtScroll

    current = state
    for effect in effects:
        if effect.kind is EffectKind.VISIBILITY_CHANGED:
            visible = dict(current.visible)
            visible.update(effect.detail["changes"])
            current = replace(current, visible=visible)
        elif effect.kind is EffectKind.CONTROL_APPLIED:
            fields = dict(effect.detail["fields"])
            if "ct_scroll" in fields:
                fields["ct_scroll"] = CtScroll(fields["ct_scroll"])
            current = replace(current, **fields)
        # captures, pose resets and chat resets do not touch scene state
    return current


# -- call-text grammar ---------------------------------------------------------
#
# zero or more `identifier(arg, arg, ...)` separated by commas, newlines or a
# JSON array; args are bare tokens or quoted strings; surrounding prose is
# tolerated. This is the wire format both the LLM replies and the prompt's
# example results use.

_IDENT_OPEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(")


def _scan_args(text: str, pos: int) -> Optional[tuple[list[str], int]]:
    """Parse an argument list starting just after '('; None when unbalanced."""
    args: list[str] = []
    buf: list[str] = []
    quote: Optional[str] = None
    had_quote = False
    while pos < len(text):
        ch = text[pos]
        if quote is not None:
            if ch == quote:
                quote = None
            else:
                buf.append(ch)
            pos += 1
            continue
        if ch in "\"'":
            quote = ch
            had_quote = True
            pos += 1
            continue
        if ch == ",":
            token = "".join(buf).strip()
            if token or had_quote:
                args.append(token)
            buf, had_quote = [], False
            pos += 1
            continue
        if ch == ")":
            token = "".join(buf).strip()
            if token or had_quote:
                args.append(token)
            return args, pos + 1
        if ch == "(":
            return None  # nested unquoted paren: not a well-formed call
        buf.append(ch)
        pos += 1
    return None


def parse_call_text(text: str) -> list[FunctionCall]:
    """Extract every well-formed call from free text (empty list if none)."""
    # a JSON array of strings is unwrapped first
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            items = json.loads(stripped)
        except json.JSONDecodeError:
            items = None
        if isinstance(items, list) and all(isinstance(i, str) for i in items):
            calls: list[FunctionCall] = []
            for item in items:
                calls.extend(parse_call_text(item))
            return calls
    calls = []
    pos = 0
    while True:
        m = _IDENT_OPEN.search(text, pos)
        if m is None:
            break
        parsed = _scan_args(text, m.end())
        if parsed is None:
            pos = m.end()
            continue
        args, pos = parsed
        calls.append(FunctionCall(m.group(1), tuple(args)))
    return calls


def render_calls(calls: list[FunctionCall]) -> str:
    return "\n".join(c.render() for c in calls)
