"""Rule-based stand-in for the LLM backend.

Everything it knows comes from the rendered initial prompt — never from
case objects — which is the point: if the resolver can reconstruct the
expected function calls for the study tasks from the prompt alone, the
prompt demonstrably carries enough context.

Rule precedence: stored examples, then chat-reset corrections, then
infiltration intent, then resection intent, then explicit structure or
control mentions. Intent cues are checked before plain mentions because
natural phrasings like "infiltrated by the tumor" name a structure while
meaning the intent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .dispatch import FunctionCall, parse_call_text
from .prompt import PromptDocument, parse_prompt_json
from .scene import ControlAction
from .textnorm import norm_phrase, norm_tokens

_MM_VALUE = re.compile(r"(\d+(?:\.\d+)?)\s*mm")


@dataclass(frozen=True)
class Mention:
    position: int
    kind: str  # "segment" | "category"
    target: str


@dataclass(frozen=True)
class ResolverContext:
    organ_types: tuple[str, ...]
    organ_index: dict[tuple[str, ...], str]  # token run -> organ id
    categories: tuple[str, ...]
    distance: dict[str, dict[str, float]]
    margin_mm: Optional[float]
    tumor_id: Optional[str]
    resect_extra: tuple[str, ...]
    example_index: dict[str, str]  # normalized sentence -> result text

    @classmethod
    def from_document(cls, doc: PromptDocument) -> "ResolverContext":
        organ_index: dict[tuple[str, ...], str] = {}
        tumor_id: Optional[str] = None
        for organ in doc.organ_types:
            tokens = tuple(norm_tokens(organ))
            if tokens:
                organ_index[tokens] = organ
            if tumor_id is None and ("tumor" in tokens or "lesion" in tokens):
                tumor_id = organ

        margin: Optional[float] = None
        for rule_id, text in doc.guidelines.items():
            blob = f"{rule_id} {text}".lower()
            if "margin" in blob or "infiltrat" in blob:
                m = _MM_VALUE.search(text)
                if m:
                    margin = float(m.group(1))
                    break

        resect_extra: list[str] = []
        for rule_id, text in doc.guidelines.items():
            blob = f"{rule_id} {text}".lower()
            if "resect" in blob and "tumor" in blob:
                for mention in _scan_structures(norm_tokens(text), organ_index):
                    if mention != tumor_id and mention not in resect_extra:
                        resect_extra.append(mention)

        return cls(
            organ_types=tuple(doc.organ_types),
            organ_index=organ_index,
            categories=tuple(doc.organ_categories),
            distance={a: dict(row) for a, row in doc.distance_data.items()},
            margin_mm=margin,
            tumor_id=tumor_id,
            resect_extra=tuple(resect_extra),
            example_index={norm_phrase(e.sentence): e.result for e in doc.examples},
        )

    @classmethod
    def from_prompt_text(cls, text: str) -> "ResolverContext":
        return cls.from_document(parse_prompt_json(text))


def _scan_structures(tokens: list[str], organ_index: dict[tuple[str, ...], str]) -> list[str]:
    """Greedy longest-match scan for organ-id token runs, left to right."""
    if not organ_index:
        return []
    max_len = max(len(k) for k in organ_index)
    found: list[str] = []
    i = 0
    while i < len(tokens):
        matched = False
        for length in range(min(max_len, len(tokens) - i), 0, -1):
            organ = organ_index.get(tuple(tokens[i:i + length]))
            if organ is not None:
                if organ not in found:
                    found.append(organ)
                i += length
                matched = True
                break
        if not matched:
            i += 1
    return found


_CATEGORY_WORDS = {"arteries": "artery", "veins": "vein"}

_ON_CUES = {"show", "enable", "display", "see", "visualize", "open", "on"}
_OFF_CUES = {"hide", "disable", "close", "off"}
_ONLY_CUES = {"only", "exclusively", "just"}

# control vocabulary the resolver can ground without any structure mention
_CONTROL_PHRASES: list[tuple[tuple[str, ...], str]] = [
    (("marker", "tracking"), ControlAction.MARKER_TRACKING.value),
    (("freeze",), ControlAction.FREEZE.value),
    (("go", "up"), ControlAction.SCROLL_UP.value),
    (("scroll", "up"), ControlAction.SCROLL_UP.value),
    (("go", "down"), ControlAction.SCROLL_DOWN.value),
    (("scroll", "down"), ControlAction.SCROLL_DOWN.value),
    (("stop",), ControlAction.SCROLL_STOP.value),
    (("capture", "photo"), ControlAction.CAPTURE_PHOTO.value),
    (("capture", "hologram"), ControlAction.CAPTURE_HOLOGRAM.value),
    (("computed", "tomography"), ControlAction.TOGGLE_CT.value),
    (("ct", "image"), ControlAction.TOGGLE_CT.value),
    (("ct", "scans"), ControlAction.TOGGLE_CT.value),
    (("tomography",), ControlAction.TOGGLE_CT.value),
    (("ct",), ControlAction.TOGGLE_CT.value),
    (("patient", "history"), ControlAction.TOGGLE_PATIENT_INFO.value),
    (("diagnosis",), ControlAction.TOGGLE_PATIENT_INFO.value),
    (("medication",), ControlAction.TOGGLE_PATIENT_INFO.value),
    (("reset",), ControlAction.RESET_POSE.value),
]

_RESET_CUE = re.compile(r"\b(start over|reset|that was wrong|not what i meant)\b", re.IGNORECASE)
_CORRECTION_SHAPE = re.compile(
    r"when i say\s+(?P<sentence>.+?)[,.]?\s+i mean\s+(?P<meaning>.+)$", re.IGNORECASE
)


def _contains_run(tokens: list[str], run: tuple[str, ...]) -> bool:
    n = len(run)
    return any(tuple(tokens[i:i + n]) == run for i in range(len(tokens) - n + 1))


def resolve(ctx: ResolverContext, query: str) -> Optional[list[FunctionCall]]:
    """Function calls for the query, or None when no rule grounds it."""
    normalized = norm_phrase(query)
    tokens = norm_tokens(query)
    if not tokens:
        return None

    # 1. stored examples outrank everything so corrections visibly win
    stored = ctx.example_index.get(normalized)
    if stored is not None:
        calls = parse_call_text(stored)
        return calls or None

    # 2. chat reset with an embedded correction:
    #    "... reset ... when I say <sentence> I mean <structures>"
    if _RESET_CUE.search(query):
        shape = _CORRECTION_SHAPE.search(query)
        if shape:
            corrected = [
                FunctionCall("set_visibility", (organ, "on"))
                for organ in _scan_structures(norm_tokens(shape.group("meaning")), ctx.organ_index)
            ]
            if corrected:
                sentence = shape.group("sentence").strip().strip('"')
                result = "\n".join(c.render() for c in corrected)
                return [FunctionCall("reset_chat", (sentence, result))]

    only = any(t in _ONLY_CUES for t in tokens)

    # 3. infiltration intent: tumor plus everything inside the margin
    infiltration = any(t.startswith("infiltrat") for t in tokens) or "affected by the tumor" in normalized
    resection = any(t.startswith("resect") for t in tokens) or (
        "remove" in normalized and "tumor" in normalized
    )
    if infiltration or resection:
        targets = _margin_targets(ctx)
        if targets is None:
            return None
        if resection:
            targets += [s for s in ctx.resect_extra if s not in targets]
        if only:
            return [FunctionCall("exclusive_visibility", tuple(targets))]
        return [FunctionCall("set_visibility", (sid, "on")) for sid in targets]

    # 4. explicit structure / category mentions
    mentions = _collect_mentions(tokens, ctx)
    if mentions:
        segments = [m.target for m in mentions if m.kind == "segment"]
        categories = [m.target for m in mentions if m.kind == "category"]
        mode = "toggle"
        if any(t in _ON_CUES for t in tokens):
            mode = "on"
        elif any(t in _OFF_CUES for t in tokens):
            mode = "off"
        if only and segments and not categories:
            return [FunctionCall("exclusive_visibility", tuple(segments))]
        calls = [FunctionCall("set_visibility", (sid, mode)) for sid in segments]
        calls += [FunctionCall("set_group_visibility", (cat, mode)) for cat in categories]
        return calls

    # 5. bare control requests ("freeze", "go up", "ct scans", ...)
    for run, action in _CONTROL_PHRASES:
        if _contains_run(tokens, run):
            return [FunctionCall("control", (action,))]

    return None


def _margin_targets(ctx: ResolverContext) -> Optional[list[str]]:
    if ctx.tumor_id is None or ctx.margin_mm is None:
        return None
    row = ctx.distance.get(ctx.tumor_id)
    if row is None:
        return None
    targets = [ctx.tumor_id]
    for organ in ctx.organ_types:
        if organ == ctx.tumor_id:
            continue
        d = row.get(organ)
        if d is not None and d <= ctx.margin_mm:
            targets.append(organ)
    return targets


def _collect_mentions(tokens: list[str], ctx: ResolverContext) -> list[Mention]:
    mentions: list[Mention] = []
    seen: set[tuple[str, str]] = set()
    max_len = max((len(k) for k in ctx.organ_index), default=0)
    i = 0
    while i < len(tokens):
        matched = False
        for length in range(min(max_len, len(tokens) - i), 0, -1):
            organ = ctx.organ_index.get(tuple(tokens[i:i + length]))
            if organ is not None:
                key = ("segment", organ)
                if key not in seen:
                    seen.add(key)
                    mentions.append(Mention(i, "segment", organ))
                i += length
                matched = True
                break
        if matched:
            continue
        cat = _CATEGORY_WORDS.get(tokens[i])
        if cat is not None:
            key = ("category", cat)
            if key not in seen:
                seen.add(key)
                mentions.append(Mention(i, "category", cat))
        i += 1
    return mentions
