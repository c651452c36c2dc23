"""Patient-case ingestion and the scene state every voice command mutates.

States are values: every mutation returns a fresh ``SceneState``. The
owning session serializes mutations; the module itself is thread-safe.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional

from .errors import (
    AliasCollision,
    MeshDegenerate,
    MissingFile,
    SchemaViolation,
    ScrollWithoutCT,
    UnknownTarget,
)
from .mesh import TriangleMesh, load_obj
from .textnorm import norm_phrase


class Category(str, Enum):
    ARTERY = "artery"
    VEIN = "vein"
    TUMOR = "tumor"
    ORGAN = "organ"
    VARIATION = "variation"


class RuleKind(str, Enum):
    INFILTRATION_MARGIN = "infiltration_margin"
    RESECT_WITH_TUMOR = "resect_with_tumor"
    INFORMATIONAL = "informational"


@dataclass(frozen=True)
class GuidelineRule:
    rule_id: str
    description: str
    kind: RuleKind
    params: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class AnatomicalSegment:
    id: str
    display_name: str
    synonyms: tuple[str, ...]
    category: Category
    mesh_ref: str


@dataclass(frozen=True)
class PatientCase:
    case_id: str
    segments: tuple[AnatomicalSegment, ...]
    diagnosis: str
    guidelines: tuple[GuidelineRule, ...]
    resection_margin_mm: float
    meshes: Mapping[str, TriangleMesh]

    @property
    def segment_ids(self) -> list[str]:
        return [s.id for s in self.segments]

    def segment(self, segment_id: str) -> AnatomicalSegment:
        for s in self.segments:
            if s.id == segment_id:
                return s
        raise UnknownTarget(segment_id)

    def tumor_segment(self) -> Optional[AnatomicalSegment]:
        for s in self.segments:
            if s.category is Category.TUMOR:
                return s
        return None

    def by_category(self, category: Category) -> list[AnatomicalSegment]:
        return [s for s in self.segments if s.category is category]


def _require(obj: dict, key: str, kind: type, where: str):
    if key not in obj:
        raise SchemaViolation(f"{where}: missing field '{key}'")
    value = obj[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise SchemaViolation(f"{where}: field '{key}' expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_case(path: str | Path) -> PatientCase:
    """Load and fully validate a case file, meshes included.

    The case file is a single JSON document; mesh_ref paths resolve
    relative to the file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaViolation(f"{path.name}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{path.name}: top level must be an object")

    case_id = _require(doc, "case_id", str, path.name)
    diagnosis = _require(doc, "diagnosis", str, path.name)
    margin = _require(doc, "resection_margin_mm", float, path.name)
    if margin <= 0:
        raise SchemaViolation(f"{path.name}: resection_margin_mm must be > 0")

    raw_rules = _require(doc, "guidelines", list, path.name)
    rules: list[GuidelineRule] = []
    seen_rule_ids: set[str] = set()
    for i, raw in enumerate(raw_rules):
        where = f"guidelines[{i}]"
        if not isinstance(raw, dict):
            raise SchemaViolation(f"{where}: expected object")
        rule_id = _require(raw, "rule_id", str, where)
        if rule_id in seen_rule_ids:
            raise SchemaViolation(f"{where}: duplicate rule_id '{rule_id}'")
        seen_rule_ids.add(rule_id)
        try:
            kind = RuleKind(_require(raw, "kind", str, where))
        except ValueError:
            raise SchemaViolation(f"{where}: unknown kind '{raw['kind']}'") from None
        params = raw.get("params", {})
        if not isinstance(params, dict):
            raise SchemaViolation(f"{where}: params must be an object")
        if kind is RuleKind.INFILTRATION_MARGIN:
            mm = params.get("margin_mm")
            if not isinstance(mm, (int, float)) or mm <= 0:
                raise SchemaViolation(f"{where}: infiltration_margin rule needs positive params.margin_mm")
        rules.append(GuidelineRule(rule_id, _require(raw, "description", str, where), kind, params))

    raw_segments = _require(doc, "segments", list, path.name)
    if not raw_segments:
        raise SchemaViolation(f"{path.name}: segments must contain at least one entry")

    segments: list[AnatomicalSegment] = []
    phrase_owner: dict[str, str] = {}
    tumor_count = 0
    for i, raw in enumerate(raw_segments):
        where = f"segments[{i}]"
        if not isinstance(raw, dict):
            raise SchemaViolation(f"{where}: expected object")
        seg_id = _require(raw, "id", str, where)
        if not seg_id:
            raise SchemaViolation(f"{where}: id must be non-empty")
        if any(s.id == seg_id for s in segments):
            raise SchemaViolation(f"{where}: duplicate segment id '{seg_id}'")
        try:
            category = Category(_require(raw, "category", str, where))
        except ValueError:
            raise SchemaViolation(f"{where}: unknown category '{raw['category']}'") from None
        if category is Category.TUMOR:
            tumor_count += 1
            if tumor_count > 1:
                raise SchemaViolation(f"{where}: more than one tumor segment")
        synonyms = _require(raw, "synonyms", list, where)
        if not all(isinstance(s, str) for s in synonyms):
            raise SchemaViolation(f"{where}: synonyms must be strings")
        seg = AnatomicalSegment(
            id=seg_id,
            display_name=_require(raw, "display_name", str, where),
            synonyms=tuple(synonyms),
            category=category,
            mesh_ref=_require(raw, "mesh_ref", str, where),
        )
        # every alias (name or synonym) must resolve to exactly one segment
        for phrase in (seg.display_name, *seg.synonyms):
            key = norm_phrase(phrase)
            owner = phrase_owner.get(key)
            if owner is not None and owner != seg_id:
                raise AliasCollision(f"phrase '{phrase}' claimed by both '{owner}' and '{seg_id}'")
            phrase_owner[key] = seg_id
        segments.append(seg)

    meshes: dict[str, TriangleMesh] = {}
    for seg in segments:
        mesh_path = path.parent / seg.mesh_ref
        if not mesh_path.is_file():
            raise MissingFile(f"segment '{seg.id}': mesh file {mesh_path}")
        try:
            mesh = load_obj(mesh_path)
        except MeshDegenerate as e:
            raise MeshDegenerate(f"segment '{seg.id}': {e}") from e
        if mesh.triangle_count < 1:
            raise MeshDegenerate(f"segment '{seg.id}': empty mesh")
        meshes[seg.id] = mesh

    return PatientCase(
        case_id=case_id,
        segments=tuple(segments),
        diagnosis=diagnosis,
        guidelines=tuple(rules),
        resection_margin_mm=float(margin),
        meshes=meshes,
    )


class CtScroll(str, Enum):
    IDLE = "idle"
    UP = "up"
    DOWN = "down"


class ControlAction(str, Enum):
    FREEZE = "freeze"
    MARKER_TRACKING = "marker_tracking"
    RESET_POSE = "reset_pose"
    SCROLL_UP = "scroll_up"
    SCROLL_DOWN = "scroll_down"
    SCROLL_STOP = "scroll_stop"
    CAPTURE_PHOTO = "capture_photo"
    CAPTURE_HOLOGRAM = "capture_hologram"
    TOGGLE_CT = "toggle_ct"
    TOGGLE_PATIENT_INFO = "toggle_patient_info"


class VisibilityMode(str, Enum):
    ON = "on"
    OFF = "off"
    TOGGLE = "toggle"


@dataclass(frozen=True)
class CaptureEffect:
    kind: str  # photo | hologram


@dataclass(frozen=True)
class PoseResetEffect:
    pass


@dataclass(frozen=True)
class SceneState:
    """Per-session scene: visibility map plus control flags.

    ``categories`` is derived bookkeeping (segment id -> category) fixed at
    construction so category-wide visibility ops need no case handle.
    """

    visible: Mapping[str, bool]
    categories: Mapping[str, Category]
    frozen: bool = False
    marker_tracking: bool = True
    ct_panel_open: bool = False
    patient_panel_open: bool = False
    ct_index: int = 0
    ct_scroll: CtScroll = CtScroll.IDLE

    def visible_ids(self) -> set[str]:
        return {sid for sid, on in self.visible.items() if on}


def initial_state(case: PatientCase) -> SceneState:
    """Blank slate: everything hidden, tracking on, panels closed."""
    return SceneState(
        visible={s.id: False for s in case.segments},
        categories={s.id: s.category for s in case.segments},
    )


_GROUP_TARGETS = {"artery": Category.ARTERY, "vein": Category.VEIN}


def set_visibility(state: SceneState, target: str, mode: VisibilityMode | str) -> SceneState:
    """Apply on/off/toggle to one segment or to every artery/vein segment."""
    mode = VisibilityMode(mode)
    if target in state.visible:
        targets = [target]
    elif target in _GROUP_TARGETS:
        category = _GROUP_TARGETS[target]
        targets = [sid for sid, cat in state.categories.items() if cat is category]
    else:
        raise UnknownTarget(target)
    visible = dict(state.visible)
    for sid in targets:
        if mode is VisibilityMode.ON:
            visible[sid] = True
        elif mode is VisibilityMode.OFF:
            visible[sid] = False
        else:
            visible[sid] = not visible[sid]
    return replace(state, visible=visible)


def exclusive_visibility(state: SceneState, targets: list[str]) -> SceneState:
    """Exactly the named segments visible, everything else hidden."""
    for t in targets:
        if t not in state.visible:
            raise UnknownTarget(t)
    wanted = set(targets)
    return replace(state, visible={sid: sid in wanted for sid in state.visible})


def control(state: SceneState, action: ControlAction | str):
    """Apply a control action; returns (new state, optional effect record)."""
    action = ControlAction(action)
    if action is ControlAction.FREEZE:
        return replace(state, frozen=True, marker_tracking=False), None
    if action is ControlAction.MARKER_TRACKING:
        return replace(state, marker_tracking=True, frozen=False), None
    if action is ControlAction.RESET_POSE:
        return state, PoseResetEffect()
    if action in (ControlAction.SCROLL_UP, ControlAction.SCROLL_DOWN):
        if not state.ct_panel_open:
            raise ScrollWithoutCT(action.value)
        direction = CtScroll.UP if action is ControlAction.SCROLL_UP else CtScroll.DOWN
        return replace(state, ct_scroll=direction), None
    if action is ControlAction.SCROLL_STOP:
        # tolerated with the panel closed: scroll is already idle by invariant
        return replace(state, ct_scroll=CtScroll.IDLE), None
    if action is ControlAction.CAPTURE_PHOTO:
        return state, CaptureEffect("photo")
    if action is ControlAction.CAPTURE_HOLOGRAM:
        return state, CaptureEffect("hologram")
    if action is ControlAction.TOGGLE_CT:
        opening = not state.ct_panel_open
        # closing the panel stops any running scroll
        scroll = state.ct_scroll if opening else CtScroll.IDLE
        return replace(state, ct_panel_open=opening, ct_scroll=scroll), None
    if action is ControlAction.TOGGLE_PATIENT_INFO:
        return replace(state, patient_panel_open=not state.patient_panel_open), None
    raise UnknownTarget(action.value)


def advance_ct(state: SceneState) -> SceneState:
    """One service tick of CT scrolling: one slice per tick, index floored at 0."""
    if state.ct_scroll is CtScroll.UP:
        return replace(state, ct_index=state.ct_index + 1)
    if state.ct_scroll is CtScroll.DOWN:
        return replace(state, ct_index=max(0, state.ct_index - 1))
    return state


def state_snapshot(state: SceneState) -> dict:
    """JSON-friendly view, stable key order."""
    return {
        "visible": {sid: state.visible[sid] for sid in sorted(state.visible)},
        "frozen": state.frozen,
        "marker_tracking": state.marker_tracking,
        "ct_panel_open": state.ct_panel_open,
        "patient_panel_open": state.patient_panel_open,
        "ct_index": state.ct_index,
        "ct_scroll": state.ct_scroll.value,
    }


def state_hash(state: SceneState) -> str:
    payload = json.dumps(state_snapshot(state), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()
