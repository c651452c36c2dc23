from __future__ import annotations

import itertools
import json

import pytest
from hypothesis import given, strategies as st

from scopevoice.errors import (
    AliasCollision,
    MissingFile,
    SchemaViolation,
    ScrollWithoutCT,
    UnknownTarget,
)
from scopevoice.scene import (
    CaptureEffect,
    Category,
    ControlAction,
    CtScroll,
    PoseResetEffect,
    SceneState,
    VisibilityMode,
    advance_ct,
    control,
    exclusive_visibility,
    initial_state,
    load_case,
    set_visibility,
    state_hash,
)


def test_load_case_counts(case_a):
    assert len(case_a.segments) == 12
    assert case_a.tumor_segment().id == "tumor"
    assert case_a.resection_margin_mm == 2.0
    assert all(m.triangle_count >= 1 for m in case_a.meshes.values())


def test_load_case_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_case(tmp_path / "nope.json")


def _minimal_case(tmp_path, segments):
    mesh = tmp_path / "m.obj"
    mesh.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    doc = {
        "case_id": "t",
        "resection_margin_mm": 2.0,
        "diagnosis": "d",
        "guidelines": [],
        "segments": segments,
    }
    path = tmp_path / "case.json"
    path.write_text(json.dumps(doc))
    return path


def test_load_case_empty_segments(tmp_path):
    path = _minimal_case(tmp_path, [])
    with pytest.raises(SchemaViolation):
        load_case(path)


def test_load_case_alias_collision(tmp_path):
    segments = [
        {"id": "tumor", "display_name": "Tumor", "synonyms": ["lesion"],
         "category": "tumor", "mesh_ref": "m.obj"},
        {"id": "portal_vein", "display_name": "Portal vein", "synonyms": ["lesion"],
         "category": "vein", "mesh_ref": "m.obj"},
    ]
    path = _minimal_case(tmp_path, segments)
    with pytest.raises(AliasCollision):
        load_case(path)


def test_load_case_field_message_names_field(tmp_path):
    path = _minimal_case(tmp_path, [
        {"id": "x", "display_name": "X", "synonyms": [], "category": "bogus",
         "mesh_ref": "m.obj"},
    ])
    with pytest.raises(SchemaViolation, match="category"):
        load_case(path)


def test_initial_state_defaults(case_a):
    state = initial_state(case_a)
    assert set(state.visible) == set(case_a.segment_ids)
    assert not any(state.visible.values())
    assert state.marker_tracking and not state.frozen
    assert not state.ct_panel_open and not state.patient_panel_open
    assert state.ct_index == 0 and state.ct_scroll is CtScroll.IDLE


def test_set_visibility_toggle_involution(case_a):
    state = initial_state(case_a)
    once = set_visibility(state, "tumor", VisibilityMode.TOGGLE)
    assert once.visible["tumor"] is True
    twice = set_visibility(once, "tumor", VisibilityMode.TOGGLE)
    assert twice.visible == state.visible


def test_set_visibility_category(case_a):
    state = initial_state(case_a)
    lit = set_visibility(state, "artery", VisibilityMode.ON)
    expected = {s.id for s in case_a.by_category(Category.ARTERY)}
    assert lit.visible_ids() == expected


def test_set_visibility_unknown_target(case_a):
    with pytest.raises(UnknownTarget):
        set_visibility(initial_state(case_a), "spleen", VisibilityMode.ON)


def test_exclusive_visibility(case_a):
    state = set_visibility(initial_state(case_a), "artery", VisibilityMode.ON)
    only = exclusive_visibility(state, ["tumor", "portal_vein"])
    assert only.visible_ids() == {"tumor", "portal_vein"}


def test_freeze_then_marker_tracking(case_a):
    state = initial_state(case_a)
    frozen, _ = control(state, ControlAction.FREEZE)
    assert frozen.frozen and not frozen.marker_tracking
    tracking, _ = control(frozen, ControlAction.MARKER_TRACKING)
    assert tracking.marker_tracking and not tracking.frozen


def test_scroll_requires_ct_panel(case_a):
    state = initial_state(case_a)
    with pytest.raises(ScrollWithoutCT):
        control(state, ControlAction.SCROLL_UP)
    opened, _ = control(state, ControlAction.TOGGLE_CT)
    scrolling, _ = control(opened, ControlAction.SCROLL_UP)
    assert scrolling.ct_scroll is CtScroll.UP
    stopped, _ = control(scrolling, ControlAction.SCROLL_STOP)
    assert stopped.ct_scroll is CtScroll.IDLE


def test_closing_ct_stops_scroll(case_a):
    state, _ = control(initial_state(case_a), ControlAction.TOGGLE_CT)
    state, _ = control(state, ControlAction.SCROLL_DOWN)
    closed, _ = control(state, ControlAction.TOGGLE_CT)
    assert not closed.ct_panel_open and closed.ct_scroll is CtScroll.IDLE


def test_ct_advance(case_a):
    state, _ = control(initial_state(case_a), ControlAction.TOGGLE_CT)
    state, _ = control(state, ControlAction.SCROLL_UP)
    state = advance_ct(advance_ct(state))
    assert state.ct_index == 2
    state, _ = control(state, ControlAction.SCROLL_DOWN)
    for _ in range(5):
        state = advance_ct(state)
    assert state.ct_index == 0  # floored


def test_capture_and_reset_effects(case_a):
    state = initial_state(case_a)
    same, effect = control(state, ControlAction.CAPTURE_PHOTO)
    assert same == state and effect == CaptureEffect("photo")
    _, effect = control(state, ControlAction.CAPTURE_HOLOGRAM)
    assert effect == CaptureEffect("hologram")
    visible = set_visibility(state, "tumor", VisibilityMode.ON)
    after, effect = control(visible, ControlAction.RESET_POSE)
    assert isinstance(effect, PoseResetEffect)
    assert after.visible == visible.visible  # pose reset leaves visibility alone


def test_frozen_and_tracking_never_both_true_3_steps(case_a):
    """Exhaustive 3-step model check over all control sequences."""
    start = initial_state(case_a)
    for seq in itertools.product(list(ControlAction), repeat=3):
        state = start
        for action in seq:
            try:
                state, _ = control(state, action)
            except ScrollWithoutCT:
                continue
            assert not (state.frozen and state.marker_tracking), seq


def test_operations_never_change_id_set(case_a):
    state = initial_state(case_a)
    ids = set(state.visible)
    state = set_visibility(state, "artery", VisibilityMode.ON)
    state = set_visibility(state, "tumor", VisibilityMode.TOGGLE)
    state = exclusive_visibility(state, ["splenic_vein"])
    for action in ControlAction:
        try:
            state, _ = control(state, action)
        except ScrollWithoutCT:
            pass
        assert set(state.visible) == ids


@given(st.lists(st.sampled_from(["tumor", "portal_vein", "vena_cava", "splenic_vein"]),
                min_size=1, max_size=8))
def test_disjoint_toggles_commute(targets):
    state = SceneState(
        visible={t: False for t in ["tumor", "portal_vein", "vena_cava", "splenic_vein"]},
        categories={},
    )
    forward = state
    for t in targets:
        forward = set_visibility(forward, t, VisibilityMode.TOGGLE)
    backward = state
    for t in reversed(targets):
        backward = set_visibility(backward, t, VisibilityMode.TOGGLE)
    assert forward.visible == backward.visible


def test_state_hash_stable(case_a):
    a = initial_state(case_a)
    b = initial_state(case_a)
    assert state_hash(a) == state_hash(b)
    assert state_hash(set_visibility(a, "tumor", VisibilityMode.ON)) != state_hash(a)
