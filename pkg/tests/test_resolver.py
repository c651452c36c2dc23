from __future__ import annotations

import pytest

from scopevoice.dispatch import FunctionCall
from scopevoice.prompt import PromptExample, build_initial_prompt, open_example_store, render_json
from scopevoice.proximity import infiltrated
from scopevoice.resolver import ResolverContext, resolve


@pytest.fixture(scope="module")
def ctx(case_a, matrix_a, registry_a):
    store = open_example_store(case_a.case_id)
    doc = build_initial_prompt(case_a, matrix_a, registry_a, store)
    # the resolver sees only the rendered text, never the case objects
    return ResolverContext.from_prompt_text(render_json(doc))


def test_context_parses_prompt_views(ctx, case_a):
    assert set(ctx.organ_types) == set(case_a.segment_ids)
    assert ctx.tumor_id == "tumor"
    assert ctx.margin_mm == 2.0
    assert ctx.resect_extra == ("splenic_vein",)


def test_infiltrated_vessels_sentence(ctx):
    calls = resolve(ctx, "Show me the infiltrated vessels")
    assert calls == [
        FunctionCall("set_visibility", ("tumor", "on")),
        FunctionCall("set_visibility", ("portal_vein", "on")),
        FunctionCall("set_visibility", ("mesenteric_vein", "on")),
    ]


def test_task1_exclusive(ctx):
    calls = resolve(ctx, "only enable the tumor, inferior vena cava, and portal vein")
    assert calls == [FunctionCall("exclusive_visibility",
                                  ("tumor", "vena_cava", "portal_vein"))]


def test_unresolvable(ctx):
    assert resolve(ctx, "what is the weather") is None
    assert resolve(ctx, "") is None


def test_examples_outrank_rules(case_a, matrix_a, registry_a):
    store = open_example_store(case_a.case_id, heuristic=[
        PromptExample("show me the infiltrated vessels", "control(freeze)"),
    ])
    doc = build_initial_prompt(case_a, matrix_a, registry_a, store)
    ctx = ResolverContext.from_document(doc)
    # the stored example wins over the infiltration rule, proving that the
    # correction loop can change behavior
    assert resolve(ctx, "Show me the infiltrated vessels") == [
        FunctionCall("control", ("freeze",))]


def test_infiltration_matches_proximity_oracle(ctx, case_a, matrix_a):
    calls = resolve(ctx, "Only enable the structures infiltrated by the tumor.")
    assert calls is not None and calls[0].name == "exclusive_visibility"
    expected = {"tumor"} | infiltrated(case_a, matrix_a, case_a.resection_margin_mm)
    assert set(calls[0].args) == expected


def test_resection_superset_of_infiltration(ctx):
    infiltration = resolve(ctx, "show the infiltrated structures")
    resection = resolve(ctx, "show what must be resected")
    on_targets = lambda calls: {c.args[0] for c in calls if c.name == "set_visibility"}
    assert on_targets(infiltration) <= on_targets(resection)


def test_resected_includes_guideline_additions(ctx):
    calls = resolve(ctx, "Can you show me what should be resected?")
    targets = {c.args[0] for c in calls}
    assert targets == {"tumor", "portal_vein", "mesenteric_vein", "splenic_vein"}


def test_affected_by_tumor_phrasing(ctx):
    calls = resolve(ctx, "show everything affected by the tumor")
    targets = {c.args[0] for c in calls}
    assert targets == {"tumor", "portal_vein", "mesenteric_vein"}


def test_hide_cue(ctx):
    calls = resolve(ctx, "hide the splenic artery")
    assert calls == [FunctionCall("set_visibility", ("splenic_artery", "off"))]


def test_category_mention(ctx):
    calls = resolve(ctx, "show me the veins")
    assert calls == [FunctionCall("set_group_visibility", ("vein", "on"))]


def test_bare_mention_toggles(ctx):
    assert resolve(ctx, "portal vein") == [FunctionCall("set_visibility", ("portal_vein", "toggle"))]


def test_control_grounding(ctx):
    assert resolve(ctx, "freeze") == [FunctionCall("control", ("freeze",))]
    assert resolve(ctx, "go up") == [FunctionCall("control", ("scroll_up",))]
    assert resolve(ctx, "reset") == [FunctionCall("control", ("reset_pose",))]


def test_reset_with_correction_phrase(ctx):
    calls = resolve(ctx, 'That was wrong, reset: when I say "show the confluence" I mean the splenic vein and portal vein')
    assert calls is not None and len(calls) == 1
    call = calls[0]
    assert call.name == "reset_chat"
    assert call.args[0] == "show the confluence"
    assert "set_visibility(splenic_vein, on)" in call.args[1]
    assert "set_visibility(portal_vein, on)" in call.args[1]


def test_reset_cue_without_correction_falls_back(ctx):
    # bare "reset" is the Table-2 pose reset, not a chat reset
    calls = resolve(ctx, "reset please")
    assert calls == [FunctionCall("control", ("reset_pose",))]


def test_determinism(ctx):
    query = "Only enable the tumor and portal vein"
    assert resolve(ctx, query) == resolve(ctx, query)


def test_multi_structure_on(ctx):
    calls = resolve(ctx, "show me the hepatic artery and the gastroduodenal artery")
    assert calls == [
        FunctionCall("set_visibility", ("hepatic_artery", "on")),
        FunctionCall("set_visibility", ("gastroduodenal_artery", "on")),
    ]


def test_prompt_sufficiency_for_study_tasks(ctx, case_a, matrix_a, registry_a):
    """Resolver output computed from the prompt text alone must equal the
    visibility sets computed directly from case objects, closing the loop:
    the prompt carries enough context for every study task."""
    from scopevoice.scene import initial_state

    infiltration = {"tumor"} | infiltrated(case_a, matrix_a, case_a.resection_margin_mm)
    guideline_extra = set()
    for rule in case_a.guidelines:
        if rule.kind.value == "resect_with_tumor":
            guideline_extra.update(rule.params.get("segments", []))
    tasks = [
        ("Only enable the tumor, inferior vena cava, and portal vein.",
         {"tumor", "vena_cava", "portal_vein"}),
        ("Only enable the portal vein, hepatic artery, and gastroduodenal artery.",
         {"portal_vein", "hepatic_artery", "gastroduodenal_artery"}),
        ("Only enable the tumor, portal vein, and superior mesenteric artery.",
         {"tumor", "portal_vein", "mesenteric_artery"}),
        ("Only enable the hepatic artery, gastroduodenal artery, celiac trunk, and superior mesenteric artery.",
         {"hepatic_artery", "gastroduodenal_artery", "celiac_trunk", "mesenteric_artery"}),
        ("Only enable the structures that are infiltrated by the tumor.",
         infiltration),
        ("Can you show me what should be resected?",
         infiltration | guideline_extra),
    ]
    state = initial_state(case_a)
    for query, expected in tasks:
        calls = resolve(ctx, query)
        assert calls is not None, query
        state, _ = registry_a.execute(state, calls)
        assert state.visible_ids() == expected, query
