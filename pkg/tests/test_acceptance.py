"""Acceptance criteria, one test per criterion.

Each test prints a single [PASS]/[FAIL] line (visible with pytest -s) and
asserts at the stated tolerance. Human-subject measurements from the
source study (completion times, workload scores) are out of scope; the
study's task definitions run as functional fixtures instead.
"""

from __future__ import annotations

import random
import string
import time

import numpy as np
import pytest

from scopevoice.dictation import (
    Activation,
    Fragment,
    QueryEmpty,
    QueryReady,
    REFINED_PROFILE,
    STUDY_PROFILE,
    Tick,
    new_machine,
    on_event,
)
from scopevoice.dispatch import FunctionCall, RejectedBatch, standard_registry
from scopevoice.errors import FormatError
from scopevoice.grammar import BindingKind, build_lexicon, parse_utterance
from scopevoice.meshgen import random_soup
from scopevoice.prompt import (
    PROMPT_SCHEMA,
    build_initial_prompt,
    open_example_store,
    parse_prompt_json,
    render_json,
)
from scopevoice.proximity import distance_matrix, min_distance, min_distance_brute
from scopevoice.replay import run_script
from scopevoice.router import DeterministicBackend, IntentRouter, OutcomeKind, parse_response
from scopevoice.scene import ControlAction, CtScroll, control, initial_state, state_hash

import jsonschema


def report(name: str, passed: bool, detail: str = "") -> None:
    mark = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{mark}] {name}{suffix}")
    assert passed, f"{name}{suffix}"


# -- criterion 1: grammar corpus ------------------------------------------------

def test_grammar_corpus_complete_and_fast(case_a, registry_a):
    lexicon = build_lexicon(case_a)
    blank = initial_state(case_a)
    with_ct, _ = control(blank, ControlAction.TOGGLE_CT)
    checked = 0
    start = time.perf_counter()
    for entry in lexicon.entries:
        for suffix, mode in (("", "toggle"), (" on", "on"), (" off", "off")):
            utterance = entry.phrase + suffix
            parse = parse_utterance(lexicon, utterance)
            assert parse is not None, utterance
            assert parse.binding == entry.binding, utterance
            if entry.binding.allows_onoff:
                assert parse.mode == mode, utterance
            else:
                assert parse.mode == "n/a", utterance
            if suffix:
                continue  # execute each phrase once, from its bare form
            call = parse.to_call()
            binding = entry.binding
            if binding.kind is BindingKind.SEGMENT:
                new_state, _ = registry_a.execute(blank, [call])
                assert new_state.visible[binding.target] is True, utterance
            elif binding.kind is BindingKind.GROUP:
                new_state, _ = registry_a.execute(blank, [call])
                members = {sid for sid, cat in blank.categories.items()
                           if cat.value == binding.target}
                assert new_state.visible_ids() == members, utterance
            else:
                base = with_ct if binding.target.startswith("scroll") else blank
                new_state, effects = registry_a.execute(base, [call])
                action = ControlAction(binding.target)
                if action is ControlAction.FREEZE:
                    assert new_state.frozen and not new_state.marker_tracking
                elif action is ControlAction.MARKER_TRACKING:
                    assert new_state.marker_tracking and not new_state.frozen
                elif action is ControlAction.SCROLL_UP:
                    assert new_state.ct_scroll is CtScroll.UP
                elif action is ControlAction.SCROLL_DOWN:
                    assert new_state.ct_scroll is CtScroll.DOWN
                elif action is ControlAction.SCROLL_STOP:
                    assert new_state.ct_scroll is CtScroll.IDLE
                elif action is ControlAction.TOGGLE_CT:
                    assert new_state.ct_panel_open != base.ct_panel_open
                elif action is ControlAction.TOGGLE_PATIENT_INFO:
                    assert new_state.patient_panel_open != base.patient_panel_open
                else:
                    assert effects and effects[0].kind.value in (
                        "CaptureRequested", "PoseReset")
            checked += 1
    elapsed = time.perf_counter() - start
    # sanity: the table's marquee synonym groups are present
    for phrase in ("tumor", "lesion", "cancer", "hepatic artery", "liver artery"):
        assert parse_utterance(lexicon, phrase) is not None, phrase
    report("grammar corpus: parse+execute for every lexicon phrase",
           checked == len(lexicon.entries) and elapsed < 1.0,
           f"{checked} phrases in {elapsed * 1000:.0f} ms")


# -- criterion 2: task fixtures ---------------------------------------------------

@pytest.mark.parametrize("mode", ["grammar", "llm"])
def test_task_fixtures_six_of_six(mode, case_a_path, scripts_dir, tmp_path):
    results = []
    for script in (f"tasks_1_to_4.{mode}.jsonl", f"tasks_5_6.{mode}.jsonl"):
        rep = run_script(scripts_dir / script, case_a_path, mode, data_dir=tmp_path)
        results.extend(rep.results)
    passed = sum(1 for r in results if r.passed)
    report(f"task fixtures ({mode} mode): Tasks 1-6 end with the named sets",
           passed == 6 and len(results) == 6, f"{passed}/6")


# -- criterion 3: geometry oracle equivalence -------------------------------------

def test_geometry_accelerated_equals_oracle(case_a, case_b, matrix_a, matrix_b):
    worst = 0.0
    for case, fast in ((case_a, matrix_a), (case_b, matrix_b)):
        oracle = distance_matrix(case, method="brute")
        scale = np.maximum(np.abs(oracle.d), 1e-30)
        rel = np.abs(fast.d - oracle.d) / scale
        rel[oracle.d == 0.0] = np.abs(fast.d[oracle.d == 0.0])
        worst = max(worst, float(rel.max()))
    rng = np.random.default_rng(424242)
    for _ in range(100):
        a = random_soup(rng, int(rng.integers(1, 201)), (0, 0, 0), 1.0)
        b = random_soup(rng, int(rng.integers(1, 201)),
                        tuple(rng.uniform(-5, 5, size=3)), 1.0)
        fast = min_distance(a, b)
        slow = min_distance_brute(a, b)
        if slow > 0:
            worst = max(worst, abs(fast - slow) / slow)
        else:
            worst = max(worst, abs(fast))
    report("geometry: accelerated equals O(T^2) oracle on fixtures + 100 random pairs",
           worst <= 1e-9, f"worst relative error {worst:.2e}")


def test_geometry_accelerated_is_faster_on_20k_pair():
    # clouds kept disjoint so the accelerated path does real pruning work
    # rather than terminating on an intersection
    rng = np.random.default_rng(7)
    a = random_soup(rng, 10_000, (0, 0, 0), 2.0)
    b = random_soup(rng, 10_000, (40.0, 2.0, -1.0), 2.0)
    t0 = time.perf_counter()
    fast = min_distance(a, b)
    t_fast = time.perf_counter() - t0
    t0 = time.perf_counter()
    slow = min_distance_brute(a, b)
    t_slow = time.perf_counter() - t0
    agree = abs(fast - slow) <= 1e-9 * max(slow, 1e-30)
    report("geometry: accelerated beats the oracle on a 20k-triangle pair",
           agree and fast > 0 and t_fast < t_slow,
           f"bvh {t_fast:.2f}s vs brute {t_slow:.1f}s, d={fast:.3f}mm")


# -- criterion 4: dictation timing -------------------------------------------------

def _drive(profile, events):
    machine = new_machine(profile)
    out = []
    for event in events:
        machine, emitted = on_event(machine, event)
        out.extend(emitted)
    return [e for e in out if isinstance(e, (QueryReady, QueryEmpty))]


def test_dictation_timing_exact_and_bounded():
    # speech ends inside the window: emit exactly at t=10
    t1 = _drive(STUDY_PROFILE, [Activation(0.0), Fragment(3.0, "show tumor"), Tick(20.0)])
    ok1 = t1 == [QueryReady(at=10.0, text="show tumor")]
    # speech crosses the window: emit exactly at last_fragment + 2.0
    frags = [Fragment(float(t), f"w{t}") for t in range(3, 12)]
    t2 = _drive(STUDY_PROFILE, [Activation(0.0), *frags, Tick(20.0)])
    ok2 = len(t2) == 1 and t2[0].at == 13.0
    # refined: emit exactly at last_fragment + 1.5
    t3 = _drive(REFINED_PROFILE, [Activation(0.0), Fragment(2.0, "a"),
                                  Fragment(3.0, "b"), Tick(20.0)])
    ok3 = t3 == [QueryReady(at=4.5, text="a b")]

    rng = random.Random(20240809)
    bound_ok = True
    for _ in range(1000):
        profile = STUDY_PROFILE if rng.random() < 0.5 else REFINED_PROFILE
        frag_times = sorted(round(rng.uniform(0.05, 14.0), 3)
                            for _ in range(rng.randint(0, 6)))
        events = [Activation(0.0)]
        events += [Fragment(t, f"f{i}") for i, t in enumerate(frag_times)]
        events.append(Tick(40.0))
        terminal = _drive(profile, events)
        if len(terminal) != 1:
            bound_ok = False
            break
        at = terminal[0].at
        if isinstance(terminal[0], QueryReady):
            accepted = [t for t in frag_times if t <= at]
            lower = max(profile.min_listen_s, accepted[-1] + profile.silence_tail_s)
        else:
            lower = profile.min_listen_s
        if at < lower - 1e-9:
            bound_ok = False
            break
    report("dictation timing: exact emission instants + lower bound over 1000 schedules",
           ok1 and ok2 and ok3 and bound_ok)


# -- criterion 5: anti-drift and reset ---------------------------------------------

def test_anti_drift_and_correction(case_a, matrix_a):
    registry = standard_registry(case_a)
    store = open_example_store(case_a.case_id)
    router = IntentRouter(DeterministicBackend(), registry, case_a, matrix_a, store)
    session = router.start_session()
    for _ in range(5):
        outcome = router.submit_query(session, "portal vein")
        assert outcome.kind is OutcomeKind.EXECUTED
    drift_ok = session.reinjection_count() == 5

    correction = ("show the venous confluence",
                  [FunctionCall("set_visibility", ("splenic_vein", "on"))])
    fresh = router.handle_reset(session, correction)
    last = fresh.doc.examples[-1]
    stored_ok = (last.sentence == "show the venous confluence"
                 and last.result == "set_visibility(splenic_vein, on)")
    outcome = router.submit_query(fresh, "show the venous confluence")
    end_to_end_ok = (outcome.kind is OutcomeKind.EXECUTED
                     and [c.render() for c in outcome.calls]
                     == ["set_visibility(splenic_vein, on)"])
    report("anti-drift + reset: 5 re-injections after 5 turns; correction is the "
           "final example and resolves end-to-end",
           drift_ok and stored_ok and end_to_end_ok)


# -- criterion 6: safety gate -------------------------------------------------------

def test_safety_gate_fuzzed_responses(case_a, registry_a):
    rng = random.Random(0xC0FFEE)
    alphabet = string.ascii_letters + string.digits + "(),\"'_ \n\t-[]{}"
    seeded_valid = ["control(freeze)", "set_visibility(tumor, on)",
                    "prose around set_group_visibility(vein, off) and after"]
    state = initial_state(case_a)
    baseline = state_hash(state)
    executed_names: set[str] = set()
    retries = 0
    for i in range(10_000):
        if i % 500 == 0:
            blob = seeded_valid[(i // 500) % len(seeded_valid)]
        else:
            blob = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 100)))
        try:
            calls = parse_response(blob)
        except FormatError:
            retries += 1
            continue
        reasons = [r for r in (registry_a.validate_call(c) for c in calls) if r]
        if reasons or any(c.name == "reset_chat" for c in calls):
            retries += 1  # router would surface Retry / divert the reset
            continue
        try:
            _, _ = registry_a.execute(state, calls)
            executed_names.update(c.name for c in calls)
        except RejectedBatch:
            retries += 1
    unknown = {name for name in executed_names if name not in registry_a}
    mutation_free = state_hash(state) == baseline
    report("safety gate: 10k fuzzed replies, no unregistered execution, no mutation on Retry",
           not unknown and mutation_free,
           f"{retries} rejected, {len(executed_names)} registered names executed")


# -- criterion 7: prompt format -----------------------------------------------------

def test_prompt_schema_roundtrip_golden(case_a, matrix_a, registry_a, golden_dir):
    store = open_example_store(case_a.case_id)
    doc = build_initial_prompt(case_a, matrix_a, registry_a, store)
    wire = doc.to_wire()
    jsonschema.validate(wire, PROMPT_SCHEMA)
    text = render_json(doc)
    round_trip_ok = parse_prompt_json(text) == doc
    golden = (golden_dir / "prompt_case_a.json").read_bytes()
    golden_ok = text.encode() == golden
    report("prompt format: schema-valid, round-trips, matches golden byte-for-byte",
           round_trip_ok and golden_ok)
