"""Acceptance gate: one test per release criterion, one PASS line each."""

import json
import random
import time
from pathlib import Path

from oracles import euclidean, random_occlusion_configs
from scenegen import random_composite_call, random_scene_doc

from supportbot import actions as act
from supportbot import evalsuite as ev
from supportbot import scene as sc
from supportbot import tools
from supportbot.agent import (
    AgentConfig,
    AgentEvent,
    InteractionTrace,
    Session,
    build_prompt,
)
from supportbot.backends import ScriptedBackend

DATA = Path(__file__).parent / "data"


def report(number, detail):
    print(f"criterion {number}: PASS - {detail}")


# ---------------------------------------------------------------------------
# 1. suite cardinality


def test_criterion_01_suite_cardinality():
    started = time.perf_counter()
    suite = ev.generate_isolated_suite()
    elapsed = time.perf_counter() - started
    assert len(suite) == 300
    per_condition = {}
    for case in suite:
        per_condition[case.condition] = per_condition.get(case.condition, 0) + 1
    assert per_condition == {c: 75 for c in ev.CONDITIONS}
    repeats = 5
    assert len(suite) * repeats == 1500
    assert all(count * repeats == 375 for count in per_condition.values())
    assert elapsed < 1.0
    report(1, f"300 cases, 1500 runs at repeats=5, 375 per condition, "
              f"generated in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 2. oracle consistency


def test_criterion_02_oracle_consistency():
    started = time.perf_counter()
    isolated = ev.run_suite(
        ev.generate_isolated_suite(), AgentConfig(), repeats=5, parallelism=8
    )
    assert len(isolated.records) == 1500
    bad = [r for r in isolated.records if r.verdict.category != "successful_support"]
    assert bad == []
    counts = isolated.counts()
    assert all(
        counts[(condition, "successful_support")] == 375
        for condition in ev.CONDITIONS
    )
    situated = ev.run_suite(ev.generate_situated_scenario(), AgentConfig(), repeats=20)
    assert len(situated.records) == 100
    assert all(r.verdict.category == "successful_support" for r in situated.records)
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    report(2, f"1500/1500 isolated and 100/100 situated step-outcomes "
              f"successful_support in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. geometry oracle equivalence


def occlusion_scene(a, b, lo, hi):
    center = [(lo[i] + hi[i]) / 2 for i in range(3)]
    half = [(hi[i] - lo[i]) / 2 for i in range(3)]
    return sc.load_scene({
        "objects": [
            {"id": "the_target", "center": list(b),
             "half_extents": [0.001, 0.001, 0.001], "affordances": ["graspable"]},
            {"id": "the_blocker", "center": center, "half_extents": half,
             "affordances": ["occluder"]},
        ],
        "persons": [{"id": "Felix", "eye": list(a), "gaze": [1.0, 0.0, 0.0],
                     "reach_origin": list(a), "reach_radius": 1.0}],
        "robot": {"id": "the_robot", "reach_origin": [0.0, 0.0, 0.4],
                  "reach_radius": 1.0},
    })


def test_criterion_03_geometry_matches_sampling_oracle():
    mismatches = 0
    count = 0
    for a, b, lo, hi, expected_hit in random_occlusion_configs(seed=301, count=1000):
        scene = occlusion_scene(a, b, lo, hi)
        visible = sc.is_visible(scene, "Felix", "the_target")
        if visible != (not expected_hit):
            mismatches += 1
        count += 1
    assert count == 1000
    assert mismatches == 0

    rng = random.Random(302)
    reach_checks = 0
    while reach_checks < 1000:
        doc = random_scene_doc(rng)
        scene = sc.load_scene(doc)
        for agent_id, origin, radius in (
            ("Felix", (-0.85, 0.0, 0.25), 0.8),
            ("Daniel", (0.85, 0.0, 0.25), 0.8),
            ("the_robot", (0.0, 0.0, 0.4), 1.0),
        ):
            for entry in doc["objects"]:
                expected = euclidean(origin, entry["center"]) <= radius
                assert sc.is_reachable(scene, agent_id, entry["id"]) == expected
                reach_checks += 1
    report(3, f"0/1000 occlusion mismatches vs 10,000-point sampling oracle; "
              f"{reach_checks} reachability checks match direct distance")


# ---------------------------------------------------------------------------
# 4. prompt fidelity


def test_criterion_04_prompt_fidelity():
    full = build_prompt("full_rules")
    assert full == (DATA / "full_rules.txt").read_text(encoding="utf-8")
    marker = "IMPORTANT: Obey the following rules:"
    assert build_prompt("no_rules") == full[: full.index(marker)]
    relaxed = build_prompt("relaxed_rules")
    assert relaxed == (DATA / "relaxed_rules.txt").read_text(encoding="utf-8")
    leaked = [schema.name for schema in tools.registry() if schema.name in relaxed]
    assert leaked == []
    report(4, "full byte-identical, no_rules is the exact truncation, "
              "relaxed mentions zero tool names")


# ---------------------------------------------------------------------------
# 5. classifier fixtures


def ev_query(name, result="", **arguments):
    return AgentEvent("tool", call={"call_id": "c", "name": name,
                                    "arguments": arguments}, result=result)


def ev_action(name, ok=True, **arguments):
    return AgentEvent("tool", call={"call_id": "c", "name": name,
                                    "arguments": arguments},
                      result="done", is_action=True, action_succeeded=ok,
                      mutated=ok)


def ev_speak(text):
    return AgentEvent("speak", call={"call_id": "c", "name": "speak",
                                     "arguments": {"person_name": "All", "text": text}},
                      result=f"You said to All: {text}", person="All", text=text)


def ev_stop():
    return AgentEvent("stop", call={"call_id": "c", "name": "stop", "arguments": {}})


def trace_of(events, termination="stopped"):
    return InteractionTrace("Felix said to Daniel: Please hand me the_red_glass.",
                            list(events), termination, max(1, len(events)))


def test_criterion_05_classifier_fixture_battery():
    help_felix = ev.ExpectedBehavior(
        should_help=True, beneficiary="Felix",
        deliverable=ev.Deliverable(kind="object", object_id="the_red_glass"))
    no_help = ev.ExpectedBehavior(should_help=False)
    correction = ev.ExpectedBehavior(should_help=True, beneficiary="Felix",
                                     speak_substrings=("cola_zero",))
    plain = sc.load_fixture("softdrink")
    delivered = sc.load_fixture("softdrink")
    delivered.attach("Felix", "the_red_glass")
    to_daniel = sc.load_fixture("softdrink")
    to_daniel.attach("Daniel", "the_red_glass")
    check = ev_query("check_hindering_reasons", result="Daniel cannot reach it.")
    handover = ev_action("hand_object_over_to_person",
                         object_name="the_red_glass", person_name="Felix")
    fixtures = [
        ("non-intervention", trace_of([check, ev_stop()]), no_help,
         None, None, "successful_support"),
        ("speak then delivery", trace_of([check, ev_speak("I will help Felix."),
                                          handover, ev_stop()]),
         help_felix, plain, delivered, "successful_support"),
        ("speak-only correction", trace_of([ev_speak("You also have cola_zero."),
                                            ev_stop()]),
         correction, None, None, "successful_support"),
        ("a-posteriori speak", trace_of([handover, ev_speak("done it"), ev_stop()]),
         help_felix, plain, delivered, "partial_support"),
        ("wrong beneficiary", trace_of([check, ev_speak("helping"),
                                        ev_action("hand_object_over_to_person",
                                                  object_name="the_red_glass",
                                                  person_name="Daniel"),
                                        ev_stop()]),
         help_felix, plain, to_daniel, "partial_support"),
        ("unsatisfied deliverable", trace_of([ev_speak("moving the fanta"),
                                              ev_action("move_object_to_person",
                                                        object_name="the_bottle_of_cola",
                                                        person_name="Felix"),
                                              ev_stop()]),
         ev.ExpectedBehavior(should_help=True, beneficiary="Felix",
                             deliverable=ev.Deliverable(kind="object",
                                                        object_id="the_bottle_of_fanta")),
         plain, plain, "partial_support"),
        ("round limit while acting",
         trace_of([ev_speak("trying"), ev_action("pour_into", ok=False)] * 5,
                  termination="round_limit"),
         help_felix, None, None, "execution_error"),
        ("every action failed", trace_of([ev_speak("trying"),
                                          ev_action("pour_into", ok=False),
                                          ev_action("move_object_to_person", ok=False),
                                          ev_stop()]),
         help_felix, None, None, "execution_error"),
        ("backend transport failure",
         trace_of([AgentEvent("backend_error", text="boom")],
                  termination="backend_error"),
         help_felix, None, None, "execution_error"),
        ("unobtrusive but spoke", trace_of([ev_speak("hello!"), ev_stop()]),
         no_help, None, None, "undesired_behavior"),
        ("unobtrusive but acted", trace_of([handover, ev_stop()]),
         no_help, None, None, "undesired_behavior"),
        ("expected help never came", trace_of([check, ev_stop()]),
         help_felix, None, None, "undesired_behavior"),
    ]
    assert len(fixtures) >= 12
    per_verdict = {}
    for name, trace, expected, before, after, wanted in fixtures:
        verdict = ev.classify(trace, expected, before, after)
        assert verdict.category == wanted, (name, verdict)
        per_verdict[wanted] = per_verdict.get(wanted, 0) + 1
    assert all(per_verdict[v] >= 3 for v in ev.VERDICT_CATEGORIES)
    report(5, f"{len(fixtures)} fixture traces, "
              f"{per_verdict} all classified as designated")


# ---------------------------------------------------------------------------
# 6. scripted end-to-end replay


def test_criterion_06_scripted_pour_and_delivery_replay():
    rounds = [
        {"content": None, "tool_calls": [{
            "name": "check_hindering_reasons",
            "arguments": {"person_name": "Felix",
                          "object_name": "the_bottle_of_cola_zero"}}]},
        {"content": None, "tool_calls": [{
            "name": "speak",
            "arguments": {"person_name": "All",
                          "text": "Daniel wants a sugar-free cola, I will pour "
                                  "cola zero into a fresh glass."}}]},
        {"content": None, "tool_calls": [{
            "name": "pour_into",
            "arguments": {"source_container_name": "the_bottle_of_cola_zero",
                          "target_container_name": "the_blue_glass"}}]},
        {"content": None, "tool_calls": [{
            "name": "move_object_to_person",
            "arguments": {"object_name": "the_blue_glass",
                          "person_name": "Daniel"}}]},
        {"content": None, "tool_calls": [{"name": "stop", "arguments": {}}]},
    ]
    scene = sc.load_fixture("softdrink")
    scene_before = scene.copy()
    config = AgentConfig(backend="scripted")
    session = Session(scene, ScriptedBackend([rounds]), config)
    trace = session.submit("Daniel", "Felix",
                           "Could you give me the same, but without sugar?")
    actions_taken = [e for e in trace.events if e.kind == "tool" and e.is_action]
    assert len(actions_taken) == 2
    assert all(e.action_succeeded for e in actions_taken)
    assert trace.termination == "stopped"
    glass = scene.objects["the_blue_glass"]
    assert glass.fill_contents == "cola_zero"
    assert sc.is_reachable(scene, "Daniel", "the_blue_glass")
    expected = ev.generate_situated_scenario()[4].expected
    verdict = ev.classify(trace, expected, scene_before, scene)
    assert verdict.category == "successful_support"
    report(6, "check/speak/pour/move/stop replay executed cleanly; cola_zero "
              "in the blue glass within Daniel's reach; successful_support")


# ---------------------------------------------------------------------------
# 7. determinism


def test_criterion_07_byte_identical_reports_and_transcripts(tmp_path):
    outputs = []
    for run, parallelism in (("serial", 1), ("parallel-a", 4), ("parallel-b", 4)):
        directory = tmp_path / run
        reportobj = ev.run_suite(
            ev.generate_isolated_suite(), AgentConfig(), repeats=1,
            parallelism=parallelism, transcript_dir=directory,
        )
        csv_text = ev.emit_report(reportobj, "csv")
        transcripts = {
            path.relative_to(directory): path.read_bytes()
            for path in sorted(directory.rglob("*.trace"))
        }
        assert len(transcripts) == 300
        outputs.append((csv_text, transcripts))
    assert outputs[0] == outputs[1] == outputs[2]
    report(7, "three full-suite runs (parallelism 1, 4, 4) produced "
              "byte-identical CSVs and 300 byte-identical transcripts")


# ---------------------------------------------------------------------------
# 8. atomicity and feasibility properties


def test_criterion_08_randomized_action_properties():
    rng = random.Random(801)
    scenes = 0
    executed = 0
    pours = 0
    stale_failures = 0
    while scenes < 500 or pours < 20:
        assert scenes < 5000, "pourable configurations too rare"
        doc = random_scene_doc(rng)
        graph = sc.load_scene(doc)
        composite, args = random_composite_call(rng, doc)
        scenes += 1
        result = act.plan(graph, composite, args)
        if not result.ok:
            assert result.reasons
            continue
        for variation in result.variations:
            trial = graph.copy()
            outcome = act.execute(trial, variation)
            assert outcome.success, (composite, args)
            executed += 1
            if composite == "pour_into":
                source = graph.objects[args["source_container_name"]]
                target_after = trial.objects[args["target_container_name"]]
                source_after = trial.objects[args["source_container_name"]]
                assert target_after.fill_contents == source.fill_contents
                assert source_after.fill_contents is None
                assert list(target_after.fill_history) == (
                    list(graph.objects[args["target_container_name"]].fill_history)
                    + [source.fill_contents]
                )
                pours += 1
            # replaying the same variation is stale now: must fail untouched
            snapshot = trial.to_dict()
            stale = act.execute(trial, variation)
            assert not stale.success
            assert trial.to_dict() == snapshot
            stale_failures += 1
    assert scenes >= 500
    assert executed >= 200
    assert pours >= 20
    report(8, f"{scenes} scenes: {executed} variations executed on unchanged "
              f"scenes, {stale_failures} failed executes mutated nothing, "
              f"{pours} pours conserved contents")


# ---------------------------------------------------------------------------
# 9. tool table fidelity


def test_criterion_09_tool_table_fidelity():
    table = json.loads((DATA / "tool_table.json").read_text(encoding="utf-8"))
    live = [
        {
            "name": schema.name,
            "description": schema.description,
            "parameters": [
                {"name": p.name, "description": p.description, "semantic": p.semantic}
                for p in schema.parameters
            ],
        }
        for schema in tools.registry()
    ]
    assert json.dumps({"tools": live}, sort_keys=True) == json.dumps(table, sort_keys=True)
    wire = tools.serialize_schemas(tools.registry())
    assert tools.deserialize_schemas(wire) == tools.registry()
    report(9, "registry matches the checked-in table byte-for-byte; "
              "wire schemas round-trip losslessly")
