"""Isolated and situated evaluation suites, verdict classification, reports.

The isolated suite crosses three scenarios, five object distributions, five
request templates, and four interference conditions into 300 test cases;
the situated suite is one five-step scripted conversation over the
softdrink scene.  Traces are classified into four verdict categories by an
explicit first-match decision procedure, and aggregated reports are
deterministic for deterministic backends regardless of parallelism.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import scene as scenemod
from .agent import (
    AgentConfig,
    AgentEvent,
    InteractionTrace,
    Session,
    TERMINATION_BACKEND_ERROR,
    TERMINATION_ROUND_LIMIT,
)
from .backends import make_backend
from .geometry import Vec3
from .scene import SceneGraph, fixture_path, load_scene

SCENARIOS = ("softdrink", "coffee", "dinner")
CONDITIONS = ("visibility", "reachability", "busyness", "unobtrusive")
VERDICT_CATEGORIES = (
    "successful_support",
    "partial_support",
    "execution_error",
    "undesired_behavior",
)

SENDER = "Felix"
RECEIVER = "Daniel"

# Kit order fixes which object distribution d places at the request slot.
SCENARIO_OBJECTS = {
    "softdrink": (
        "the_bottle_of_cola",
        "the_bottle_of_cola_zero",
        "the_bottle_of_fanta",
        "the_red_glass",
        "the_blue_glass",
    ),
    "coffee": (
        "the_coffee_pot",
        "the_bottle_of_milk",
        "the_bottle_of_oat_milk",
        "the_large_cup",
        "the_small_cup",
    ),
    "dinner": (
        "the_bottle_of_wine",
        "the_bottle_of_beer",
        "the_bottle_of_soda",
        "the_wine_glass",
        "the_large_glass",
    ),
}

TEMPLATES = (
    "{receiver}, could you hand me {object}?",
    "Could you hand me {object}?",
    "Please hand me {object}.",
    "Could you pass me {object}?",
    "Give me {object}.",
)

BOX_ID = "the_box"
PHONE_ID = "the_smartphone"

# Reachability condition parks the target here: outside the receiver's
# reach, inside the robot's, in clear sight.
_OUT_OF_REACH_X = -0.15

DELIVERY_TOOLS = ("move_object_to_person", "hand_object_over_to_person")


class SuiteError(Exception):
    """Suite generation failed to realize a case's condition."""


# ---------------------------------------------------------------------------
# expected behavior and cases


@dataclass(frozen=True)
class Deliverable:
    """What must end up where for full support."""

    kind: str  # "object" | "substance"
    object_id: str = ""
    substance: str = ""
    fresh_container: bool = False

    def __post_init__(self):
        if self.kind not in ("object", "substance"):
            raise ValueError(f"unknown deliverable kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "object_id": self.object_id,
            "substance": self.substance,
            "fresh_container": self.fresh_container,
        }


@dataclass(frozen=True)
class ExpectedBehavior:
    should_help: bool
    beneficiary: str = ""
    deliverable: Deliverable | None = None
    speak_substrings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.should_help and self.deliverable is not None:
            raise ValueError("no deliverable allowed when no help is expected")

    def to_dict(self) -> dict:
        return {
            "should_help": self.should_help,
            "beneficiary": self.beneficiary,
            "deliverable": self.deliverable.to_dict() if self.deliverable else None,
            "speak_substrings": list(self.speak_substrings),
        }


@dataclass(frozen=True)
class TestCase:
    scenario: str
    distribution_index: int  # 1..5
    template_index: int  # 1..5
    condition: str
    target_object: str
    sender: str
    receiver: str
    expected: ExpectedBehavior

    @property
    def case_id(self) -> str:
        return (
            f"{self.scenario}-d{self.distribution_index}"
            f"-t{self.template_index}-{self.condition}"
        )

    def utterance_text(self) -> str:
        return render_template(self.template_index, self.receiver, self.target_object)


@dataclass(frozen=True)
class SituatedStep:
    index: int  # 1..5
    speaker: str
    listener: str
    text: str
    expected: ExpectedBehavior
    setup: str = ""  # "" or "attach_smartphone"

    @property
    def case_id(self) -> str:
        return f"situated-s{self.index}"


@dataclass(frozen=True)
class Verdict:
    category: str
    rationale: str

    def __post_init__(self):
        if self.category not in VERDICT_CATEGORIES:
            raise ValueError(f"unknown verdict category {self.category!r}")

    def to_dict(self) -> dict:
        return {"category": self.category, "rationale": self.rationale}


def render_template(index: int, receiver: str, object_id: str) -> str:
    spoken_name = object_id.replace("_", " ")
    return TEMPLATES[index - 1].format(receiver=receiver, object=spoken_name)


# ---------------------------------------------------------------------------
# isolated suite generation


def _distribution_scene(scenario: str, distribution_index: int) -> SceneGraph:
    path = fixture_path(f"isolated/{scenario}_d{distribution_index}")
    return load_scene(path)


def _apply_condition(scene: SceneGraph, case: TestCase) -> None:
    target = scene.object(case.target_object)
    if case.condition == "visibility":
        eye = scene.person(case.receiver).eye_position
        blocker = Vec3(
            (eye.x + target.volume.center.x) / 2.0,
            0.0,
            scene.object(BOX_ID).volume.half_extents.z,
        )
        scene.move_object(BOX_ID, blocker)
    elif case.condition == "reachability":
        scene.move_object(
            case.target_object,
            Vec3(_OUT_OF_REACH_X, 0.0, target.volume.half_extents.z),
        )
    elif case.condition == "busyness":
        scene.attach(case.receiver, PHONE_ID)
    elif case.condition != "unobtrusive":
        raise ValueError(f"unknown condition {case.condition!r}")


_INTENDED_REASONS = {
    "visibility": frozenset({scenemod.CANNOT_SEE}),
    "reachability": frozenset({scenemod.CANNOT_REACH}),
    "busyness": frozenset({scenemod.BUSY}),
    "unobtrusive": frozenset(),
}


def _verify_case(scene: SceneGraph, case: TestCase) -> None:
    reasons = scenemod.hindering_reasons(scene, case.receiver, case.target_object)
    intended = _INTENDED_REASONS[case.condition]
    if reasons != intended:
        raise SuiteError(
            f"{case.case_id}: expected hindrance {sorted(intended)}, got {sorted(reasons)}"
        )
    if not scenemod.is_reachable(scene, scenemod.ROBOT_ID, case.target_object):
        raise SuiteError(f"{case.case_id}: target out of the robot's reach")


def build_case_scene(case: TestCase) -> SceneGraph:
    scene = _distribution_scene(case.scenario, case.distribution_index)
    _apply_condition(scene, case)
    return scene


def generate_isolated_suite(verify: bool = True) -> list[TestCase]:
    cases = []
    for scenario in SCENARIOS:
        for distribution_index in range(1, 6):
            target = SCENARIO_OBJECTS[scenario][distribution_index - 1]
            for template_index in range(1, 6):
                for condition in CONDITIONS:
                    if condition == "unobtrusive":
                        expected = ExpectedBehavior(should_help=False)
                    else:
                        expected = ExpectedBehavior(
                            should_help=True,
                            beneficiary=SENDER,
                            deliverable=Deliverable(kind="object", object_id=target),
                        )
                    case = TestCase(
                        scenario=scenario,
                        distribution_index=distribution_index,
                        template_index=template_index,
                        condition=condition,
                        target_object=target,
                        sender=SENDER,
                        receiver=RECEIVER,
                        expected=expected,
                    )
                    if verify:
                        _verify_case(build_case_scene(case), case)
                    cases.append(case)
    return cases


# ---------------------------------------------------------------------------
# situated scenario


def generate_situated_scenario() -> list[SituatedStep]:
    return [
        SituatedStep(
            index=1,
            speaker="Felix",
            listener="Daniel",
            text="Daniel, what soft drinks do we have?",
            expected=ExpectedBehavior(should_help=False),
        ),
        SituatedStep(
            index=2,
            speaker="Daniel",
            listener="Felix",
            text="We have cola and fanta.",
            expected=ExpectedBehavior(
                should_help=True,
                beneficiary="Felix",
                speak_substrings=("cola_zero",),
            ),
        ),
        SituatedStep(
            index=3,
            speaker="Felix",
            listener="Daniel",
            text="Daniel, could you hand me the red glass?",
            expected=ExpectedBehavior(
                should_help=True,
                beneficiary="Felix",
                deliverable=Deliverable(kind="object", object_id="the_red_glass"),
            ),
        ),
        SituatedStep(
            index=4,
            speaker="Felix",
            listener="Daniel",
            text="Could you pour me some cola?",
            expected=ExpectedBehavior(
                should_help=True,
                beneficiary="Felix",
                deliverable=Deliverable(kind="substance", substance="cola"),
            ),
            setup="attach_smartphone",
        ),
        SituatedStep(
            index=5,
            speaker="Daniel",
            listener="Felix",
            text="Could you give me the same, but without sugar?",
            expected=ExpectedBehavior(
                should_help=True,
                beneficiary="Daniel",
                deliverable=Deliverable(
                    kind="substance", substance="cola_zero", fresh_container=True
                ),
            ),
        ),
    ]


def _apply_step_setup(scene: SceneGraph, step: SituatedStep) -> None:
    if step.setup == "attach_smartphone":
        scene.attach(step.listener, PHONE_ID)
    elif step.setup:
        raise ValueError(f"unknown step setup {step.setup!r}")


# ---------------------------------------------------------------------------
# classification


def _deliverable_satisfied(
    expected: ExpectedBehavior,
    scene_before: SceneGraph,
    scene_after: SceneGraph,
) -> tuple[bool, str]:
    spec = expected.deliverable
    person = expected.beneficiary
    if spec.kind == "object":
        obj = scene_after.objects.get(spec.object_id)
        if obj is None:
            return False, f"{spec.object_id} is gone from the scene"
        if obj.held_by == person or scenemod.is_reachable(
            scene_after, person, spec.object_id
        ):
            return True, ""
        return False, f"{spec.object_id} did not end up with {person}"
    # substance: a container filled during the interaction must end up within
    # the beneficiary's reach; pre-filled sources (the bottles) do not count
    for object_id in sorted(scene_after.objects):
        obj = scene_after.objects[object_id]
        if obj.fill_contents != spec.substance:
            continue
        before = scene_before.objects.get(object_id)
        if before is None or before.fill_contents == spec.substance:
            continue
        if spec.fresh_container and before.fill_history:
            continue
        if obj.held_by == person or scenemod.is_reachable(scene_after, person, object_id):
            return True, ""
    detail = f"no container of {spec.substance} within reach of {person}"
    if spec.fresh_container:
        detail = f"no fresh container of {spec.substance} within reach of {person}"
    return False, detail


def classify(
    trace: InteractionTrace,
    expected: ExpectedBehavior,
    scene_before: SceneGraph | None = None,
    scene_after: SceneGraph | None = None,
) -> Verdict:
    """First-match decision procedure over a terminated trace.

    Queries never count as acting; speak calls and the three physical
    composites do.  Order: wrong intervention decision, then execution
    failures, then partial-support defects, then success.
    """
    if trace.termination == TERMINATION_BACKEND_ERROR:
        detail = next(
            (e.text for e in trace.events if e.kind == "backend_error"), ""
        )
        return Verdict("execution_error", f"backend transport failure: {detail}")

    speaks = [e for e in trace.events if e.kind == "speak"]
    attempts = [e for e in trace.events if e.kind == "tool" and e.is_action]

    if not expected.should_help:
        if speaks or attempts:
            return Verdict(
                "undesired_behavior", "intervened although no help was expected"
            )
        return Verdict("successful_support", "correct non-intervention")

    if not speaks and not attempts:
        return Verdict(
            "undesired_behavior", "did not intervene although help was expected"
        )

    if attempts and trace.termination == TERMINATION_ROUND_LIMIT:
        return Verdict("execution_error", "hit the round limit while acting")
    if attempts and all(e.action_succeeded is False for e in attempts):
        return Verdict("execution_error", "every physical action failed")

    if attempts:
        first_action = min(
            i for i, e in enumerate(trace.events) if e.kind == "tool" and e.is_action
        )
        spoke_before = any(
            e.kind == "speak" for e in trace.events[:first_action]
        )
        if not spoke_before:
            return Verdict(
                "partial_support", "no explanation before the first physical action"
            )
        for event in attempts:
            if not event.action_succeeded:
                continue
            if event.call["name"] not in DELIVERY_TOOLS:
                continue
            person = event.call["arguments"].get("person_name", "")
            if person and person != expected.beneficiary:
                return Verdict(
                    "partial_support",
                    f"delivered to {person} instead of {expected.beneficiary}",
                )

    if expected.speak_substrings:
        mentioned = any(
            substring in (e.text or "")
            for e in speaks
            for substring in expected.speak_substrings
        )
        if not mentioned:
            return Verdict(
                "partial_support", "explanation missing the expected fact"
            )

    if expected.deliverable is not None:
        if scene_before is None or scene_after is None:
            raise ValueError("deliverable checks need scene_before and scene_after")
        satisfied, why = _deliverable_satisfied(expected, scene_before, scene_after)
        if not satisfied:
            return Verdict("partial_support", why)

    return Verdict("successful_support", "helped as expected")


# ---------------------------------------------------------------------------
# runs and reports


@dataclass
class RunRecord:
    case_id: str
    repeat: int
    stratum: str  # condition name or "step-N"
    utterance: str
    verdict: Verdict
    termination: str
    trace: InteractionTrace
    scene_before: dict
    scene_after: dict

    def sort_key(self):
        return (self.case_id, self.repeat)


@dataclass
class RunReport:
    variant: str
    kind: str  # "isolated" | "situated"
    records: list[RunRecord] = field(default_factory=list)

    def counts(self) -> dict[tuple[str, str], int]:
        table: dict[tuple[str, str], int] = {}
        for record in self.records:
            key = (record.stratum, record.verdict.category)
            table[key] = table.get(key, 0) + 1
        return table

    def strata(self) -> list[str]:
        if self.kind == "isolated":
            order = list(CONDITIONS)
        else:
            order = [f"step-{i}" for i in range(1, 6)]
        present = {record.stratum for record in self.records}
        return [stratum for stratum in order if stratum in present]


def _run_isolated_case(case: TestCase, config: AgentConfig, backend, repeat: int) -> RunRecord:
    scene = build_case_scene(case)
    scene_before = scene.to_dict()
    session = Session(scene, backend, config)
    trace = session.submit(case.sender, case.receiver, case.utterance_text())
    verdict = classify(
        trace,
        case.expected,
        scene_before=load_scene(scene_before),
        scene_after=scene,
    )
    return RunRecord(
        case_id=case.case_id,
        repeat=repeat,
        stratum=case.condition,
        utterance=trace.input_utterance,
        verdict=verdict,
        termination=trace.termination,
        trace=trace,
        scene_before=scene_before,
        scene_after=scene.to_dict(),
    )


def _run_situated_repeat(
    steps: list[SituatedStep], config: AgentConfig, backend, repeat: int
) -> list[RunRecord]:
    scene = load_scene(fixture_path("softdrink"))
    session = Session(scene, backend, config)
    records = []
    for step in steps:
        _apply_step_setup(scene, step)
        scene_before = scene.to_dict()
        trace = session.submit(step.speaker, step.listener, step.text)
        verdict = classify(
            trace,
            step.expected,
            scene_before=load_scene(scene_before),
            scene_after=scene,
        )
        records.append(
            RunRecord(
                case_id=step.case_id,
                repeat=repeat,
                stratum=f"step-{step.index}",
                utterance=trace.input_utterance,
                verdict=verdict,
                termination=trace.termination,
                trace=trace,
                scene_before=scene_before,
                scene_after=scene.to_dict(),
            )
        )
    return records


def run_suite(
    suite,
    config: AgentConfig,
    repeats: int,
    parallelism: int = 1,
    backend=None,
    transcript_dir: str | Path | None = None,
) -> RunReport:
    """Execute every (case, repeat) and aggregate a deterministic report.

    ``suite`` is either the isolated case list or the situated step list.
    Runs execute in parallel up to ``parallelism``; aggregation sorts run
    records by (case id, repeat), so the report and transcripts do not
    depend on scheduling.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if not suite:
        raise ValueError("empty suite")
    if backend is None:
        backend = make_backend(config.backend)

    situated = isinstance(suite[0], SituatedStep)
    jobs = []
    if situated:
        for repeat in range(1, repeats + 1):
            jobs.append((suite, repeat))
        runner = lambda job: _run_situated_repeat(job[0], config, backend, job[1])
    else:
        for case in suite:
            for repeat in range(1, repeats + 1):
                jobs.append((case, repeat))
        runner = lambda job: [_run_isolated_case(job[0], config, backend, job[1])]

    records: list[RunRecord] = []
    if parallelism == 1:
        for job in jobs:
            records.extend(runner(job))
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for batch in pool.map(runner, jobs):
                records.extend(batch)
    records.sort(key=RunRecord.sort_key)

    report = RunReport(
        variant=config.variant,
        kind="situated" if situated else "isolated",
        records=records,
    )
    if transcript_dir is not None:
        write_transcripts(report, config, transcript_dir)
    return report


def emit_report(report: RunReport, format: str = "csv") -> str:
    """Render the aggregate as CSV or structured JSON (stable row order)."""
    counts = report.counts()
    strata = report.strata()
    if format == "csv":
        lines = ["variant,condition_or_step,verdict,count,percent"]
        for stratum in strata:
            total = sum(counts.get((stratum, v), 0) for v in VERDICT_CATEGORIES)
            for category in VERDICT_CATEGORIES:
                count = counts.get((stratum, category), 0)
                percent = 100.0 * count / total if total else 0.0
                lines.append(
                    f"{report.variant},{stratum},{category},{count},{percent:.1f}"
                )
        return "\n".join(lines) + "\n"
    if format == "json":
        doc = {
            "variant": report.variant,
            "kind": report.kind,
            "runs": len(report.records),
            "strata": {},
        }
        for stratum in strata:
            total = sum(counts.get((stratum, v), 0) for v in VERDICT_CATEGORIES)
            doc["strata"][stratum] = {
                category: {
                    "count": counts.get((stratum, category), 0),
                    "percent": round(100.0 * counts.get((stratum, category), 0) / total, 1)
                    if total
                    else 0.0,
                }
                for category in VERDICT_CATEGORIES
            }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {format!r}")


# ---------------------------------------------------------------------------
# transcripts


def _transcript_lines(record: RunRecord, config: AgentConfig) -> list[str]:
    header = {
        "type": "header",
        "case_id": record.case_id,
        "repeat": record.repeat,
        "stratum": record.stratum,
        "variant": config.variant,
        "backend": config.backend,
        "model_name": config.model_name,
        "utterance": record.utterance,
        "scene_before": record.scene_before,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for event in record.trace.events:
        lines.append(json.dumps({"type": "event", **event.to_dict()}, sort_keys=True))
    footer = {
        "type": "end",
        "termination": record.termination,
        "verdict": record.verdict.to_dict(),
        "scene_after": record.scene_after,
    }
    lines.append(json.dumps(footer, sort_keys=True))
    return lines


def transcript_path(root: str | Path, variant: str, case_id: str, repeat: int) -> Path:
    return Path(root) / variant / case_id / f"{repeat}.trace"


def write_transcripts(report: RunReport, config: AgentConfig, root: str | Path) -> list[Path]:
    """Persist one .trace file per run record, in sorted record order."""
    written = []
    for record in report.records:
        path = transcript_path(root, config.variant, record.case_id, record.repeat)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(_transcript_lines(record, config)) + "\n", encoding="utf-8")
        written.append(path)
    return written


def expected_from_dict(data: dict) -> ExpectedBehavior:
    """Inverse of ExpectedBehavior.to_dict, used by replay expectation files."""
    deliverable = data.get("deliverable")
    return ExpectedBehavior(
        should_help=bool(data["should_help"]),
        beneficiary=data.get("beneficiary", ""),
        deliverable=Deliverable(**deliverable) if deliverable else None,
        speak_substrings=tuple(data.get("speak_substrings", ())),
    )


def trace_from_transcript(doc: dict) -> tuple[InteractionTrace, SceneGraph, SceneGraph]:
    """Rebuild the trace and boundary scenes from a parsed transcript."""
    events = [
        AgentEvent(
            kind=entry["kind"],
            text=entry.get("text"),
            call=entry.get("call"),
            result=entry.get("result"),
            is_action=entry.get("is_action", False),
            action_succeeded=entry.get("action_succeeded"),
            mutated=entry.get("mutated", False),
            error=entry.get("error", False),
            person=entry.get("person"),
        )
        for entry in doc["events"]
    ]
    trace = InteractionTrace(
        input_utterance=doc["header"]["utterance"],
        events=events,
        termination=doc["end"]["termination"],
        rounds=len(events),
    )
    scene_before = scenemod.load_scene(doc["header"]["scene_before"])
    scene_after = scenemod.load_scene(doc["end"]["scene_after"])
    return trace, scene_before, scene_after


def read_transcript(path: str | Path) -> dict:
    """Parse one .trace file back into header, events, and footer."""
    header = None
    footer = None
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        kind = doc.pop("type")
        if kind == "header":
            header = doc
        elif kind == "event":
            events.append(doc)
        elif kind == "end":
            footer = doc
        else:
            raise ValueError(f"unknown transcript record type {kind!r}")
    if header is None or footer is None:
        raise ValueError(f"incomplete transcript: {path}")
    return {"header": header, "events": events, "end": footer}
