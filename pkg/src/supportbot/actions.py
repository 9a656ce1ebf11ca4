"""Motion planning and execution for the robot's composite actions.

Composites expand into elementary steps (get/put/pour/gaze/pass). Planning
enumerates bounded variations, checks them stepwise against the scene, and
ranks them; execution applies a planned variation atomically with a stale
revision guard. Transported objects move along straight segments; obstacle
volumes are inflated by a fixed clearance for the go/no-go test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Aabb, Vec3, segment_aabb_min_distance, segment_intersects_aabb
from .scene import ROBOT_ID, SceneGraph

# Obstacle inflation for swept segments, meters.
SWEEP_CLEARANCE = 0.02
# No other object volume may sit within this distance of a pour target.
POUR_CLEARANCE_RADIUS = 0.15
# Vertical gap between source and target volumes at the pour point.
POUR_GAP = 0.02
# Placement candidates for put steps, as fractions of the person's reach.
PLACEMENT_FRACTIONS = (0.9, 0.7, 0.5, 0.3)
# Sweeps closer than this to an obstacle are penalized in the score.
PENALTY_MARGIN = 0.10
PENALTY_WEIGHT = 1.0

END_EFFECTORS = ("left", "right")

COMPOSITE_ACTIONS = (
    "move_object_to_person",
    "hand_object_over_to_person",
    "pour_into",
)

# Plan failure reason kinds, in rendering priority order.
REASON_KINDS = (
    "object-held-by-person",
    "not-pourable",
    "empty-source",
    "not-a-container",
    "target-occupied",
    "unreachable-for-robot",
    "no-collision-free-path",
    "pour-blocked",
)


@dataclass(frozen=True)
class ElementaryAction:
    kind: str  # get | put | pour | gaze | pass
    subject: str
    target: str | Vec3 | None = None

    def key(self) -> str:
        target = self.target
        if isinstance(target, Vec3):
            target = f"({target.x:.6f},{target.y:.6f},{target.z:.6f})"
        return f"{self.kind} {self.subject} -> {target}"


@dataclass(frozen=True)
class PlanReason:
    kind: str
    entity: str
    blocker: str | None = None


@dataclass
class ActionVariation:
    composite: str
    steps: list[ElementaryAction]
    end_effector: str
    score: float
    path_length: float
    clearance_penalty: float
    planned_revision: int
    # (method name on SceneGraph, args) per step; applied in order by execute.
    mutations: list[tuple] = field(default_factory=list)


@dataclass
class PlanResult:
    composite: str
    variations: list[ActionVariation]
    reasons: list[PlanReason]

    @property
    def ok(self) -> bool:
        return bool(self.variations)


@dataclass
class ActionOutcome:
    success: bool
    failure_text: str | None = None

    def __post_init__(self) -> None:
        if self.success and self.failure_text is not None:
            raise ValueError("successful outcome cannot carry failure text")
        if not self.success and not self.failure_text:
            raise ValueError("failed outcome requires failure text")


_REASON_TEMPLATES = {
    "object-held-by-person": "the_robot cannot take {entity} from {blocker}.",
    "not-pourable": "Cannot pour from {entity}: it is not a pourable container.",
    "empty-source": "Cannot pour from {entity}: it is empty.",
    "not-a-container": "Cannot pour into {entity}: it is not a container.",
    "target-occupied": "Cannot pour into {entity}: it already contains {blocker}.",
    "unreachable-for-robot": "the_robot cannot reach {entity}.",
    "no-collision-free-path": "Cannot move {entity}: {blocker} blocks the path.",
    "pour-blocked": "Cannot pour into {entity}: {blocker} blocks the pouring motion.",
}


def render_failure(reasons: list[PlanReason]) -> str:
    """One deterministic English sentence for a failed plan (<= 200 chars)."""
    if not reasons:
        raise ValueError("render_failure needs at least one reason")
    ordered = sorted(
        reasons,
        key=lambda r: (REASON_KINDS.index(r.kind), r.entity, r.blocker or ""),
    )
    first = ordered[0]
    text = _REASON_TEMPLATES[first.kind].format(entity=first.entity, blocker=first.blocker)
    return text[:200]


def _robot_reaches(scene: SceneGraph, point: Vec3) -> bool:
    robot = scene.robot
    return robot.reach_origin.distance_to(point) <= robot.reach_radius


def _obstacles(scene: SceneGraph, exclude: set[str]):
    for obj in scene.objects.values():
        if obj.id in exclude:
            continue
        if obj.held_by is not None:
            continue
        yield obj


def _sweep_blocker(scene: SceneGraph, a: Vec3, b: Vec3, exclude: set[str]) -> str | None:
    hits = [
        obj.id
        for obj in _obstacles(scene, exclude)
        if segment_intersects_aabb(a, b, obj.volume.inflated(SWEEP_CLEARANCE))
    ]
    return min(hits) if hits else None


def _sweep_penalty(scene: SceneGraph, a: Vec3, b: Vec3, exclude: set[str]) -> float:
    worst = 0.0
    for obj in _obstacles(scene, exclude):
        d = segment_aabb_min_distance(a, b, obj.volume)
        worst = max(worst, max(0.0, PENALTY_MARGIN - d))
    return worst * PENALTY_WEIGHT


def _placement_candidates(scene: SceneGraph, person_id: str, object_id: str) -> list[Vec3]:
    person = scene.person(person_id)
    center = scene.object(object_id).volume.center
    origin = person.reach_origin
    dist = origin.distance_to(center)
    if dist < 1e-9:
        return [center]
    direction = (center - origin).scaled(1.0 / dist)
    candidates: list[Vec3] = []
    for fraction in PLACEMENT_FRACTIONS:
        d = min(fraction * person.reach_radius, dist)
        point = origin + direction.scaled(d)
        if all(point.distance_to(seen) > 1e-9 for seen in candidates):
            candidates.append(point)
    return candidates


def _grasp_check(scene: SceneGraph, object_id: str, reasons: list[PlanReason]) -> bool:
    obj = scene.object(object_id)
    ok = True
    if obj.held_by is not None:
        reasons.append(PlanReason("object-held-by-person", object_id, obj.held_by))
        ok = False
    if not _robot_reaches(scene, obj.volume.center):
        reasons.append(PlanReason("unreachable-for-robot", object_id))
        ok = False
    return ok


def plan(scene: SceneGraph, composite_action: str, args: dict[str, str]) -> PlanResult:
    """Enumerate and rank feasible variations of a composite action.

    Returns an empty variation list plus reasons when nothing is feasible.
    """
    if composite_action == "move_object_to_person":
        return _plan_move(scene, args["object_name"], args["person_name"])
    if composite_action == "hand_object_over_to_person":
        return _plan_hand_over(scene, args["object_name"], args["person_name"])
    if composite_action == "pour_into":
        return _plan_pour(scene, args["source_container_name"], args["target_container_name"])
    raise ValueError(f"unknown composite action: {composite_action}")


def _ranked(composite: str, variations: list[ActionVariation], reasons: list[PlanReason]) -> PlanResult:
    variations.sort(
        key=lambda v: (
            v.score,
            END_EFFECTORS.index(v.end_effector),
            tuple(step.key() for step in v.steps),
        )
    )
    unique_reasons = sorted(
        set(reasons),
        key=lambda r: (REASON_KINDS.index(r.kind), r.entity, r.blocker or ""),
    )
    return PlanResult(composite, variations, unique_reasons if not variations else [])


def _variation(
    scene: SceneGraph,
    composite: str,
    steps: list[ElementaryAction],
    sweeps: list[tuple[Vec3, Vec3, set[str]]],
    mutations: list[tuple],
    end_effector: str,
) -> ActionVariation:
    path = sum(a.distance_to(b) for a, b, _ in sweeps)
    penalty = sum(_sweep_penalty(scene, a, b, excl) for a, b, excl in sweeps)
    return ActionVariation(
        composite=composite,
        steps=steps,
        end_effector=end_effector,
        score=path + penalty,
        path_length=path,
        clearance_penalty=penalty,
        planned_revision=scene.revision,
        mutations=mutations,
    )


def _plan_move(scene: SceneGraph, object_id: str, person_id: str) -> PlanResult:
    composite = "move_object_to_person"
    reasons: list[PlanReason] = []
    obj = scene.object(object_id)
    scene.person(person_id)
    if not _grasp_check(scene, object_id, reasons):
        return _ranked(composite, [], reasons)

    start = obj.volume.center
    variations: list[ActionVariation] = []
    for placement in _placement_candidates(scene, person_id, object_id):
        if not _robot_reaches(scene, placement):
            reasons.append(PlanReason("unreachable-for-robot", person_id))
            continue
        exclude = {object_id}
        blocker = _sweep_blocker(scene, start, placement, exclude)
        if blocker is not None:
            reasons.append(PlanReason("no-collision-free-path", object_id, blocker))
            continue
        steps = [
            ElementaryAction("get", object_id),
            ElementaryAction("put", object_id, placement),
        ]
        mutations = [("attach", ROBOT_ID, object_id), ("place_object", object_id, placement)]
        for effector in END_EFFECTORS:
            variations.append(
                _variation(scene, composite, steps, [(start, placement, exclude)], mutations, effector)
            )
    return _ranked(composite, variations, reasons)


def _plan_hand_over(scene: SceneGraph, object_id: str, person_id: str) -> PlanResult:
    composite = "hand_object_over_to_person"
    reasons: list[PlanReason] = []
    obj = scene.object(object_id)
    person = scene.person(person_id)
    if not _grasp_check(scene, object_id, reasons):
        return _ranked(composite, [], reasons)

    start = obj.volume.center
    anchor = person.hand_anchor()
    if not _robot_reaches(scene, anchor):
        reasons.append(PlanReason("unreachable-for-robot", person_id))
        return _ranked(composite, [], reasons)
    exclude = {object_id}
    blocker = _sweep_blocker(scene, start, anchor, exclude)
    if blocker is not None:
        reasons.append(PlanReason("no-collision-free-path", object_id, blocker))
        return _ranked(composite, [], reasons)
    steps = [
        ElementaryAction("get", object_id),
        ElementaryAction("pass", object_id, person_id),
    ]
    mutations = [("attach", ROBOT_ID, object_id), ("give_to", person_id, object_id)]
    variations = [
        _variation(scene, composite, steps, [(start, anchor, exclude)], mutations, effector)
        for effector in END_EFFECTORS
    ]
    return _ranked(composite, variations, reasons)


def _plan_pour(scene: SceneGraph, source_id: str, target_id: str) -> PlanResult:
    composite = "pour_into"
    reasons: list[PlanReason] = []
    source = scene.object(source_id)
    target = scene.object(target_id)

    if "pourable" not in source.affordances:
        reasons.append(PlanReason("not-pourable", source_id))
    elif source.fill_contents is None:
        reasons.append(PlanReason("empty-source", source_id))
    if "container" not in target.affordances:
        reasons.append(PlanReason("not-a-container", target_id))
    elif target.fill_contents is not None and target.fill_contents != source.fill_contents:
        reasons.append(PlanReason("target-occupied", target_id, target.fill_contents))
    if reasons:
        return _ranked(composite, [], reasons)
    if not _grasp_check(scene, source_id, reasons):
        return _ranked(composite, [], reasons)

    start = source.volume.center
    pour_point = target.volume.center + Vec3(
        0.0,
        0.0,
        target.volume.half_extents.z + source.volume.half_extents.z + POUR_GAP,
    )
    if not _robot_reaches(scene, pour_point):
        reasons.append(PlanReason("unreachable-for-robot", target_id))
        return _ranked(composite, [], reasons)

    for other in _obstacles(scene, {source_id, target_id}):
        if other.volume.distance_to_point(target.volume.center) < POUR_CLEARANCE_RADIUS:
            reasons.append(PlanReason("pour-blocked", target_id, other.id))
    if reasons:
        return _ranked(composite, [], reasons)

    pour_exclude = {source_id, target_id}
    blocker = _sweep_blocker(scene, start, pour_point, pour_exclude)
    if blocker is not None:
        reasons.append(PlanReason("pour-blocked", target_id, blocker))
        return _ranked(composite, [], reasons)
    back_exclude = {source_id}
    blocker = _sweep_blocker(scene, pour_point, start, back_exclude)
    if blocker is not None:
        reasons.append(PlanReason("no-collision-free-path", source_id, blocker))
        return _ranked(composite, [], reasons)

    steps = [
        ElementaryAction("get", source_id),
        ElementaryAction("gaze", target_id),
        ElementaryAction("pour", source_id, target_id),
        ElementaryAction("put", source_id, start),
    ]
    mutations = [
        ("attach", ROBOT_ID, source_id),
        ("set_attention", target_id),
        ("pour_transfer", source_id, target_id),
        ("place_object", source_id, start),
    ]
    sweeps = [(start, pour_point, pour_exclude), (pour_point, start, back_exclude)]
    variations = [
        _variation(scene, composite, steps, sweeps, mutations, effector)
        for effector in END_EFFECTORS
    ]
    return _ranked(composite, variations, reasons)


_STALE_TEXT = "The scene changed after planning; {composite} was not executed."


def execute(scene: SceneGraph, variation: ActionVariation) -> ActionOutcome:
    """Apply a planned variation atomically.

    The scene must be at the revision the variation was planned against;
    otherwise nothing is mutated and a failure is returned.
    """
    if scene.revision != variation.planned_revision:
        return ActionOutcome(False, _STALE_TEXT.format(composite=variation.composite))
    for method, *args in variation.mutations:
        getattr(scene, method)(*args)
    return ActionOutcome(True)
