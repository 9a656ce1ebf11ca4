"""Tabletop scene graph: entities, attachments, and grounded queries.

A scene holds rigid objects with axis-aligned bounding volumes, persons with
an eye pose and a reach sphere, and exactly one robot. Queries answer the
questions the tool layer needs: who is busy, who can see what, who can reach
what. Mutations go through the graph so the revision counter never misses a
change.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import Aabb, Vec3, segment_intersects_aabb

ROBOT_ID = "the_robot"

AFFORDANCES = frozenset({"container", "pourable", "graspable", "busy_marker", "occluder"})

OBJECT_ID_RE = re.compile(r"^[a-z0-9_]+$")

# Unit-length tolerance for gaze directions.
_GAZE_TOL = 1e-9

# Persons hold objects this far along their gaze from the reach origin.
_HAND_OFFSET = 0.25

# Hindering reason literals, in report order.
BUSY = "busy"
CANNOT_SEE = "cannot_see"
CANNOT_REACH = "cannot_reach"


class SceneError(Exception):
    """Base for scene loading and mutation failures."""


class SceneParseError(SceneError):
    pass


class SceneValidationError(SceneError):
    pass


class UnknownEntityError(SceneError):
    pass


class InvalidMutationError(SceneError):
    pass


@dataclass
class ObjectEntity:
    id: str
    volume: Aabb
    affordances: frozenset[str]
    fill_contents: str | None = None
    held_by: str | None = None
    fill_history: list[str] = field(default_factory=list)


@dataclass
class PersonEntity:
    id: str
    eye_position: Vec3
    gaze_direction: Vec3
    reach_origin: Vec3
    reach_radius: float
    held_object_ids: list[str] = field(default_factory=list)

    def hand_anchor(self) -> Vec3:
        return self.reach_origin + self.gaze_direction.scaled(_HAND_OFFSET)


@dataclass
class RobotEntity:
    id: str
    reach_origin: Vec3
    reach_radius: float
    held_object_ids: list[str] = field(default_factory=list)
    attention_target: str | None = None

    def hand_anchor(self) -> Vec3:
        return self.reach_origin


# Mutation change records accepted by mutate().


@dataclass(frozen=True)
class MoveObject:
    object_id: str
    center: Vec3


@dataclass(frozen=True)
class Attach:
    agent_id: str
    object_id: str


@dataclass(frozen=True)
class Detach:
    agent_id: str
    object_id: str


@dataclass
class SceneGraph:
    objects: dict[str, ObjectEntity]
    persons: dict[str, PersonEntity]
    robot: RobotEntity
    revision: int = 0

    def copy(self) -> "SceneGraph":
        return copy.deepcopy(self)

    # -- entity access ----------------------------------------------------

    def object(self, object_id: str) -> ObjectEntity:
        try:
            return self.objects[object_id]
        except KeyError:
            raise UnknownEntityError(f"unknown object id: {object_id}") from None

    def person(self, person_id: str) -> PersonEntity:
        try:
            return self.persons[person_id]
        except KeyError:
            raise UnknownEntityError(f"unknown person id: {person_id}") from None

    def agent(self, agent_id: str) -> PersonEntity | RobotEntity:
        if agent_id == self.robot.id:
            return self.robot
        return self.person(agent_id)

    def is_agent(self, agent_id: str) -> bool:
        return agent_id == self.robot.id or agent_id in self.persons

    # -- mutation primitives ----------------------------------------------
    # Each primitive is one atomic scene event: exactly one revision bump.

    def _bump(self) -> None:
        self.revision += 1

    def move_object(self, object_id: str, center: Vec3) -> None:
        obj = self.object(object_id)
        if obj.held_by is not None:
            raise InvalidMutationError(
                f"cannot move {object_id}: held by {obj.held_by}"
            )
        obj.volume = Aabb(center, obj.volume.half_extents)
        self._bump()

    def attach(self, agent_id: str, object_id: str) -> None:
        agent = self.agent(agent_id)
        obj = self.object(object_id)
        if obj.held_by is not None:
            raise InvalidMutationError(
                f"cannot attach {object_id} to {agent_id}: already held by {obj.held_by}"
            )
        if agent_id == self.robot.id and len(agent.held_object_ids) >= 2:
            raise InvalidMutationError("the_robot already holds two objects")
        obj.held_by = agent_id
        agent.held_object_ids.append(object_id)
        obj.volume = Aabb(agent.hand_anchor(), obj.volume.half_extents)
        self._bump()

    def detach(self, agent_id: str, object_id: str) -> None:
        agent = self.agent(agent_id)
        obj = self.object(object_id)
        if obj.held_by != agent_id:
            raise InvalidMutationError(
                f"cannot detach {object_id} from {agent_id}: not held by them"
            )
        obj.held_by = None
        agent.held_object_ids.remove(object_id)
        self._bump()

    def place_object(self, object_id: str, center: Vec3) -> None:
        """Robot releases a held object at a location. One scene event."""
        obj = self.object(object_id)
        if obj.held_by != self.robot.id:
            raise InvalidMutationError(f"{object_id} is not held by the robot")
        obj.held_by = None
        self.robot.held_object_ids.remove(object_id)
        obj.volume = Aabb(center, obj.volume.half_extents)
        self._bump()

    def give_to(self, person_id: str, object_id: str) -> None:
        """Robot hands a held object to a person. One scene event."""
        person = self.person(person_id)
        obj = self.object(object_id)
        if obj.held_by != self.robot.id:
            raise InvalidMutationError(f"{object_id} is not held by the robot")
        self.robot.held_object_ids.remove(object_id)
        obj.held_by = person_id
        person.held_object_ids.append(object_id)
        obj.volume = Aabb(person.hand_anchor(), obj.volume.half_extents)
        self._bump()

    def pour_transfer(self, source_id: str, target_id: str) -> None:
        """Move the source's contents into the target. One scene event."""
        source = self.object(source_id)
        target = self.object(target_id)
        if source.fill_contents is None:
            raise InvalidMutationError(f"{source_id} is empty")
        if target.fill_contents is not None and target.fill_contents != source.fill_contents:
            raise InvalidMutationError(
                f"{target_id} already contains {target.fill_contents}"
            )
        substance = source.fill_contents
        source.fill_contents = None
        target.fill_contents = substance
        target.fill_history.append(substance)
        self._bump()

    def set_attention(self, object_id: str) -> None:
        self.object(object_id)
        self.robot.attention_target = object_id
        self._bump()

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "objects": [
                {
                    "id": o.id,
                    "center": o.volume.center.as_list(),
                    "half_extents": o.volume.half_extents.as_list(),
                    "affordances": sorted(o.affordances),
                    "fill_contents": o.fill_contents,
                    "fill_history": list(o.fill_history),
                    "held_by": o.held_by,
                }
                for _, o in sorted(self.objects.items())
            ],
            "persons": [
                {
                    "id": p.id,
                    "eye": p.eye_position.as_list(),
                    "gaze": p.gaze_direction.as_list(),
                    "reach_origin": p.reach_origin.as_list(),
                    "reach_radius": p.reach_radius,
                    "holds": list(p.held_object_ids),
                }
                for _, p in sorted(self.persons.items())
            ],
            "robot": {
                "id": self.robot.id,
                "reach_origin": self.robot.reach_origin.as_list(),
                "reach_radius": self.robot.reach_radius,
                "holds": list(self.robot.held_object_ids),
                "attention_target": self.robot.attention_target,
            },
            "revision": self.revision,
        }


def _parse_vec(raw, what: str) -> Vec3:
    try:
        return Vec3.from_seq(raw)
    except (TypeError, ValueError) as exc:
        raise SceneValidationError(f"{what}: {exc}") from None


def load_scene(definition) -> SceneGraph:
    """Build a validated SceneGraph from a definition.

    Accepts a mapping, a JSON string, or a filesystem path to a JSON
    document with top-level keys: objects, persons, robot.
    """
    if isinstance(definition, (str, Path)):
        path = Path(definition)
        if isinstance(definition, Path) or definition.lstrip()[:1] not in ("{", ""):
            try:
                text = path.read_text()
            except OSError as exc:
                raise SceneParseError(f"cannot read scene file {definition}: {exc}") from None
        else:
            text = definition
        try:
            definition = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SceneParseError(f"invalid scene JSON: {exc}") from None
    if not isinstance(definition, dict):
        raise SceneParseError("scene definition must be a JSON object")

    try:
        raw_objects = definition["objects"]
        raw_persons = definition["persons"]
        raw_robot = definition["robot"]
    except KeyError as exc:
        raise SceneParseError(f"scene definition missing key: {exc}") from None

    objects: dict[str, ObjectEntity] = {}
    for raw in raw_objects:
        oid = raw.get("id")
        if not isinstance(oid, str) or not OBJECT_ID_RE.match(oid):
            raise SceneValidationError(f"invalid object id: {oid!r}")
        if oid in objects:
            raise SceneValidationError(f"duplicate object id: {oid}")
        affordances = frozenset(raw.get("affordances", []))
        unknown = affordances - AFFORDANCES
        if unknown:
            raise SceneValidationError(
                f"object {oid}: unknown affordances {sorted(unknown)}"
            )
        try:
            volume = Aabb(
                _parse_vec(raw["center"], f"object {oid} center"),
                _parse_vec(raw["half_extents"], f"object {oid} half_extents"),
            )
        except KeyError as exc:
            raise SceneValidationError(f"object {oid} missing key {exc}") from None
        except ValueError as exc:
            raise SceneValidationError(f"object {oid}: {exc}") from None
        fill = raw.get("fill_contents")
        if fill is not None and not isinstance(fill, str):
            raise SceneValidationError(f"object {oid}: fill_contents must be a string")
        objects[oid] = ObjectEntity(
            id=oid,
            volume=volume,
            affordances=affordances,
            fill_contents=fill,
            held_by=raw.get("held_by"),
            fill_history=list(raw.get("fill_history", [])),
        )

    persons: dict[str, PersonEntity] = {}
    for raw in raw_persons:
        pid = raw.get("id")
        if not isinstance(pid, str) or not pid:
            raise SceneValidationError(f"invalid person id: {pid!r}")
        if pid in persons or pid == ROBOT_ID:
            raise SceneValidationError(f"duplicate person id: {pid}")
        gaze = _parse_vec(raw["gaze"], f"person {pid} gaze")
        if abs(gaze.norm() - 1.0) > _GAZE_TOL:
            raise SceneValidationError(f"person {pid}: gaze direction is not unit length")
        radius = float(raw["reach_radius"])
        if radius <= 0.0 or not math.isfinite(radius):
            raise SceneValidationError(f"person {pid}: reach_radius must be positive")
        persons[pid] = PersonEntity(
            id=pid,
            eye_position=_parse_vec(raw["eye"], f"person {pid} eye"),
            gaze_direction=gaze,
            reach_origin=_parse_vec(raw["reach_origin"], f"person {pid} reach_origin"),
            reach_radius=radius,
            held_object_ids=list(raw.get("holds", [])),
        )

    robot_id = raw_robot.get("id", ROBOT_ID)
    if robot_id != ROBOT_ID:
        raise SceneValidationError(f"robot id must be {ROBOT_ID!r}, got {robot_id!r}")
    robot_radius = float(raw_robot["reach_radius"])
    if robot_radius <= 0.0 or not math.isfinite(robot_radius):
        raise SceneValidationError("robot reach_radius must be positive")
    robot = RobotEntity(
        id=ROBOT_ID,
        reach_origin=_parse_vec(raw_robot["reach_origin"], "robot reach_origin"),
        reach_radius=robot_radius,
        held_object_ids=list(raw_robot.get("holds", [])),
        attention_target=raw_robot.get("attention_target"),
    )

    scene = SceneGraph(objects=objects, persons=persons, robot=robot)

    # Reconcile held_by declarations with holder lists, then re-anchor.
    holders: dict[str, str] = {}
    for agent in [*persons.values(), robot]:
        for oid in agent.held_object_ids:
            if oid not in objects:
                raise SceneValidationError(
                    f"{agent.id} holds unknown object {oid}"
                )
            if oid in holders:
                raise SceneValidationError(
                    f"object {oid} held by both {holders[oid]} and {agent.id}"
                )
            holders[oid] = agent.id
    for obj in objects.values():
        if obj.held_by is not None:
            if not scene.is_agent(obj.held_by):
                raise SceneValidationError(
                    f"object {obj.id} held by unknown agent {obj.held_by}"
                )
            declared = holders.get(obj.id)
            if declared is None:
                scene.agent(obj.held_by).held_object_ids.append(obj.id)
                holders[obj.id] = obj.held_by
            elif declared != obj.held_by:
                raise SceneValidationError(
                    f"object {obj.id}: held_by {obj.held_by} contradicts holder {declared}"
                )
    for oid, agent_id in holders.items():
        obj = objects[oid]
        obj.held_by = agent_id
        obj.volume = Aabb(scene.agent(agent_id).hand_anchor(), obj.volume.half_extents)
    if len(robot.held_object_ids) > 2:
        raise SceneValidationError("the_robot cannot hold more than two objects")

    return scene


# -- queries ----------------------------------------------------------------


def list_objects(scene: SceneGraph) -> list[str]:
    """Object ids in lexicographic order. The robot is not an object."""
    return sorted(scene.objects)


def list_persons(scene: SceneGraph) -> list[str]:
    """Person ids in lexicographic order; excludes the robot."""
    return sorted(scene.persons)


def is_busy(scene: SceneGraph, person_id: str) -> bool:
    """A person is busy iff they hold an object with the busy_marker affordance."""
    person = scene.person(person_id)
    return any(
        "busy_marker" in scene.object(oid).affordances for oid in person.held_object_ids
    )


def is_reachable(scene: SceneGraph, agent_id: str, object_id: str) -> bool:
    agent = scene.agent(agent_id)
    obj = scene.object(object_id)
    return agent.reach_origin.distance_to(obj.volume.center) <= agent.reach_radius


def is_visible(scene: SceneGraph, person_id: str, object_id: str) -> bool:
    """Line-of-sight from the person's eye to the object center.

    Blocked only by other objects with the occluder affordance that the
    person is not holding themselves.
    """
    person = scene.person(person_id)
    target = scene.object(object_id)
    segment_from = person.eye_position
    segment_to = target.volume.center
    for other in scene.objects.values():
        if other.id == object_id:
            continue
        if "occluder" not in other.affordances:
            continue
        if other.held_by == person_id:
            continue
        if segment_intersects_aabb(segment_from, segment_to, other.volume):
            return False
    return True


def hindering_reasons(scene: SceneGraph, person_id: str, object_id: str) -> frozenset[str]:
    """Set of reasons the person cannot deal with the object right now."""
    reasons = set()
    if is_busy(scene, person_id):
        reasons.add(BUSY)
    if not is_visible(scene, person_id, object_id):
        reasons.add(CANNOT_SEE)
    if not is_reachable(scene, person_id, object_id):
        reasons.add(CANNOT_REACH)
    return frozenset(reasons)


def mutate(scene: SceneGraph, change: MoveObject | Attach | Detach) -> None:
    """Apply one externally requested change (control channel, REPL)."""
    if isinstance(change, MoveObject):
        scene.move_object(change.object_id, change.center)
    elif isinstance(change, Attach):
        scene.attach(change.agent_id, change.object_id)
    elif isinstance(change, Detach):
        scene.detach(change.agent_id, change.object_id)
    else:
        raise InvalidMutationError(f"unknown change record: {change!r}")


def fixture_path(name: str) -> Path:
    """Resolve a packaged fixture name like "softdrink" or "isolated/coffee_d2"."""
    path = Path(__file__).parent / "scenes" / f"{name}.scene"
    if not path.is_file():
        raise SceneParseError(f"no packaged scene fixture named {name!r}")
    return path


def load_fixture(name: str) -> SceneGraph:
    return load_scene(fixture_path(name))


def translated(scene: SceneGraph, delta: Vec3) -> SceneGraph:
    """A copy of the scene with every position shifted by delta."""
    moved = scene.copy()
    for obj in moved.objects.values():
        obj.volume = Aabb(obj.volume.center + delta, obj.volume.half_extents)
    for person in moved.persons.values():
        person.eye_position = person.eye_position + delta
        person.reach_origin = person.reach_origin + delta
    moved.robot.reach_origin = moved.robot.reach_origin + delta
    return moved
