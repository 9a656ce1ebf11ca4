"""Tool registry, dispatch, and schema serialization.

The registry fixes the function-calling surface exposed to the language
model: ten tools whose names, descriptions, and argument descriptions are
frozen verbatim.  ``dispatch`` executes a parsed call against a scene and
always answers with result text; domain failures are reported in that text
rather than raised, so the conversation loop never has to catch anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import actions
from . import scene as scenemod
from .scene import ROBOT_ID, SceneGraph

# Semantic argument kinds, carried through schema serialization so a round
# trip preserves which arguments name persons vs. objects.
PERSON_REF = "person-ref"
OBJECT_REF = "object-ref"
STRING = "string"

SPEAK_ALL = "All"

QUERY_TOOLS = (
    "get_objects",
    "get_persons",
    "is_person_busy_or_idle",
    "check_hindering_reasons",
    "check_reach_object_for_robot",
)
ACTION_TOOLS = (
    "move_object_to_person",
    "hand_object_over_to_person",
    "pour_into",
)


class ToolError(Exception):
    """Internal misuse of the tool layer (not a model-visible failure)."""


@dataclass(frozen=True)
class ToolParameter:
    name: str
    description: str
    semantic: str


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: tuple[ToolParameter, ...] = ()


@dataclass(frozen=True)
class ToolCall:
    """One parsed function call issued by the model."""

    name: str
    arguments: dict[str, str] = field(default_factory=dict)
    call_id: str = ""


@dataclass(frozen=True)
class ToolResult:
    """Text answer returned to the model for one call."""

    call_id: str
    name: str
    text: str


@dataclass(frozen=True)
class DispatchOutcome:
    """What a dispatched call did, for trace recording and evaluation."""

    result: ToolResult
    category: str  # "query" | "action" | "speak"
    error: bool = False
    action_succeeded: bool | None = None
    mutated: bool = False
    speak_person: str | None = None
    speak_text: str | None = None


_PERSON_ARG = ToolParameter(
    "person_name",
    "The name of the person to check. The person must be available in the scene.",
    PERSON_REF,
)
_OBJECT_ARG = ToolParameter(
    "object_name",
    "The name of the object to check. The object must be available in the scene.",
    OBJECT_REF,
)

_REGISTRY: tuple[ToolSchema, ...] = (
    ToolSchema(
        "get_objects",
        "Get all objects that are available in the scene. "
        "You can see all these objects.",
    ),
    ToolSchema(
        "get_persons",
        "Get all persons that are available in the scene. "
        "You can see all these persons.",
    ),
    ToolSchema(
        "is_person_busy_or_idle",
        "Check if the person is busy or idle. If the person is busy, "
        "it would be hindered from helping.",
        (_PERSON_ARG,),
    ),
    ToolSchema(
        "check_hindering_reasons",
        "Checks all hindering reasons for a person (busy or idle), and in "
        "combination with an object (if person can see and reach object). "
        "If the person cannot see or cannot reach the object, it would be "
        "hindered from helping with the object. If the person is busy, it "
        "would be hindered from helping.",
        (_PERSON_ARG, _OBJECT_ARG),
    ),
    ToolSchema(
        "check_reach_object_for_robot",
        "Check if the_robot can reach the object.",
        (_OBJECT_ARG,),
    ),
    ToolSchema(
        "move_object_to_person",
        "You move an object to a person.",
        (
            ToolParameter(
                "object_name",
                "The name of the object to move. "
                "The object must be available in the scene.",
                OBJECT_REF,
            ),
            ToolParameter(
                "person_name",
                "The name of the person to move the object to. "
                "The person must be available in the scene.",
                PERSON_REF,
            ),
        ),
    ),
    ToolSchema(
        "hand_object_over_to_person",
        "You hand an object over to a person.",
        (
            ToolParameter(
                "object_name",
                "The name of the object to hand over. "
                "The object must be available in the scene.",
                OBJECT_REF,
            ),
            ToolParameter(
                "person_name",
                "The name of the person to hand over the object to. "
                "The person must be available in the scene.",
                PERSON_REF,
            ),
        ),
    ),
    ToolSchema(
        "pour_into",
        "You pour from a source container into a target container.",
        (
            ToolParameter(
                "source_container_name",
                "The name of the container to pour from.",
                OBJECT_REF,
            ),
            ToolParameter(
                "target_container_name",
                "The name of the container to pour into.",
                OBJECT_REF,
            ),
        ),
    ),
    ToolSchema(
        "speak",
        "You speak out the given text.",
        (
            ToolParameter(
                "person_name",
                "The name of the person to speak to. "
                "The person must be available in the scene. "
                "Give All if you want to speak to everyone.",
                PERSON_REF,
            ),
            ToolParameter("text", "The text to speak.", STRING),
        ),
    ),
    ToolSchema(
        "stop",
        "You need to call this function when you are finished.",
    ),
)

_BY_NAME = {schema.name: schema for schema in _REGISTRY}


def registry() -> tuple[ToolSchema, ...]:
    """All tool schemas, in their fixed presentation order."""
    return _REGISTRY


def schema_for(name: str) -> ToolSchema:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ToolError(f"no tool schema named {name!r}") from None


# ---------------------------------------------------------------------------
# dispatch


def _unknown_object(value: str) -> str:
    return f"There is no object named {value} in the scene."


def _unknown_person(value: str) -> str:
    return f"There is no person named {value} in the scene."


def _error(call: ToolCall, text: str) -> DispatchOutcome:
    return DispatchOutcome(
        result=ToolResult(call.call_id, call.name, text),
        category="query",
        error=True,
    )


def _listing(label: str, names: list[str]) -> str:
    body = ", ".join(names) if names else "none"
    return f"Available {label}: {body}."


def _busy_word(scene: SceneGraph, person_name: str) -> str:
    return "busy" if scenemod.is_busy(scene, person_name) else "idle"


def _run_composite(
    scene: SceneGraph, call: ToolCall, confirmation: str
) -> DispatchOutcome:
    plan = actions.plan(scene, call.name, dict(call.arguments))
    if not plan.ok:
        text = actions.render_failure(plan.reasons)
        return DispatchOutcome(
            result=ToolResult(call.call_id, call.name, text),
            category="action",
            action_succeeded=False,
        )
    outcome = actions.execute(scene, plan.variations[0])
    if not outcome.success:
        return DispatchOutcome(
            result=ToolResult(call.call_id, call.name, outcome.failure_text),
            category="action",
            action_succeeded=False,
        )
    return DispatchOutcome(
        result=ToolResult(call.call_id, call.name, confirmation),
        category="action",
        action_succeeded=True,
        mutated=True,
    )


def dispatch(scene: SceneGraph, call: ToolCall) -> DispatchOutcome:
    """Execute one tool call against the scene.

    Every failure the model can cause (unknown tool, missing argument,
    unknown entity, infeasible action) comes back as result text.  ``stop``
    is the one exception: the conversation loop must intercept it before
    dispatch, so seeing it here is a programming error.
    """
    if call.name == "stop":
        raise ToolError("stop must be intercepted by the conversation loop")
    schema = _BY_NAME.get(call.name)
    if schema is None:
        return _error(call, f"Unknown function {call.name}.")

    args: dict[str, str] = {}
    for param in schema.parameters:
        value = call.arguments.get(param.name)
        if value is None:
            return _error(
                call, f"Missing argument {param.name} for {call.name}."
            )
        value = str(value)
        if param.semantic == PERSON_REF:
            speak_all = call.name == "speak" and value == SPEAK_ALL
            if not speak_all and value not in scene.persons:
                return _error(call, _unknown_person(value))
        elif param.semantic == OBJECT_REF:
            if value not in scene.objects:
                return _error(call, _unknown_object(value))
        args[param.name] = value

    if call.name == "get_objects":
        names = scenemod.list_objects(scene)
        return DispatchOutcome(
            result=ToolResult(call.call_id, call.name, _listing("objects", names)),
            category="query",
        )

    if call.name == "get_persons":
        names = scenemod.list_persons(scene)
        return DispatchOutcome(
            result=ToolResult(call.call_id, call.name, _listing("persons", names)),
            category="query",
        )

    if call.name == "is_person_busy_or_idle":
        person = args["person_name"]
        text = f"{person} is {_busy_word(scene, person)}."
        return DispatchOutcome(
            result=ToolResult(call.call_id, call.name, text),
            category="query",
        )

    if call.name == "check_hindering_reasons":
        person = args["person_name"]
        obj = args["object_name"]
        see = "can" if scenemod.is_visible(scene, person, obj) else "cannot"
        reach = "can" if scenemod.is_reachable(scene, person, obj) else "cannot"
        text = (
            f"{person} is {_busy_word(scene, person)}. "
            f"{person} {see} see {obj}. "
            f"{person} {reach} reach {obj}."
        )
        return DispatchOutcome(
            result=ToolResult(call.call_id, call.name, text),
            category="query",
        )

    if call.name == "check_reach_object_for_robot":
        obj = args["object_name"]
        reach = "can" if scenemod.is_reachable(scene, ROBOT_ID, obj) else "cannot"
        text = f"{ROBOT_ID} {reach} reach {obj}."
        return DispatchOutcome(
            result=ToolResult(call.call_id, call.name, text),
            category="query",
        )

    if call.name == "move_object_to_person":
        confirmation = f"Moved {args['object_name']} to {args['person_name']}."
        return _run_composite(scene, call, confirmation)

    if call.name == "hand_object_over_to_person":
        confirmation = (
            f"Handed {args['object_name']} over to {args['person_name']}."
        )
        return _run_composite(scene, call, confirmation)

    if call.name == "pour_into":
        source = args["source_container_name"]
        target = args["target_container_name"]
        # Read the substance before planning: a successful execute empties
        # the source, and the confirmation names what was poured.
        substance = scene.objects[source].fill_contents
        confirmation = f"Poured {substance} from {source} into {target}."
        return _run_composite(scene, call, confirmation)

    if call.name == "speak":
        person = args["person_name"]
        text = args["text"]
        return DispatchOutcome(
            result=ToolResult(
                call.call_id, call.name, f"You said to {person}: {text}"
            ),
            category="speak",
            speak_person=person,
            speak_text=text,
        )

    raise ToolError(f"dispatch fell through for {call.name}")  # pragma: no cover


# ---------------------------------------------------------------------------
# schema serialization


def serialize_schemas(schemas: tuple[ToolSchema, ...] | None = None) -> list[dict]:
    """Render schemas as OpenAI-style function-calling tool entries.

    The ``x-semantic`` vendor extension preserves argument kinds so that
    ``deserialize_schemas`` can reconstruct the registry exactly.
    """
    out = []
    for schema in schemas if schemas is not None else _REGISTRY:
        properties = {}
        required = []
        for param in schema.parameters:
            properties[param.name] = {
                "type": "string",
                "description": param.description,
                "x-semantic": param.semantic,
            }
            required.append(param.name)
        out.append(
            {
                "type": "function",
                "function": {
                    "name": schema.name,
                    "description": schema.description,
                    "parameters": {
                        "type": "object",
                        "properties": properties,
                        "required": required,
                    },
                },
            }
        )
    return out


def deserialize_schemas(doc: list[dict]) -> tuple[ToolSchema, ...]:
    """Rebuild ToolSchema records from serialized tool entries."""
    schemas = []
    for entry in doc:
        if entry.get("type") != "function" or "function" not in entry:
            raise ToolError(f"not a function tool entry: {entry!r}")
        fn = entry["function"]
        params_doc = fn.get("parameters", {})
        properties = params_doc.get("properties", {})
        required = params_doc.get("required", [])
        if sorted(required) != sorted(properties):
            raise ToolError(f"tool {fn.get('name')!r} has optional parameters")
        params = []
        # "required" preserves declaration order; "properties" may not
        # survive a round trip through JSON object key reordering.
        for name in required:
            prop = properties[name]
            params.append(
                ToolParameter(
                    name,
                    prop["description"],
                    prop.get("x-semantic", STRING),
                )
            )
        schemas.append(ToolSchema(fn["name"], fn["description"], tuple(params)))
    return tuple(schemas)


def parse_tool_call(payload: dict) -> ToolCall:
    """Parse one tool-call payload from a chat-completions response.

    Accepts ``arguments`` both as a JSON-encoded string (the wire form) and
    as an already-decoded mapping (convenient for scripted backends).
    """
    fn = payload.get("function", payload)
    name = fn.get("name")
    if not isinstance(name, str) or not name:
        raise ToolError(f"tool call without a function name: {payload!r}")
    raw_args = fn.get("arguments", {})
    if isinstance(raw_args, str):
        try:
            raw_args = json.loads(raw_args) if raw_args.strip() else {}
        except json.JSONDecodeError as exc:
            raise ToolError(f"malformed arguments for {name}: {exc}") from None
    if not isinstance(raw_args, dict):
        raise ToolError(f"arguments for {name} must decode to an object")
    arguments = {str(key): str(value) for key, value in raw_args.items()}
    return ToolCall(
        name=name,
        arguments=arguments,
        call_id=str(payload.get("id", "")),
    )
