"""Conversation sessions and the tool-calling interaction loop."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

from . import prompts, tools
from .backends import BackendError
from .scene import SceneGraph
from .tools import ToolCall

TERMINATION_STOPPED = "stopped"
TERMINATION_ROUND_LIMIT = "round_limit"
TERMINATION_BACKEND_ERROR = "backend_error"
TERMINATIONS = (
    TERMINATION_STOPPED,
    TERMINATION_ROUND_LIMIT,
    TERMINATION_BACKEND_ERROR,
)

# Event kinds that end a trace; at most one occurs and it is always last.
TERMINAL_EVENT_KINDS = ("stop", "round_limit", "backend_error")


def build_prompt(variant: str) -> str:
    return prompts.system_prompt(variant)


def format_utterance(speaker: str, listener: str, text: str) -> str:
    if not text:
        raise ValueError("utterance text must be non-empty")
    return f"{speaker} said to {listener}: {text}"


@dataclass(frozen=True)
class ChatMessage:
    """One history entry in chat-completions shape.

    Assistant messages carry their tool calls as plain dicts with
    ``call_id``/``name``/``arguments`` keys; tool messages answer one call,
    referenced by ``call_id``.
    """

    role: str
    content: str | None = None
    tool_calls: tuple[dict, ...] = ()
    call_id: str = ""
    name: str = ""

    def to_dict(self) -> dict:
        doc: dict = {"role": self.role, "content": self.content}
        if self.tool_calls:
            doc["tool_calls"] = [dict(call) for call in self.tool_calls]
        if self.role == "tool":
            doc["call_id"] = self.call_id
            doc["name"] = self.name
        return doc


@dataclass(frozen=True)
class AgentConfig:
    variant: str = "full_rules"
    backend: str = "oracle"
    model_name: str = "gpt-4-1106-preview"
    temperature: float = 1e-8
    random_seed: int = 0
    max_tool_rounds: int = 10

    def __post_init__(self):
        object.__setattr__(self, "variant", prompts.resolve_variant(self.variant))
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tool_rounds < 1:
            raise ValueError("max_tool_rounds must be >= 1")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "backend": self.backend,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "random_seed": self.random_seed,
            "max_tool_rounds": self.max_tool_rounds,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AgentConfig":
        known = {f: doc[f] for f in cls.__dataclass_fields__ if f in doc}
        return cls(**known)


@dataclass(frozen=True)
class AgentEvent:
    """One trace entry.

    kind is one of assistant_text, tool, speak, stop, round_limit,
    backend_error.  Tool and speak events embed the call and its result
    text; ``is_action`` marks the three physical composites, and
    ``mutated`` marks calls that changed the scene.
    """

    kind: str
    text: str | None = None
    call: dict | None = None
    result: str | None = None
    is_action: bool = False
    action_succeeded: bool | None = None
    mutated: bool = False
    error: bool = False
    person: str | None = None

    def to_dict(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.text is not None:
            doc["text"] = self.text
        if self.call is not None:
            doc["call"] = dict(self.call)
        if self.result is not None:
            doc["result"] = self.result
        if self.kind == "tool":
            doc["is_action"] = self.is_action
            if self.is_action:
                doc["action_succeeded"] = self.action_succeeded
            doc["mutated"] = self.mutated
            doc["error"] = self.error
        if self.person is not None:
            doc["person"] = self.person
        return doc


@dataclass
class InteractionTrace:
    input_utterance: str
    events: list[AgentEvent] = field(default_factory=list)
    termination: str = ""
    rounds: int = 0

    def to_dict(self) -> dict:
        return {
            "input_utterance": self.input_utterance,
            "events": [event.to_dict() for event in self.events],
            "termination": self.termination,
            "rounds": self.rounds,
        }


def _call_dict(call: ToolCall) -> dict:
    return {
        "call_id": call.call_id,
        "name": call.name,
        "arguments": dict(call.arguments),
    }


class Session:
    """One conversation: scene, config, backend, and growing history.

    A lock serializes interactions; distinct sessions are independent.
    """

    def __init__(self, scene: SceneGraph, backend, config: AgentConfig):
        self.scene = scene
        self.backend = backend
        self.config = config
        self.messages: list[ChatMessage] = [
            ChatMessage("system", build_prompt(config.variant))
        ]
        self.traces: list[InteractionTrace] = []
        self._call_counter = 0
        self._lock = threading.Lock()

    def next_call_id(self) -> str:
        self._call_counter += 1
        return f"call-{self._call_counter}"

    def submit(self, speaker: str, listener: str, text: str, on_event=None) -> InteractionTrace:
        utterance = format_utterance(speaker, listener, text)
        with self._lock:
            return run_interaction(self, utterance, on_event=on_event)


def run_interaction(session: Session, utterance: str, on_event=None) -> InteractionTrace:
    """Drive one interaction to termination.

    Appends the user message, then loops: ask the backend, record any
    assistant text, dispatch tool calls in listed order.  ``stop`` is
    intercepted (recorded, never dispatched) and ends the interaction;
    otherwise the loop ends after ``max_tool_rounds`` backend requests or
    on a backend transport failure.  All messages produced on the way stay
    in the session history, including those of failed interactions.
    """
    trace = InteractionTrace(input_utterance=utterance)

    def record(event: AgentEvent) -> None:
        trace.events.append(event)
        if on_event is not None:
            on_event(event)

    session.messages.append(ChatMessage("user", utterance))

    for _ in range(session.config.max_tool_rounds):
        trace.rounds += 1
        try:
            response = session.backend.complete(
                session.messages, tools.serialize_schemas(), session.config
            )
        except BackendError as exc:
            record(AgentEvent("backend_error", text=str(exc)))
            trace.termination = TERMINATION_BACKEND_ERROR
            break

        calls: list[ToolCall] = []
        malformed: str | None = None
        for payload in response.tool_calls:
            try:
                call = tools.parse_tool_call(payload)
            except tools.ToolError as exc:
                malformed = str(exc)
                break
            if not call.call_id:
                call = replace(call, call_id=session.next_call_id())
            calls.append(call)
        if malformed is not None:
            record(AgentEvent("backend_error", text=malformed))
            trace.termination = TERMINATION_BACKEND_ERROR
            break

        session.messages.append(
            ChatMessage(
                "assistant",
                response.content,
                tool_calls=tuple(_call_dict(call) for call in calls),
            )
        )
        if response.content:
            record(AgentEvent("assistant_text", text=response.content))

        stopped = False
        for call in calls:
            if call.name == "stop":
                record(AgentEvent("stop", call=_call_dict(call)))
                trace.termination = TERMINATION_STOPPED
                stopped = True
                break
            outcome = tools.dispatch(session.scene, call)
            session.messages.append(
                ChatMessage(
                    "tool",
                    outcome.result.text,
                    call_id=call.call_id,
                    name=call.name,
                )
            )
            if outcome.category == "speak":
                record(
                    AgentEvent(
                        "speak",
                        call=_call_dict(call),
                        result=outcome.result.text,
                        person=outcome.speak_person,
                        text=outcome.speak_text,
                    )
                )
            else:
                record(
                    AgentEvent(
                        "tool",
                        call=_call_dict(call),
                        result=outcome.result.text,
                        is_action=outcome.category == "action",
                        action_succeeded=outcome.action_succeeded,
                        mutated=outcome.mutated,
                        error=outcome.error,
                    )
                )
        if stopped:
            break
    else:
        record(AgentEvent("round_limit"))
        trace.termination = TERMINATION_ROUND_LIMIT

    session.traces.append(trace)
    return trace
