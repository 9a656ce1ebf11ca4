"""Chat backends: scripted replay, deterministic oracle, and remote HTTP.

A backend receives the session's message history plus the serialized tool
schemas and answers with one assistant message (text and/or tool calls).
Backends hold no conversation state of their own; everything they need is
reconstructed from the history, which keeps retries and parallel sessions
trivially safe.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import requests

API_KEY_ENV = "SUPPORTBOT_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class BackendError(Exception):
    """Transport or protocol failure; terminates the interaction."""


@dataclass(frozen=True)
class BackendResponse:
    """One assistant turn as returned by a backend."""

    content: str | None = None
    tool_calls: tuple[dict, ...] = ()


def _stop_response() -> BackendResponse:
    return BackendResponse(tool_calls=({"name": "stop", "arguments": {}},))


def _call(name: str, **arguments) -> dict:
    return {"name": name, "arguments": arguments}


def _rounds_since_last_user(messages) -> int:
    count = 0
    for message in reversed(messages):
        if message.role == "user":
            break
        if message.role == "assistant":
            count += 1
    return count


def _interaction_index(messages) -> int:
    return sum(1 for message in messages if message.role == "user") - 1


# ---------------------------------------------------------------------------
# scripted


class ScriptedBackend:
    """Replays a fixed list of responses.

    ``script`` is a list with one entry per interaction; each entry is the
    list of responses for that interaction's rounds.  A response is a dict
    with optional ``content`` and ``tool_calls`` keys, the latter a list of
    ``{"name": ..., "arguments": {...}}`` items.  Requests past the end of a
    round list answer with a lone ``stop`` call, unless ``repeat_last`` is
    set, in which case the final scripted response repeats forever (used to
    exercise the round limit).
    """

    def __init__(self, script: Sequence[Sequence[dict]], repeat_last: bool = False):
        self.script = [list(responses) for responses in script]
        self.repeat_last = repeat_last

    @classmethod
    def from_file(cls, path: str | Path, repeat_last: bool = False) -> "ScriptedBackend":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(doc, dict):
            repeat_last = bool(doc.get("repeat_last", repeat_last))
            doc = doc["interactions"]
        return cls(doc, repeat_last=repeat_last)

    def complete(self, messages, schemas, config) -> BackendResponse:
        interaction = _interaction_index(messages)
        round_index = _rounds_since_last_user(messages)
        if 0 <= interaction < len(self.script):
            responses = self.script[interaction]
            if round_index < len(responses):
                spec = responses[round_index]
            elif self.repeat_last and responses:
                spec = responses[-1]
            else:
                return _stop_response()
            return BackendResponse(
                content=spec.get("content"),
                tool_calls=tuple(spec.get("tool_calls", ())),
            )
        return _stop_response()


# ---------------------------------------------------------------------------
# oracle

_UTTERANCE_RE = re.compile(r"^(?P<speaker>\S+) said to (?P<listener>\S+): (?P<text>.*)$", re.S)

# The five isolated request templates; group 1 captures the object name.
_HAND_ME_RES = (
    re.compile(r"^(?:[A-Za-z_]+, )?[Cc]ould you hand me (.+)\?$"),
    re.compile(r"^(?:[A-Za-z_]+, )?[Cc]ould you pass me (.+)\?$"),
    re.compile(r"^Please hand me (.+)\.$"),
    re.compile(r"^Give me (.+)\.$"),
)

# Situated-scenario utterances (fixed fixture sentences).
_SIT_DRINKS_QUESTION = "Daniel, what soft drinks do we have?"
_SIT_WRONG_ANSWER = "We have cola and fanta."
_SIT_POUR_REQUEST = "Could you pour me some cola?"
_SIT_SAME_NO_SUGAR = "Could you give me the same, but without sugar?"

_SIT_CORRECTION = "You also have cola_zero, a sugar-free cola."
_SIT_GLASSES = ("the_blue_glass", "the_red_glass")
_SIT_COLA = "the_bottle_of_cola"
_SIT_COLA_ZERO = "the_bottle_of_cola_zero"


@dataclass(frozen=True)
class _Step:
    """One dispatched call of the current interaction, with its result."""

    name: str
    arguments: dict
    result: str


class OracleBackend:
    """Deterministic rule policy for the request templates and the situated
    five-step script.  Anything it cannot parse answers with ``stop``."""

    def complete(self, messages, schemas, config) -> BackendResponse:
        utterance = None
        for message in reversed(messages):
            if message.role == "user":
                utterance = message.content
                break
        if utterance is None:
            return _stop_response()
        match = _UTTERANCE_RE.match(utterance)
        if not match:
            return _stop_response()
        speaker = match.group("speaker")
        listener = match.group("listener")
        text = match.group("text")
        steps = self._current_steps(messages)

        if text == _SIT_DRINKS_QUESTION:
            return self._drinks_question(listener, steps)
        if text == _SIT_WRONG_ANSWER:
            return self._wrong_answer(steps)
        if text == _SIT_POUR_REQUEST:
            return self._pour_request(speaker, listener, messages, steps)
        if text == _SIT_SAME_NO_SUGAR:
            return self._same_no_sugar(speaker, listener, messages, steps)

        target = self._parse_hand_me(text)
        if target is not None:
            return self._hand_me(speaker, listener, target, steps)
        return _stop_response()

    # -- history reconstruction

    @staticmethod
    def _current_steps(messages) -> list[_Step]:
        """Calls already made in the current interaction, with results."""
        tail = []
        for message in reversed(messages):
            if message.role == "user":
                break
            tail.append(message)
        tail.reverse()
        calls = {}
        order = []
        for message in tail:
            if message.role == "assistant":
                for call in message.tool_calls:
                    calls[call["call_id"]] = call
                    order.append(call["call_id"])
            elif message.role == "tool" and message.call_id in calls:
                call = calls[message.call_id]
                calls[message.call_id] = {**call, "result": message.content}
        steps = []
        for call_id in order:
            call = calls[call_id]
            steps.append(
                _Step(
                    name=call["name"],
                    arguments=dict(call.get("arguments", {})),
                    result=call.get("result", ""),
                )
            )
        return steps

    @staticmethod
    def _confirmations(messages) -> list[str]:
        """All tool-result sentences across the whole session so far."""
        return [m.content for m in messages if m.role == "tool" and m.content]

    # -- utterance parsing

    @staticmethod
    def _parse_hand_me(text: str) -> str | None:
        for pattern in _HAND_ME_RES:
            match = pattern.match(text)
            if match:
                return match.group(1).strip().replace(" ", "_")
        return None

    @staticmethod
    def _parse_hindrance(result: str, person: str, obj: str):
        busy = f"{person} is busy." in result
        cannot_see = f"{person} cannot see {obj}." in result
        cannot_reach = f"{person} cannot reach {obj}." in result
        return busy, cannot_see, cannot_reach

    @staticmethod
    def _explanation(sender: str, receiver: str, obj: str, busy, cannot_see, cannot_reach) -> str:
        clauses = []
        if busy:
            clauses.append(f"{receiver} is busy")
        if cannot_see:
            clauses.append(f"{receiver} cannot see {obj}")
        if cannot_reach:
            clauses.append(f"{receiver} cannot reach {obj}")
        return f"I will help {sender} because {' and '.join(clauses)}."

    # -- isolated requests

    def _hand_me(self, sender, receiver, obj, steps) -> BackendResponse:
        if receiver == "the_robot":
            # Addressed directly: help without checking anyone's hindrance.
            if not steps:
                return BackendResponse(
                    tool_calls=(
                        _call("hand_object_over_to_person", object_name=obj, person_name=sender),
                    )
                )
            return _stop_response()
        if not steps:
            return BackendResponse(
                tool_calls=(
                    _call("check_hindering_reasons", person_name=receiver, object_name=obj),
                )
            )
        busy, cannot_see, cannot_reach = self._parse_hindrance(
            steps[0].result, receiver, obj
        )
        if not (busy or cannot_see or cannot_reach):
            return _stop_response()
        if len(steps) == 1:
            explanation = self._explanation(
                sender, receiver, obj, busy, cannot_see, cannot_reach
            )
            return BackendResponse(
                tool_calls=(_call("speak", person_name="All", text=explanation),)
            )
        if len(steps) == 2:
            action = "move_object_to_person" if busy else "hand_object_over_to_person"
            return BackendResponse(
                tool_calls=(_call(action, object_name=obj, person_name=sender),)
            )
        return _stop_response()

    # -- situated steps

    def _drinks_question(self, receiver, steps) -> BackendResponse:
        if not steps:
            return BackendResponse(
                tool_calls=(_call("is_person_busy_or_idle", person_name=receiver),)
            )
        return _stop_response()

    def _wrong_answer(self, steps) -> BackendResponse:
        if not steps:
            return BackendResponse(
                tool_calls=(_call("speak", person_name="All", text=_SIT_CORRECTION),)
            )
        return _stop_response()

    def _delivered_glass(self, messages) -> str:
        """The glass most recently handed or moved to Felix."""
        delivered = ""
        for sentence in self._confirmations(messages):
            for glass in _SIT_GLASSES:
                if sentence in (
                    f"Handed {glass} over to Felix.",
                    f"Moved {glass} to Felix.",
                ):
                    delivered = glass
        return delivered or _SIT_GLASSES[1]

    def _used_glasses(self, messages) -> set[str]:
        used = set()
        for sentence in self._confirmations(messages):
            for glass in _SIT_GLASSES:
                if glass in sentence and (
                    sentence.startswith("Poured ")
                    or sentence.startswith("Handed ")
                    or sentence.startswith("Moved ")
                ):
                    used.add(glass)
        return used

    def _pour_request(self, sender, receiver, messages, steps) -> BackendResponse:
        if not steps:
            return BackendResponse(
                tool_calls=(
                    _call("check_hindering_reasons", person_name=receiver, object_name=_SIT_COLA),
                )
            )
        busy, cannot_see, cannot_reach = self._parse_hindrance(
            steps[0].result, receiver, _SIT_COLA
        )
        if not (busy or cannot_see or cannot_reach):
            return _stop_response()
        if len(steps) == 1:
            explanation = self._explanation(
                sender, receiver, _SIT_COLA, busy, cannot_see, cannot_reach
            )
            return BackendResponse(
                tool_calls=(_call("speak", person_name="All", text=explanation),)
            )
        if len(steps) == 2:
            glass = self._delivered_glass(messages)
            return BackendResponse(
                tool_calls=(
                    _call("pour_into", source_container_name=_SIT_COLA, target_container_name=glass),
                )
            )
        return _stop_response()

    def _same_no_sugar(self, sender, receiver, messages, steps) -> BackendResponse:
        if not steps:
            return BackendResponse(
                tool_calls=(
                    _call(
                        "check_hindering_reasons",
                        person_name=receiver,
                        object_name=_SIT_COLA_ZERO,
                    ),
                )
            )
        busy, cannot_see, cannot_reach = self._parse_hindrance(
            steps[0].result, receiver, _SIT_COLA_ZERO
        )
        if not (busy or cannot_see or cannot_reach):
            return _stop_response()
        if len(steps) == 1:
            # The delivery mode depends on whether the requester is busy.
            return BackendResponse(
                tool_calls=(_call("is_person_busy_or_idle", person_name=sender),)
            )
        if len(steps) == 2:
            explanation = self._explanation(
                sender, receiver, _SIT_COLA_ZERO, busy, cannot_see, cannot_reach
            )
            return BackendResponse(
                tool_calls=(_call("speak", person_name="All", text=explanation),)
            )
        if len(steps) == 3:
            used = self._used_glasses(messages)
            fresh = next((g for g in sorted(_SIT_GLASSES) if g not in used), _SIT_GLASSES[0])
            return BackendResponse(
                tool_calls=(
                    _call(
                        "pour_into",
                        source_container_name=_SIT_COLA_ZERO,
                        target_container_name=fresh,
                    ),
                )
            )
        if len(steps) == 4:
            poured = steps[3].arguments.get("target_container_name", _SIT_GLASSES[0])
            sender_busy = f"{sender} is busy." in steps[1].result
            action = "move_object_to_person" if sender_busy else "hand_object_over_to_person"
            return BackendResponse(
                tool_calls=(_call(action, object_name=poured, person_name=sender),)
            )
        return _stop_response()


# ---------------------------------------------------------------------------
# remote


class RemoteChatBackend:
    """Chat-completions HTTP client.

    Uses one ``requests.post`` per call (no shared Session object), which
    keeps the client safe for concurrent use across agent sessions.
    """

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str | None = None,
        timeout: float = 120.0,
    ):
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not key:
            raise BackendError(
                f"remote backend needs an API key: set {API_KEY_ENV}"
            )
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._key = key

    def _wire_messages(self, messages) -> list[dict]:
        wire = []
        pending: list[tuple[str, str]] = []  # (call_id, name) awaiting results

        def flush_pending():
            # The stop call is intercepted by the loop and never answered;
            # chat-completions endpoints require a result for every call.
            for call_id, name in pending:
                wire.append(
                    {
                        "role": "tool",
                        "tool_call_id": call_id,
                        "name": name,
                        "content": "Stopped." if name == "stop" else "Not executed.",
                    }
                )
            pending.clear()

        for message in messages:
            if message.role == "tool":
                pending[:] = [(c, n) for c, n in pending if c != message.call_id]
                wire.append(
                    {
                        "role": "tool",
                        "tool_call_id": message.call_id,
                        "name": message.name,
                        "content": message.content or "",
                    }
                )
                continue
            flush_pending()
            if message.role == "assistant":
                entry: dict = {"role": "assistant", "content": message.content}
                if message.tool_calls:
                    entry["tool_calls"] = [
                        {
                            "id": call["call_id"],
                            "type": "function",
                            "function": {
                                "name": call["name"],
                                "arguments": json.dumps(call["arguments"], sort_keys=True),
                            },
                        }
                        for call in message.tool_calls
                    ]
                    pending.extend(
                        (call["call_id"], call["name"]) for call in message.tool_calls
                    )
                wire.append(entry)
            else:
                wire.append({"role": message.role, "content": message.content or ""})
        flush_pending()
        return wire

    def complete(self, messages, schemas, config) -> BackendResponse:
        payload = {
            "model": config.model_name,
            "temperature": config.temperature,
            "seed": config.random_seed,
            "messages": self._wire_messages(messages),
            "tools": schemas,
        }
        try:
            response = requests.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {self._key}"},
                timeout=self.timeout,
            )
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as exc:
            raise BackendError(f"chat completion request failed: {exc}") from exc
        except ValueError as exc:
            raise BackendError(f"malformed completion response: {exc}") from exc
        try:
            message = data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"completion response missing message: {exc}") from exc
        return BackendResponse(
            content=message.get("content"),
            tool_calls=tuple(message.get("tool_calls") or ()),
        )


BACKEND_NAMES = ("oracle", "scripted", "remote")


def make_backend(
    name: str,
    script_path: str | Path | None = None,
    base_url: str = DEFAULT_BASE_URL,
    api_key: str | None = None,
):
    """Build a backend by selector name."""
    if name == "oracle":
        return OracleBackend()
    if name == "scripted":
        if script_path is None:
            raise ValueError("scripted backend needs a script file")
        return ScriptedBackend.from_file(script_path)
    if name == "remote":
        return RemoteChatBackend(base_url=base_url, api_key=api_key)
    raise ValueError(f"unknown backend {name!r}")
