"""HTTP + WebSocket surface for live interactive sessions.

Lifecycle is plain HTTP (create/list/delete sessions, list scene fixtures).
Each session exposes one WebSocket carrying WireMessages: JSON frames with a
type, a per-session gap-free seq, and a type-specific payload.  Every
server-side message is appended to the session log before delivery, so a
client reconnecting with ?since=<last seen seq> replays exactly what it
missed; duplicates are impossible to miss-handle because consumers dedup on
seq.  Within a session, utterance submissions and scene controls are mutually
exclusive: while an interaction is in flight both are rejected, never queued.
"""

import asyncio
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from . import scene as scenemod
from .agent import TERMINAL_EVENT_KINDS, AgentConfig, Session, format_utterance
from .backends import BackendError, make_backend
from .geometry import Vec3
from .scene import (
    ROBOT_ID,
    Attach,
    Detach,
    MoveObject,
    SceneError,
    SceneGraph,
    load_fixture,
)

WIRE_TYPES = (
    "scene_snapshot",
    "utterance_submit",
    "trace_event",
    "control",
    "ack",
    "error",
)
CONTROL_COMMANDS = ("move_object", "attach", "detach", "reset_scene")

# required payload keys per server-sent message type, frozen by the protocol
# reference and its round-trip tests
_PAYLOAD_KEYS = {
    "scene_snapshot": ("scene", "busy", "visibility", "reachability", "revision"),
    "utterance_submit": ("speaker", "listener", "text", "formatted"),
    "trace_event": ("kind",),
    "control": ("command",),
    "ack": ("command",),
    "error": ("detail",),
}


def validate_wire_message(message: Any) -> None:
    """Raise ValueError unless message is a well-formed server WireMessage."""
    if not isinstance(message, dict):
        raise ValueError("wire message must be an object")
    msg_type = message.get("type")
    if msg_type not in WIRE_TYPES:
        raise ValueError(f"unknown wire message type {msg_type!r}")
    seq = message.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 1:
        raise ValueError("seq must be a positive integer")
    payload = message.get("payload")
    if not isinstance(payload, dict):
        raise ValueError("payload must be an object")
    missing = [key for key in _PAYLOAD_KEYS[msg_type] if key not in payload]
    if missing:
        raise ValueError(f"{msg_type} payload missing keys: {', '.join(missing)}")


def snapshot_payload(scene: SceneGraph) -> dict:
    """Scene state plus derived flags so clients never do geometry."""
    persons = scenemod.list_persons(scene)
    objects = scenemod.list_objects(scene)
    return {
        "scene": scene.to_dict(),
        "busy": {p: scenemod.is_busy(scene, p) for p in persons},
        "visibility": {
            p: {o: scenemod.is_visible(scene, p, o) for o in objects}
            for p in persons
        },
        "reachability": {
            agent: {o: scenemod.is_reachable(scene, agent, o) for o in objects}
            for agent in [*persons, ROBOT_ID]
        },
        "revision": scene.revision,
    }


def list_fixture_names(scene_dir=None) -> list[str]:
    root = Path(scenemod.__file__).parent / "scenes"
    names = {
        str(path.relative_to(root).with_suffix("").as_posix())
        for path in root.rglob("*.scene")
    }
    if scene_dir is not None:
        extra = Path(scene_dir)
        names.update(
            str(path.relative_to(extra).with_suffix("").as_posix())
            for path in extra.rglob("*.scene")
        )
    return sorted(names)


def resolve_fixture(name: str, scene_dir=None) -> SceneGraph:
    """Load a packaged fixture, falling back to scene_dir when given."""
    try:
        return load_fixture(name)
    except SceneError:
        if scene_dir is not None:
            path = Path(scene_dir) / f"{name}.scene"
            if path.is_file():
                return scenemod.load_scene(path)
        raise


@dataclass
class LiveSession:
    session_id: str
    fixture: str
    config: AgentConfig
    agent: Session
    reload: Any = None
    log: list[dict] = field(default_factory=list)
    seq: int = 0
    in_flight: bool = False
    watchers: list[asyncio.Queue] = field(default_factory=list)

    @property
    def scene(self) -> SceneGraph:
        return self.agent.scene


def _append(sess: LiveSession, msg_type: str, payload: dict) -> dict:
    sess.seq += 1
    message = {"type": msg_type, "seq": sess.seq, "payload": payload}
    sess.log.append(message)
    for queue in list(sess.watchers):
        queue.put_nowait(message)
    return message


def _append_error(sess: LiveSession, detail: str, request: Optional[str] = None) -> None:
    payload = {"detail": detail}
    if request is not None:
        payload["request"] = request
    _append(sess, "error", payload)


def _launch_interaction(
    sess: LiveSession, loop: asyncio.AbstractEventLoop, speaker: str, listener: str, text: str
) -> None:
    """Run the agent loop in a worker thread, streaming events to the log."""

    def on_event(event):
        def apply():
            _append(sess, "trace_event", event.to_dict())
            if event.mutated:
                _append(sess, "scene_snapshot", snapshot_payload(sess.scene))
            if event.kind in TERMINAL_EVENT_KINDS:
                sess.in_flight = False

        loop.call_soon_threadsafe(apply)

    def work():
        try:
            sess.agent.submit(speaker, listener, text, on_event=on_event)
        finally:
            loop.call_soon_threadsafe(lambda: setattr(sess, "in_flight", False))

    loop.run_in_executor(None, work)


def _handle_submit(sess: LiveSession, loop: asyncio.AbstractEventLoop, payload: dict) -> None:
    if sess.in_flight:
        _append_error(sess, "interaction in progress", request="utterance_submit")
        return
    speaker = payload.get("speaker")
    listener = payload.get("listener")
    text = payload.get("text")
    if not all(isinstance(v, str) and v.strip() for v in (speaker, listener, text)):
        _append_error(
            sess,
            "utterance_submit requires non-empty speaker, listener, and text",
            request="utterance_submit",
        )
        return
    _append(
        sess,
        "utterance_submit",
        {
            "speaker": speaker,
            "listener": listener,
            "text": text,
            "formatted": format_utterance(speaker, listener, text),
        },
    )
    sess.in_flight = True
    _launch_interaction(sess, loop, speaker, listener, text)


def _apply_control(sess: LiveSession, payload: dict) -> None:
    command = payload.get("command")
    if command == "move_object":
        position = payload["position"]
        center = Vec3(float(position[0]), float(position[1]), float(position[2]))
        scenemod.mutate(sess.scene, MoveObject(payload["object_name"], center))
    elif command == "attach":
        scenemod.mutate(sess.scene, Attach(payload["person_name"], payload["object_name"]))
    elif command == "detach":
        scenemod.mutate(sess.scene, Detach(payload["person_name"], payload["object_name"]))
    elif command == "reset_scene":
        fresh = sess.reload()
        # revision keeps climbing across resets so snapshot consumers never
        # observe a regression
        fresh.revision = sess.scene.revision + 1
        sess.agent.scene = fresh
    else:
        raise ValueError(f"unknown control command {command!r}")


def _handle_control(sess: LiveSession, payload: dict) -> None:
    if sess.in_flight:
        _append_error(sess, "interaction in progress", request="control")
        return
    command = payload.get("command")
    try:
        _apply_control(sess, payload)
    except (KeyError, IndexError, TypeError, ValueError, SceneError) as exc:
        _append_error(sess, f"control rejected: {exc}", request="control")
        return
    _append(sess, "control", dict(payload))
    _append(sess, "scene_snapshot", snapshot_payload(sess.scene))
    _append(sess, "ack", {"command": command})


def _handle_client_message(
    sess: LiveSession, loop: asyncio.AbstractEventLoop, message: Any
) -> None:
    if not isinstance(message, dict):
        _append_error(sess, "frames must be JSON objects")
        return
    msg_type = message.get("type")
    payload = message.get("payload")
    payload = payload if isinstance(payload, dict) else {}
    if msg_type == "utterance_submit":
        _handle_submit(sess, loop, payload)
    elif msg_type == "control":
        _handle_control(sess, payload)
    else:
        _append_error(sess, f"unsupported client message type {msg_type!r}")


def create_app(backend_factory=None, scene_dir=None, static_dir=None) -> FastAPI:
    """Build the server; backend_factory overrides backend construction in tests."""
    app = FastAPI(title="supportbot", version="0.1.0")
    registry: dict[str, LiveSession] = {}
    counter = {"next": 1}

    if backend_factory is None:
        def backend_factory(config: AgentConfig, script_path):
            return make_backend(config.backend, script_path=script_path)

    @app.get("/scenes")
    async def get_scenes():
        return {"scenes": list_fixture_names(scene_dir)}

    @app.post("/sessions")
    async def create_session(body: dict):
        fixture = body.get("scene", "softdrink")
        try:
            scene = resolve_fixture(fixture, scene_dir)
        except SceneError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        try:
            config = AgentConfig.from_dict(body.get("config") or {})
            backend = backend_factory(config, body.get("script_path"))
        except (ValueError, BackendError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session_id = f"s-{counter['next']}"
        counter["next"] += 1
        sess = LiveSession(
            session_id=session_id,
            fixture=fixture,
            config=config,
            agent=Session(scene, backend, config),
            reload=lambda: resolve_fixture(fixture, scene_dir),
        )
        registry[session_id] = sess
        _append(sess, "scene_snapshot", snapshot_payload(sess.scene))
        return {"session_id": session_id, "scene": fixture}

    @app.get("/sessions")
    async def get_sessions():
        return {
            "sessions": [
                {
                    "session_id": sess.session_id,
                    "scene": sess.fixture,
                    "variant": sess.config.variant,
                    "backend": sess.config.backend,
                    "in_flight": sess.in_flight,
                    "revision": sess.scene.revision,
                }
                for sess in registry.values()
            ]
        }

    @app.delete("/sessions/{session_id}")
    async def delete_session(session_id: str):
        sess = registry.pop(session_id, None)
        if sess is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        for queue in list(sess.watchers):
            queue.put_nowait(None)
        return {"ok": True}

    @app.websocket("/sessions/{session_id}/ws")
    async def session_ws(websocket: WebSocket, session_id: str, since: int = 0):
        sess = registry.get(session_id)
        if sess is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()
        # register before snapshotting the backlog: appends are synchronous
        # on this loop, so nothing can slip between the two lines
        sess.watchers.append(queue)
        backlog = [m for m in sess.log if m["seq"] > since]
        recv_task = asyncio.create_task(websocket.receive_json())
        queue_task = asyncio.create_task(queue.get())
        try:
            for message in backlog:
                await websocket.send_json(message)
            while True:
                done, _ = await asyncio.wait(
                    {recv_task, queue_task}, return_when=asyncio.FIRST_COMPLETED
                )
                if queue_task in done:
                    item = queue_task.result()
                    if item is None:
                        break  # session deleted
                    await websocket.send_json(item)
                    queue_task = asyncio.create_task(queue.get())
                if recv_task in done:
                    try:
                        incoming = recv_task.result()
                    except WebSocketDisconnect:
                        break
                    except ValueError:
                        _append_error(sess, "frames must be valid JSON")
                        incoming = None
                    if incoming is not None:
                        _handle_client_message(sess, loop, incoming)
                    recv_task = asyncio.create_task(websocket.receive_json())
        except WebSocketDisconnect:
            pass
        finally:
            recv_task.cancel()
            queue_task.cancel()
            if queue in sess.watchers:
                sess.watchers.remove(queue)
            try:
                await websocket.close()
            except Exception:
                pass  # peer already gone

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


app = create_app()
