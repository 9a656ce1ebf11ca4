"""Wire protocol, session lifecycle, streaming, and isolation."""

import threading

import pytest
from fastapi.testclient import TestClient
from starlette.websockets import WebSocketDisconnect

from supportbot.backends import BackendResponse
from supportbot.server import create_app, validate_wire_message


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


def make_session(client, scene="softdrink", config=None):
    body = {"scene": scene}
    if config:
        body["config"] = config
    response = client.post("/sessions", json=body)
    assert response.status_code == 200
    return response.json()["session_id"]


def submit_msg(text, speaker="Felix", listener="Daniel"):
    return {
        "type": "utterance_submit",
        "payload": {"speaker": speaker, "listener": listener, "text": text},
    }


def control_msg(command, **args):
    return {"type": "control", "payload": {"command": command, **args}}


def read_until(ws, predicate, limit=64):
    seen = []
    for _ in range(limit):
        message = ws.receive_json()
        seen.append(message)
        if predicate(message):
            return seen
    raise AssertionError(f"predicate never satisfied; saw {seen}")


def is_terminal(message):
    return message["type"] == "trace_event" and message["payload"]["kind"] in (
        "stop",
        "round_limit",
        "backend_error",
    )


def object_entry(snapshot_payload, object_id):
    for entry in snapshot_payload["scene"]["objects"]:
        if entry["id"] == object_id:
            return entry
    raise AssertionError(f"{object_id} not in snapshot")


# ---------------------------------------------------------------------------
# lifecycle over HTTP


def test_create_list_delete_sessions(client):
    first = make_session(client)
    second = make_session(client)
    assert first != second
    listing = client.get("/sessions").json()["sessions"]
    assert [s["session_id"] for s in listing] == [first, second]
    assert all(s["scene"] == "softdrink" for s in listing)
    assert all(s["variant"] == "full_rules" for s in listing)
    assert client.delete(f"/sessions/{first}").json() == {"ok": True}
    remaining = client.get("/sessions").json()["sessions"]
    assert [s["session_id"] for s in remaining] == [second]
    assert client.delete(f"/sessions/{first}").status_code == 404


def test_create_session_unknown_fixture_names_it(client):
    response = client.post("/sessions", json={"scene": "atlantis"})
    assert response.status_code == 404
    assert "atlantis" in response.json()["detail"]


def test_create_session_invalid_config(client):
    response = client.post("/sessions", json={"scene": "softdrink", "config": {"variant": "chaotic"}})
    assert response.status_code == 400


def test_create_session_canonicalizes_variant_alias(client):
    make_session(client, config={"variant": "relaxed"})
    listing = client.get("/sessions").json()["sessions"]
    assert listing[0]["variant"] == "relaxed_rules"


def test_scene_catalog_lists_packaged_fixtures(client):
    names = client.get("/scenes").json()["scenes"]
    assert "softdrink" in names
    assert "isolated/softdrink_d1" in names
    assert names == sorted(names)
    assert len(names) >= 18


def test_websocket_to_missing_session_is_refused(client):
    with pytest.raises(WebSocketDisconnect):
        with client.websocket_connect("/sessions/nope/ws"):
            pass


# ---------------------------------------------------------------------------
# snapshots


def test_initial_snapshot_carries_derived_matrices(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        message = ws.receive_json()
    assert message["type"] == "scene_snapshot"
    assert message["seq"] == 1
    payload = message["payload"]
    assert len(payload["scene"]["objects"]) == 7
    assert payload["busy"] == {"Daniel": False, "Felix": False}
    # the box hides the cola-zero bottle from Felix only
    assert payload["visibility"]["Felix"]["the_bottle_of_cola_zero"] is False
    assert payload["visibility"]["Daniel"]["the_bottle_of_cola_zero"] is True
    # the red glass sits on the west side, outside Daniel's reach
    assert payload["reachability"]["Daniel"]["the_red_glass"] is False
    assert payload["reachability"]["Felix"]["the_red_glass"] is True
    assert payload["reachability"]["the_robot"]["the_red_glass"] is True
    assert payload["revision"] == payload["scene"]["revision"]


# ---------------------------------------------------------------------------
# utterance submission streams


def test_unhindered_request_streams_query_then_stop(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_json(submit_msg("Could you hand me the_bottle_of_fanta?"))
        messages = read_until(ws, is_terminal)
    assert [m["type"] for m in messages] == [
        "utterance_submit",
        "trace_event",
        "trace_event",
    ]
    assert messages[0]["payload"]["formatted"] == (
        "Felix said to Daniel: Could you hand me the_bottle_of_fanta?"
    )
    assert messages[1]["payload"]["call"]["name"] == "check_hindering_reasons"
    assert messages[2]["payload"]["kind"] == "stop"


def test_out_of_reach_request_speaks_then_hands_over_with_snapshot(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        first = ws.receive_json()
        revision_before = first["payload"]["revision"]
        ws.send_json(submit_msg("Could you hand me the_red_glass?"))
        messages = read_until(ws, is_terminal)
    kinds = [
        (m["type"], m["payload"].get("kind")) for m in messages
    ]
    assert kinds == [
        ("utterance_submit", None),
        ("trace_event", "tool"),
        ("trace_event", "speak"),
        ("trace_event", "tool"),
        ("scene_snapshot", None),
        ("trace_event", "stop"),
    ]
    # speak precedes the physical action in seq order
    speak_seq = messages[2]["seq"]
    action_seq = messages[3]["seq"]
    assert speak_seq < action_seq
    snapshot = messages[4]["payload"]
    assert object_entry(snapshot, "the_red_glass")["held_by"] == "Felix"
    assert snapshot["revision"] > revision_before


def test_empty_utterance_is_rejected_with_error(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_json(submit_msg("   "))
        message = ws.receive_json()
    assert message["type"] == "error"
    assert "non-empty" in message["payload"]["detail"]


def test_unknown_message_type_and_malformed_frame(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_json({"type": "bogus", "payload": {}})
        message = ws.receive_json()
        assert message["type"] == "error"
        assert "unsupported client message type" in message["payload"]["detail"]
        ws.send_text("{broken")
        message = ws.receive_json()
        assert message["type"] == "error"
        assert "valid JSON" in message["payload"]["detail"]


# ---------------------------------------------------------------------------
# in-flight exclusion


class GatedBackend:
    def __init__(self):
        self.gate = threading.Event()

    def complete(self, messages, schemas, config):
        assert self.gate.wait(timeout=10)
        return BackendResponse(
            content=None, tool_calls=({"name": "stop", "arguments": {}},)
        )


def test_submissions_and_controls_rejected_while_in_flight():
    gated = GatedBackend()
    app = create_app(backend_factory=lambda config, script_path: gated)
    with TestClient(app) as client:
        sid = make_session(client)
        with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
            ws.receive_json()
            ws.send_json(submit_msg("Could you hand me the_red_glass?"))
            assert ws.receive_json()["type"] == "utterance_submit"
            listing = client.get("/sessions").json()["sessions"]
            assert listing[0]["in_flight"] is True
            ws.send_json(submit_msg("Could you hand me the_bottle_of_fanta?"))
            rejected = ws.receive_json()
            assert rejected["type"] == "error"
            assert "interaction in progress" in rejected["payload"]["detail"]
            ws.send_json(control_msg("attach", person_name="Daniel", object_name="the_smartphone"))
            conflict = ws.receive_json()
            assert conflict["type"] == "error"
            assert "interaction in progress" in conflict["payload"]["detail"]
            gated.gate.set()
            read_until(ws, is_terminal)
            # free again: the same control now succeeds
            ws.send_json(control_msg("attach", person_name="Daniel", object_name="the_smartphone"))
            types = [ws.receive_json()["type"] for _ in range(3)]
            assert types == ["control", "scene_snapshot", "ack"]


# ---------------------------------------------------------------------------
# scene controls


def test_attach_detach_toggle_busy_flag(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_json(control_msg("attach", person_name="Daniel", object_name="the_smartphone"))
        echo = ws.receive_json()
        snapshot = ws.receive_json()
        ack = ws.receive_json()
        assert echo["type"] == "control"
        assert snapshot["payload"]["busy"]["Daniel"] is True
        assert ack == {"type": "ack", "seq": ack["seq"], "payload": {"command": "attach"}}
        ws.send_json(control_msg("detach", person_name="Daniel", object_name="the_smartphone"))
        ws.receive_json()
        snapshot = ws.receive_json()
        assert snapshot["payload"]["busy"]["Daniel"] is False


def test_moving_the_box_away_restores_visibility(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        initial = ws.receive_json()
        assert initial["payload"]["visibility"]["Felix"]["the_bottle_of_cola_zero"] is False
        ws.send_json(control_msg("move_object", object_name="the_box", position=[0.0, 0.45, 0.15]))
        ws.receive_json()
        snapshot = ws.receive_json()
        assert snapshot["payload"]["visibility"]["Felix"]["the_bottle_of_cola_zero"] is True


def test_reset_scene_restores_fixture_without_revision_regression(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        initial = ws.receive_json()["payload"]
        ws.send_json(control_msg("move_object", object_name="the_box", position=[0.0, 0.45, 0.15]))
        ws.receive_json()
        moved = ws.receive_json()["payload"]
        ws.receive_json()
        assert moved["scene"] != initial["scene"]
        ws.send_json(control_msg("reset_scene"))
        ws.receive_json()
        reset = ws.receive_json()["payload"]

    def strip(scene_doc):
        return {k: v for k, v in scene_doc.items() if k != "revision"}

    assert strip(reset["scene"]) == strip(initial["scene"])
    assert reset["revision"] > moved["revision"]


def test_invalid_controls_are_rejected(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_json(control_msg("launch_rocket"))
        message = ws.receive_json()
        assert message["type"] == "error"
        assert "unknown control command" in message["payload"]["detail"]
        ws.send_json(control_msg("move_object", object_name="the_moon", position=[0, 0, 0]))
        message = ws.receive_json()
        assert message["type"] == "error"
        assert "rejected" in message["payload"]["detail"]
        ws.send_json(control_msg("move_object", object_name="the_box"))
        message = ws.receive_json()
        assert message["type"] == "error"


# ---------------------------------------------------------------------------
# replay, ordering, isolation


def run_handover(client, sid):
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_json(submit_msg("Could you hand me the_red_glass?"))
        return read_until(ws, is_terminal)


def test_reconnect_with_since_replays_without_gaps_or_duplicates(client):
    sid = make_session(client)
    live = run_handover(client, sid)
    last_seq = live[-1]["seq"]
    cut = live[2]["seq"]
    with client.websocket_connect(f"/sessions/{sid}/ws?since={cut}") as ws:
        replayed = [ws.receive_json() for _ in range(last_seq - cut)]
    assert replayed == [m for m in live if m["seq"] > cut]
    assert [m["seq"] for m in replayed] == list(range(cut + 1, last_seq + 1))
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        full = [ws.receive_json() for _ in range(last_seq)]
    assert [m["seq"] for m in full] == list(range(1, last_seq + 1))


def test_sequences_are_contiguous_and_revisions_monotone(client):
    sid = make_session(client)
    messages = []
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        messages.append(ws.receive_json())
        ws.send_json(control_msg("attach", person_name="Daniel", object_name="the_smartphone"))
        messages.extend(ws.receive_json() for _ in range(3))
        ws.send_json(submit_msg("Could you hand me the_red_glass?"))
        messages.extend(read_until(ws, is_terminal))
        ws.send_json(control_msg("reset_scene"))
        messages.extend(ws.receive_json() for _ in range(3))
    assert [m["seq"] for m in messages] == list(range(1, len(messages) + 1))
    revisions = [
        m["payload"]["revision"] for m in messages if m["type"] == "scene_snapshot"
    ]
    assert revisions == sorted(revisions)
    for message in messages:
        validate_wire_message(message)


def test_busy_receiver_is_moved_not_handed(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_json(control_msg("attach", person_name="Daniel", object_name="the_smartphone"))
        for _ in range(3):
            ws.receive_json()
        ws.send_json(submit_msg("Could you hand me the blue glass?"))
        messages = read_until(ws, is_terminal)
    calls = [
        m["payload"]["call"]["name"]
        for m in messages
        if m["type"] == "trace_event" and m["payload"].get("call")
    ]
    assert calls == ["check_hindering_reasons", "speak", "move_object_to_person", "stop"]


def test_sessions_are_isolated(client):
    sid_a = make_session(client)
    sid_b = make_session(client)
    run_handover(client, sid_a)
    listing = {s["session_id"]: s for s in client.get("/sessions").json()["sessions"]}
    assert listing[sid_a]["revision"] > 0
    assert listing[sid_b]["revision"] == 0
    with client.websocket_connect(f"/sessions/{sid_b}/ws") as ws:
        snapshot = ws.receive_json()
        assert snapshot["seq"] == 1
        ws.send_json(control_msg("reset_scene"))
        echo = ws.receive_json()
        # seq 2 proves nothing from session A leaked into B's log
        assert echo["seq"] == 2


def test_delete_session_closes_open_sockets(client):
    sid = make_session(client)
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        assert client.delete(f"/sessions/{sid}").status_code == 200
        with pytest.raises(WebSocketDisconnect):
            ws.receive_json()


def test_extra_scene_dir_fixtures_are_served(tmp_path):
    from supportbot.scene import fixture_path

    custom = tmp_path / "custom_lab.scene"
    custom.write_text(fixture_path("softdrink").read_text())
    app = create_app(scene_dir=tmp_path)
    with TestClient(app) as client:
        names = client.get("/scenes").json()["scenes"]
        assert "custom_lab" in names and "softdrink" in names
        response = client.post("/sessions", json={"scene": "custom_lab"})
        assert response.status_code == 200
        sid = response.json()["session_id"]
        with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
            snapshot = ws.receive_json()
            assert len(snapshot["payload"]["scene"]["objects"]) == 7
            # reset reloads through the same fallback path
            ws.send_json(control_msg("reset_scene"))
            types = [ws.receive_json()["type"] for _ in range(3)]
            assert types == ["control", "scene_snapshot", "ack"]


# ---------------------------------------------------------------------------
# wire message validator (protocol freeze)


def test_validate_wire_message_accepts_documented_shapes():
    validate_wire_message(
        {
            "type": "trace_event",
            "seq": 3,
            "payload": {"kind": "speak", "text": "hi", "person": "All"},
        }
    )
    validate_wire_message({"type": "ack", "seq": 9, "payload": {"command": "attach"}})
    validate_wire_message({"type": "error", "seq": 1, "payload": {"detail": "x"}})


def test_validate_wire_message_rejects_malformed():
    with pytest.raises(ValueError, match="type"):
        validate_wire_message({"type": "telemetry", "seq": 1, "payload": {}})
    with pytest.raises(ValueError, match="seq"):
        validate_wire_message({"type": "ack", "seq": 0, "payload": {"command": "x"}})
    with pytest.raises(ValueError, match="seq"):
        validate_wire_message({"type": "ack", "seq": True, "payload": {"command": "x"}})
    with pytest.raises(ValueError, match="payload"):
        validate_wire_message({"type": "ack", "seq": 1, "payload": None})
    with pytest.raises(ValueError, match="missing"):
        validate_wire_message({"type": "scene_snapshot", "seq": 1, "payload": {}})
    with pytest.raises(ValueError, match="object"):
        validate_wire_message(["not", "a", "mapping"])
