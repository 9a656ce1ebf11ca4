#!/usr/bin/env python3
"""Regenerate the packaged scene fixtures.

The emitted JSON files are the source of truth; this script exists so the
shared table layout stays consistent when a placement needs to change.
Run from the repo root: python3 scripts/generate_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

SCENES = Path(__file__).resolve().parent.parent / "src" / "supportbot" / "scenes"

BOTTLE = [0.04, 0.04, 0.12]
GLASS = [0.035, 0.035, 0.06]
CUP = [0.04, 0.04, 0.05]
POT = [0.07, 0.07, 0.1]
BOX = [0.08, 0.12, 0.15]
PHONE = [0.04, 0.08, 0.01]

PERSONS = [
    {
        "id": "Felix",
        "eye": [-0.95, 0.0, 0.45],
        "gaze": [1.0, 0.0, 0.0],
        "reach_origin": [-0.85, 0.0, 0.25],
        "reach_radius": 0.8,
    },
    {
        "id": "Daniel",
        "eye": [0.95, 0.0, 0.45],
        "gaze": [-1.0, 0.0, 0.0],
        "reach_origin": [0.85, 0.0, 0.25],
        "reach_radius": 0.8,
    },
]

ROBOT = {"id": "the_robot", "reach_origin": [0.0, 0.0, 0.4], "reach_radius": 1.0}

# Scenario object kits: (id, half_extents, affordances, fill)
KITS = {
    "softdrink": [
        ("the_bottle_of_cola", BOTTLE, ["graspable", "pourable"], "cola"),
        ("the_bottle_of_cola_zero", BOTTLE, ["graspable", "pourable"], "cola_zero"),
        ("the_bottle_of_fanta", BOTTLE, ["graspable", "pourable"], "fanta"),
        ("the_red_glass", GLASS, ["graspable", "container"], None),
        ("the_blue_glass", GLASS, ["graspable", "container"], None),
    ],
    "coffee": [
        ("the_coffee_pot", POT, ["graspable", "pourable"], "coffee"),
        ("the_bottle_of_milk", BOTTLE, ["graspable", "pourable"], "milk"),
        ("the_bottle_of_oat_milk", BOTTLE, ["graspable", "pourable"], "oat_milk"),
        ("the_large_cup", CUP, ["graspable", "container"], None),
        ("the_small_cup", CUP, ["graspable", "container"], None),
    ],
    "dinner": [
        ("the_bottle_of_wine", BOTTLE, ["graspable", "pourable"], "wine"),
        ("the_bottle_of_beer", BOTTLE, ["graspable", "pourable"], "beer"),
        ("the_bottle_of_soda", BOTTLE, ["graspable", "pourable"], "soda"),
        ("the_wine_glass", GLASS, ["graspable", "container"], None),
        ("the_large_glass", GLASS, ["graspable", "container"], None),
    ],
}

# Five tabletop slots; slot 0 is the requested-object slot and keeps the
# westward delivery corridor along y=0 free of other objects.
SLOTS = [(0.35, 0.0), (0.15, 0.25), (0.15, -0.25), (0.5, 0.2), (0.5, -0.2)]
BOX_PARK = (0.0, 0.38)
PHONE_SPOT = (0.7, -0.35)


def obj(oid, half, affordances, fill, xy):
    entry = {
        "id": oid,
        "center": [xy[0], xy[1], half[2]],
        "half_extents": list(half),
        "affordances": list(affordances),
    }
    if fill is not None:
        entry["fill_contents"] = fill
    return entry


def props(kit, rotation):
    entries = []
    for i, (oid, half, aff, fill) in enumerate(kit):
        slot = SLOTS[(i - rotation) % len(SLOTS)]
        entries.append(obj(oid, half, aff, fill, slot))
    entries.append(obj("the_box", BOX, ["graspable", "occluder"], None, BOX_PARK))
    entries.append(obj("the_smartphone", PHONE, ["graspable", "busy_marker"], None, PHONE_SPOT))
    return entries


def scene(objects):
    return {"objects": objects, "persons": PERSONS, "robot": ROBOT}


def write(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {path}")


def main():
    # Interactive demo scene: the box hides the cola-zero bottle from Felix,
    # the red glass sits out of Daniel's reach on the west side.
    softdrink = scene(
        [
            obj("the_bottle_of_cola", BOTTLE, ["graspable", "pourable"], "cola", (0.35, 0.22)),
            obj("the_bottle_of_cola_zero", BOTTLE, ["graspable", "pourable"], "cola_zero", (-0.15, -0.3)),
            obj("the_bottle_of_fanta", BOTTLE, ["graspable", "pourable"], "fanta", (0.45, -0.15)),
            obj("the_red_glass", GLASS, ["graspable", "container"], None, (-0.35, 0.25)),
            obj("the_blue_glass", GLASS, ["graspable", "container"], None, (-0.05, 0.32)),
            obj("the_box", BOX, ["graspable", "occluder"], None, (-0.35, -0.225)),
            obj("the_smartphone", PHONE, ["graspable", "busy_marker"], None, PHONE_SPOT),
        ]
    )
    write(SCENES / "softdrink.scene", softdrink)
    write(SCENES / "coffee.scene", scene(props(KITS["coffee"], 0)))
    write(SCENES / "dinner.scene", scene(props(KITS["dinner"], 0)))
    for name, kit in KITS.items():
        for d in range(1, 6):
            write(SCENES / "isolated" / f"{name}_d{d}.scene", scene(props(kit, d - 1)))


if __name__ == "__main__":
    main()
