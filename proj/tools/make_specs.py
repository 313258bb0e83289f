#!/usr/bin/env python3
"""Regenerate the example experiment specs under specs/."""

import json
import math
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "specs"

CORE = [round((12 + i) / 10, 9) for i in range(14)]
UNCORE = [round((12 + i) / 10, 9) for i in range(19)]

LEARNER = {"alpha": 0.1, "gamma": 0.5, "epsilon": 0.25, "stay_bias": -0.1}
METER = {"static_offset_w": 70.0, "noise_sigma_rel": 0.005}


def bowl(core, uncore, cc, cu, base):
    return {"kind": "bowl", "min_core_ghz": core, "min_uncore_ghz": uncore,
            "curv_core": cc, "curv_uncore": cu, "base_w": base}


def trap_table():
    rows = []
    for c in CORE:
        row = []
        for u in UNCORE:
            g = 60 + 30 * ((c - 1.5) ** 2 + (u - 1.8) ** 2)
            l = 85 + 1500 * ((c - 2.3) ** 2 + (u - 2.8) ** 2)
            row.append(math.floor(min(g, l) * 100 + 0.5) / 100)
        rows.append(row)
    return {"kind": "table", "powers_w": rows}


def spec(iterations, start, default, regions, **extra):
    s = {"learner": LEARNER, "meter": METER, "restart_mode": "discard",
         "processes": 1, "iterations": iterations, "seed": 0,
         "start": {"core_ghz": start[0], "uncore_ghz": start[1]},
         "default": {"core_ghz": default[0], "uncore_ghz": default[1]},
         "regions": regions}
    s.update(extra)
    return s


def region(path, surface, duration_ms=1000, sensitivity=0.0):
    return {"path": path, "duration_ms": duration_ms, "runtime_sensitivity": sensitivity, "surface": surface}


REFERENCE_BOWL = bowl(1.2, 2.15, 100, 80, 60)

SPECS = {
    "fig2-replica.json": spec(200, (1.9, 2.1), (2.5, 3.0), [region("main/solve", REFERENCE_BOWL)]),
    "savings.json": spec(500, (2.5, 3.0), (2.5, 3.0), [region("main/solve", bowl(1.8, 2.4, 50, 30, 50))]),
    "phase-change.json": spec(500, (1.9, 2.1), (2.5, 3.0), [region("main/solve", REFERENCE_BOWL)],
                              phase_changes=[{"iteration": 250, "region": "main/solve",
                                              "surface": bowl(1.8, 2.6, 100, 80, 60)}]),
    "trap.json": spec(500, (2.5, 3.0), (2.5, 3.0), [region("main/solve", trap_table())]),
    "multi-region.json": spec(100, (2.0, 2.4), (2.5, 3.0), [
        region("main/timestep/rhs", bowl(2.0, 2.0, 60, 40, 55), 200, 0.3),
        region("main/timestep/halo", bowl(1.4, 2.8, 20, 60, 30), 20),
        region("main/timestep/solver=cg/sweep", bowl(1.6, 2.6, 80, 50, 50), 300, 0.1),
        region("main/io", bowl(1.2, 1.2, 10, 10, 20), 50),
    ], processes=2),
}

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for name, body in SPECS.items():
        (OUT / name).write_text(json.dumps(body, indent=2) + "\n")
