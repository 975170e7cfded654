"""Scenario data model, JSON (de)serialization, occupancy-map loading and the
two built-in scenarios: bicycle parking with a moving vehicle, and
differential-drive navigation through a cluttered map.

A Scenario wraps a canonical JSON-serializable dict (so serialize -> parse ->
serialize round-trips byte-identically) and exposes runtime objects (model,
footprint, obstacles, controller configs) built lazily from it.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .controller import QuadraticFormConfig, TimeOptimalConfig
from .dynamics import ControlBounds, make_model
from .geometry import (
    Disc,
    MovingStadiumObstacle,
    PointObstacle,
    SegmentObstacle,
    Stadium,
)
from .transcription import BoundaryData, CollocationKernel, GridMode


def load_map(path_or_text, from_text: bool = False):
    """Parse an ASCII occupancy grid into point obstacles at cell centers.

    Format: header line "width height resolution" (meters, meters, m/cell),
    then rows of '#' (occupied) / '.' (free), first row at the top.
    Each occupied cell becomes a point obstacle with radius = resolution / 2.
    """
    if from_text:
        text = path_or_text
    else:
        with open(path_or_text) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty map file")
    try:
        width, height, res = (float(v) for v in lines[0].split())
    except ValueError as exc:
        raise ValueError("map header must be 'width height resolution'") from exc
    rows = lines[1:]
    n_rows = len(rows)
    obstacles = []
    for j, row in enumerate(rows):
        for i, ch in enumerate(row):
            if ch == "#":
                x = (i + 0.5) * res
                y = (n_rows - j - 0.5) * res
                obstacles.append(PointObstacle((x, y), radius=res / 2.0))
            elif ch != ".":
                raise ValueError(f"invalid map character {ch!r} at row {j}")
    return obstacles, (width, height, res)


def _bundled_map_text(name: str) -> str:
    return resources.files("se2mpc").joinpath(f"data/{name}.txt").read_text()


def _num(v):
    """JSON-safe number: None encodes +inf."""
    return math.inf if v is None else float(v)


def _build_footprint(d: dict):
    if d["type"] == "disc":
        return Disc(radius=float(d["radius"]))
    if d["type"] == "stadium":
        return Stadium(
            rear_offset=float(d["rear_offset"]),
            length=float(d["length"]),
            radius=float(d["radius"]),
        )
    raise ValueError(f"unknown footprint type {d['type']!r}")


def _build_obstacles(entries, base_dir=None):
    obstacles = []
    for d in entries:
        kind = d["type"]
        if kind == "point":
            obstacles.append(PointObstacle(tuple(d["p"]), radius=float(d.get("radius", 0.0))))
        elif kind == "segment":
            obstacles.append(
                SegmentObstacle(tuple(d["a"]), tuple(d["b"]), radius=float(d.get("radius", 0.0)))
            )
        elif kind == "moving_stadium":
            obstacles.append(
                MovingStadiumObstacle(
                    origin=tuple(d["origin"]),
                    length=float(d["length"]),
                    radius=float(d["radius"]),
                    velocity=float(d["velocity"]),
                )
            )
        elif kind == "map":
            if "name" in d:
                obs, _ = load_map(_bundled_map_text(d["name"]), from_text=True)
            else:
                path = d["path"]
                if base_dir and not os.path.isabs(path):
                    path = os.path.join(base_dir, path)
                obs, _ = load_map(path)
            obstacles.extend(obs)
        else:
            raise ValueError(f"unknown obstacle type {kind!r}")
    return obstacles


@dataclass
class Scenario:
    """Declarative scenario; `data` is the canonical serializable form."""

    data: dict
    base_dir: str | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for key in ("model", "footprint", "obstacles", "bounds", "start", "goals", "controller", "solver"):
            if key not in self.data:
                raise ValueError(f"scenario missing required key '{key}'")
        # Mutable boundary shared with the controller during a run.
        b = self.data.get("boundary", {})
        q = len(self.data["bounds"]["lower"])
        self.boundary = BoundaryData(
            u_prev=np.asarray(b.get("u_prev", [0.0] * q), dtype=float),
            dt_prev=float(b.get("dt_prev", 0.1)),
            u_final=np.asarray(b.get("u_final", [0.0] * q), dtype=float),
        )

    # --- runtime views -------------------------------------------------
    @property
    def model(self):
        if "model" not in self._cache:
            m = self.data["model"]
            self._cache["model"] = make_model(m["name"], m.get("params"))
        return self._cache["model"]

    @property
    def bounds(self) -> ControlBounds:
        if "bounds" not in self._cache:
            b = self.data["bounds"]
            self._cache["bounds"] = ControlBounds(
                b["lower"], b["upper"], b["d_lower"], b["d_upper"]
            )
        return self._cache["bounds"]

    @property
    def footprint(self):
        if "footprint" not in self._cache:
            self._cache["footprint"] = _build_footprint(self.data["footprint"])
        return self._cache["footprint"]

    @property
    def obstacles(self):
        if "obstacles" not in self._cache:
            self._cache["obstacles"] = _build_obstacles(self.data["obstacles"], self.base_dir)
        return self._cache["obstacles"]

    @property
    def start(self) -> np.ndarray:
        return np.asarray(self.data["start"], dtype=float)

    @property
    def goals(self):
        return [np.asarray(g, dtype=float) for g in self.data["goals"]]

    @property
    def kernel(self) -> CollocationKernel:
        return CollocationKernel(self.data["solver"].get("kernel", "fwd"))

    @property
    def grid_mode(self) -> GridMode:
        return GridMode(self.data["solver"].get("grid_mode", "local"))

    @property
    def d_min(self) -> float:
        return float(self.data["solver"].get("d_min", 0.0))

    @property
    def association_cutoff(self) -> float:
        return float(self.data["solver"].get("association", {}).get("cutoff", 5.0))

    @property
    def association_k_max(self) -> int:
        return int(self.data["solver"].get("association", {}).get("k_max", 10))

    @property
    def goal_tolerance(self):
        return tuple(self.data["solver"].get("goal_tolerance", [0.1, 0.05]))

    @property
    def controller_variant(self) -> str:
        return self.data["controller"]["variant"]

    @property
    def multistart_waypoints(self):
        return self.data.get("multistart_waypoints", [])

    def controller_config(self, variant: str | None = None):
        """Build the controller config for a variant ('quad', 'to' or 'hybrid')."""
        variant = variant or self.controller_variant
        c = self.data["controller"]
        if variant == "quad":
            q = c["quad"]
            return QuadraticFormConfig(
                Q=np.diag(q["Q"]) if np.ndim(q["Q"]) == 1 else np.asarray(q["Q"]),
                Q_f=np.diag(q["Q_f"]) if np.ndim(q["Q_f"]) == 1 else np.asarray(q["Q_f"]),
                R=np.diag(q["R"]) if np.ndim(q["R"]) == 1 else np.asarray(q["R"]),
                N=int(q["N"]),
                dt_s=float(q["dt_s"]),
                x_f=np.asarray(self.data["goals"][0], dtype=float),
                terminal=q.get("terminal", "free"),
            )
        if variant in ("to", "hybrid"):
            t = c["to"]
            R_h = np.zeros((len(self.data["bounds"]["lower"]),) * 2)
            if variant == "hybrid":
                rh = c.get("hybrid", {}).get("R", t.get("R_hybrid"))
                if rh is None:
                    raise ValueError("hybrid variant requires controller.hybrid.R")
                R_h = np.diag(rh) if np.ndim(rh) == 1 else np.asarray(rh, dtype=float)
            return TimeOptimalConfig(
                N_init=int(t["N_init"]),
                dt_s=float(t["dt_s"]),
                dt_eps=float(t["dt_eps"]),
                x_f=np.asarray(self.data["goals"][0], dtype=float),
                N_min=int(t.get("N_min", 2)),
                dt_min=_num(t.get("dt_min", 1e-3)),
                dt_max=_num(t.get("dt_max")),
                R_hybrid=R_h,
                dt_init=t.get("dt_init"),
                carry_penalty=bool(t.get("carry_penalty", False)),
            )
        raise ValueError(f"unknown controller variant {variant!r}")

    # --- serialization -------------------------------------------------
    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, base_dir: str | None = None) -> "Scenario":
        return cls(json.loads(text), base_dir=base_dir)

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path) as fh:
            return cls.from_json(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

# Road/parking-lot layout reconstructed from the stated dimensions: a 6 m road
# (two 3 m lanes, boundaries y = 3.25 / y = -2.75) with a parking bay cut into
# the lower boundary around the goal x = -4. The bay is deepened so the goal
# pose keeps d_min clearance from the bay floor with the stadium footprint.
_PARKING_SEGMENTS = [
    {"type": "segment", "a": [-16.0, 3.25], "b": [8.0, 3.25]},
    {"type": "segment", "a": [-16.0, -2.75], "b": [-5.9, -2.75]},
    {"type": "segment", "a": [-2.1, -2.75], "b": [8.0, -2.75]},
    {"type": "segment", "a": [-5.9, -2.75], "b": [-5.9, -8.85]},
    {"type": "segment", "a": [-2.1, -2.75], "b": [-2.1, -8.85]},
    {"type": "segment", "a": [-5.9, -8.85], "b": [-2.1, -8.85]},
]


def parking_scenario() -> Scenario:
    """Bicycle reverse-parking into a bay while an oncoming vehicle passes."""
    data = {
        "name": "parking",
        "model": {"name": "bicycle", "params": {"l_f": 1.1, "l_r": 1.7}},
        "footprint": {"type": "stadium", "rear_offset": 1.7, "length": 2.8, "radius": 0.9},
        "obstacles": _PARKING_SEGMENTS
        + [
            {
                "type": "moving_stadium",
                "origin": [-13.0, -1.25],
                "length": 2.5,
                "radius": 0.9,
                "velocity": 1.0,
            }
        ],
        "bounds": {
            "lower": [-4.0, -0.65],
            "upper": [4.0, 0.65],
            "d_lower": [-3.0, -0.31],
            "d_upper": [1.5, 0.31],
        },
        "start": [1.0, 1.75, -3.1],
        "goals": [[-4.0, -6.0, 1.57]],
        "controller": {
            "variant": "hybrid",
            "hybrid": {"R": [0.01, 0.0]},
            "to": {
                "N_init": 50,
                "N_min": 2,
                "dt_s": 0.1,
                "dt_eps": 0.01,
                "dt_min": 0.02,
                "dt_max": None,
                "dt_init": 0.4,
            },
        },
        "solver": {
            "kernel": "cn",
            "grid_mode": "global",
            "d_min": 0.2,
            "association": {"cutoff": 3.0, "k_max": 6},
            "goal_tolerance": [0.1, 0.05],
        },
        "boundary": {"u_prev": [0.0, 0.0], "dt_prev": 0.1, "u_final": [0.0, 0.0]},
        # Two topologically distinct initializations w.r.t. the oncoming car:
        # HC1 pulls past the bay and waits for the car to pass before reversing
        # in; HC2 cuts across its lane ahead of it.
        "multistart_waypoints": [
            [[-8.0, 1.75, 3.14], [-4.0, -1.5, 1.57]],
            [[-2.0, 0.5, -2.2], [-4.0, -1.5, 1.57]],
        ],
    }
    return Scenario(data)


def diff_drive_scenario() -> Scenario:
    """Differential-drive robot navigating three goals in a 10 m x 10 m map."""
    data = {
        "name": "diffdrive",
        "model": {"name": "diff_drive", "params": {}},
        "footprint": {"type": "disc", "radius": 0.17},
        "obstacles": [{"type": "map", "name": "diffdrive_map"}],
        "bounds": {
            "lower": [-0.2, -0.4],
            "upper": [0.4, 0.4],
            "d_lower": [-0.25, -0.25],
            "d_upper": [0.25, 0.25],
        },
        "start": [2.0, 2.0, 0.0],
        "goals": [[1.0, 7.5, 1.5707963267948966], [1.2, 9.1, 3.14], [4.3, 2.0, -3.14]],
        "controller": {
            "variant": "quad",
            "quad": {
                "Q": [1.0, 1.0, 0.25],
                # terminal weight must dominate the control penalty: with
                # Q_f ~ R the nonholonomic robot parks at a cost stationary
                # point laterally offset from the goal instead of paying the
                # maneuvering cost to close it
                "Q_f": [25.0, 25.0, 6.0],
                "R": [0.5, 0.5],
                "N": 20,
                "dt_s": 0.3,
                "terminal": "free",
            },
            "hybrid": {"R": [2.0, 2.0]},
            "to": {
                "N_init": 30,
                "N_min": 2,
                "dt_s": 0.3,
                "dt_eps": 0.03,
                "dt_min": 0.05,
                "dt_max": None,
                "dt_init": 0.3,
            },
        },
        "solver": {
            "kernel": "fwd",
            "grid_mode": "local",
            "d_min": 0.05,
            "association": {"cutoff": 1.5, "k_max": 10},
            "goal_tolerance": [0.1, 0.05],
        },
        "boundary": {"u_prev": [0.0, 0.0], "dt_prev": 0.1, "u_final": [0.0, 0.0]},
        "multistart_waypoints": [],
    }
    return Scenario(data)


BUILTIN_SCENARIOS = {
    "parking": parking_scenario,
    "diffdrive": diff_drive_scenario,
}


def get_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(f"unknown builtin scenario '{name}'")
    return BUILTIN_SCENARIOS[name]()
