"""Shared fixtures: a small obstacle-free scenario for fast closed-loop tests."""

import numpy as np
import pytest

from se2mpc.scenarios import Scenario


def make_mini_scenario(variant="quad", goal=(1.5, 0.0, 0.0), obstacles=()):
    """Tiny diff-drive scenario that closes the loop in a few seconds of sim time."""
    data = {
        "name": "mini",
        "model": {"name": "diff_drive", "params": {}},
        "footprint": {"type": "disc", "radius": 0.15},
        "obstacles": list(obstacles),
        "bounds": {
            "lower": [-0.3, -0.5],
            "upper": [0.5, 0.5],
            "d_lower": [-1.0, -1.0],
            "d_upper": [1.0, 1.0],
        },
        "start": [0.0, 0.0, 0.0],
        "goals": [list(goal)],
        "controller": {
            "variant": variant,
            "quad": {
                "Q": [1.0, 1.0, 0.25],
                "Q_f": [5.0, 5.0, 1.0],
                "R": [0.5, 0.5],
                "N": 15,
                "dt_s": 0.3,
                "terminal": "free",
            },
            "hybrid": {"R": [0.5, 0.5]},
            "to": {
                "N_init": 15,
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
            "association": {"cutoff": 1.5, "k_max": 6},
            "goal_tolerance": [0.1, 0.05],
        },
        "boundary": {"u_prev": [0.0, 0.0], "dt_prev": 0.1, "u_final": [0.0, 0.0]},
        "multistart_waypoints": [],
    }
    return Scenario(data)


@pytest.fixture
def mini_scenario():
    return make_mini_scenario()
