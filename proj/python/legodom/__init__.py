"""Legged-robot odometry: rolling-contact ESKF and IMM slip handling."""

import json
from pathlib import Path

from ._legodom import (
    LegodomError,
    estimate,
    foot_jacobian,
    foot_position,
    inverse_kinematics,
    simulate,
    so3_exp,
    so3_log,
)

__all__ = [
    "LegodomError",
    "estimate",
    "evaluate",
    "foot_jacobian",
    "foot_position",
    "inverse_kinematics",
    "simulate",
    "so3_exp",
    "so3_log",
    "sweep",
]


def evaluate(estimate, truth, align="rigid", rpe_distance=1.0, mu=None, slip_windows=None):
    from ._legodom import evaluate_json

    return json.loads(
        evaluate_json(Path(estimate), Path(truth), align, rpe_distance,
                      None if mu is None else Path(mu),
                      None if slip_windows is None else Path(slip_windows))
    )


def sweep(manifest, out):
    from ._legodom import sweep_json

    return [json.loads(c) for c in sweep_json(Path(manifest), Path(out))]
