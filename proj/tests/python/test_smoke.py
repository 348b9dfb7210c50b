import math
from pathlib import Path

import numpy as np
import pytest

import legodom

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_so3_round_trip():
    v = np.array([0.3, -0.2, 0.5])
    R = legodom.so3_exp(v)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.allclose(legodom.so3_log(R), v, atol=1e-12)


def test_quarter_turn_rotation():
    R = legodom.so3_exp(np.array([0.0, 0.0, math.pi / 2]))
    assert np.allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)


def test_kinematics_round_trip():
    q = np.array([0.1, 0.7, -1.4])
    foot = legodom.foot_position(q, 0)
    assert np.allclose(legodom.inverse_kinematics(foot, 0), q, atol=1e-9)
    J = legodom.foot_jacobian(q, 0)
    eps = 1e-6
    col = (legodom.foot_position(q + [0, eps, 0], 0) - legodom.foot_position(q - [0, eps, 0], 0)) / (2 * eps)
    assert np.allclose(J[:, 1], col, atol=1e-8)


def test_unreachable_foot_raises():
    with pytest.raises(legodom.LegodomError, match="workspace"):
        legodom.inverse_kinematics(np.array([0.0, 0.0, -5.0]), 2)


def test_pipeline(tmp_path):
    imu, legs, truth = legodom.simulate(CONFIGS / "slippery.json", tmp_path / "log", 3)
    assert imu > 0 and legs > 0 and truth > 0
    names = legodom.estimate(tmp_path / "log", ["eskf-r", "imm-po"], tmp_path / "est")
    assert names == ["eskf-r", "imm-po"]
    res = legodom.evaluate(tmp_path / "est" / "imm-po" / "trajectory.csv", tmp_path / "log" / "truth.csv",
                           mu=tmp_path / "est" / "imm-po" / "mu.csv",
                           slip_windows=tmp_path / "log" / "slip_windows.json")
    assert 0.0 <= res["metrics"]["ate_pos"] < 0.5
    assert "modes" in res


def test_bad_config_raises(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(legodom.LegodomError):
        legodom.simulate(bad, tmp_path / "out")
