import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from manugrip import kinematics as kin
from manugrip import quat
from oracles import oracle_link, oracle_tip

D = math.pi / 180
finger_angles = st.builds(kin.FingerAngles, st.floats(-2, 3), st.floats(-2, 3), st.floats(-2, 3), st.floats(-1, 1))
in_range = st.builds(kin.FingerAngles, st.floats(0, 90 * D), st.floats(0, 110 * D), st.floats(0, 90 * D),
                     st.floats(-15 * D, 15 * D))


def test_dh_transform_matches_entrywise_oracle():
    for row in [(0.0, 0.0, 0.3, 0.0), (math.pi / 2, 0.045, 1.1, 0.0), (0.4, 0.02, -0.7, 0.01)]:
        np.testing.assert_allclose(kin.dh_transform(*row), oracle_link(*row), atol=1e-15)


def test_dh_transform_rejects_nan():
    with pytest.raises(kin.KinematicsError):
        kin.dh_transform(0.0, float("nan"), 0.0, 0.0)


@given(in_range)
def test_fk_matches_oracle_for_every_finger(ang):
    geo = kin.HandGeometry.default()
    for name in kin.FINGERS:
        g = geo.fingers[name]
        frames = kin.finger_frames(g, ang)
        np.testing.assert_allclose(frames[-1], oracle_tip(g, ang), atol=1e-12)


def test_fully_extended_tip_distance_is_total_length():
    geo = kin.HandGeometry.default()
    for name in kin.FINGERS:
        g = geo.fingers[name]
        tip = kin.fingertip(g, kin.FingerAngles())
        assert abs(np.linalg.norm(tip - kin.mcp_position(g)) - sum(g.lengths)) < 1e-12


def test_literal_table_reading_theta3_does_not_move_tip():
    g = kin.HandGeometry.default().fingers["index"]
    a = kin.fingertip(g, kin.FingerAngles(0.3, 0.2, 0.0))
    b = kin.fingertip(g, kin.FingerAngles(0.3, 0.2, 1.2))
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_flexion_curls_toward_the_grasping_face():
    g = kin.HandGeometry.default().fingers["index"]
    assert kin.fingertip(g, kin.FingerAngles(theta1=0.5))[2] > 0


@given(finger_angles)
def test_clamp_bounds_and_idempotence(a):
    c = kin.clamp_joint_limits(a)
    assert 0 <= c.theta1 <= 90 * D and 0 <= c.theta2 <= 110 * D and 0 <= c.theta3 <= 90 * D
    assert -15 * D <= c.beta <= 15 * D
    assert kin.clamp_joint_limits(c) == c


@given(in_range)
def test_clamp_leaves_feasible_angles_unchanged(a):
    assert kin.clamp_joint_limits(a) == a


def test_clamp_array_matches_scalar_clamp(rng):
    arr = rng.uniform(-3, 3, size=(200, 4))
    out = kin.clamp_array(arr)
    for row, c in zip(arr, out):
        assert np.array_equal(kin.clamp_joint_limits(kin.FingerAngles.from_array(row)).as_array(), c)


@example(kin.FingerAngles(90 * D, 0.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.5))
@given(in_range, st.tuples(*[st.floats(-1, 1)] * 4).filter(lambda q: np.linalg.norm(q) > 0.1))
def test_imu_orientations_invert_to_joint_angles(ang, palm):
    palm = quat.normalize(np.array(palm))
    imu = np.tile(palm, (kin.N_IMUS, 1))
    for name in kin.FINGERS:
        for slot, q in zip(kin.IMU_SLOTS[name], kin.finger_imu_orientations(palm, ang, name == "thumb")):
            imu[slot] = q
    rec = kin.hand_angles_from_imus(imu)
    for name in kin.FINGERS:
        r = rec[name]
        assert abs(r.theta1 - ang.theta1) < 1e-9 and abs(r.beta - ang.beta) < 1e-9
        assert abs(r.theta2 - ang.theta2) < 1e-9
        if name != "thumb":
            assert abs(r.theta3 - ang.theta3) < 1e-9


def test_hand_angles_need_fifteen_imus():
    with pytest.raises(kin.IncompleteFrameError):
        kin.hand_angles_from_imus(np.zeros((14, 4)))


def test_calibration_cancels_mount_offsets(rng):
    offsets = quat.random_unit(rng, kin.N_IMUS)
    ref = kin.build_calibration(offsets)
    np.testing.assert_allclose(ref.corrections, quat.conj(offsets), atol=1e-15)
    corrected = kin.apply_calibration(ref, offsets)
    assert np.all(np.abs(np.abs(corrected[:, 0]) - 1) < 1e-12)


def test_calibration_recovers_angles_under_common_offset(rng):
    offset = quat.random_unit(rng)
    flat = np.tile(offset, (kin.N_IMUS, 1))
    ref = kin.build_calibration(flat)
    ang = kin.FingerAngles(0.6, 0.4, 0.2, 0.1)
    imu = np.tile(quat.IDENTITY, (kin.N_IMUS, 1))
    for slot, q in zip(kin.IMU_SLOTS["index"], kin.finger_imu_orientations(quat.IDENTITY, ang)):
        imu[slot] = q
    raw = quat.qmul(np.tile(offset, (kin.N_IMUS, 1)), imu)
    rec = kin.hand_angles_from_imus(kin.apply_calibration(ref, raw))["index"]
    np.testing.assert_allclose(rec.as_array(), ang.as_array(), atol=1e-9)


def test_geometry_validation():
    with pytest.raises(kin.KinematicsError):
        kin.FingerGeometry(-0.01, 0.02, 0.02, 0.0, 0.0)
    geo = kin.HandGeometry.default()
    fingers = dict(geo.fingers)
    fingers["index"] = fingers["thumb"]
    with pytest.raises(kin.KinematicsError):
        kin.HandGeometry(fingers)


def test_phalanx_segments_chain_and_ids():
    geo = kin.HandGeometry.default()
    state = kin.hand_state(geo, {f: kin.FingerAngles(0.3, 0.2, 0.1) for f in kin.FINGERS})
    segs = kin.phalanx_segments(geo, state)
    assert [s[0] for s in segs] == list(range(1, 15))
    tips = state.fingertips_world()
    by_id = {pid: (a, b) for pid, a, b in segs}
    np.testing.assert_allclose(by_id[kin.IMU_SLOTS["index"][-1]][1], tips["index"], atol=1e-15)
    for name in kin.FINGERS:
        slots = kin.IMU_SLOTS[name]
        for s0, s1 in zip(slots, slots[1:]):
            np.testing.assert_allclose(by_id[s0][1], by_id[s1][0], atol=1e-15)
