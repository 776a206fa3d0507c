import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manugrip import kinematics as kin
from manugrip import sensors as S

LOG = S.ForceCalibration()
POWER = S.ForceCalibration(law="power")


def test_zero_crossing_voltage_gives_zero_force():
    assert S.voltage_to_force(1 / 44.98, LOG) == pytest.approx(0.0, abs=1e-15)
    assert S.force_to_voltage(0.0, LOG) == pytest.approx(1 / 44.98, rel=1e-15)


def test_one_volt_logarithmic():
    assert abs(S.voltage_to_force(1.0, LOG) - 0.569 * math.log(44.98)) < 1e-12
    assert S.voltage_to_force(1.0, LOG) == pytest.approx(2.16574, abs=1e-5)
    assert S.force_to_voltage(2.16574, LOG) == pytest.approx(1.0, abs=1e-4)


def test_power_law_asymptote():
    assert S.voltage_to_force(1e12, POWER) == pytest.approx(3.244, abs=1e-5)
    assert S.voltage_to_force(2.0, POWER) == pytest.approx(-1.067 * 2.0 ** -0.4798 + 3.244, abs=1e-12)


@pytest.mark.parametrize("cal", [LOG, POWER])
def test_monotone_above_zero_crossing(cal):
    v = np.linspace(cal.zero_force_voltage, 20.0, 10_000)
    assert np.all(np.diff(S.voltage_to_force(v, cal)) > 0)


def test_dead_and_sub_threshold_readings_clamp_to_zero():
    v = np.array([0.0, -1.0, 0.001, 1 / 44.98, 0.5])
    f = S.voltage_to_force(v, LOG)
    assert np.all(f[:3] == 0.0) and f[4] > 0
    assert list(S.below_threshold(v, LOG)) == [True, True, True, False, False]


@given(st.floats(0, 10))
def test_logarithmic_round_trip(f):
    assert abs(S.voltage_to_force(S.force_to_voltage(f, LOG), LOG) - f) < 1e-9


def test_power_law_has_no_inverse():
    with pytest.raises(S.UnsupportedLawError):
        S.force_to_voltage(1.0, POWER)


def test_calibration_validation():
    with pytest.raises(S.SensorError):
        S.ForceCalibration(c1=-1.0)
    with pytest.raises(S.UnsupportedLawError):
        S.ForceCalibration(law="cubic")


def test_layout_has_26_unique_taxels():
    lay = S.TaxelLayout()
    assert lay.region(0) == "palm" and lay.region(16) == "thumb_proximal" and lay.region(17) == "thumb_distal"
    with pytest.raises(S.LayoutError):
        S.TaxelLayout(palm=tuple(range(15)))
    with pytest.raises(S.LayoutError):
        S.TaxelLayout(palm=tuple(range(16)), fingers={f: (16, 17) for f in kin.FINGERS})


def _frame(t=0.0):
    return S.GloveFrame(t, np.tile([1.0, 0, 0, 0], (15, 1)), np.full(26, 0.5), np.array([1.0, 0, 0, 0, 0, 0, 0]))


def test_stream_round_trip(tmp_path):
    frames = [_frame(0.0), _frame(0.05)]
    p = tmp_path / "s.jsonl"
    S.write_stream(frames, p)
    back = S.read_stream(p)
    assert [f.t for f in back] == [0.0, 0.05]
    np.testing.assert_array_equal(back[1].taxel, frames[1].taxel)


def test_stream_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "s.jsonl"
    good = json.dumps(_frame().to_record())
    p.write_text(good + "\n{not json\n")
    with pytest.raises(S.StreamParseError, match="line 2"):
        S.read_stream(p)
    rec = _frame().to_record()
    del rec["taxel"]
    p.write_text(good + "\n\n" + json.dumps(rec) + "\n")
    with pytest.raises(S.StreamParseError, match="line 3: missing field 'taxel'"):
        S.read_stream(p)


def test_unknown_keys_ignored_and_decreasing_time_rejected(tmp_path):
    p = tmp_path / "s.jsonl"
    a = _frame(1.0).to_record()
    a["extra"] = 5
    b = _frame(0.5).to_record()
    p.write_text(json.dumps(a) + "\n" + json.dumps(b) + "\n")
    with pytest.raises(S.SensorError, match="increase"):
        S.read_stream(p)


def test_negative_voltage_rejected():
    with pytest.raises(S.SensorError):
        S.GloveFrame(0.0, np.tile([1.0, 0, 0, 0], (15, 1)), -np.ones(26), np.array([1.0, 0, 0, 0, 0, 0, 0]))


def _angles(T, th1=0.4, th2=0.3, th3=0.2, beta=0.05):
    a = np.zeros((T, 5, 4))
    a[:] = [th1, th2, th3, beta]
    return a


def test_zero_noise_reproduces_true_angles():
    frames = S.synth_imu_stream(np.arange(5) * 0.05, _angles(5), S.ImuNoiseModel(), seed=3)
    for fr in frames:
        rec = kin.hand_angles_from_imus(fr.imu)
        for f in kin.FINGERS:
            assert abs(rec[f].theta1 - 0.4) < 1e-12 and abs(rec[f].theta2 - 0.3) < 1e-12
            assert abs(rec[f].beta - 0.05) < 1e-12


def test_pure_bias_offsets_every_flexion_by_the_bias():
    frames = S.synth_imu_stream([0.0], _angles(1), S.ImuNoiseModel(bias_deg=2.5), seed=0)
    rec = kin.hand_angles_from_imus(frames[0].imu)["index"]
    for got, true in [(rec.theta1, 0.4), (rec.theta2, 0.3), (rec.theta3, 0.2)]:
        assert math.degrees(got - true) == pytest.approx(2.5, abs=1e-9)


def test_bias_and_std_are_recovered_from_1000_samples():
    errs = S.imu_rotation_errors([90.0], 1000, S.ImuNoiseModel(bias_deg=2.5, std_deg=1.7), seed=7)
    assert abs(errs.mean() - 2.5) < 0.2
    assert abs(errs.std(ddof=1) - 1.7) < 0.2


def test_synthesis_is_bit_deterministic():
    noise = S.ImuNoiseModel(2.5, 1.7, 0.1, 1.0)
    a = S.synth_imu_stream(np.arange(4) * 0.05, _angles(4), noise, seed=11)
    b = S.synth_imu_stream(np.arange(4) * 0.05, _angles(4), noise, seed=11)
    assert all(np.array_equal(x.imu, y.imu) for x, y in zip(a, b))
    c = S.synth_imu_stream(np.arange(4) * 0.05, _angles(4), noise, seed=12)
    assert not np.array_equal(a[0].imu, c[0].imu)


def test_noise_model_validation():
    with pytest.raises(S.SensorError):
        S.ImuNoiseModel(std_deg=-1.0)


def test_channels_at_zero_force_level_are_zero():
    frames = S.synth_imu_stream(np.arange(3) * 0.05, _angles(3, th1=0.0, th2=0.0, th3=0.0, beta=0.0),
                                S.ImuNoiseModel(), 0)
    ch = S.extract_channels(frames)
    assert np.all(ch.palm_force == 0) and np.all(ch.thumb_tip_force == 0)
    assert np.allclose(ch.index_mcp_deg, 0.0, atol=1e-12)


def test_channels_palm_mean_and_thumb_tip():
    forces = np.zeros((1, 26))
    forces[0, :16] = np.arange(16) / 4.0
    forces[0, 17] = 1.5
    volts = S.force_to_voltage(forces, LOG)
    frames = S.synth_imu_stream([0.0], _angles(1, th1=math.radians(50)), S.ImuNoiseModel(), 0, taxels=volts)
    ch = S.extract_channels(frames)
    assert ch.palm_force[0] == pytest.approx(np.arange(16).mean() / 4.0, abs=1e-9)
    assert ch.thumb_tip_force[0] == pytest.approx(1.5, abs=1e-9)
    assert ch.index_mcp_deg[0] == pytest.approx(50.0, abs=1e-9)


def test_palm_channel_invariant_to_taxel_order(rng):
    volts = rng.uniform(0.05, 2.0, size=(2, 26))
    frames = S.synth_imu_stream([0.0, 0.05], _angles(2), S.ImuNoiseModel(), 0, taxels=volts)
    perm = rng.permutation(16)
    lay = S.TaxelLayout(palm=tuple(int(i) for i in perm))
    assert np.allclose(S.extract_channels(frames).palm_force, S.extract_channels(frames, lay).palm_force,
                       atol=1e-15)
