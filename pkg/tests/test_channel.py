import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcsim.channel import (Building, ChannelModel, EnbConfig, EnbKind, Position, Scenario, ShadowingField,
                           ShadowingParams, UePath, default_scenario, is_los, is_los_segment, load_scenario,
                           noise_floor_dbm, outage_intervals, pathloss_db, pathloss_db_array, sample_channel,
                           scenario_from_parsed, shadowing_db, snr_db)
from dcsim.engine import RngStream
from dcsim.textconf import ConfigError, parse_text

from oracles import FROZEN, los_bruteforce, noise_floor, pathloss

RECT = Building(Position(0, 0), Position(10, 10))


def _scenario(buildings=(), mm=((0, 30), (400, 30))):
    enbs = [EnbConfig.with_defaults(1, "LTE", Position(200, 50))]
    enbs += [EnbConfig.with_defaults(i + 2, "MMWAVE", Position(*p)) for i, p in enumerate(mm)]
    return Scenario(tuple(enbs), tuple(buildings), UePath(Position(100, -5), Position(300, -5), 2.0))


# --------------------------------------------------------------------------- pathloss / noise / snr

def test_pathloss_examples():
    assert pathloss_db("MMWAVE", True, 1) == pytest.approx(FROZEN["pl_mm_los_1"], rel=1e-12)
    assert pathloss_db("MMWAVE", False, 100) == pytest.approx(FROZEN["pl_mm_nlos_100"], rel=1e-12)
    assert pathloss_db("LTE", True, 500) == pytest.approx(FROZEN["pl_lte_500"], rel=1e-12)
    assert round(pathloss_db("LTE", False, 500), 2) == 116.78


def test_pathloss_clamps_below_one_metre():
    assert pathloss_db("MMWAVE", True, 0.01) == pathloss_db("MMWAVE", True, 1.0)


def test_pathloss_array_matches_scalar():
    d = np.array([0.5, 1, 30, 250.5])
    los = np.array([True, False, True, False])
    for kind in EnbKind:
        arr = pathloss_db_array(kind, los, d)
        assert arr.tolist() == [pathloss_db(kind, bool(l), x) for l, x in zip(los, d)]


@given(st.floats(1, 5000), st.floats(0.01, 1000))
def test_pathloss_monotone_and_nlos_dominates(d, step):
    for kind in ("MMWAVE", "LTE"):
        for los in (True, False):
            assert pathloss_db(kind, los, d + step) > pathloss_db(kind, los, d)
    assert pathloss_db("MMWAVE", False, d) >= pathloss_db("MMWAVE", True, d)


def test_noise_floor_examples():
    assert noise_floor_dbm(1e9, 5) == pytest.approx(FROZEN["nf_mm"], abs=1e-12)
    assert noise_floor_dbm(20e6, 9) == pytest.approx(FROZEN["nf_lte"], abs=1e-12)
    assert round(noise_floor_dbm(20e6, 9), 2) == -91.99


def test_snr_composition():
    enb = EnbConfig.with_defaults(2, "MMWAVE", Position(0, 0))
    assert snr_db(enb, Position(100, 0), 0.0, los=False) == pytest.approx(FROZEN["snr_composed"], abs=1e-9)
    assert snr_db(enb, Position(5, 5), 0.0, pathloss=130.4) == pytest.approx(3.6, abs=1e-9)
    assert snr_db(enb, Position(100, 0), 2.5, los=False) == pytest.approx(1.1, abs=1e-9)


def test_snr_matches_oracle_composition():
    rng = np.random.default_rng(0)
    for _ in range(50):
        kind = "MMWAVE" if rng.random() < 0.5 else "LTE"
        enb = EnbConfig.with_defaults(1, kind, Position(0, 0))
        p = Position(*rng.uniform(-300, 300, 2))
        los = bool(rng.random() < 0.5)
        sh = float(rng.normal(0, 5))
        ref = enb.tx_power + enb.antenna_gain - pathloss(kind, los, math.hypot(*p)) - sh - noise_floor(
            enb.bandwidth, enb.noise_figure)
        assert snr_db(enb, p, sh, los) == pytest.approx(ref, rel=1e-9, abs=1e-9)


# --------------------------------------------------------------------------- line of sight

def test_los_without_buildings():
    sc = _scenario()
    assert is_los(sc, Position(-1e3, 3), Position(1e3, 7))


def test_los_through_interior_blocked():
    assert not is_los_segment(Position(-5, 5), Position(15, 5), [RECT])


def test_los_corner_and_edge_grazing_allowed():
    assert is_los_segment(Position(-5, 5), Position(5, 15), [RECT])  # touches corner (0, 10)
    assert is_los_segment(Position(-5, 10), Position(15, 10), [RECT])  # runs along the top edge
    assert is_los_segment(Position(0, -5), Position(0, 15), [RECT])  # along the left edge


def test_los_against_bruteforce_oracle():
    rng = np.random.default_rng(2024)
    rects = [(0, 0, 10, 10), (20, -5, 30, 5)]
    buildings = [Building(Position(a, b), Position(c, d)) for a, b, c, d in rects]
    disagreements = 0
    for _ in range(100):
        a = tuple(rng.uniform(-10, 40, 2))
        b = tuple(rng.uniform(-10, 40, 2))
        disagreements += is_los_segment(Position(*a), Position(*b), buildings) != los_bruteforce(a, b, rects)
    assert disagreements == 0


@given(st.tuples(st.floats(-20, 20), st.floats(-20, 20)), st.tuples(st.floats(-20, 20), st.floats(-20, 20)))
def test_los_symmetry(a, b):
    assert is_los_segment(Position(*a), Position(*b), [RECT]) == is_los_segment(Position(*b), Position(*a), [RECT])


# --------------------------------------------------------------------------- shadowing

def _autocorr(step_m, n=10_000):
    s = RngStream(3, "channel")
    f = ShadowingField(ShadowingParams(4.0, 7.0, 10.0))
    x = np.array([f.sample(s, 1, Position(i * step_m, 0), 1.0) for i in range(n)])
    return np.corrcoef(x[:-1], x[1:])[0, 1]


def test_shadowing_correlation_close_samples():
    assert _autocorr(0.01) > 0.99


def test_shadowing_correlation_far_samples():
    assert abs(_autocorr(100.0)) < 0.05


def test_shadowing_zero_sigma():
    s = RngStream(3, "channel")
    f = ShadowingField()
    assert all(shadowing_db(s, 2, Position(i, 0), f, 0.0) == 0.0 for i in range(100))
    sc = _scenario()
    m = ChannelModel(sc, 5000, 1_000_000, RngStream(1, "channel"), ShadowingParams(0.0, 0.0, 10.0))
    enb = sc.enb(1)
    pos = sc.path.position_at(0)
    ref = snr_db(enb, pos, 0.0, True)
    assert m.trace.snr[0, 0] == pytest.approx(ref, abs=1e-9)


def test_shadowing_sigma_by_state():
    f = ShadowingField()
    assert f.sigma(EnbKind.MMWAVE, True) == 4.0
    assert f.sigma(EnbKind.MMWAVE, False) == 7.0
    assert f.sigma(EnbKind.LTE, False) == 4.0


def test_channel_trace_matches_online_shadowing():
    """The vectorised trace equals the per-sample online AR(1) with the same draws."""
    sc = default_scenario()
    m = ChannelModel(sc, 5000, 2_000_000, RngStream(8, "channel"))
    s = RngStream(8, "channel")
    f = ShadowingField()
    enbs = sorted(sc.enbs, key=lambda e: e.id)
    for i, t in enumerate(m.trace.times[:200]):
        pos = sc.path.position_at(int(t))
        for j, enb in enumerate(enbs):
            los = is_los(sc, enb.position, pos)
            sh = f.sample(s, enb.id, pos, f.sigma(enb.kind, los))
            assert m.trace.snr[i, j] == pytest.approx(snr_db(enb, pos, sh, los), abs=1e-9)


# --------------------------------------------------------------------------- sampling and trace

def test_sample_channel_examples():
    sc = default_scenario()
    m = ChannelModel(sc, 5000, 100_000_000, RngStream(1, "channel"))
    samples = sample_channel(m, 0)
    assert [s.enb_id for s in samples] == [1, 2, 3]
    assert sc.path.position_at(50_000_000).x == pytest.approx(sc.path.start.x + 100)
    with pytest.raises(ValueError):
        m.sample_channel(1234)


def test_channel_draws_depend_on_geometry_only():
    sc = default_scenario()
    a, b = RngStream(4, "channel"), RngStream(4, "channel")
    ChannelModel(sc, 5000, 10_000_000, a)
    ChannelModel(sc, 5000, 10_000_000, b)
    assert a.draws == b.draws == (10_000_000 // 5000 + 1) * 3


def test_trace_csv(tmp_path):
    m = ChannelModel(default_scenario(), 5000, 20_000, RngStream(1, "channel"))
    p = tmp_path / "trace.csv"
    m.trace.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "time_us,enb_id,snr_db" and len(lines) == 1 + 5 * 3
    assert lines[1].startswith("0,1,")


def test_outage_intervals():
    sc = default_scenario()
    m = ChannelModel(sc, 5000, 20_000, RngStream(1, "channel"))
    tr = m.trace
    tr.snr[:, 1:] = 10.0
    tr.snr[1:3, 1:] = -9.0
    assert outage_intervals(tr, [2, 3], -5.0) == [(5000, 15000)]
    assert outage_intervals(tr, [], -5.0) == []


# --------------------------------------------------------------------------- scenario validation and files

def test_default_scenario_shape():
    sc = default_scenario()
    assert sc.lte.id == 1 and [e.id for e in sc.mmwave] == [2, 3]
    assert len(sc.buildings) == 2
    assert sc.path.start == Position(100, -5) and sc.path.end == Position(300, -5)
    assert sc.path.length == 200
    assert sc.lte.carrier == 2.1e9 and sc.lte.bandwidth == 20e6
    assert all(e.carrier == 28e9 and e.bandwidth == 1e9 for e in sc.mmwave)


def test_scenario_rejects_bad_geometry():
    with pytest.raises(ConfigError):
        Building(Position(5, 0), Position(1, 10))
    with pytest.raises(ConfigError):
        _scenario(buildings=[Building(Position(150, -10), Position(160, 0))])  # path crosses it
    with pytest.raises(ConfigError):
        _scenario(buildings=[Building(Position(-10, 20), Position(10, 40))])  # eNB inside
    with pytest.raises(ConfigError):
        Scenario((), (), UePath(Position(0, 0), Position(1, 0), 1.0))
    with pytest.raises(ConfigError):
        UePath(Position(0, 0), Position(0, 0), 1.0)
    with pytest.raises(ConfigError):
        UePath(Position(0, 0), Position(1, 0), 0.0)


def test_scenario_without_mmwave_is_allowed():
    sc = _scenario(mm=())
    assert sc.mmwave == ()


def test_scenario_file_roundtrip(tmp_path):
    text = """
    enb {
        id = 1
        kind = lte
        x = 0
        y = 100
    }
    enb {
        id = 5
        kind = MMWAVE
        x = 50
        y = 20
        antenna_gain = 20
    }
    building {
        x_min = 10
        y_min = 5
        x_max = 20
        y_max = 10
    }
    ue_path {
        start_x = 0
        start_y = 0
        end_x = 100
        end_y = 0
        speed = 4
    }
    """
    p = tmp_path / "s.txt"
    p.write_text(text)
    sc = load_scenario(p)
    assert sc.enb(5).antenna_gain == 20 and sc.enb(5).bandwidth == 1e9
    assert sc.path.duration_us == 25_000_000


@pytest.mark.parametrize("text", [
    "enb {\n id = 1\n kind = LTE\n x = 0\n}\nue_path {\n start_x=0\n start_y=0\n end_x=1\n end_y=0\n}",
    "enb {\n id = 1\n kind = WIFI\n x = 0\n y = 0\n}",
    "tower {\n x = 1\n}",
    "speed = 3",
    "enb {\n id = 1\n kind = LTE\n x = 0\n y = 0\n colour = red\n}",
])
def test_scenario_file_errors(text):
    with pytest.raises(ConfigError):
        scenario_from_parsed(parse_text(text, "t"))
