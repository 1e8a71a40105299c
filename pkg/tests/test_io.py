import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from talbotcsl import constants as const
from talbotcsl.bayes import ExclusionCurve, ThetaGrid
from talbotcsl.decoherence import CSLParams
from talbotcsl.errors import InvalidConfigurationError
from talbotcsl.io import (
    GridSpec,
    append_info_row,
    config_hash,
    dumps,
    graphene_disk_bound,
    landmarks,
    load,
    loads,
    maqro_preset,
    read_grid_csv,
    save,
    write_curve_csv,
    write_grid_csv,
)
from talbotcsl.information import InfoResult


def test_preset_matches_table_values():
    s = maqro_preset()
    c, p = s.config, s.particle
    assert p.density == 2329.0
    assert c.grating_wavelength == pytest.approx(354e-9, rel=1e-15)
    assert c.grating_pitch == 177e-9
    assert c.trap_frequency == 200e3
    assert (c.t_com, c.t_int, c.t_env) == (20e-3, 25.0, 20.0)
    assert c.t1_talbot == 2.0
    assert c.pressure == pytest.approx(1e-15 * 100.0, rel=1e-15)
    assert c.drift_rate == pytest.approx(10e-9 / 100.0, rel=1e-15)
    assert p.mass == pytest.approx(1e8 * const.m_u, rel=1e-15)
    assert "177" in s.description and "100 nm" in s.description


def test_round_trip_is_exact(tmp_path):
    s = maqro_preset(3.7e8).replace(seed=2**63 + 5, prior="experimental:bounds.csv",
                                    theta_true=CSLParams(1e-17, 3e-7), n_points=123, optimize=False)
    s = s.replace(config=s.config.replace(phi0=1.2962836808275406, sigma_m0=2.5e-8, pressure=3.3e-13))
    path = tmp_path / "s.ini"
    save(s, path)
    back = load(path)
    assert back == s
    assert dumps(back) == dumps(s)


@given(mass=st.floats(1e5, 1e12), pressure=st.floats(1e-18, 1e-8), phi0=st.floats(0, 10),
       t2=st.floats(0.1, 3))
@settings(max_examples=60, deadline=None)
def test_round_trip_arbitrary_floats(mass, pressure, phi0, t2):
    s = maqro_preset(mass)
    s = s.replace(config=s.config.replace(pressure=pressure, phi0=phi0, t2_talbot=t2))
    assert loads(dumps(s)) == s


def test_unknown_key_and_section_rejected():
    text = dumps(maqro_preset())
    with pytest.raises(InvalidConfigurationError, match="pressure_torr"):
        loads(text.replace("[experiment]\n", "[experiment]\npressure_torr = 1\n"))
    with pytest.raises(InvalidConfigurationError, match="unknown section"):
        loads(text + "\n[plotting]\ncolor = red\n")
    with pytest.raises(InvalidConfigurationError):
        loads(text.replace("[experiment]\n", "[experiment]\npressure_pa = 1e-13\n"))
    with pytest.raises(InvalidConfigurationError):
        loads("[scenario]\nseed = -1\n")
    with pytest.raises(InvalidConfigurationError):
        loads("[experiment]\nphi0_rad = abc\n")


def test_missing_config_file(tmp_path):
    with pytest.raises(InvalidConfigurationError):
        load(tmp_path / "nope.ini")


def test_partial_file_inherits_preset():
    s = loads("[particle]\nmass_u = 1e9\n")
    assert s.particle.mass == pytest.approx(1e9 * const.m_u, rel=1e-15)
    assert s.config == maqro_preset().config


def test_hash_stable_and_sensitive():
    a, b = maqro_preset(), maqro_preset()
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    assert config_hash(a.replace(seed=1)) != config_hash(a)


def test_grid_csv_round_trip(tmp_path):
    grid = ThetaGrid.log_spaced(shape=(7, 5))
    density = np.random.default_rng(0).random(grid.shape)
    path = tmp_path / "g.csv"
    write_grid_csv(path, grid, density)
    assert path.read_text().splitlines()[0] == "log10_rc,log10_lambda,density"
    lrc, llam, back = read_grid_csv(path)
    assert np.array_equal(back, density)
    assert np.allclose(lrc, np.log10(grid.rc)) and np.allclose(llam, np.log10(grid.lam))


def test_curve_csv(tmp_path):
    curve = ExclusionCurve(2.0, np.array([1e-8, 1e-7]), np.array([1e-12, 1e-13]), 0.95, 0.95, 3)
    path = tmp_path / "c.csv"
    write_curve_csv(path, curve)
    rows = path.read_text().splitlines()
    assert rows[0] == "r_c_m,lambda_c_per_s"
    assert [float(v) for v in rows[2].split(",")] == [1e-7, 1e-13]


def test_info_rows_append(tmp_path):
    res = InfoResult(1.5, 0.1, 10, 100, "prior-predictive", 4, np.zeros(10), 10)
    path = tmp_path / "info.csv"
    append_info_row(path, res)
    append_info_row(path, res)
    lines = path.read_text().splitlines()
    assert lines[0] == "N,M,mode,H_bits,delta_bits,seed"
    assert len(lines) == 3 and lines[1] == lines[2]


def test_landmarks_are_annotation_only(tmp_path):
    lm = landmarks()
    assert "annotation" in lm["purpose"]
    json.dumps(lm)
    bound = graphene_disk_bound(np.array([1e-9, 1e-4]))
    assert np.all(bound > 0) and bound[0] > bound[1]


def test_grid_spec_builds_requested_grid():
    g = GridSpec(shape=(10, 12)).build()
    assert g.shape == (10, 12)
    assert g.lam[0] == pytest.approx(1e-20) and g.rc[-1] == pytest.approx(1e-4)
