import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from talbotcsl.config import ExperimentConfig, derive_geometry
from talbotcsl.decoherence import NO_COLLAPSE
from talbotcsl.design import (
    GRW,
    ControlVector,
    VisibilityModel,
    default_bounds,
    grating_pulse,
    optimize_controls,
    pulse_phase,
    thermal_spot_area,
    visibility_sin,
)
from talbotcsl.errors import DegenerateObjectiveError, InvalidConfigurationError

CONFIG = ExperimentConfig()


@pytest.fixture(scope="module")
def vmodel(maqro_particle):
    return VisibilityModel(CONFIG, maqro_particle)


@pytest.fixture(scope="module")
def design(maqro_particle, vmodel):
    return optimize_controls(CONFIG, maqro_particle, model=vmodel)


def test_no_phase_no_visibility(vmodel, maqro_particle):
    t_T = derive_geometry(CONFIG, maqro_particle).talbot_time
    for t2 in (0.5 * t_T, t_T, 1.7 * t_T):
        assert vmodel.visibility_sin(0.0, t2) == pytest.approx(0.0, abs=1e-15)
        assert vmodel.objective(0.0, t2) == pytest.approx(0.0, abs=1e-15)


def test_module_level_visibility_matches_model(vmodel, maqro_particle):
    c = ControlVector(1.0, 10.0)
    assert visibility_sin(c, CONFIG, maqro_particle) == pytest.approx(vmodel.visibility_sin(1.0, 10.0), rel=1e-14)


def test_reduced_visibility_below_sinusoidal(vmodel):
    for phi0 in (0.3, 1.0, 2.5):
        assert 0 <= vmodel.visibility_red(phi0, 10.0) <= vmodel.visibility_sin(phi0, 10.0)


@given(st.floats(0.0, 3 * np.pi), st.floats(0.3, 1.9))
@settings(max_examples=40, deadline=None)
def test_objective_non_negative(vmodel, phi0, t2_over_tT):
    val = vmodel.objective(phi0, t2_over_tT * vmodel.talbot_time)
    assert np.isnan(val) or val >= 0


def test_no_collapse_reference_is_degenerate(maqro_particle):
    with pytest.raises(DegenerateObjectiveError):
        optimize_controls(CONFIG, maqro_particle, theta_ref=NO_COLLAPSE, coarse=11)


def test_invalid_bounds(maqro_particle):
    with pytest.raises(InvalidConfigurationError):
        optimize_controls(CONFIG, maqro_particle, bounds={"phi0": (1.0, 0.5), "t2": (1.0, 2.0)})
    with pytest.raises(InvalidConfigurationError):
        ControlVector(-0.1, 1.0)


def test_optimum_is_local_maximum(design, vmodel):
    phi, t2 = design.controls.phi0, design.controls.t2
    best = vmodel.objective(phi, t2)
    assert best == pytest.approx(design.objective, rel=1e-12)
    bounds = default_bounds(CONFIG, vmodel.particle)
    for frac in (1e-3, 1e-2):
        hp = frac * (bounds["phi0"][1] - bounds["phi0"][0])
        ht = frac * (bounds["t2"][1] - bounds["t2"][0])
        for dp in (-1, 0, 1):
            for dt in (-1, 0, 1):
                if dp == dt == 0:
                    continue
                val = vmodel.objective(phi + dp * hp, t2 + dt * ht)
                assert np.isnan(val) or val <= best + 1e-12


def test_optimum_stable_under_finer_search(design, maqro_particle, vmodel):
    fine = optimize_controls(CONFIG, maqro_particle, coarse=81, model=vmodel)
    assert fine.objective == pytest.approx(design.objective, rel=1e-2)
    assert fine.controls.phi0 == pytest.approx(design.controls.phi0, rel=1e-2)
    assert fine.controls.t2 == pytest.approx(design.controls.t2, rel=1e-2)


def test_design_reported_visibilities(design):
    assert design.objective == pytest.approx(design.visibility_sin - design.visibility_red, rel=1e-12)
    assert design.visibility_red < design.visibility_sin


def test_apply_sets_controls(design, maqro_particle):
    cfg = design.controls.apply(CONFIG, maqro_particle)
    geo = derive_geometry(cfg, maqro_particle)
    assert cfg.phi0 == design.controls.phi0
    assert geo.t2 == pytest.approx(design.controls.t2, rel=1e-14)


def test_grating_round_trip(design, maqro_particle):
    area, energy = grating_pulse(design.controls.phi0, CONFIG, maqro_particle)
    assert area == pytest.approx(thermal_spot_area(CONFIG, maqro_particle), rel=1e-15)
    assert pulse_phase(area, energy, CONFIG, maqro_particle) == pytest.approx(design.controls.phi0, rel=1e-10)


def test_pulse_energy_scales_with_area(maqro_particle):
    area, energy = grating_pulse(1.3, CONFIG, maqro_particle)
    # the same phase on twice the area needs twice the energy
    assert pulse_phase(2 * area, 2 * energy, CONFIG, maqro_particle) == pytest.approx(1.3, rel=1e-12)
    assert pulse_phase(area, 2 * energy, CONFIG, maqro_particle) == pytest.approx(2.6, rel=1e-12)


def test_reference_defaults_to_grw(vmodel):
    assert vmodel.theta_ref == GRW
