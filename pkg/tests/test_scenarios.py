"""Tests for the shipped scenario setups and their closures."""

import json

import numpy as np
import pytest

from crowdflow.fv import DensityField
from crowdflow.kernels import CutoffBeta, Kernel, bump1d
from crowdflow.nonlocal_ops import guide_density_samples
from crowdflow.scenarios import (ParameterTypeError, ParameterValueError,
                                 ScenarioError, UnknownParameterError,
                                 apply_overrides, build_scenario,
                                 crosswalk_gate, default_config, guide_pull,
                                 officer_presence, rasterize_boxes)

SMALL = {"mesh.nx": 40, "mesh.ny": 40}


@pytest.fixture(scope="module")
def tourists_small():
    return build_scenario("tourists", SMALL)


@pytest.fixture(scope="module")
def crosswalk_small():
    return build_scenario("crosswalk", dict(SMALL, **{"geodesic.n": 64}))


@pytest.fixture(scope="module")
def hooligans_small():
    return build_scenario("hooligans", SMALL)


def nearest_cell(mesh, x, y):
    d = mesh.cell_centroid - np.array([x, y])
    return int(np.argmin((d * d).sum(axis=1)))


# -- defaults and config handling ------------------------------------------------


def test_default_parameters_tourists():
    cfg = default_config("tourists")
    assert cfg["domain"] == [0.0, 4.0, 0.0, 4.0]
    assert cfg["mesh.nx"] == 160 and cfg["mesh.ny"] == 160
    assert cfg["t_final"] == 40.4 and cfg["frame_dt"] == 0.5
    assert cfg["flux.amplitude"] == 1.0
    assert cfg["drift.eps11"] == 0.2 and cfg["drift.eps12"] == 0.8
    assert cfg["drift.eps21"] == 0.8 and cfg["drift.eps22"] == 0.2
    assert cfg["drift.kernel.r"] == 0.5
    assert cfg["guides.attraction1"] == 0.4
    assert cfg["guides.center1"] == [2.0, 2.0]
    assert cfg["guides.center2"] == [2.0, 3.0]
    assert cfg["guides.spin1"] == 1.0 and cfg["guides.spin2"] == -1.0
    assert cfg["guides.p0"] == [2.0, 3.0, 2.0, 2.0]
    assert cfg["init.rho1.box"] == [0.5, 1.5, 0.5, 1.5]
    assert cfg["init.rho1.value"] == 0.75
    assert cfg["init.rho2.box"] == [2.5, 3.5, 0.5, 1.5]
    assert cfg["ode_rate_bound"] == 1.0


def test_default_parameters_crosswalk():
    cfg = default_config("crosswalk")
    assert cfg["domain"] == [0.0, 1.0, 0.0, 1.0]
    assert cfg["mesh.nx"] == 80
    assert cfg["t_final"] == 1.2 and cfg["frame_dt"] == 0.05
    assert cfg["flux.amplitude"] == 2.0
    assert cfg["drift.eps12"] == 0.7 and cfg["drift.eps11"] == 0.1
    assert cfg["drift.kernel.r"] == 0.05
    assert cfg["road.y_center"] == 0.5 and cfg["road.half_width"] == 0.05
    assert cfg["crosswalk.x0"] == 0.4 and cfg["crosswalk.x1"] == 0.6
    assert cfg["gate.near"] == 0.1 and cfg["gate.far"] == 0.8
    assert cfg["sense.ahead"] == 0.15 and cfg["sense.behind"] == 0.0015
    assert cfg["cars.p0"] == [0.0, 0.333, 0.667]
    assert cfg["cars.slow.near"] == 0.125 and cfg["cars.slow.far"] == 0.5
    assert cfg["cars.headway.alpha1"] == 0.167
    assert cfg["cars.headway.alpha2"] == 1.67
    assert cfg["cars.headway.power"] == 50
    assert cfg["cars.kernel.ahead"] == 0.045
    assert cfg["cars.kernel.behind"] == 0.0045
    assert cfg["ode_rate_bound"] == 50.0


def test_default_parameters_hooligans():
    cfg = default_config("hooligans")
    assert cfg["mesh.nx"] == 80
    assert cfg["t_final"] == 4.0 and cfg["frame_dt"] == 0.1
    for ij in ("11", "12", "21", "22"):
        assert cfg[f"drift.eps{ij}"] == 0.5
    assert cfg["drift.kernel.r"] == 0.1
    assert cfg["drift.preferred"] == 0.5
    assert cfg["police.push1"] == 0.1 and cfg["police.push2"] == 0.1
    assert cfg["police.push_sign"] == 1.0
    assert cfg["police.presence.r"] == 0.15
    assert cfg["police.p0"] == [0.1, 0.7, 0.9, 0.3, 0.1, 0.4, 0.9, 0.7]
    assert cfg["police.mixing_strength"] == 0.4
    assert cfg["police.repulsion_strength"] == 0.2
    assert cfg["police.repulsion.kernel.r"] == 0.2
    assert cfg["init.rho1.value"] == 0.9 and cfg["init.rho2.value"] == 0.7
    assert cfg["ode_rate_bound"] == 20.0


def test_common_defaults():
    for tag in ("tourists", "crosswalk", "hooligans"):
        cfg = default_config(tag)
        assert cfg["scenario"] == tag
        assert cfg["capacity"] == 1.0
        assert cfg["populations"] == 2
        assert cfg["cfl"] == 0.2
        assert cfg["dt_max"] == 0.01
        assert cfg["splitting"] == "pde_first"
        assert cfg["deterministic"] is True
        for side in ("left", "right", "bottom", "top"):
            assert cfg[f"boundary.{side}"] == "wall"


def test_override_coercion():
    cfg = default_config("tourists")
    out = apply_overrides(cfg, {
        "mesh.nx": "64",
        "cfl": "0.5",
        "deterministic": "false",
        "domain": "0,2,0,2",
        "guides.spin1": -1,
    })
    assert out["mesh.nx"] == 64 and isinstance(out["mesh.nx"], int)
    assert out["cfl"] == 0.5
    assert out["deterministic"] is False
    assert out["domain"] == [0.0, 2.0, 0.0, 2.0]
    assert out["guides.spin1"] == -1.0
    # the source mapping is untouched
    assert cfg["mesh.nx"] == 160


def test_override_errors():
    cfg = default_config("crosswalk")
    with pytest.raises(UnknownParameterError):
        apply_overrides(cfg, {"does.not.exist": 1.0})
    with pytest.raises(ParameterTypeError):
        apply_overrides(cfg, {"cfl": "fast"})
    with pytest.raises(ParameterTypeError):
        apply_overrides(cfg, {"mesh.nx": 2.5})
    with pytest.raises(ParameterTypeError):
        apply_overrides(cfg, {"domain": "0,one,0,1"})
    with pytest.raises(ParameterValueError):
        apply_overrides(cfg, {"scenario": "tourists"})
    # scenario echoed back unchanged is acceptable
    assert apply_overrides(cfg, {"scenario": "crosswalk"})["scenario"] \
        == "crosswalk"


def test_invariant_violations():
    with pytest.raises(ScenarioError):
        build_scenario("parade")
    with pytest.raises(ParameterValueError):
        build_scenario("tourists", {"cfl": 1.5})
    with pytest.raises(ParameterValueError):
        build_scenario("tourists", {"dt_max": -0.01})
    with pytest.raises(ParameterValueError):
        build_scenario("tourists", {"init.rho1.value": 1.5})
    with pytest.raises(ParameterValueError):
        build_scenario("tourists", {"boundary.left": "mirror"})
    with pytest.raises(ParameterValueError):
        build_scenario("tourists", {"splitting": "strang"})
    with pytest.raises(ParameterValueError):
        build_scenario("crosswalk", {"cars.p0": [0.5, 0.3, 0.7]})
    with pytest.raises(ParameterValueError):
        build_scenario("crosswalk", {"gate.near": 0.9})
    with pytest.raises(ParameterValueError):
        build_scenario("hooligans", {"police.push_sign": 0.5})
    with pytest.raises(ParameterValueError):
        build_scenario("hooligans", {"police.p0": [0.1, 0.2, 0.3]})


def test_manifest_round_trip(tourists_small):
    man = tourists_small.manifest()
    assert man == apply_overrides(default_config("tourists"), SMALL)
    # manifest is JSON-serializable and lossless
    assert json.loads(json.dumps(man)) == man


def test_manifest_echoes_overrides():
    sc = build_scenario("hooligans", dict(SMALL, **{"police.push1": 0.3}))
    assert sc.manifest()["police.push1"] == 0.3
    assert sc.manifest()["mesh.nx"] == 40


def test_ode_rate_caps():
    assert build_scenario("tourists", SMALL).ode_cap == 0.5
    assert build_scenario(
        "crosswalk", dict(SMALL, **{"geodesic.n": 64})).ode_cap == 0.01
    assert build_scenario("hooligans", SMALL).ode_cap == 0.025


# -- initial data ----------------------------------------------------------------


def test_initial_masses_exact(tourists_small, crosswalk_small,
                              hooligans_small):
    for sc, masses in ((tourists_small, [0.75, 1.0]),
                       (crosswalk_small, [0.16, 0.08]),
                       (hooligans_small, [0.135, 0.105])):
        rho = sc.initial_density()
        assert np.allclose(rho.masses(sc.mesh), masses, rtol=0, atol=1e-13)
        assert np.all(sc.raster_mass_error < 1e-12)


def test_initial_density_is_fresh(tourists_small):
    a = tourists_small.initial_density()
    a.values[:] = 7.0
    b = tourists_small.initial_density()
    assert b.values.max() <= 1.0


def test_initial_agents(tourists_small, crosswalk_small, hooligans_small):
    ag = tourists_small.initial_agents()
    assert ag.schema == "guides" and ag.t == 0.0
    assert np.array_equal(ag.points(), [[2.0, 3.0], [2.0, 2.0]])
    ag = crosswalk_small.initial_agents()
    assert ag.schema == "cars"
    assert np.array_equal(ag.p, [0.0, 0.333, 0.667])
    ag = hooligans_small.initial_agents()
    assert ag.schema == "officers" and len(ag.points()) == 4


def test_rasterize_reports_mismatch(tourists_small):
    # a box that does not line up with the 40x40 mesh leaves a residual
    _, err = rasterize_boxes(tourists_small.mesh, [((0.07, 1.03, 0.5, 1.5), 1.0)])
    assert err > 1e-4


def test_flux_endpoints(tourists_small, crosswalk_small, hooligans_small):
    for sc in (tourists_small, crosswalk_small, hooligans_small):
        assert sc.fluxes.q(np.array([0.0]))[0] == 0.0
        assert sc.fluxes.q(np.array([sc.capacity]))[0] == 0.0


# -- tourists closures -----------------------------------------------------------


def test_guide_pull_shape_and_bound():
    xi = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, -3.0], [2.0, 2.0]])
    out = guide_pull(xi, 0.4)
    assert out.shape == xi.shape
    assert np.allclose(out[0], 0.0)
    norms = np.sqrt((out * out).sum(axis=1))
    n2 = (xi * xi).sum(axis=1)
    assert np.allclose(norms, 0.4 * np.sqrt(n2) / np.sqrt(1 + n2 * n2))
    # the pull is bounded by its strength
    assert norms.max() <= 0.4


def test_tourists_velocity_zero_density(tourists_small):
    sc = tourists_small
    rho = np.zeros((2, sc.mesh.n_cells))
    agents = sc.initial_agents()
    v = sc.velocity(0.0, rho, agents)
    # without crowding the velocity is exactly the guide pull
    for i, p in enumerate(agents.points()):
        expect = guide_pull(p[None, :] - sc.mesh.cell_centroid,
                            sc.config[f"guides.attraction{i + 1}"])
        assert np.array_equal(v[i], expect)
    # and it vanishes at the guide's own position
    c = nearest_cell(sc.mesh, 2.0, 3.0)
    assert np.linalg.norm(v[0, c]) <= 0.4 * 2 * sc.mesh.incircle_diameter[c]


def test_tourists_drift_bound(tourists_small):
    sc = tourists_small
    rho = sc.initial_density()
    a = sc.drift(0.0, rho.values)
    norms = np.sqrt((a * a).sum(axis=2))
    # each row is a sum of saturated terms weighted by the coupling strengths
    assert norms[0].max() <= 0.2 + 0.8 + 1e-12
    assert norms[1].max() <= 0.8 + 0.2 + 1e-12


def test_guides_circle_their_centers():
    # park each crowd on top of its own guide so the sensed density is the
    # plateau value, then check speed and handedness of the resulting orbit
    sc = build_scenario("tourists", {
        "mesh.nx": 80, "mesh.ny": 80,
        "init.rho1.box": [1.5, 2.5, 2.5, 3.5], "init.rho1.value": 0.5,
        "init.rho2.box": [1.5, 2.5, 1.5, 2.5], "init.rho2.value": 0.8,
    })
    rho = sc.initial_density()
    agents = sc.initial_agents()
    rhs = sc.agent_rhs(0.0, rho.values, agents)
    # guide 1 sits at (2,3), top of the circle around (2,2), spin +1:
    # it advances in +x, which is the clockwise sense there
    assert rhs[0] == pytest.approx(0.5, rel=0.02)
    assert rhs[1] == pytest.approx(0.0, abs=1e-12)
    # guide 2 sits at (2,2), bottom of the circle around (2,3), spin -1:
    # +x again, which is counterclockwise at the bottom
    assert rhs[2] == pytest.approx(0.8, rel=0.02)
    assert rhs[3] == pytest.approx(0.0, abs=1e-12)


def test_guide_senses_only_nearby_mass(tourists_small):
    sc = tourists_small
    rho = sc.initial_density()
    agents = sc.initial_agents()
    b = guide_density_samples(rho.values, sc._guide_kernel, sc.mesh,
                              agents.points())
    # initial crowds are far from both guides
    assert np.allclose(b, 0.0)


# -- crosswalk closures ----------------------------------------------------------


def test_gate_is_one_on_the_road():
    pts = np.array([[0.45, 0.5], [0.5, 0.52], [0.62, 0.48]])
    dirs = np.tile([0.0, -1.0], (3, 1))
    w = crosswalk_gate(pts, dirs, cars_x=[0.45, 0.5, 0.62], road_y=0.5,
                       half_width=0.05, band=0.001, near=0.1, far=0.8,
                       ahead=0.15, behind=0.0015)
    assert np.array_equal(w, np.ones(3))


def test_gate_freezes_walker_facing_close_car():
    # a walker just above the road, heading down, with a car 0.06 away:
    # the sensed presence exp(-z^2/(r^2-z^2)) at z=0.06, r=0.15 is about
    # 0.827, beyond the 0.8 cutoff, so the gate closes completely
    pt = np.array([[0.5, 0.56]])
    d = np.array([[0.0, -1.0]])
    w = crosswalk_gate(pt, d, cars_x=[0.5], road_y=0.5, half_width=0.05,
                       band=0.001, near=0.1, far=0.8, ahead=0.15,
                       behind=0.0015)
    assert bump1d(0.06, 0.15) > 0.8
    assert w[0] == 0.0


def test_gate_open_when_cars_are_far():
    pt = np.array([[0.5, 0.56]])
    d = np.array([[0.0, -1.0]])
    w = crosswalk_gate(pt, d, cars_x=[0.8, 0.95], road_y=0.5,
                       half_width=0.05, band=0.001, near=0.1, far=0.8,
                       ahead=0.15, behind=0.0015)
    assert w[0] == 1.0


def test_gate_sees_less_behind_than_ahead():
    # same geometry, but the walker has already passed the car: with the
    # much shorter backward range the car is invisible
    pt = np.array([[0.5, 0.56]])
    up = np.array([[0.0, 1.0]])  # car is now "behind" the walking direction
    w = crosswalk_gate(pt, up, cars_x=[0.5], road_y=0.5, half_width=0.05,
                       band=0.001, near=0.1, far=0.8, ahead=0.15,
                       behind=0.0015)
    assert w[0] == 1.0


def test_gate_range(crosswalk_small):
    sc = crosswalk_small
    rho = sc.initial_density()
    v = sc.velocity(0.0, rho.values, sc.initial_agents())
    assert np.all(np.isfinite(v))
    speeds = np.sqrt((v * v).sum(axis=2))
    # gated unit direction plus a saturated drift of strength 0.1 + 0.7
    assert speeds.max() <= 1.8 + 1e-12


def test_direction_fields_point_to_exits(crosswalk_small):
    sc = crosswalk_small
    down, up = sc.direction_fields
    c = nearest_cell(sc.mesh, 0.5, 0.85)
    assert down.vectors[c][1] < -0.95
    c = nearest_cell(sc.mesh, 0.5, 0.15)
    assert up.vectors[c][1] > 0.95
    # off the crosswalk the road blocks the straight path, so the field
    # leads along the pavement toward the crossing
    c = nearest_cell(sc.mesh, 0.1, 0.6)
    assert down.vectors[c][0] > 0.2
    norms = np.sqrt((down.vectors ** 2).sum(axis=1))
    assert np.allclose(norms, 1.0)


def test_car_followers_match_headway_law(crosswalk_small):
    sc = crosswalk_small
    rho = sc.initial_density()
    agents = sc.initial_agents()
    rhs = sc.agent_rhs(0.0, rho.values, agents)
    # the leader drives at its cruise speed
    assert rhs[-1] == 1.0
    # at t=0 the crowd is far from the road, so followers obey the pure
    # headway law with no crowd slowdown
    gap = CutoffBeta(0.167, 1.67)
    expect = 1.0 - gap(np.diff(agents.p)) ** 50
    assert np.allclose(rhs[:-1], expect, rtol=0, atol=1e-14)
    assert np.all(rhs >= 0.0)


def test_car_stops_for_crowd_on_road(crosswalk_small):
    sc = crosswalk_small
    # pack the crosswalk with people right in front of the second car
    values = np.zeros((2, sc.mesh.n_cells))
    cx = sc.mesh.cell_centroid[:, 0]
    cy = sc.mesh.cell_centroid[:, 1]
    block = (cx > 0.4) & (cx < 0.6) & (cy > 0.45) & (cy < 0.55)
    values[0, block] = 1.0
    agents = sc.initial_agents()
    agents.p[1] = 0.45  # inside the packed crossing
    rhs = sc.agent_rhs(0.0, values, agents)
    # the sensed crowd is far beyond the slowdown cutoff: full stop
    assert rhs[1] == 0.0
    free = 1.0 - CutoffBeta(0.167, 1.67)(0.667 - 0.45) ** 50
    assert free > 0.01  # the headway alone would have let it creep forward


def test_road_strip_mass(crosswalk_small):
    sc = crosswalk_small
    ones = DensityField(np.ones((2, sc.mesh.n_cells)), 1.0)
    m = sc.road_strip_mass(ones)
    # both populations on the full strip, minus the parked-road cutouts,
    # which leave only the crosswalk segment
    assert m == pytest.approx(2 * 0.2 * 0.1, rel=1e-12)
    assert sc.road_strip_mass(sc.initial_density()) == 0.0


# -- hooligans closures ----------------------------------------------------------


def test_officer_presence_superposition(hooligans_small):
    kern = Kernel.gauss_bump(0.15)
    pts = np.array([[0.3, 0.4]])
    x = np.array([[0.32, 0.43], [0.5, 0.5]])
    one = officer_presence(x, pts, kern)
    two = officer_presence(x, np.vstack([pts, pts]), kern)
    assert np.allclose(two, 2 * one)
    assert one[1] == 0.0  # out of range


def test_police_push_separates_by_default(hooligans_small):
    sc = hooligans_small
    rho = np.zeros((2, sc.mesh.n_cells))
    agents = sc.initial_agents()
    v = sc.velocity(0.0, rho, agents)
    c = nearest_cell(sc.mesh, 0.1, 0.7)  # on top of the first officer
    assert v[0, c, 1] < 0.0  # group 1 pushed down
    assert v[1, c, 1] > 0.0  # group 2 pushed up
    assert v[0, c, 0] == 0.0 and v[1, c, 0] == 0.0
    assert np.allclose(v[0, :, 1], -v[1, :, 1])


def test_police_push_sign_flips():
    sc = build_scenario("hooligans", dict(SMALL, **{"police.push_sign": -1}))
    rho = np.zeros((2, sc.mesh.n_cells))
    v = sc.velocity(0.0, rho, sc.initial_agents())
    c = nearest_cell(sc.mesh, 0.1, 0.7)
    assert v[0, c, 1] > 0.0
    assert v[1, c, 1] < 0.0


def test_no_push_reduces_to_drift(hooligans_small):
    sc = build_scenario("hooligans", dict(
        SMALL, **{"police.push1": 0.0, "police.push2": 0.0}))
    rho = sc.initial_density()
    drift = sc.drift(0.0, rho.values)
    v = sc.velocity(0.0, rho.values, sc.initial_agents())
    assert np.array_equal(v, drift)


def test_literal_cross_denominator_flag():
    base = build_scenario("hooligans", SMALL)
    literal = build_scenario("hooligans", dict(
        SMALL, **{"drift.literal_cross_denominator": True}))
    rho = base.initial_density()
    a0 = base.drift(0.0, rho.values)
    a1 = literal.drift(0.0, rho.values)
    # the flag only rewires the second population's cross term
    assert np.array_equal(a0[0], a1[0])
    assert not np.allclose(a0[1], a1[1])


def test_officers_move_inside_the_overlap():
    sc = build_scenario("hooligans", dict(
        SMALL, **{"police.p0": [0.5, 0.45, 0.5, 0.56]}))
    rho = sc.initial_density()
    rhs = sc.agent_rhs(0.0, rho.values, sc.initial_agents())
    assert np.any(rhs != 0.0)
    assert np.all(np.abs(rhs) < 1.0)


def test_officers_at_rest_far_from_everything(hooligans_small):
    sc = hooligans_small
    rho = sc.initial_density()
    rhs = sc.agent_rhs(0.0, rho.values, sc.initial_agents())
    # default officers start outside the mollified supports and out of
    # repulsion range of each other
    assert np.array_equal(rhs, np.zeros(8))


def test_mixing_functional(hooligans_small):
    sc = hooligans_small
    rho = sc.initial_density()
    m = sc.mixing(rho)
    assert m > 0.0
    # disjoint far-apart groups do not mix
    values = np.zeros((2, sc.mesh.n_cells))
    cy = sc.mesh.cell_centroid[:, 1]
    values[0, cy < 0.2] = 0.9
    values[1, cy > 0.8] = 0.7
    assert sc.mixing(DensityField(values, 1.0)) == 0.0
