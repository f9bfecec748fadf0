"""Shipped simulation setups and their velocity/agent closures.

Three setups are provided, each a two-population density model coupled to a
small agent system:

  "tourists"   two crowds, each drawn toward a guide circling a fixed center;
               guides advance only when their own crowd is nearby.
  "crosswalk"  two pedestrian streams crossing a one-way road at a marked
               strip; three cars follow a leader and brake near the crowd,
               while waiting pedestrians are gated by approaching cars.
  "hooligans"  two antagonistic crowds that attract/repel through mollified
               density gradients; police officers climb toward the overlap of
               the groups and push them apart vertically.

Every numeric default is exposed in a flat, dotted-key configuration mapping
so runs can be reproduced from their echoed manifest alone.  Overrides are
type-checked against the defaults and validated; unknown keys are rejected.
"""

from __future__ import annotations

import numpy as np

from .agents import AgentState, rhs_cars, rhs_guides, rhs_officers
from .fv import DensityField, Flux
from .geodesic import EikonalGrid, direction_field, solve_eikonal
from .kernels import CutoffBeta, Kernel, bump1d
from .mesh import build_structured_tri_mesh
from .nonlocal_ops import (car_crowd_ahead, drift_hooligans, drift_tourists,
                           guide_density_samples, officer_mixing_drift)

SCENARIO_TAGS = ("tourists", "crosswalk", "hooligans")


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


class UnknownParameterError(ScenarioError):
    """Override key not present in the scenario defaults."""


class ParameterTypeError(ScenarioError):
    """Override value cannot be coerced to the parameter's type."""


class ParameterValueError(ScenarioError):
    """Parameter value violates a configuration invariant."""


# -- defaults ------------------------------------------------------------------

def _common_defaults(tag):
    return {
        "scenario": tag,
        "capacity": 1.0,
        "populations": 2,
        "cfl": 0.2,
        "dt_max": 0.01,
        "splitting": "pde_first",
        "deterministic": True,
        "boundary.left": "wall",
        "boundary.right": "wall",
        "boundary.bottom": "wall",
        "boundary.top": "wall",
    }


def default_config(tag):
    """Full parameter mapping for a scenario tag, in manifest order."""
    if tag == "tourists":
        cfg = _common_defaults(tag)
        cfg.update({
            "domain": [0.0, 4.0, 0.0, 4.0],
            "mesh.nx": 160,
            "mesh.ny": 160,
            "t_final": 40.4,
            "frame_dt": 0.5,
            "ode_rate_bound": 1.0,
            "flux.amplitude": 1.0,
            "init.rho1.box": [0.5, 1.5, 0.5, 1.5],
            "init.rho1.value": 0.75,
            "init.rho2.box": [2.5, 3.5, 0.5, 1.5],
            "init.rho2.value": 1.0,
            "drift.kernel.r": 0.5,
            "drift.eps11": 0.2,
            "drift.eps12": 0.8,
            "drift.eps21": 0.8,
            "drift.eps22": 0.2,
            "guides.attraction1": 0.4,
            "guides.attraction2": 0.4,
            "guides.center1": [2.0, 2.0],
            "guides.center2": [2.0, 3.0],
            "guides.spin1": 1.0,
            "guides.spin2": -1.0,
            "guides.p0": [2.0, 3.0, 2.0, 2.0],
            "guides.kernel.r": 0.4,
        })
        return cfg
    if tag == "crosswalk":
        cfg = _common_defaults(tag)
        cfg.update({
            "domain": [0.0, 1.0, 0.0, 1.0],
            "mesh.nx": 80,
            "mesh.ny": 80,
            "t_final": 1.2,
            "frame_dt": 0.05,
            "ode_rate_bound": 50.0,
            "flux.amplitude": 2.0,
            "init.rho1.box": [0.1, 0.9, 0.7, 0.9],
            "init.rho1.value": 1.0,
            "init.rho2.box": [0.1, 0.9, 0.1, 0.3],
            "init.rho2.value": 0.5,
            "drift.kernel.r": 0.05,
            "drift.eps11": 0.1,
            "drift.eps12": 0.7,
            "drift.eps21": 0.7,
            "drift.eps22": 0.1,
            "road.y_center": 0.5,
            "road.half_width": 0.05,
            "road.band": 0.001,
            "crosswalk.x0": 0.4,
            "crosswalk.x1": 0.6,
            "gate.near": 0.1,
            "gate.far": 0.8,
            "sense.ahead": 0.15,
            "sense.behind": 0.0015,
            "geodesic.n": 256,
            "cars.p0": [0.0, 0.333, 0.667],
            "cars.leader_speed": 1.0,
            "cars.slow.near": 0.125,
            "cars.slow.far": 0.5,
            "cars.headway.alpha1": 0.167,
            "cars.headway.alpha2": 1.67,
            "cars.headway.power": 50,
            "cars.kernel.ahead": 0.045,
            "cars.kernel.behind": 0.0045,
        })
        return cfg
    if tag == "hooligans":
        cfg = _common_defaults(tag)
        cfg.update({
            "domain": [0.0, 1.0, 0.0, 1.0],
            "mesh.nx": 80,
            "mesh.ny": 80,
            "t_final": 4.0,
            "frame_dt": 0.1,
            "ode_rate_bound": 20.0,
            "flux.amplitude": 1.0,
            "init.rho1.box": [0.25, 0.75, 0.2, 0.5],
            "init.rho1.value": 0.9,
            "init.rho2.box": [0.25, 0.75, 0.5, 0.8],
            "init.rho2.value": 0.7,
            "drift.kernel.r": 0.1,
            "drift.eps11": 0.5,
            "drift.eps12": 0.5,
            "drift.eps21": 0.5,
            "drift.eps22": 0.5,
            "drift.preferred": 0.5,
            "drift.literal_cross_denominator": False,
            "police.p0": [0.1, 0.7, 0.9, 0.3, 0.1, 0.4, 0.9, 0.7],
            "police.push1": 0.1,
            "police.push2": 0.1,
            # +1 drives group 1 downward and group 2 upward near officers
            # (the groups move apart); -1 is the mirrored coupling.
            "police.push_sign": 1.0,
            "police.presence.r": 0.15,
            "police.mixing_strength": 0.4,
            "police.mixing.kernel.r": 0.1,
            "police.repulsion_strength": 0.2,
            "police.repulsion.kernel.r": 0.2,
        })
        return cfg
    raise ScenarioError(f"unknown scenario tag {tag!r}")


def _coerce(key, default, value):
    """Coerce an override to the default's type; strings are parsed."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ParameterTypeError(f"{key}: expected a boolean, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value == int(value):
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        raise ParameterTypeError(f"{key}: expected an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise ParameterTypeError(f"{key}: expected a number, got {value!r}")
    if isinstance(default, str):
        if isinstance(value, str):
            return value
        raise ParameterTypeError(f"{key}: expected a string, got {value!r}")
    if isinstance(default, list):
        if isinstance(value, str):
            parts = [s for s in value.split(",") if s.strip()]
        elif isinstance(value, (list, tuple, np.ndarray)):
            parts = list(value)
        else:
            raise ParameterTypeError(
                f"{key}: expected a comma list of numbers, got {value!r}")
        try:
            return [float(s) for s in parts]
        except (TypeError, ValueError):
            raise ParameterTypeError(
                f"{key}: expected a comma list of numbers, got {value!r}"
            ) from None
    raise ParameterTypeError(f"{key}: unsupported parameter type")


def apply_overrides(config, overrides):
    """New config with overrides merged in; unknown keys are an error."""
    out = dict(config)
    for key, value in (overrides or {}).items():
        if key not in out:
            raise UnknownParameterError(f"unknown parameter {key!r}")
        if key == "scenario":
            coerced = _coerce(key, out[key], value)
            if coerced != out[key]:
                raise ParameterValueError(
                    "scenario is fixed by the build tag")
            continue
        out[key] = _coerce(key, out[key], value)
    return out


def _require(cond, message):
    if not cond:
        raise ParameterValueError(message)


def validate_config(cfg):
    """Check every cross-parameter invariant of a complete config dict."""
    tag = cfg["scenario"]
    _require(cfg["capacity"] > 0, "capacity must be positive")
    _require(cfg["populations"] == 2, "exactly two populations are supported")
    _require(0.0 < cfg["cfl"] <= 1.0, "cfl must be in (0, 1]")
    _require(cfg["dt_max"] > 0, "dt_max must be positive")
    _require(cfg["ode_rate_bound"] > 0, "ode_rate_bound must be positive")
    _require(cfg["t_final"] >= 0, "t_final must be nonnegative")
    _require(cfg["frame_dt"] > 0, "frame_dt must be positive")
    _require(cfg["mesh.nx"] >= 1 and cfg["mesh.ny"] >= 1,
             "mesh resolution must be at least 1x1")
    _require(cfg["splitting"] in ("pde_first", "ode_first"),
             "splitting must be pde_first or ode_first")
    x0, x1, y0, y1 = cfg["domain"]
    _require(len(cfg["domain"]) == 4 and x1 > x0 and y1 > y0,
             "domain must be [x0, x1, y0, y1] with x1 > x0 and y1 > y0")
    for side in ("left", "right", "bottom", "top"):
        _require(cfg[f"boundary.{side}"] in ("wall", "outflow"),
                 f"boundary.{side} must be wall or outflow")
    _require(cfg["flux.amplitude"] > 0, "flux.amplitude must be positive")
    for i in (1, 2):
        box = cfg[f"init.rho{i}.box"]
        _require(len(box) == 4 and box[1] > box[0] and box[3] > box[2],
                 f"init.rho{i}.box must be [x0, x1, y0, y1] with x1 > x0")
        val = cfg[f"init.rho{i}.value"]
        _require(0.0 <= val <= cfg["capacity"],
                 f"init.rho{i}.value must lie in [0, capacity]")
    for ij in ("11", "12", "21", "22"):
        _require(cfg[f"drift.eps{ij}"] >= 0, f"drift.eps{ij} must be >= 0")
    _require(cfg["drift.kernel.r"] > 0, "drift.kernel.r must be positive")

    if tag == "tourists":
        _require(cfg["guides.attraction1"] >= 0
                 and cfg["guides.attraction2"] >= 0,
                 "guide attraction strengths must be >= 0")
        _require(len(cfg["guides.p0"]) == 4,
                 "guides.p0 must hold two 2D positions")
        _require(len(cfg["guides.center1"]) == 2
                 and len(cfg["guides.center2"]) == 2,
                 "guide centers must be 2D points")
        _require(cfg["guides.kernel.r"] > 0,
                 "guides.kernel.r must be positive")
    elif tag == "crosswalk":
        _require(cfg["road.half_width"] > 0, "road.half_width must be positive")
        _require(cfg["road.band"] > 0, "road.band must be positive")
        _require(y0 < cfg["road.y_center"] - cfg["road.half_width"]
                 and cfg["road.y_center"] + cfg["road.half_width"] < y1,
                 "road strip must lie strictly inside the domain")
        _require(x0 <= cfg["crosswalk.x0"] < cfg["crosswalk.x1"] <= x1,
                 "crosswalk x-range must be nonempty and inside the domain")
        _require(0.0 <= cfg["gate.near"] < cfg["gate.far"],
                 "gate thresholds need 0 <= near < far")
        _require(cfg["sense.ahead"] > 0 and cfg["sense.behind"] > 0,
                 "sensing ranges must be positive")
        _require(cfg["geodesic.n"] >= 16, "geodesic.n must be at least 16")
        p0 = cfg["cars.p0"]
        _require(len(p0) >= 1 and np.all(np.diff(p0) >= 0),
                 "cars.p0 must be nondecreasing")
        _require(0.0 <= cfg["cars.slow.near"] < cfg["cars.slow.far"],
                 "car slowdown thresholds need 0 <= near < far")
        _require(0.0 <= cfg["cars.headway.alpha1"] < cfg["cars.headway.alpha2"],
                 "headway thresholds need 0 <= alpha1 < alpha2")
        _require(cfg["cars.headway.power"] >= 1,
                 "cars.headway.power must be at least 1")
        _require(cfg["cars.kernel.ahead"] > 0 and cfg["cars.kernel.behind"] > 0,
                 "car kernel ranges must be positive")
    elif tag == "hooligans":
        _require(0.0 <= cfg["drift.preferred"] <= cfg["capacity"],
                 "drift.preferred must lie in [0, capacity]")
        _require(cfg["police.push1"] >= 0 and cfg["police.push2"] >= 0,
                 "police push strengths must be >= 0")
        _require(cfg["police.push_sign"] in (1.0, -1.0),
                 "police.push_sign must be +1 or -1")
        p0 = cfg["police.p0"]
        _require(len(p0) >= 2 and len(p0) % 2 == 0,
                 "police.p0 must hold at least one 2D position")
        for key in ("police.presence.r", "police.mixing.kernel.r",
                    "police.repulsion.kernel.r"):
            _require(cfg[key] > 0, f"{key} must be positive")
        _require(cfg["police.mixing_strength"] >= 0
                 and cfg["police.repulsion_strength"] >= 0,
                 "police strengths must be >= 0")
    return cfg


# -- initial data ---------------------------------------------------------------

def rasterize_boxes(mesh, boxes):
    """Piecewise-constant data from (box, value) pairs by centroid membership.

    Returns (values, mass_error) where mass_error is |cell mass - exact box
    mass| summed over the pairs (nonzero when a box does not align with mesh
    lines or overlaps an obstacle cutout).
    """
    cx = mesh.cell_centroid[:, 0]
    cy = mesh.cell_centroid[:, 1]
    values = np.zeros(mesh.n_cells)
    exact = 0.0
    for (bx0, bx1, by0, by1), val in boxes:
        inside = (cx >= bx0) & (cx <= bx1) & (cy >= by0) & (cy <= by1)
        values[inside] = val
        exact += val * (bx1 - bx0) * (by1 - by0)
    return values, abs(float(values @ mesh.cell_area) - exact)


# -- velocity closures ----------------------------------------------------------

def guide_pull(offsets, strength):
    """strength * xi / sqrt(1 + |xi|^4): bounded pull toward xi = 0."""
    off = np.asarray(offsets, dtype=float)
    n2 = np.sum(off * off, axis=-1, keepdims=True)
    return strength * off / np.sqrt(1.0 + n2 * n2)


def velocity_tourists(t, centroids, drift, guide_points, strengths):
    """Per population: pull toward the own guide minus the crowding drift."""
    out = np.empty_like(drift)
    for i in range(drift.shape[0]):
        out[i] = guide_pull(guide_points[i][None, :] - centroids,
                            strengths[i]) - drift[i]
    return out


def crosswalk_gate(centroids, directions, cars_x, road_y, half_width, band,
                   near, far, ahead, behind):
    """Walking-speed factor in [0, 1] from car proximity.

    On the road strip the factor is 1 (whoever is already crossing keeps
    going).  Off the road it is the product over cars of a smooth cutoff of
    the sensed car presence; presence looks `ahead` along the walking
    direction but only `behind` against it, and `ahead` sideways.
    """
    x = np.asarray(centroids, dtype=float)
    v = np.asarray(directions, dtype=float)
    on_road = CutoffBeta(half_width, half_width + band)
    gate = CutoffBeta(near, far)
    w_off = np.ones(len(x))
    for px in np.atleast_1d(cars_x):
        dx = px - x[:, 0]
        dy = road_y - x[:, 1]
        along = dx * v[:, 0] + dy * v[:, 1]
        across = dx * v[:, 1] - dy * v[:, 0]
        reach = np.where(along > 0.0, bump1d(along, ahead),
                         bump1d(along, behind))
        w_off *= gate(reach * bump1d(across, ahead))
    br = on_road(np.abs(x[:, 1] - road_y))
    return 1.0 - (1.0 - br) * (1.0 - w_off)


def velocity_crosswalk(t, centroids, drift, direction_fields, cars_x,
                       **gate_params):
    """Per population: gated preferred direction minus the crowding drift."""
    out = np.empty_like(drift)
    for i in range(drift.shape[0]):
        vecs = direction_fields[i].vectors
        w = crosswalk_gate(centroids, vecs, cars_x, **gate_params)
        out[i] = w[:, None] * (vecs - drift[i])
    return out


def officer_presence(centroids, officer_points, kernel):
    """Summed kernel footprint of all officers at each centroid."""
    s = np.zeros(len(centroids))
    for q in np.atleast_2d(officer_points):
        s += kernel.value(centroids - q[None, :])
    return s


def velocity_hooligans(t, centroids, drift, officer_points, presence_kernel,
                       push_strengths, push_sign):
    """Crowding drift plus a vertical push near officers.

    With push_sign = +1 population 1 is pushed downward and population 2
    upward, so officers standing between the groups drive them apart; -1
    mirrors both pushes.
    """
    pts = np.atleast_2d(np.asarray(officer_points, dtype=float))
    s = officer_presence(centroids, pts, presence_kernel) / len(pts)
    out = np.array(drift, dtype=float, copy=True)
    out[0, :, 1] -= push_sign * push_strengths[0] * s
    out[1, :, 1] += push_sign * push_strengths[1] * s
    return out


# -- scenario objects -----------------------------------------------------------

class Scenario:
    """A built scenario: mesh, flux, initial data, and coupling closures.

    The closures are pure: `drift(t, rho)` maps densities to the per-cell
    crowding drift, `velocity_from_drift` finishes the velocity assembly from
    a drift already in hand, and `agent_rhs(t, rho, agents)` evaluates the
    agents' sensing and right-hand side.  `velocity` chains the first two.
    """

    schema = None

    def __init__(self, config):
        self.config = dict(config)
        validate_config(self.config)
        self.tag = config["scenario"]
        self.capacity = config["capacity"]
        self.cfl = config["cfl"]
        self.dt_max = config["dt_max"]
        self.ode_cap = 0.5 / config["ode_rate_bound"]
        self.t_final = config["t_final"]
        self.frame_dt = config["frame_dt"]
        self.splitting = config["splitting"]
        self.deterministic = config["deterministic"]
        self.domain = tuple(config["domain"])
        self.fluxes = Flux("logistic", amplitude=config["flux.amplitude"],
                           capacity=self.capacity)
        self.mesh = self._build_mesh()
        self._drift_kernel = Kernel.gauss_bump(config["drift.kernel.r"])
        self._eps = np.array([[config["drift.eps11"], config["drift.eps12"]],
                              [config["drift.eps21"], config["drift.eps22"]]])
        self._setup()
        boxes = [[(tuple(config[f"init.rho{i}.box"]),
                   config[f"init.rho{i}.value"])] for i in (1, 2)]
        rastered = [rasterize_boxes(self.mesh, b) for b in boxes]
        self._rho0 = np.stack([r[0] for r in rastered])
        self.raster_mass_error = np.array([r[1] for r in rastered])

    def _build_mesh(self):
        cfg = self.config
        markers = {s: cfg[f"boundary.{s}"]
                   for s in ("left", "right", "bottom", "top")}
        return build_structured_tri_mesh(cfg["mesh.nx"], cfg["mesh.ny"],
                                         self.domain,
                                         obstacles=self._obstacles(),
                                         boundary_markers=markers)

    def _obstacles(self):
        return ()

    def _setup(self):
        pass

    def initial_density(self):
        return DensityField(self._rho0.copy(), self.capacity)

    def initial_agents(self):
        return AgentState(self.schema, self._p0(), t=0.0)

    def velocity(self, t, rho, agents):
        return self.velocity_from_drift(t, self.drift(t, rho), agents)

    def agent_points(self, agents):
        """Agent positions as an (N, 2) array for plotting and export."""
        return agents.points()

    def manifest(self):
        return dict(self.config)


class TouristsScenario(Scenario):
    schema = "guides"

    def _setup(self):
        cfg = self.config
        self._guide_kernel = Kernel.poly_bump(cfg["guides.kernel.r"])
        self._centers = np.array([cfg["guides.center1"],
                                  cfg["guides.center2"]])
        self._spins = np.array([cfg["guides.spin1"], cfg["guides.spin2"]])
        self._pulls = (cfg["guides.attraction1"], cfg["guides.attraction2"])

    def _p0(self):
        return np.array(self.config["guides.p0"])

    def drift(self, t, rho):
        return drift_tourists(rho, self._eps, self._drift_kernel, self.mesh)

    def velocity_from_drift(self, t, drift, agents):
        return velocity_tourists(t, self.mesh.cell_centroid, drift,
                                 agents.points(), self._pulls)

    def agent_rhs(self, t, rho, agents):
        b = guide_density_samples(rho, self._guide_kernel, self.mesh,
                                  agents.points())
        return rhs_guides(t, agents.p, b, self._centers, self._spins)


class CrosswalkScenario(Scenario):
    schema = "cars"

    def _obstacles(self):
        cfg = self.config
        x0, x1 = self.domain[0], self.domain[1]
        lo = cfg["road.y_center"] - cfg["road.half_width"]
        hi = cfg["road.y_center"] + cfg["road.half_width"]
        obs = []
        if cfg["crosswalk.x0"] > x0:
            obs.append((x0, cfg["crosswalk.x0"], lo, hi))
        if cfg["crosswalk.x1"] < x1:
            obs.append((cfg["crosswalk.x1"], x1, lo, hi))
        return obs

    def _setup(self):
        cfg = self.config
        self.road_y = cfg["road.y_center"]
        self.road_strip = (self.road_y - cfg["road.half_width"],
                           self.road_y + cfg["road.half_width"])
        self.crosswalk_range = (cfg["crosswalk.x0"], cfg["crosswalk.x1"])
        self._gate_params = {
            "road_y": self.road_y,
            "half_width": cfg["road.half_width"],
            "band": cfg["road.band"],
            "near": cfg["gate.near"],
            "far": cfg["gate.far"],
            "ahead": cfg["sense.ahead"],
            "behind": cfg["sense.behind"],
        }
        self._car_kernel = Kernel.car_asymmetric(cfg["cars.kernel.ahead"],
                                                 cfg["cars.kernel.behind"])
        self._slow = CutoffBeta(cfg["cars.slow.near"], cfg["cars.slow.far"])
        gap = CutoffBeta(cfg["cars.headway.alpha1"],
                         cfg["cars.headway.alpha2"])
        power = cfg["cars.headway.power"]
        self._gap = lambda xi: 1.0 - gap(xi) ** power
        self._leader_speed = cfg["cars.leader_speed"]
        self.direction_fields = self._build_direction_fields()

    def _build_direction_fields(self):
        cfg = self.config
        x0, x1, y0, y1 = self.domain
        lo, hi = self.road_strip
        cw0, cw1 = self.crosswalk_range
        grid = EikonalGrid(self.domain, n=cfg["geodesic.n"])

        def walkable(x, y):
            on_road = (y > lo) & (y < hi)
            on_walk = (x >= cw0) & (x <= cw1)
            return ~on_road | on_walk

        mask = grid.mask_from(walkable)
        mid = 0.5 * (x0 + x1)
        fields = []
        for row, target in ((0, (mid, y0)), (-1, (mid, y1))):
            targets = np.zeros(grid.shape, dtype=bool)
            targets[row, :] = True
            dist = solve_eikonal(grid, mask, targets)
            fields.append(direction_field(grid, dist, self.mesh,
                                          target_points=[target],
                                          tag=f"exit_row_{row}"))
        return fields

    def _p0(self):
        return np.array(self.config["cars.p0"])

    def drift(self, t, rho):
        return drift_tourists(rho, self._eps, self._drift_kernel, self.mesh)

    def velocity_from_drift(self, t, drift, agents):
        return velocity_crosswalk(t, self.mesh.cell_centroid, drift,
                                  self.direction_fields, agents.p,
                                  **self._gate_params)

    def agent_rhs(self, t, rho, agents):
        sensed = car_crowd_ahead(rho[0] + rho[1], self._car_kernel, self.mesh,
                                 agents.p, self.road_y)
        return rhs_cars(t, agents.p, sensed, self._slow, self._gap,
                        self._leader_speed)

    def agent_points(self, agents):
        return np.column_stack([agents.p,
                                np.full(agents.p.size, self.road_y)])

    def road_strip_mass(self, density):
        """Total pedestrian mass currently inside the road strip."""
        cy = self.mesh.cell_centroid[:, 1]
        lo, hi = self.road_strip
        inside = (cy > lo) & (cy < hi)
        return float(density.values[:, inside].sum(axis=0)
                     @ self.mesh.cell_area[inside])


class HooligansScenario(Scenario):
    schema = "officers"

    def _setup(self):
        cfg = self.config
        self._presence_kernel = Kernel.gauss_bump(cfg["police.presence.r"])
        self._mixing_kernel = Kernel.poly_bump(cfg["police.mixing.kernel.r"])
        self._repulsion_kernel = Kernel.poly_bump(
            cfg["police.repulsion.kernel.r"])
        self._push = (cfg["police.push1"], cfg["police.push2"])
        self._push_sign = cfg["police.push_sign"]
        self._preferred = cfg["drift.preferred"]
        self._literal = cfg["drift.literal_cross_denominator"]
        self._mixing_strength = cfg["police.mixing_strength"]
        self._repulsion_strength = cfg["police.repulsion_strength"]

    def _p0(self):
        return np.array(self.config["police.p0"])

    def drift(self, t, rho):
        return drift_hooligans(rho, self._eps, self._preferred,
                               self._drift_kernel, self.mesh,
                               literal_a2_denominator=self._literal)

    def velocity_from_drift(self, t, drift, agents):
        return velocity_hooligans(t, self.mesh.cell_centroid, drift,
                                  agents.points(), self._presence_kernel,
                                  self._push, self._push_sign)

    def agent_rhs(self, t, rho, agents):
        drift = officer_mixing_drift(rho, self._mixing_kernel, self.mesh,
                                     agents.points(), self._mixing_strength)
        return rhs_officers(t, agents.p, drift, self._repulsion_kernel,
                            self._repulsion_strength)

    def mixing(self, density):
        """Overlap functional: integral of the two mollified densities."""
        from .nonlocal_ops import mollify
        m1 = mollify(density.values[0], self._mixing_kernel, self.mesh)
        m2 = mollify(density.values[1], self._mixing_kernel, self.mesh)
        return float((m1 * m2) @ self.mesh.cell_area)


_SCENARIO_CLASSES = {
    "tourists": TouristsScenario,
    "crosswalk": CrosswalkScenario,
    "hooligans": HooligansScenario,
}


def build_scenario(tag, overrides=None):
    """Assemble a scenario from its tag and an override mapping."""
    if tag not in _SCENARIO_CLASSES:
        raise ScenarioError(f"unknown scenario tag {tag!r}")
    cfg = apply_overrides(default_config(tag), overrides)
    return _SCENARIO_CLASSES[tag](cfg)
