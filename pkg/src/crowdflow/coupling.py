"""Time coupling between the density solver and the agent system.

One coupled step advances both unknowns by the same increment dt using a
first-order splitting.  The crowding drift is evaluated once per step from
the current densities and reused by both splitting orders:

  pde_first   assemble the velocity at the current agent positions, advance
              the densities, then advance the agents sensing the updated
              densities.
  ode_first   advance the agents sensing the current densities, reassemble
              the velocity at the new positions, then advance the densities.

dt is the finite-volume stability step capped by the agents' rate bound and
by dt_max; a caller-supplied fixed_dt overrides the adaptive choice, which
keeps paired runs on one shared time grid.
"""

from __future__ import annotations

import numpy as np

from .agents import AgentState, StateCorruptionError, euler_step
from .fv import (CFLViolationError, DensityField, VelocityField, cfl_timestep,
                 fv_step)

_FRAME_EPS = 1e-9


class SolverError(RuntimeError):
    """Numerical failure during time stepping, annotated with step context."""


class SimState:
    """Mutable simulation state: time, densities, agents, step counter.

    `diagnostics` holds one entry per step taken through this object since
    it was created or loaded: after-step time, dt, per-population masses,
    clamped mass, pre-clamp extremes, the assembled velocity bound, and the
    agent positions.
    """

    def __init__(self, t, density, agents, step=0):
        self.t = float(t)
        self.density = density
        self.agents = agents
        self.step = int(step)
        self.diagnostics = {key: [] for key in (
            "t", "dt", "mass", "clamped", "rho_min", "rho_max", "max_speed",
            "agents_p")}

    def record(self, mesh, dt, density, max_speed):
        d = self.diagnostics
        d["t"].append(self.t)
        d["dt"].append(dt)
        d["mass"].append(density.masses(mesh))
        d["clamped"].append(density.clamped_mass)
        d["rho_min"].append(density.preclamp_min)
        d["rho_max"].append(density.preclamp_max)
        d["max_speed"].append(max_speed)
        d["agents_p"].append(self.agents.p.copy())


class Frame:
    """Snapshot emitted to a sink: copies, safe to keep across steps."""

    __slots__ = ("index", "time", "step", "density", "agents")

    def __init__(self, index, state):
        self.index = int(index)
        self.time = state.t
        self.step = state.step
        self.density = state.density.copy()
        self.agents = AgentState(state.agents.schema, state.agents.p.copy(),
                                 t=state.agents.t)


def initial_state(scenario):
    return SimState(0.0, scenario.initial_density(),
                    scenario.initial_agents())


def coupled_step(state, scenario, fixed_dt=None, dt_cap=None):
    """Advance the state in place by one step; returns the dt used."""
    t = state.t
    try:
        drift = scenario.drift(t, state.density.values)
        velocity = VelocityField(
            scenario.velocity_from_drift(t, drift, state.agents), t)
        if fixed_dt is not None:
            dt = float(fixed_dt)
        else:
            dt = min(cfl_timestep(state.density, velocity, scenario.mesh,
                                  scenario.fluxes, cfl=scenario.cfl,
                                  dt_max=scenario.dt_max),
                     scenario.ode_cap)
            if dt_cap is not None:
                dt = min(dt, dt_cap)
        if dt <= 0.0:
            raise SolverError(f"nonpositive step size {dt} at t={t:.6g}")

        if scenario.splitting == "pde_first":
            density = fv_step(state.density, velocity, scenario.mesh, dt,
                              scenario.fluxes)
            rhs = scenario.agent_rhs(t, density.values, state.agents)
            agents = euler_step(state.agents, rhs, dt)
        else:
            rhs = scenario.agent_rhs(t, state.density.values, state.agents)
            agents = euler_step(state.agents, rhs, dt)
            velocity = VelocityField(
                scenario.velocity_from_drift(t, drift, agents), t)
            density = fv_step(state.density, velocity, scenario.mesh, dt,
                              scenario.fluxes)
    except (CFLViolationError, StateCorruptionError) as exc:
        raise SolverError(
            f"step {state.step} at t={t:.6g} failed: {exc}") from exc

    state.t = t + dt
    state.density = density
    state.agents = agents
    state.step += 1
    state.record(scenario.mesh, dt, density, velocity.max_speed())
    return dt


def run(scenario, t_final=None, n_steps=None, frame_dt=None, sink=None,
        state=None, fixed_dt=None):
    """March the coupled system and emit frames at a fixed cadence.

    Runs until t_final (the final step is shortened to land on it exactly)
    or for exactly n_steps when that is given instead.  Frames go to
    `sink(frame)` at absolute times k * frame_dt for k = 0, 1, ...: each
    frame is the first completed step at or past its nominal time, with no
    interpolation.  The initial frame is emitted only for a fresh state, so
    resumed runs continue the frame sequence instead of repeating it.
    """
    if state is None:
        state = initial_state(scenario)
    if t_final is None and n_steps is None:
        t_final = scenario.t_final
    if sink is not None and frame_dt is None:
        frame_dt = scenario.frame_dt

    def emit_pending():
        nonlocal next_frame
        while sink is not None and next_frame * frame_dt \
                <= state.t + _FRAME_EPS * frame_dt:
            if t_final is not None \
                    and next_frame * frame_dt > t_final + _FRAME_EPS * frame_dt:
                break
            sink(Frame(next_frame, state))
            next_frame += 1

    if sink is not None:
        if frame_dt <= 0.0:
            raise ValueError("frame_dt must be positive")
        next_frame = int(np.floor(state.t / frame_dt + _FRAME_EPS)) + 1
        if state.step == 0 and state.t == 0.0:
            next_frame = 0
        emit_pending()
    else:
        next_frame = 0

    if n_steps is not None:
        for _ in range(int(n_steps)):
            coupled_step(state, scenario, fixed_dt=fixed_dt)
            emit_pending()
        return state

    while state.t < t_final * (1.0 - 1e-14) and t_final > 0.0:
        cap = t_final - state.t
        if fixed_dt is not None:
            coupled_step(state, scenario, fixed_dt=min(fixed_dt, cap))
        else:
            coupled_step(state, scenario, dt_cap=cap)
        emit_pending()
    return state


def save_state(path, state):
    """Serialize a state so a resumed run reproduces the original bitwise."""
    np.savez(path, t=np.float64(state.t), step=np.int64(state.step),
             density=state.density.values,
             capacity=np.float64(state.density.capacity),
             schema=np.array(state.agents.schema),
             agents_p=state.agents.p,
             agents_t=np.float64(state.agents.t))


def load_state(path):
    with np.load(path, allow_pickle=False) as data:
        density = DensityField(np.array(data["density"]),
                               float(data["capacity"]))
        agents = AgentState(str(data["schema"]), np.array(data["agents_p"]),
                            t=float(data["agents_t"]))
        return SimState(float(data["t"]), density, agents,
                        step=int(data["step"]))
