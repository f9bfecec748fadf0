"""Agent dynamics coupled to the density populations.

Three right-hand sides (tour guides circling meeting points, cars
following a leader across a crosswalk, police officers steered by crowd
mixing plus mutual repulsion) and the forward-Euler step they share.
"""

import numpy as np

from .fv import StateCorruptionError
from .nonlocal_ops import saturate

__all__ = ["AgentState", "rhs_guides", "rhs_cars", "rhs_officers",
           "euler_step"]

_SCHEMAS = ("guides", "cars", "officers")


class AgentState:
    """Flat agent coordinate vector with a schema tag and a timestamp.

    Layouts: "guides" and "officers" hold N points as (x1, y1, x2, y2,
    ...); "cars" holds N road abscissae in ascending order.
    """

    def __init__(self, schema, p, t=0.0):
        if schema not in _SCHEMAS:
            raise ValueError(f"unknown agent schema {schema!r}")
        p = np.ascontiguousarray(p, dtype=float).ravel()
        if not np.all(np.isfinite(p)):
            raise StateCorruptionError("non-finite agent coordinate")
        if schema in ("guides", "officers"):
            if len(p) == 0 or len(p) % 2:
                raise ValueError(f"{schema} layout needs an even, positive "
                                 f"coordinate count, got {len(p)}")
        if schema == "cars" and np.any(np.diff(p) < 0.0):
            raise StateCorruptionError("car positions out of order")
        self.schema = schema
        self.p = p
        self.t = float(t)

    @property
    def n_agents(self):
        return len(self.p) if self.schema == "cars" else len(self.p) // 2

    def points(self):
        """Positions as an (N, 2) array; cars have no 2D layout."""
        if self.schema == "cars":
            raise ValueError("cars store road abscissae, not 2D points")
        return self.p.reshape(-1, 2)

    def copy(self):
        return AgentState(self.schema, self.p.copy(), self.t)


def rhs_guides(t, p, b, centers, spins):
    """Rotation of each guide about its own center, scaled by the crowd
    density sensed at the guide (b).  A positive spin turns clockwise."""
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float)
    spins = np.asarray(spins, dtype=float)
    rate = spins * b
    off = p - centers
    out = np.empty_like(p)
    out[:, 0] = rate * off[:, 1]
    out[:, 1] = -(rate * off[:, 0])
    return out.ravel()


def rhs_cars(t, p, sensed, slow_factor, headway_factor, leader_speed):
    """Follow-the-leader speeds.

    Followers drive at slow_factor(sensed crowd ahead) times
    headway_factor(gap to the next car); both factors map into [0, 1].
    The last car (largest abscissa) is the leader and drives at the
    assigned leader speed, ignoring the crowd.
    """
    p = np.asarray(p, dtype=float)
    sensed = np.asarray(sensed, dtype=float)
    out = np.empty_like(p)
    if len(p) > 1:
        out[:-1] = slow_factor(sensed[:-1]) * headway_factor(np.diff(p))
    out[-1] = leader_speed(t) if callable(leader_speed) else float(leader_speed)
    return out


def rhs_officers(t, p, drift, repulsion_kernel, repulsion_strength):
    """Crowd-mixing drift plus mutual repulsion between officers.

    The repulsion on officer k is (strength / N) times the sum over all
    officers j of the saturated kernel gradient at p_j - p_k; the kernel
    peaks at zero offset, so each term pushes k away from j (the j = k
    term vanishes).  `drift` is the per-officer crowd term, added as is.
    """
    pts = np.asarray(p, dtype=float).reshape(-1, 2)
    n = len(pts)
    out = np.array(drift, dtype=float).reshape(n, 2).copy()
    for k in range(n):
        g = repulsion_kernel.grad(pts - pts[k])
        out[k] += (repulsion_strength / n) * saturate(g).sum(axis=0)
    return out.ravel()


def euler_step(state, rhs_value, dt, clamp_box=None):
    """One forward-Euler step: p + dt * rhs, timestamp advanced by dt.

    clamp_box = (xmin, xmax, ymin, ymax) confines 2D schemas to the box
    (off by default: compact sensing kernels make excursions inert).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rhs_value = np.asarray(rhs_value, dtype=float).ravel()
    if rhs_value.shape != state.p.shape:
        raise ValueError("rhs length does not match the agent state")
    p = state.p + dt * rhs_value
    if clamp_box is not None and state.schema != "cars":
        xmin, xmax, ymin, ymax = clamp_box
        pts = p.reshape(-1, 2)
        np.clip(pts[:, 0], xmin, xmax, out=pts[:, 0])
        np.clip(pts[:, 1], ymin, ymax, out=pts[:, 1])
    return AgentState(state.schema, p, state.t + dt)
