"""Finite-volume core.

Flux families, the FORCE interface flux evaluated in each edge's normal
direction, CFL step-size control, and one conservative update of every
population density on a frozen velocity field.
"""

import numpy as np

from .mesh import OUTFLOW

__all__ = ["CFLViolationError", "StateCorruptionError", "Flux",
           "DensityField", "VelocityField", "flux_list", "force_edge_flux",
           "cfl_timestep", "fv_step"]


class StateCorruptionError(RuntimeError):
    """A density, velocity, or flux value left its admissible set."""


class CFLViolationError(RuntimeError):
    """An update overshot [0, capacity] by more than round-off."""


class Flux:
    """Scalar throughput q(rho) of one population and its wave-speed bound.

    Families:
      "logistic": q = amplitude * rho * (1 - rho / capacity).  Vanishes at
        rho = 0 and rho = capacity, so the two extreme constant states are
        exact steady states of the update.
      "linear": q = amplitude * rho.  Used by translation and oracle tests.
    """

    def __init__(self, family="logistic", amplitude=1.0, capacity=1.0):
        if family not in ("logistic", "linear"):
            raise ValueError(f"unknown flux family {family!r}")
        if amplitude <= 0.0 or capacity <= 0.0:
            raise ValueError("amplitude and capacity must be positive")
        self.family = family
        self.amplitude = float(amplitude)
        self.capacity = float(capacity)

    @property
    def max_wave_speed(self):
        """max of |q'| over [0, capacity] (both families: the amplitude)."""
        return self.amplitude

    def q_unchecked(self, rho):
        if self.family == "logistic":
            return self.amplitude * rho * (1.0 - rho / self.capacity)
        return self.amplitude * rho

    def q(self, rho):
        """Throughput at rho, validating rho is in [0, capacity]."""
        rho = np.asarray(rho, dtype=float)
        if rho.size and (not np.all(np.isfinite(rho))
                         or rho.min() < -1e-12
                         or rho.max() > self.capacity + 1e-12):
            raise StateCorruptionError(
                f"density outside [0, {self.capacity}] passed to flux")
        out = self.q_unchecked(rho)
        return float(out) if np.ndim(out) == 0 else out

    def dq(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.family == "logistic":
            out = self.amplitude * (1.0 - 2.0 * rho / self.capacity)
        else:
            out = np.full_like(rho, self.amplitude)
        return float(out) if np.ndim(out) == 0 else out


def flux_list(fluxes, n):
    """Normalize a single Flux or a sequence of them to a length-n list."""
    if isinstance(fluxes, Flux):
        return [fluxes] * n
    fluxes = list(fluxes)
    if len(fluxes) != n:
        raise ValueError(f"expected {n} flux functions, got {len(fluxes)}")
    return fluxes


class DensityField:
    """Cell-average densities of every population on a fixed mesh.

    `values` has shape (n_populations, n_cells); a 1D array is promoted to
    a single population.  `clamped_mass` records, per population, the mass
    removed by clamping in the step that produced this field.
    """

    def __init__(self, values, capacity=1.0):
        values = np.ascontiguousarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2:
            raise ValueError("density values must be (n_populations, n_cells)")
        if capacity <= 0.0:
            raise ValueError("capacity must be positive")
        self.values = values
        self.capacity = float(capacity)
        self.clamped_mass = np.zeros(values.shape[0])

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def n_cells(self):
        return self.values.shape[1]

    def masses(self, mesh):
        """Per-population total mass (area-weighted sum over cells)."""
        return self.values @ mesh.cell_area

    def validate(self, tol=1e-12):
        v = self.values
        if not np.all(np.isfinite(v)):
            raise StateCorruptionError("non-finite density value")
        if v.size and (v.min() < -tol or v.max() > self.capacity + tol):
            raise StateCorruptionError(
                f"density outside [0, {self.capacity}] by more than {tol}")
        return self

    def copy(self):
        out = DensityField(self.values.copy(), self.capacity)
        out.clamped_mass = self.clamped_mass.copy()
        return out


class VelocityField:
    """Per-population velocities at cell centroids, frozen at one time."""

    def __init__(self, values, time=0.0):
        values = np.ascontiguousarray(values, dtype=float)
        if values.ndim == 2:
            values = values[None, :, :]
        if values.ndim != 3 or values.shape[2] != 2:
            raise ValueError(
                "velocity values must be (n_populations, n_cells, 2)")
        if not np.all(np.isfinite(values)):
            raise StateCorruptionError("non-finite velocity value")
        self.values = values
        self.time = float(time)

    def max_speed(self):
        if self.values.size == 0:
            return 0.0
        return float(np.sqrt((self.values ** 2).sum(axis=2)).max())


# Fraction of the local incircle diameter used as the artificial-viscosity
# length dx_loc of each edge flux.  On a triangle the incircle diameter times
# the perimeter equals four times the area, so feeding the full diameter to
# every edge makes the Lax-Friedrichs diffusion alone consume the whole
# own-cell monotonicity budget and lets sharp fronts undershoot at any time
# step.  A quarter of it, together with a CFL number of at most 0.2, keeps
# every update coefficient nonnegative for worst-case data (interior cells
# spend 0.81 of the budget, outflow-edge cells 0.94).
VISC_LENGTH_FRACTION = 0.25


def force_edge_flux(rho_left, rho_right, vn, dt, dx_loc, flux):
    """FORCE interface flux in the edge-normal direction.

    The average of the local Lax-Friedrichs flux and the flux of the
    Lax-Wendroff half-step value, with f(rho) = q(rho) * vn.  Monotone in
    its second argument unconditionally and in its first while the local
    CFL number lambda*dt/dx_loc stays below sqrt(2) - 1.
    """
    rl = np.asarray(rho_left, dtype=float)
    rr = np.asarray(rho_right, dtype=float)
    vn = np.asarray(vn, dtype=float)
    dx = np.asarray(dx_loc, dtype=float)
    if dt <= 0.0 or np.any(dx <= 0.0):
        raise ValueError("dt and dx_loc must be positive")
    fl = flux.q_unchecked(rl) * vn
    fr = flux.q_unchecked(rr) * vn
    f_lf = 0.5 * (fl + fr) - (dx / (2.0 * dt)) * (rr - rl)
    r_lw = 0.5 * (rl + rr) - (dt / (2.0 * dx)) * (fr - fl)
    out = 0.5 * (f_lf + flux.q_unchecked(r_lw) * vn)
    if not np.all(np.isfinite(out)):
        raise StateCorruptionError("non-finite value in edge flux")
    return float(out) if np.ndim(out) == 0 else out


def cfl_timestep(state, velocity, mesh, fluxes, cfl=0.2, dt_max=1e-2,
                 lambda_min=1e-12):
    """Largest stable step for the density update.

    cfl times the minimum over cells of incircle diameter over the local
    wave speed (max over populations of max|q'| times the cell speed),
    capped at dt_max.  If no cell moves faster than lambda_min the cap is
    returned directly.
    """
    if not 0.0 < cfl <= 1.0:
        raise ValueError("cfl must be in (0, 1]")
    fluxes = flux_list(fluxes, state.n)
    lam = np.zeros(mesh.n_cells)
    for i in range(state.n):
        speed = np.sqrt((velocity.values[i] ** 2).sum(axis=1))
        np.maximum(lam, fluxes[i].max_wave_speed * speed, out=lam)
    if lam.max() <= lambda_min:
        return float(dt_max)
    np.maximum(lam, lambda_min, out=lam)
    dt = cfl * float(np.min(mesh.incircle_diameter / lam))
    return min(dt, float(dt_max))


def _active_edges(mesh):
    """Edges that carry flux (interior plus outflow), with ghost indices.

    Returns (left_cells, right_cells, has_real_right, lengths, dx_loc,
    normals); a boundary outflow edge reuses its inside cell as the ghost
    and never scatters back to it.
    """
    got = mesh._caches.get("fv_edges")
    if got is None:
        interior = mesh.edge_right >= 0
        active = interior | (mesh.edge_marker == OUTFLOW)
        ghost = np.where(interior, mesh.edge_right, mesh.edge_left)
        got = (mesh.edge_left[active], ghost[active], interior[active],
               mesh.edge_length[active],
               VISC_LENGTH_FRACTION * mesh.edge_dxloc[active],
               mesh.edge_normal[active])
        mesh._caches["fv_edges"] = got
    return got


def fv_step(state, velocity, mesh, dt, fluxes):
    """One conservative update of every population over a step dt.

    Wall edges carry zero flux; outflow edges see a ghost holding the
    inside value, with the flux clamped to be outgoing so mass can only
    leave (a boundary-pointing velocity would otherwise import mass from
    the ghost).  The result is clamped to [0, capacity] with the clamped
    mass recorded per population on the returned field.  A pre-clamp
    excursion beyond 1e-10 aborts: the step violated its stability bound.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if velocity.values.shape[:2] != state.values.shape:
        raise ValueError("velocity and density shapes disagree")
    fluxes = flux_list(fluxes, state.n)
    cap = state.capacity
    left, right, real_right, length, dxloc, normal = _active_edges(mesh)

    new_vals = np.empty_like(state.values)
    clamped = np.zeros(state.n)
    pre_lo = np.zeros(state.n)
    pre_hi = np.zeros(state.n)
    for i in range(state.n):
        rho = state.values[i]
        vel = velocity.values[i]
        vedge = 0.5 * (vel[left] + vel[right])
        vn = vedge[:, 0] * normal[:, 0] + vedge[:, 1] * normal[:, 1]
        f = force_edge_flux(rho[left], rho[right], vn, dt, dxloc, fluxes[i])
        np.maximum(f, 0.0, out=f, where=~real_right)
        w = length * f
        acc = np.bincount(left, weights=w, minlength=mesh.n_cells)
        acc -= np.bincount(right[real_right], weights=w[real_right],
                           minlength=mesh.n_cells)
        new = rho - dt * acc / mesh.cell_area
        if not np.all(np.isfinite(new)):
            raise StateCorruptionError(
                f"non-finite density after update (population {i})")
        lo, hi = new.min(), new.max()
        if lo < -1e-10 or hi > cap + 1e-10:
            c = int(np.argmin(new)) if lo < -1e-10 else int(np.argmax(new))
            raise CFLViolationError(
                f"update left [0, {cap}]: population {i}, cell {c}, "
                f"value {new[c]:.6e}, dt {dt:.6e}")
        pre_lo[i], pre_hi[i] = lo, hi
        clipped = np.clip(new, 0.0, cap)
        clamped[i] = float(np.abs(clipped - new) @ mesh.cell_area)
        new_vals[i] = clipped
    out = DensityField(new_vals, cap)
    out.clamped_mass = clamped
    out.preclamp_min = pre_lo
    out.preclamp_max = pre_hi
    return out
