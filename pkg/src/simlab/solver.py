"""Time integration on the polar grid with homogeneous Neumann conditions.

One step is IMEX Euler: the reaction is advanced explicitly, then diffusion is
applied implicitly as two sweeps, radial (one tridiagonal solve per angular
line) followed by angular (one periodic tridiagonal solve per ring).  The
angular solve uses the exact inverse of the periodic matrix, which is a
symmetric circulant with a closed-form kernel; applying it as a symmetric sum
keeps every step bitwise equivariant under grid rotations and reflections.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .domain import Field, PolarGrid, StatePair
from .errors import BlowUpError, ConfigError, PositivityError, SpecError
from .model import SystemSpec, dt_max, eval_reaction

__all__ = [
    "StatePair",
    "Trajectory",
    "laplacian_polar",
    "step",
    "run",
    "ode_reference",
    "ode_trajectory",
    "write_trajectory",
]

# relative size below which circulant kernel entries are dropped
KERNEL_CUTOFF = 1e-18


def laplacian_polar(u: Field) -> Field:
    """Conservative five-point polar Laplacian with Neumann ghost cells.

    Radial fluxes use face radii, so for a disk the inner face has zero weight
    and the antipodal pole ghost drops out of the stencil.
    """
    g = u.grid
    v = u.values
    h = g.dr
    r = g.radii[:, None]
    f = g.faces
    n = g.n_theta
    if g.domain.is_disk:
        inner_ghost = np.roll(v[0], n // 2)[None, :]
    else:
        inner_ghost = v[0:1]
    padded = np.concatenate([inner_ghost, v, v[-1:]], axis=0)
    flux = f[:, None] * (padded[1:] - padded[:-1])
    radial = (flux[1:] - flux[:-1]) / (r * h * h)
    angular = (np.roll(v, -1, axis=1) - 2.0 * v + np.roll(v, 1, axis=1)) / (r * r * g.dtheta**2)
    return u.with_values(radial + angular)


def radial_system(grid: PolarGrid, mu_r: np.ndarray, dt: float):
    """Rows of ``I - dt * mu * L_r`` as ``(lower, diag, upper)``."""
    h2 = grid.dr**2
    r = grid.radii
    f = grid.faces
    a = dt * mu_r * f[:-1] / (r * h2)
    b = dt * mu_r * f[1:] / (r * h2)
    a = a.copy()
    b = b.copy()
    a[0] = 0.0
    b[-1] = 0.0
    return np.ascontiguousarray(-a), np.ascontiguousarray(1.0 + (a + b)), np.ascontiguousarray(-b)


def angular_kernel(grid: PolarGrid, mu_r: np.ndarray, dt: float):
    """Circulant inverse of ``I - dt * mu / r^2 * D_theta^2`` on every ring.

    With ``c = dt mu / (r dtheta)^2`` the periodic Green's function is
    ``g_k = (rho^k + rho^(n-k)) / (sqrt(1 + 4c) (1 - rho^n))`` where ``rho`` is
    the root of ``c rho^2 - (1 + 2c) rho + c = 0`` inside the unit disk.
    Returns the half kernel ``g[:, 0 .. n/2]`` and per-ring truncation lengths.
    """
    n = grid.n_theta
    c = dt * mu_r / (grid.radii * grid.dtheta) ** 2
    s = np.sqrt(1.0 + 4.0 * c)
    rho = 2.0 * c / (1.0 + 2.0 * c + s)
    k = np.arange(n // 2 + 1)[None, :]
    rc = rho[:, None]
    with np.errstate(under="ignore"):
        num = rc**k + rc ** (n - k)
        g = num / (s * (1.0 - rho**n))[:, None]
    keep = g[:, 1:] >= KERNEL_CUTOFF * g[:, :1]
    kmax = keep.sum(axis=1).astype(np.int64)
    return np.ascontiguousarray(g), np.ascontiguousarray(kmax)


class _Diffusion:
    """Cached implicit sweeps for one component."""

    def __init__(self, grid: PolarGrid, mu_fn, time_dependent: bool):
        self.grid = grid
        self.mu_fn = mu_fn
        self.time_dependent = time_dependent
        self._key = None
        self._plan = None
        self._buf = np.empty(grid.shape)

    def _plan_for(self, t_new: float, dt: float):
        key = (t_new if self.time_dependent else None, dt)
        if key != self._key:
            mu_r = np.broadcast_to(
                np.asarray(self.mu_fn(t_new, self.grid.radii), dtype=float), (self.grid.n_r,)
            ).copy()
            lo, di, up = radial_system(self.grid, mu_r, dt)
            g, kmax = angular_kernel(self.grid, mu_r, dt)
            self._plan = (lo, di, up, g, kmax)
            self._key = key
        return self._plan

    def apply(self, rhs: np.ndarray, t_new: float, dt: float) -> np.ndarray:
        lo, di, up, g, kmax = self._plan_for(t_new, dt)
        rhs = np.ascontiguousarray(rhs, dtype=float)
        kernels.tridiag_lines(lo, di, up, rhs, self._buf)
        out = np.empty(self.grid.shape)
        kernels.circulant_rings(self._buf, g, kmax, out)
        return out


class Stepper:
    """Reusable IMEX stepper for one spec on one grid."""

    def __init__(self, spec: SystemSpec, grid: PolarGrid):
        if grid.domain != spec.domain:
            raise SpecError("grid domain differs from spec domain")
        self.spec = spec
        self.grid = grid
        self._r = grid.radii[:, None]
        self._diff = [
            _Diffusion(grid, spec.mu(i), spec.mu(i).depends_on_t)
            for i in range(1, spec.n_components + 1)
        ]

    def advance(self, v1: np.ndarray, v2: np.ndarray, t: float, dt: float):
        if not dt > 0.0:
            raise ConfigError(f"dt must be positive, got {dt}")
        t_new = t + dt
        # overflow is caught below as a blow-up, not warned about
        with np.errstate(over="ignore", invalid="ignore"):
            if self.spec.n_components == 1:
                g1, _ = eval_reaction(self.spec, t, self._r, v1)
                w1 = self._diff[0].apply(v1 + dt * g1, t_new, dt)
                w2 = v2
            else:
                g1, g2 = eval_reaction(self.spec, t, self._r, v1, v2)
                w1 = self._diff[0].apply(v1 + dt * g1, t_new, dt)
                w2 = self._diff[1].apply(v2 + dt * g2, t_new, dt)
        if not (np.isfinite(w1).all() and np.isfinite(w2).all()):
            raise BlowUpError(f"non-finite values at t = {t_new:g}", time=t_new)
        return w1, w2


def step(state: StatePair, spec: SystemSpec, t: float, dt: float) -> StatePair:
    """One IMEX step from time ``t`` to ``t + dt``."""
    w1, w2 = Stepper(spec, state.grid).advance(state.u1.values, state.u2.values, t, dt)
    return StatePair.from_arrays(state.grid, w1, w2, t + dt)


@dataclass(eq=False)
class Trajectory:
    spec: SystemSpec
    snapshots: list
    dt: float
    grid: PolarGrid
    steps_taken: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = self.times
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("snapshot times must be strictly increasing")

    @property
    def times(self) -> list:
        return [s.time for s in self.snapshots]

    def at(self, t: float, tol: float = 1e-9) -> StatePair:
        for s in self.snapshots:
            if abs(s.time - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t = {t}")

    def subset(self, times) -> "Trajectory":
        return Trajectory(self.spec, [self.at(t) for t in times], self.dt, self.grid, self.steps_taken)

    def window(self, t0: float, t1: float) -> list:
        return [s for s in self.snapshots if t0 - 1e-9 <= s.time <= t1 + 1e-9]

    @property
    def final(self) -> StatePair:
        return self.snapshots[-1]


def positivity_tol(u0: StatePair) -> float:
    return 1e-9 * (1.0 + u0.sup())


def run(spec: SystemSpec, u0: StatePair, t_end: float, dt: float, snapshot_times,
        check_dt: bool = True) -> Trajectory:
    """Integrate from ``u0.time`` to ``t_end`` landing exactly on every snapshot time."""
    times = [float(t) for t in snapshot_times]
    if not times:
        raise ConfigError("snapshot list is empty")
    t0 = u0.time
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("snapshot times must be sorted and distinct")
    if times[0] < t0 - 1e-12 or times[-1] > t_end + 1e-12:
        raise ConfigError(f"snapshot times must lie in [{t0}, {t_end}]")
    if not dt > 0.0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if check_dt:
        limit = dt_max(spec, u0)
        if dt > limit:
            raise ConfigError(f"dt = {dt:g} exceeds the explicit-reaction limit {limit:g}")

    grid = u0.grid
    stepper = Stepper(spec, grid)
    v1 = np.array(u0.u1.values)
    v2 = np.array(u0.u2.values)
    check_sign = spec.n_components == 2 and min(v1.min(), v2.min()) >= 0.0
    ptol = positivity_tol(u0)
    snaps = []
    t = t0
    n_steps = 0
    for target in times:
        if target <= t + 1e-12 * max(1.0, abs(t)):
            snaps.append(StatePair.from_arrays(grid, v1, v2, target))
            continue
        span = target - t
        n = max(1, math.ceil(span / dt - 1e-9))
        start = t
        for i in range(n):
            h = dt if i < n - 1 else target - (start + (n - 1) * dt)
            if abs(h - dt) <= 1e-12 * dt:
                h = dt
            if h <= 0.0:
                continue
            v1, v2 = stepper.advance(v1, v2, t, h)
            n_steps += 1
            t = start + (i + 1) * dt if i < n - 1 else target
            if check_sign and min(v1.min(), v2.min()) < -ptol:
                raise PositivityError(
                    f"component dropped below -{ptol:.3g} at t = {t:g} "
                    f"(min {min(v1.min(), v2.min()):.3g})"
                )
        t = target
        snaps.append(StatePair.from_arrays(grid, v1, v2, target))
    return Trajectory(spec, snaps, dt, grid, n_steps)


# ---- spatially homogeneous oracle ----------------------------------------------------


def _ode_rhs(spec: SystemSpec):
    if spec.reaction_depends_on_r():
        raise SpecError("ode_reference needs r-independent reaction coefficients")
    r = spec.domain.a1

    def rhs(t, y):
        if spec.n_components == 1:
            g, _ = eval_reaction(spec, t, r, y[0])
            return [float(g), 0.0]
        g1, g2 = eval_reaction(spec, t, r, y[0], y[1])
        return [float(g1), float(g2)]

    return rhs


def ode_trajectory(spec: SystemSpec, u0, times, rtol: float = 1e-10) -> np.ndarray:
    """Homogeneous solution at each of ``times`` (shape ``(len(times), 2)``)."""
    y0 = [float(u0[0]), float(u0[1]) if spec.n_components == 2 else 0.0]
    times = np.asarray(times, dtype=float)

    def escape(t, y):
        return 1e12 - max(abs(y[0]), abs(y[1]))

    escape.terminal = True
    sol = solve_ivp(_ode_rhs(spec), (0.0, float(times[-1])), y0, method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2, t_eval=times, events=escape)
    if sol.status == 1 or not sol.success or not np.all(np.isfinite(sol.y)):
        t_bad = float(sol.t[-1]) if sol.t.size else 0.0
        raise BlowUpError(f"homogeneous ODE blew up near t = {t_bad:g}", time=t_bad)
    return sol.y.T.copy()


def ode_reference(spec: SystemSpec, u0, t_end: float, rtol: float = 1e-10):
    """Spatially homogeneous ODE solution at ``t_end`` by an adaptive RK pair."""
    if t_end == 0:
        return float(u0[0]), float(u0[1]) if spec.n_components == 2 else 0.0
    y = ode_trajectory(spec, u0, [0.0, t_end], rtol)[-1]
    return float(y[0]), float(y[1])


# ---- output ---------------------------------------------------------------------------


def snapshot_filename(t: float) -> str:
    return f"snap_t{t:.6f}.csv"


def snapshot_csv(state: StatePair) -> str:
    g = state.grid
    r, th = g.radii, g.theta
    v1, v2 = state.u1.values, state.u2.values
    lines = ["r,theta,u1,u2"]
    for j in range(g.n_r):
        rj = f"{r[j]:.17g}"
        for m in range(g.n_theta):
            lines.append(f"{rj},{th[m]:.17g},{v1[j, m]:.17g},{v2[j, m]:.17g}")
    return "\n".join(lines) + "\n"


def write_trajectory(traj: Trajectory, out_dir, dump_times=None) -> Path:
    """Write one CSV per dumped snapshot plus a ``trajectory.json`` manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dumped = traj.snapshots if dump_times is None else [traj.at(t) for t in dump_times]
    for s in dumped:
        (out / snapshot_filename(s.time)).write_text(snapshot_csv(s))
    g = traj.grid
    manifest = {
        "times": traj.times,
        "dumped_times": [s.time for s in dumped],
        "files": [snapshot_filename(s.time) for s in dumped],
        "dt": traj.dt,
        "steps": traj.steps_taken,
        "grid": {"a1": g.domain.a1, "a2": g.domain.a2, "n_r": g.n_r, "n_theta": g.n_theta},
        "spec_hash": traj.spec.spec_hash(),
        "kind": traj.spec.kind,
    }
    path = out / "trajectory.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
