"""Radial domains, cell-centered polar grids, reflections and grid fields.

Directions live on the half-angle lattice ``beta_k = k * dtheta / 2`` for
``k = 0 .. 2 * n_theta - 1``.  Reflecting across the line normal to such a
direction sends the angle ``theta_m`` to ``2 * beta_k + pi - theta_m``, which
is again a grid angle, so every reflection is an exact permutation of nodes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import AlignmentError, DomainError


@dataclass(frozen=True)
class RadialDomain:
    """The disk ``|x| < a2`` (``a1 == 0``) or the annulus ``a1 < |x| < a2``."""

    a1: float
    a2: float

    def __post_init__(self):
        a1, a2 = float(self.a1), float(self.a2)
        if not (math.isfinite(a1) and math.isfinite(a2)):
            raise DomainError(f"radii must be finite, got ({a1}, {a2})")
        if not 0.0 <= a1 < a2:
            raise DomainError(f"need 0 <= a1 < a2, got ({a1}, {a2})")
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)

    @property
    def is_disk(self) -> bool:
        return self.a1 == 0.0

    @property
    def is_annulus(self) -> bool:
        return self.a1 > 0.0

    def contains(self, x) -> bool:
        """Open-domain membership."""
        rho = float(np.hypot(*np.asarray(x, dtype=float)))
        return self.a1 < rho < self.a2 if self.is_annulus else rho < self.a2


@dataclass(frozen=True)
class Direction:
    """Unit vector at angle ``index * pi / n_theta`` (half-angle lattice)."""

    index: int
    n_theta: int

    def __post_init__(self):
        n_dir = 2 * self.n_theta
        object.__setattr__(self, "index", int(self.index) % n_dir)

    @property
    def angle(self) -> float:
        return self.index * math.pi / self.n_theta

    @property
    def vector(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    def opposite(self) -> "Direction":
        return Direction(self.index + self.n_theta, self.n_theta)

    def rotated(self, steps: int) -> "Direction":
        """Rotate by ``steps`` half-angle increments."""
        return Direction(self.index + steps, self.n_theta)


@dataclass(frozen=True)
class PolarGrid:
    """Cell-centered polar discretization of a :class:`RadialDomain`."""

    domain: RadialDomain
    n_r: int
    n_theta: int

    def __post_init__(self):
        if int(self.n_r) < 1:
            raise DomainError(f"n_r must be positive, got {self.n_r}")
        if int(self.n_theta) < 4 or int(self.n_theta) % 4:
            raise DomainError(f"n_theta must be a positive multiple of 4, got {self.n_theta}")
        object.__setattr__(self, "n_r", int(self.n_r))
        object.__setattr__(self, "n_theta", int(self.n_theta))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @property
    def dr(self) -> float:
        return (self.domain.a2 - self.domain.a1) / self.n_r

    @property
    def dtheta(self) -> float:
        return 2.0 * math.pi / self.n_theta

    @property
    def n_directions(self) -> int:
        return 2 * self.n_theta

    @cached_property
    def radii(self) -> np.ndarray:
        r = self.domain.a1 + (np.arange(self.n_r) + 0.5) * self.dr
        r.flags.writeable = False
        return r

    @cached_property
    def faces(self) -> np.ndarray:
        """Radii of the ``n_r + 1`` cell faces, ``faces[0] == a1``."""
        f = self.domain.a1 + np.arange(self.n_r + 1) * self.dr
        f[-1] = self.domain.a2
        f.flags.writeable = False
        return f

    @cached_property
    def theta(self) -> np.ndarray:
        t = np.arange(self.n_theta) * self.dtheta
        t.flags.writeable = False
        return t

    @cached_property
    def cell_areas(self) -> np.ndarray:
        """Quadrature weights ``r_j * dr * dtheta`` broadcast to the grid shape."""
        w = np.repeat((self.radii * self.dr * self.dtheta)[:, None], self.n_theta, axis=1)
        w.flags.writeable = False
        return w

    @cached_property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian node coordinates, each of shape ``(n_r, n_theta)``.

        Angles are wrapped to ``(-pi, pi]`` first so that ``y`` is exactly odd
        and ``x`` exactly even under ``theta -> -theta``.
        """
        m = np.arange(self.n_theta)
        wrapped = np.where(m <= self.n_theta // 2, m, m - self.n_theta) * self.dtheta
        x = self.radii[:, None] * np.cos(wrapped)[None, :]
        y = self.radii[:, None] * np.sin(wrapped)[None, :]
        x.flags.writeable = False
        y.flags.writeable = False
        return x, y

    def direction(self, index: int) -> Direction:
        return Direction(index, self.n_theta)

    def directions(self) -> list[Direction]:
        return [Direction(k, self.n_theta) for k in range(self.n_directions)]

    def direction_from_vector(self, e, atol: float = 1e-9) -> Direction:
        """Snap a unit vector to the lattice, refusing if it is not on it."""
        v = np.asarray(e, dtype=float)
        norm = float(np.hypot(v[0], v[1]))
        if norm == 0.0:
            raise AlignmentError("zero vector is not a direction")
        ang = math.atan2(v[1], v[0]) % (2.0 * math.pi)
        step = math.pi / self.n_theta
        k = round(ang / step)
        if abs(ang - k * step) > atol or abs(norm - 1.0) > 1e-9:
            raise AlignmentError(f"direction {tuple(v)} is not on the half-angle lattice")
        return Direction(k, self.n_theta)

    def as_direction(self, e) -> Direction:
        if isinstance(e, Direction):
            if e.n_theta != self.n_theta:
                raise AlignmentError(
                    f"direction built for n_theta={e.n_theta}, grid has {self.n_theta}"
                )
            return e
        return self.direction_from_vector(e)

    def reflection_permutation(self, e) -> np.ndarray:
        """Angular index map ``m -> m'`` with ``theta_m' = 2 beta + pi - theta_m``."""
        d = self.as_direction(e)
        n = self.n_theta
        return (d.index + n // 2 - np.arange(n)) % n


def _as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape != (2,):
        raise DomainError(f"expected a point in R^2, got shape {p.shape}")
    return p


def reflect_point(x, e) -> np.ndarray:
    """Mirror ``x`` across the line through the origin normal to ``e``."""
    p = _as_point(x)
    v = e.vector if isinstance(e, Direction) else np.asarray(e, dtype=float)
    return p - 2.0 * float(p @ v) * v


def invert_point(x, d: RadialDomain) -> np.ndarray:
    """Kelvin-type inversion of a point of the extension annulus into ``closure(B)``."""
    p = _as_point(x)
    rho2 = float(p @ p)
    rho = math.sqrt(rho2)
    ext = extended_domain(d)
    inside_ext = (ext.a1 < rho < ext.a2) if ext.is_annulus else rho < ext.a2
    if not inside_ext:
        raise DomainError(f"|x| = {rho} lies outside the extended domain")
    # one radius for every comparison, so points on a boundary circle up to
    # rounding are classified consistently
    if rho < d.a2 and (d.is_disk or rho > d.a1):
        raise DomainError(f"|x| = {rho} lies inside the domain itself")
    if rho >= d.a2:
        return p if rho == d.a2 else d.a2**2 / rho2 * p
    # annulus, rho <= a1
    return p if rho == d.a1 else d.a1**2 / rho2 * p


def extended_domain(d: RadialDomain) -> RadialDomain:
    if d.is_annulus:
        return RadialDomain(d.a1**2 / d.a2, d.a2**2 / d.a1)
    return RadialDomain(0.0, 2.0 * d.a2)


def half_domain_mask(grid: PolarGrid, e) -> np.ndarray:
    """Nodes with ``x . e > 0``; nodes exactly on the mirror line are excluded.

    The sign of ``cos(theta_m - beta)`` is decided in integer arithmetic on the
    half-angle lattice so that boundary nodes are classified exactly.
    """
    d = grid.as_direction(e)
    n = grid.n_theta
    q = (2 * np.arange(n) - d.index) % (2 * n)
    ang = (q < n // 2) | (q > 3 * n // 2)
    return np.repeat(ang[None, :], grid.n_r, axis=0)


def on_mirror_mask(grid: PolarGrid, e) -> np.ndarray:
    d = grid.as_direction(e)
    n = grid.n_theta
    q = (2 * np.arange(n) - d.index) % (2 * n)
    ang = (q == n // 2) | (q == 3 * n // 2)
    return np.repeat(ang[None, :], grid.n_r, axis=0)


@dataclass(frozen=True, eq=False)
class Field:
    """Grid function ``values[j, m]`` at radius ``r_j`` and angle ``theta_m``."""

    grid: PolarGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            raise DomainError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_function(cls, grid: PolarGrid, fn, time: float = 0.0) -> "Field":
        """Sample ``fn(x, y)`` (vectorized) at the grid nodes."""
        x, y = grid.xy
        vals = np.broadcast_to(np.asarray(fn(x, y), dtype=float), grid.shape)
        return cls(grid, vals, time)

    @classmethod
    def constant(cls, grid: PolarGrid, c: float, time: float = 0.0) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)), time)

    def with_values(self, values, time: float | None = None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return float(np.sum(self.grid.cell_areas * self.values))

    def mean(self) -> float:
        return self.integral() / float(np.sum(self.grid.cell_areas))

    def rotated(self, steps: int) -> "Field":
        """Rotate by ``steps`` grid angles: ``out(theta) = u(theta - steps * dtheta)``."""
        return self.with_values(np.roll(self.values, steps, axis=1))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "theta", "value"])
        r, th = self.grid.radii, self.grid.theta
        for j in range(self.grid.n_r):
            for m in range(self.grid.n_theta):
                w.writerow([f"{r[j]:.17g}", f"{th[m]:.17g}", f"{self.values[j, m]:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, grid: PolarGrid, path, time: float = 0.0) -> "Field":
        return cls.from_csv_text(grid, Path(path).read_text(), time)

    @classmethod
    def from_csv_text(cls, grid: PolarGrid, text: str, time: float = 0.0) -> "Field":
        """Parse the ``r,theta,value`` format; rows must follow grid order."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["r", "theta", "value"]:
            raise DomainError("field CSV must start with header r,theta,value")
        body = rows[1:]
        if len(body) != grid.n_r * grid.n_theta:
            raise DomainError(
                f"field CSV has {len(body)} rows, grid needs {grid.n_r * grid.n_theta}"
            )
        data = np.array([[float(c) for c in row] for row in body])
        r = data[:, 0].reshape(grid.shape)
        th = data[:, 1].reshape(grid.shape)
        if not (np.allclose(r, grid.radii[:, None], rtol=0, atol=1e-12)
                and np.allclose(th, grid.theta[None, :], rtol=0, atol=1e-12)):
            raise DomainError("field CSV nodes do not match the grid")
        return cls(grid, data[:, 2].reshape(grid.shape), time)


def reflect_field(u: Field, e) -> Field:
    """Exact node permutation ``u o sigma_e``."""
    perm = u.grid.reflection_permutation(e)
    return u.with_values(u.values[:, perm])


@dataclass(frozen=True, eq=False)
class StatePair:
    """Two components on the same grid at the same time."""

    u1: Field
    u2: Field

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise DomainError("state components live on different grids")
        if self.u1.time != self.u2.time:
            raise DomainError(f"state components at different times: {self.u1.time} vs {self.u2.time}")

    @property
    def grid(self) -> PolarGrid:
        return self.u1.grid

    @property
    def time(self) -> float:
        return self.u1.time

    @classmethod
    def from_arrays(cls, grid: PolarGrid, v1, v2, time: float = 0.0) -> "StatePair":
        return cls(Field(grid, v1, time), Field(grid, v2, time))

    def components(self) -> tuple[Field, Field]:
        return (self.u1, self.u2)

    def sup(self) -> float:
        return max(self.u1.sup(), self.u2.sup())

    def rotated(self, steps: int) -> "StatePair":
        return StatePair(self.u1.rotated(steps), self.u2.rotated(steps))

    def reflected(self, e) -> "StatePair":
        return StatePair(reflect_field(self.u1, e), reflect_field(self.u2, e))
