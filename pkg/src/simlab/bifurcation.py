"""Radial Sturm-Liouville spectra on thin annuli and the first-order bifurcating branch.

The operator ``-phi'' - phi'/r + (k^2 / r^2) phi`` on ``(1 - eps, 1)`` with
Neumann ends is discretized in flux form on cell centers, which makes it
``R^-1 K`` with ``K`` symmetric; the similarity ``R^(1/2)`` turns it into a
symmetric tridiagonal matrix suitable for Sturm bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from . import kernels
from .domain import Field, PolarGrid, RadialDomain, StatePair
from .errors import AmplitudeError, NumericError, SearchError
from .solver import laplacian_polar

EPS_MIN = 1e-5
MARGIN = 0.10
_BISECT_CAP = 300
_INVIT_CAP = 40


@dataclass(frozen=True)
class SLProblem:
    """Mode ``k`` on ``(1 - eps, 1)`` with ``n`` cells.

    ``angular_symbol`` replaces ``k^2`` in the potential term; pass the symbol
    of a discrete angular second difference to get exact discrete
    eigenfunctions of a polar grid Laplacian.
    """

    k: int
    eps: float
    n: int = 128
    angular_symbol: float | None = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"k must be a nonnegative integer, got {self.k}")
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.n < 16:
            raise ValueError(f"n must be at least 16, got {self.n}")
        if self.angular_symbol is not None and self.angular_symbol < 0:
            raise ValueError("angular_symbol must be nonnegative")

    @property
    def inner(self) -> float:
        return 1.0 - self.eps

    @property
    def h(self) -> float:
        return (1.0 - self.inner) / self.n

    @property
    def symbol(self) -> float:
        return float(self.k**2) if self.angular_symbol is None else float(self.angular_symbol)

    @property
    def radii(self) -> np.ndarray:
        return self.inner + (np.arange(self.n) + 0.5) * self.h

    @property
    def faces(self) -> np.ndarray:
        return self.inner + np.arange(self.n + 1) * self.h


def grid_symbol(k: int, n_theta: int) -> float:
    """Eigenvalue of ``-D_theta^2`` on ``cos(k theta)`` for ``n_theta`` nodes."""
    dth = 2.0 * math.pi / n_theta
    return (2.0 - 2.0 * math.cos(k * dth)) / dth**2


@dataclass(frozen=True, eq=False)
class EigenResult:
    problem: SLProblem
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    brackets: np.ndarray

    @property
    def radii(self) -> np.ndarray:
        return self.problem.radii

    def weighted_inner(self, i: int, j: int) -> float:
        """``sum r phi_i phi_j h`` for 0-based indices."""
        p = self.problem
        return float(np.sum(p.radii * self.eigenfunctions[i] * self.eigenfunctions[j]) * p.h)


def _stiffness(p: SLProblem):
    """Diagonal and upper band of ``K`` plus the weights ``r``."""
    r = p.radii
    f = p.faces.copy()
    f[0] = 0.0
    f[-1] = 0.0
    h2 = p.h**2
    kd = (f[:-1] + f[1:]) / h2 + p.symbol / r
    ku = -f[1:-1] / h2
    return kd, ku, r


def _symmetric_tridiagonal(p: SLProblem):
    kd, ku, r = _stiffness(p)
    sr = np.sqrt(r)
    return kd / r, ku / (sr[:-1] * sr[1:])


def _energy(p: SLProblem, phi: np.ndarray) -> float:
    """Rayleigh quotient in flux form; nonnegative by construction."""
    f = p.faces[1:-1]
    r = p.radii
    grad = np.diff(phi)
    num = np.sum(f * grad * grad) / p.h**2 + p.symbol * np.sum(phi * phi / r)
    return float(num / np.sum(r * phi * phi))


def _bisect(diag, off, j_max: int):
    """Brackets ``[lo, hi]`` for the ``j_max`` smallest eigenvalues."""
    off2 = off * off
    rad = np.zeros_like(diag)
    rad[:-1] += np.abs(off)
    rad[1:] += np.abs(off)
    lo0 = float(np.min(diag - rad))
    hi0 = float(np.max(diag + rad))
    span = max(abs(lo0), abs(hi0), 1.0)
    pivmin = np.finfo(float).tiny * max(1.0, float(off2.max(initial=0.0)))
    lo = np.full(j_max, lo0 - 1e-12 * span)
    hi = np.full(j_max, hi0 + 1e-12 * span)
    target = np.arange(1, j_max + 1)
    eps = np.finfo(float).eps
    for _ in range(_BISECT_CAP):
        width = hi - lo
        done = width <= 4.0 * eps * np.maximum(np.abs(lo), np.abs(hi)) + pivmin
        if done.all():
            return lo, hi
        mid = 0.5 * (lo + hi)
        cnt = kernels.sturm_counts(np.ascontiguousarray(diag), np.ascontiguousarray(off2),
                                   np.ascontiguousarray(mid), pivmin)
        up = cnt >= target
        hi = np.where(up & ~done, mid, hi)
        lo = np.where(~up & ~done, mid, lo)
    raise NumericError("Sturm bisection did not converge",
                       {"widths": (hi - lo).tolist(), "iterations": _BISECT_CAP})


def _inverse_iteration(diag, off, shift: float, j: int, start: np.ndarray):
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[2, :-1] = off
    y = start / np.linalg.norm(start)
    nudge = 0.0
    change = prev = math.inf
    for it in range(_INVIT_CAP):
        ab[1] = diag - (shift + nudge)
        try:
            z = solve_banded((1, 1), ab, y)
        except LinAlgError:
            nudge = (nudge or 1e-14 * max(1.0, abs(shift))) * 2.0
            continue
        z /= np.linalg.norm(z)
        if z @ y < 0:
            z = -z
        prev, change = change, float(np.linalg.norm(z - y))
        y = z
        # converged, or stalled at the roundoff floor of the shifted solve
        if change < 1e-13 or (change < 1e-8 and change > 0.5 * prev):
            return y
    raise NumericError(f"inverse iteration for eigenvalue {j} did not converge",
                       {"j": j, "shift": shift, "last_change": change, "iterations": _INVIT_CAP})


def sl_eigen(p: SLProblem, j_max: int = 3) -> EigenResult:
    """The ``j_max`` smallest eigenpairs, each ``phi_j`` scaled to ``sup |phi_j| = 1``.

    Sturm bisection brackets each eigenvalue, inverse iteration at the bracket
    midpoint gives the eigenvector, and the reported value is its flux-form
    Rayleigh quotient (exactly 0 for the constant Neumann mode).
    """
    if not 1 <= j_max <= p.n // 4:
        raise ValueError(f"j_max must lie in [1, n/4] = [1, {p.n // 4}], got {j_max}")
    diag, off = _symmetric_tridiagonal(p)
    lo, hi = _bisect(diag, off, j_max)
    sr = np.sqrt(p.radii)
    vals = np.empty(j_max)
    funcs = np.empty((j_max, p.n))
    # deterministic start vector with components along every mode
    start = 1.0 + 0.5 * np.cos(np.arange(p.n) * 0.7) + np.linspace(0.0, 1.0, p.n)
    for j in range(j_max):
        y = _inverse_iteration(diag, off, 0.5 * (lo[j] + hi[j]), j + 1, start)
        phi = y / sr
        phi /= phi[np.argmax(np.abs(phi))]
        funcs[j] = phi
        vals[j] = _energy(p, phi)
    if j_max > 1 and np.any(np.diff(vals) <= 0.0):
        raise NumericError("computed eigenvalues are not strictly increasing",
                           {"eigenvalues": vals.tolist()})
    return EigenResult(p, vals, funcs, np.stack([lo, hi], axis=1))


def richardson(p: SLProblem, j: int = 1) -> tuple[float, float, float]:
    """``(lambda_j(n), lambda_j(n/2), extrapolated)`` assuming second order."""
    fine = sl_eigen(p, max(j, 1)).eigenvalues[j - 1]
    coarse_p = SLProblem(p.k, p.eps, p.n // 2, p.angular_symbol)
    coarse = sl_eigen(coarse_p, max(j, 1)).eigenvalues[j - 1]
    return float(fine), float(coarse), float((4.0 * fine - coarse) / 3.0)


def _admissible(k: int, eps: float, n: int, margin: float):
    lam2_0 = sl_eigen(SLProblem(0, eps, n), 2).eigenvalues[1]
    lam1_k = sl_eigen(SLProblem(k, eps, n), 1).eigenvalues[0]
    return lam2_0 >= (1.0 + margin) * lam1_k, float(lam2_0), float(lam1_k)


def find_bifurcation(k: int, n: int = 128, eps_start: float = 0.5, margin: float = MARGIN,
                     eps_min: float = EPS_MIN, rtol: float = 1e-6) -> tuple[float, float]:
    """Largest ``eps <= eps_start`` (to ``rtol``) with ``lambda_2(0) >= (1 + margin) lambda_1(k)``.

    Halves ``eps`` from ``eps_start`` until the inequality holds, then bisects
    between the last failing and first passing value.  Returns the passing end
    of the bracket and ``lambda_1(k, eps*)``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    eps = eps_start
    ok, _, lam = _admissible(k, eps, n, margin)
    failing = None
    while not ok:
        failing = eps
        eps *= 0.5
        if eps < eps_min:
            raise SearchError(f"no admissible eps >= {eps_min} for k = {k}")
        ok, _, lam = _admissible(k, eps, n, margin)
    if failing is not None:
        good = eps
        while (failing - good) > rtol * good:
            mid = 0.5 * (good + failing)
            ok, _, lam_mid = _admissible(k, mid, n, margin)
            if ok:
                good, lam = mid, lam_mid
            else:
                failing = mid
        eps = good
    return eps, lam


def branch_grid(eps: float, n_r: int = 32, n_theta: int = 128) -> PolarGrid:
    return PolarGrid(RadialDomain(1.0 - eps, 1.0), n_r, n_theta)


def branch_profile(k: int, grid: PolarGrid) -> tuple[Field, float]:
    """``psi = phi_1(r) cos(k theta)`` and its eigenvalue for the grid Laplacian."""
    d = grid.domain
    prob = SLProblem(k, d.a2 - d.a1, grid.n_r, grid_symbol(k, grid.n_theta))
    res = sl_eigen(prob, 1)
    phi = res.eigenfunctions[0]
    psi = phi[:, None] * np.cos(k * grid.theta)[None, :]
    return Field(grid, psi), float(res.eigenvalues[0])


def build_branch_state(k: int, eps: float, t_amp: float, n_r: int = 32,
                       n_theta: int = 128) -> tuple[StatePair, float]:
    """First-order predictor ``(lam + t psi, lam - t psi)`` of the bifurcating branch."""
    grid = branch_grid(eps, n_r, n_theta)
    psi, lam = branch_profile(k, grid)
    if abs(t_amp) > 0.1 * lam:
        raise AmplitudeError(f"|t_amp| = {abs(t_amp):g} exceeds 0.1 lambda* = {0.1 * lam:g}")
    v1 = lam + t_amp * psi.values
    v2 = lam - t_amp * psi.values
    if v1.min() <= 0.0 or v2.min() <= 0.0:
        raise AmplitudeError(f"branch state not positive at t_amp = {t_amp:g}")
    return StatePair.from_arrays(grid, v1, v2), lam


def elliptic_residual(state: StatePair, lam: float) -> tuple[Field, Field]:
    """``-Lap u_i - lam u_i + u1 u2`` for both components."""
    u1, u2 = state.u1, state.u2
    prod = u1.values * u2.values
    r1 = -laplacian_polar(u1).values - lam * u1.values + prod
    r2 = -laplacian_polar(u2).values - lam * u2.values + prod
    return u1.with_values(r1), u2.with_values(r2)


def linearized_residual(base: StatePair, lam: float, v: StatePair) -> tuple[Field, Field]:
    """Derivative of the elliptic residual at ``base`` applied to ``v``."""
    b1, b2 = base.u1.values, base.u2.values
    w1, w2 = v.u1.values, v.u2.values
    cross = b2 * w1 + b1 * w2
    l1 = -laplacian_polar(v.u1).values - lam * w1 + cross
    l2 = -laplacian_polar(v.u2).values - lam * w2 + cross
    return v.u1.with_values(l1), v.u2.with_values(l2)


def residual_scaling(k: int, eps: float, amps, n_r: int = 32, n_theta: int = 128):
    """``(amps, sup residual of component 1, log-log slope)``."""
    amps = np.asarray(list(amps), dtype=float)
    sups = []
    for t in amps:
        state, lam = build_branch_state(k, eps, t, n_r, n_theta)
        sups.append(elliptic_residual(state, lam)[0].sup())
    sups = np.asarray(sups)
    slope = float(np.polyfit(np.log(amps), np.log(sups), 1)[0])
    return amps, sups, slope


def angular_sign_changes(u: Field, ring_index: int) -> int:
    """Circular sign changes of the centered angular difference on one ring."""
    row = u.values[ring_index]
    d = 0.5 * (np.roll(row, -1) - np.roll(row, 1))
    tol = 1e-12 * u.sup()
    s = np.sign(d[np.abs(d) > tol])
    if s.size < 2:
        return 0
    return int(np.count_nonzero(s != np.roll(s, 1)))
