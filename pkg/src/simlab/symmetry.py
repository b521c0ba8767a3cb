"""Reflection differences, foliated Schwarz scores and the rotating-plane direction set.

All reflections are exact node permutations (see :mod:`simlab.domain`), so the
difference functions are exactly odd and their signs can be read off without
interpolation noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Direction, Field, PolarGrid, StatePair, half_domain_mask
from .errors import PositivityError, StructureError, SimlabError

CONVENTIONS = ("competitive", "cooperative", "scalar")


def default_sign_tol(state: StatePair) -> float:
    return 1e-8 * (1.0 + state.sup())


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


@dataclass(frozen=True, eq=False)
class DifferencePair:
    d1: Field
    d2: Field
    direction: Direction
    convention: str


def difference_pair(state: StatePair, e, convention: str = "competitive") -> DifferencePair:
    """``d1 = u1 - u1 o sigma``; ``d2`` flips sign under the competitive convention."""
    _check_convention(convention)
    grid = state.grid
    e = grid.as_direction(e)
    perm = grid.reflection_permutation(e)
    v1, v2 = state.u1.values, state.u2.values
    d1 = v1 - v1[:, perm]
    d2 = v2[:, perm] - v2 if convention == "competitive" else v2 - v2[:, perm]
    return DifferencePair(state.u1.with_values(d1), state.u2.with_values(d2), e, convention)


# ---- foliated Schwarz symmetrization ------------------------------------------------


def _layout(n: int, index: int, ccw_first: bool = True) -> np.ndarray:
    """Angular nodes ordered by distance from the lattice angle ``index * pi / n``.

    Equidistant pairs list the counter-clockwise node first unless
    ``ccw_first`` is false.
    """
    if index % 2 == 0:
        m0 = index // 2
        order = [m0]
        for s in range(1, n // 2):
            pair = [m0 + s, m0 - s]
            order += pair if ccw_first else pair[::-1]
        order.append(m0 + n // 2)
    else:
        lo = (index - 1) // 2
        order = []
        for s in range(n // 2):
            pair = [lo + 1 + s, lo - s]
            order += pair if ccw_first else pair[::-1]
    return np.asarray(order) % n


def _sorted_desc(values: np.ndarray) -> np.ndarray:
    return np.sort(values, axis=1)[:, ::-1]


def fs_symmetrize(u: Field, p) -> Field:
    """Per-ring rearrangement that is nonincreasing in angular distance from ``p``."""
    p = u.grid.as_direction(p)
    order = _layout(u.grid.n_theta, p.index)
    out = np.empty_like(u.values)
    out[:, order] = _sorted_desc(u.values)
    return u.with_values(out)


def _norm(values: np.ndarray, weights: np.ndarray, kind: str) -> float:
    if kind == "l2":
        return math.sqrt(float(np.sum(weights * values * values)))
    if kind == "sup":
        return float(np.max(np.abs(values)))
    raise ValueError(f"norm must be 'l2' or 'sup', got {kind!r}")


def _score_at(values, srt, sym, n, k, w, base, norm):
    sym[:, _layout(n, k)] = srt
    out = _norm(values - sym, w, norm)
    # exact symmetry needs equal values in every equidistant pair, so both
    # pair orders must match; one order alone ties neighbouring directions
    sym[:, _layout(n, k, ccw_first=False)] = srt
    out = max(out, _norm(values - sym, w, norm))
    return out / base


def fs_score(u: Field, p, norm: str = "l2") -> float:
    """Relative distance between ``u`` and its symmetrization about ``p``."""
    p = u.grid.as_direction(p)
    w = u.grid.cell_areas
    base = _norm(u.values, w, norm)
    if base == 0.0:
        return 0.0
    return _score_at(u.values, _sorted_desc(u.values), np.empty_like(u.values),
                     u.grid.n_theta, p.index, w, base, norm)


def fs_scores(u: Field, norm: str = "l2") -> np.ndarray:
    """``fs_score(u, e)`` for every lattice direction, in index order."""
    grid = u.grid
    n = grid.n_theta
    w = grid.cell_areas
    base = _norm(u.values, w, norm)
    out = np.zeros(grid.n_directions)
    if base == 0.0:
        return out
    srt = _sorted_desc(u.values)
    sym = np.empty_like(u.values)
    for k in range(grid.n_directions):
        out[k] = _score_at(u.values, srt, sym, n, k, w, base, norm)
    return out


def axis_candidates(u: Field, norm: str = "l2") -> np.ndarray:
    """Every lattice index attaining the minimal score exactly."""
    scores = fs_scores(u, norm)
    return np.flatnonzero(scores == scores.min())


def estimate_axis(u: Field, norm: str = "l2") -> tuple[Direction, float]:
    """Lattice direction minimizing the FS score; ties go to the smallest index."""
    if not np.any(u.values):
        raise SimlabError("cannot estimate the axis of the zero field")
    scores = fs_scores(u, norm)
    k = int(np.argmin(scores))
    return u.grid.direction(k), float(scores[k])


def lattice_angle(a: Direction, b: Direction) -> float:
    """Angle in ``[0, pi]`` between two lattice directions."""
    n_dir = 2 * a.n_theta
    d = abs(a.index - b.index) % n_dir
    return min(d, n_dir - d) * math.pi / a.n_theta


def vector_angle(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(a @ b) / (np.hypot(*a) * np.hypot(*b))
    return math.acos(max(-1.0, min(1.0, c)))


# ---- direction sets -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DirectionSetMask:
    """Strict-positivity test of the reflection differences at one time.

    ``margins[k, i]`` is the minimum over ``B(e_k)`` of difference component
    ``i``; a direction is in the set when every used component exceeds
    ``sign_tol``.
    """

    time: float
    inside: np.ndarray
    margins: np.ndarray
    sign_tol: float
    convention: str

    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.inside)

    @property
    def min_margin(self) -> np.ndarray:
        return self.margins.min(axis=1)


def _half_masks(grid: PolarGrid) -> list[np.ndarray]:
    return [half_domain_mask(grid, grid.direction(k))[0] for k in range(grid.n_theta)]


def direction_set(state: StatePair, convention: str = "competitive",
                  sign_tol: float | None = None) -> DirectionSetMask:
    grid = state.grid
    _check_convention(convention)
    tol = default_sign_tol(state) if sign_tol is None else float(sign_tol)
    n = grid.n_theta
    n_comp = 1 if convention == "scalar" else 2
    margins = np.full((2 * n, n_comp), -np.inf)
    halves = _half_masks(grid)
    for k in range(n):
        pair = difference_pair(state, grid.direction(k), convention)
        cols = halves[k]
        for i, d in enumerate((pair.d1.values, pair.d2.values)[:n_comp]):
            on = d[:, cols]
            # B(-e) = sigma(B(e)) and the difference is odd, so its minimum there
            # is minus the maximum over B(e)
            margins[k, i] = on.min()
            margins[k + n, i] = -on.max()
    inside = np.all(margins > tol, axis=1)
    return DirectionSetMask(state.time, inside, margins, tol, convention)


@dataclass(eq=False)
class DirectionSetSeries:
    masks: list

    @property
    def times(self) -> list:
        return [m.time for m in self.masks]

    def entry_index(self) -> np.ndarray:
        """First snapshot index at which each direction is in the set (-1 if never)."""
        ins = np.array([m.inside for m in self.masks])
        first = np.argmax(ins, axis=0)
        return np.where(ins.any(axis=0), first, -1)

    def monotone(self) -> np.ndarray:
        """Per direction: after entering, the margin never drops below ``-sign_tol``."""
        marg = np.array([m.min_margin for m in self.masks])
        tols = np.array([m.sign_tol for m in self.masks])
        first = self.entry_index()
        ok = np.ones(marg.shape[1], dtype=bool)
        for k, s in enumerate(first):
            if s >= 0:
                ok[k] = bool(np.all(marg[s:, k] >= -tols[s:]))
        return ok

    def strictly_monotone(self) -> np.ndarray:
        """Per direction: after entering, it stays in the strict set."""
        ins = np.array([m.inside for m in self.masks])
        first = self.entry_index()
        ok = np.ones(ins.shape[1], dtype=bool)
        for k, s in enumerate(first):
            if s >= 0:
                ok[k] = bool(ins[s:, k].all())
        return ok

    def accumulated(self) -> np.ndarray:
        """Directions that entered the set and stayed in it up to ``sign_tol``."""
        return (self.entry_index() >= 0) & self.monotone()

    def records(self):
        """``(time, index, in_set, sign_tol, margin per component)`` rows."""
        for m in self.masks:
            for k, b in enumerate(m.inside):
                yield (m.time, k, int(b), m.sign_tol, *m.margins[k])


def direction_set_series(snapshots, convention: str = "competitive",
                         sign_tol: float | None = None) -> DirectionSetSeries:
    return DirectionSetSeries([direction_set(s, convention, sign_tol) for s in snapshots])


def _arcs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal circular runs of ``True`` as ``(start, length)``."""
    n = mask.size
    if mask.all() or not mask.any():
        return []
    start = int(np.flatnonzero(~mask)[0])
    arcs = []
    run_start = None
    for i in range(1, n + 1):
        k = (start + i) % n
        if mask[k]:
            if run_start is None:
                run_start = k
        elif run_start is not None:
            arcs.append((run_start, (k - run_start) % n))
            run_start = None
    return arcs


def axis_from_direction_set(mask, n_theta: int | None = None) -> Direction:
    """Midpoint of the single arc of directions in the set.

    Even arcs return the lower-index midpoint.
    """
    if isinstance(mask, DirectionSetMask):
        bits = np.asarray(mask.inside, dtype=bool)
    else:
        bits = np.asarray(mask, dtype=bool)
    nt = n_theta if n_theta is not None else bits.size // 2
    if bits.size != 2 * nt:
        raise StructureError(f"mask has {bits.size} entries, expected {2 * nt}")
    if bits.all():
        raise StructureError("direction set is the whole circle; no unique axis")
    if not bits.any():
        raise StructureError("direction set is empty")
    arcs = _arcs(bits)
    if len(arcs) != 1:
        raise StructureError(f"direction set has {len(arcs)} arcs, expected one")
    s, length = arcs[0]
    return Direction(s + (length - 1) // 2, nt)


def arc_summary(mask: np.ndarray, n_theta: int) -> dict:
    bits = np.asarray(mask, dtype=bool)
    arcs = _arcs(bits)
    out = {"n_in_set": int(bits.sum()), "arcs": [[s, l] for s, l in arcs]}
    if len(arcs) == 1:
        s, length = arcs[0]
        mid = Direction(s + (length - 1) // 2, n_theta)
        out.update(start=s, end=(s + length - 1) % (2 * n_theta), midpoint=mid.index,
                   midpoint_angle=mid.angle)
    return out


# ---- long-time diagnostics ------------------------------------------------------------


def omega_profiles(traj, tail_window: int) -> tuple[StatePair, float]:
    """Final snapshot and the largest pairwise sup-distance over the tail window."""
    snaps = traj.snapshots if hasattr(traj, "snapshots") else list(traj)
    if tail_window < 2 or len(snaps) < tail_window:
        raise SimlabError(f"need at least {max(tail_window, 2)} snapshots, have {len(snaps)}")
    tail = snaps[-tail_window:]
    gap = 0.0
    for i in range(len(tail)):
        for j in range(i + 1, len(tail)):
            for a, b in zip(tail[i].components(), tail[j].components()):
                gap = max(gap, float(np.max(np.abs(a.values - b.values))))
    return tail[-1], gap


def quotient_diagnostic(traj, tau: float, half_width: float = 3.0, n_components: int = 2) -> float:
    """Largest two-sided ratio ``u_i / ||u_i(., tau)||_inf`` over ``[tau - 3, tau + 3]``."""
    if tau < 5.0:
        raise SimlabError(f"tau must be >= 5, got {tau}")
    times = traj.times
    if times[0] > tau - half_width + 1e-9 or times[-1] < tau + half_width - 1e-9:
        raise SimlabError(f"snapshots do not cover [{tau - half_width}, {tau + half_width}]")
    ref = traj.at(tau)
    window = traj.window(tau - half_width, tau + half_width)
    eta = 1.0
    for i in range(n_components):
        norm = ref.components()[i].sup()
        for s in window:
            v = s.components()[i].values
            if norm <= 0.0 or v.min() <= 0.0:
                raise PositivityError(
                    f"component {i + 1} is not strictly positive at t = {s.time:g}"
                )
            ratio = v / norm
            eta = max(eta, float(ratio.max()), float((1.0 / ratio).max()))
    return eta


def normalized_difference(state: StatePair, e, convention: str = "competitive") -> tuple[float, float]:
    """``||u_i^e||_inf / ||u_i||_inf`` per component (0 for a zero component)."""
    pair = difference_pair(state, e, convention)
    out = []
    for d, u in ((pair.d1, state.u1), (pair.d2, state.u2)):
        s = u.sup()
        out.append(d.sup() / s if s > 0 else 0.0)
    return out[0], out[1]


# ---- reports --------------------------------------------------------------------------


@dataclass
class SymmetryReport:
    time: float
    convention: str
    best_axis: Direction
    best_score: float
    p1: Direction
    score1: float
    p2: Direction | None
    score2: float | None
    p2_tiebreak: Direction | None
    antipodal_mismatch_angle: float | None
    antipodal_mismatch_angle_tiebreak: float | None
    degenerate: dict
    mask_bits: str
    accumulated_bits: str | None
    arc: dict
    axis_from_mask: Direction | None
    axis_mask_discrepancy: float | None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def ang(d):
            return None if d is None else d.angle

        def idx(d):
            return None if d is None else d.index

        return {
            "time": self.time,
            "convention": self.convention,
            "best_axis_angle": ang(self.best_axis),
            "best_axis_index": idx(self.best_axis),
            "best_axis_score": self.best_score,
            "p1_angle": ang(self.p1),
            "p1_index": idx(self.p1),
            "fs_score_1": self.score1,
            "p2_angle": ang(self.p2),
            "p2_index": idx(self.p2),
            "fs_score_2": self.score2,
            "p2_tiebreak_angle": ang(self.p2_tiebreak),
            "antipodal_mismatch_angle": self.antipodal_mismatch_angle,
            "antipodal_mismatch_angle_tiebreak": self.antipodal_mismatch_angle_tiebreak,
            "degenerate": self.degenerate,
            "mask": self.mask_bits,
            "accumulated_mask": self.accumulated_bits,
            "arc": self.arc,
            "axis_from_mask_angle": ang(self.axis_from_mask),
            "axis_from_mask_index": idx(self.axis_from_mask),
            "axis_mask_discrepancy": self.axis_mask_discrepancy,
            **self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def symmetry_report(state: StatePair, convention: str = "competitive",
                    series: DirectionSetSeries | None = None, sign_tol: float | None = None,
                    norm: str = "l2") -> SymmetryReport:
    """Axes, scores and direction-set summary for one (typically final) state.

    ``p1`` is the plain :func:`estimate_axis` of component 1.  For component 2
    the exact minimizers of its score are paired with ``p1``: the one closest
    to ``-p1`` (competitive) or ``p1`` (cooperative).  When component 2 has a
    unique minimizer this is just its :func:`estimate_axis`; when it is radial
    every direction ties and the pairing picks the expected relative axis.
    The tie-break-only variant is reported alongside.
    """
    _check_convention(convention)
    grid = state.grid
    n = grid.n_theta
    s1 = fs_scores(state.u1, norm)
    k1 = int(np.argmin(s1))
    p1 = grid.direction(k1)
    degenerate = {"u1_all_directions_tie": bool(np.all(s1 == s1[k1]))}
    p2 = p2_tb = None
    score2 = mismatch = mismatch_tb = None
    if convention == "scalar":
        best, best_score = p1, float(s1[k1])
    else:
        s2 = fs_scores(state.u2, norm)
        target = p1.opposite() if convention == "competitive" else p1
        cands = np.flatnonzero(s2 == s2.min())
        dist = [lattice_angle(grid.direction(c), target) for c in cands]
        p2 = grid.direction(int(cands[int(np.argmin(dist))]))
        p2_tb = grid.direction(int(np.argmin(s2)))
        score2 = float(s2[p2.index])
        degenerate["u2_all_directions_tie"] = bool(cands.size == s2.size)
        mismatch = lattice_angle(p2, target)
        mismatch_tb = lattice_angle(p2_tb, target)
        shift = n if convention == "competitive" else 0
        joint = np.maximum(s1, np.roll(s2, -shift))
        kb = int(np.argmin(joint))
        best, best_score = grid.direction(kb), float(joint[kb])

    mask = direction_set(state, convention, sign_tol)
    if series is not None:
        acc = series.accumulated()
        acc_bits = "".join("1" if b else "0" for b in acc)
        source = acc
    else:
        acc_bits = None
        source = mask.inside
    arc = arc_summary(source, n)
    try:
        axis_mask = axis_from_direction_set(source, n)
        discrepancy = lattice_angle(axis_mask, p1)
    except StructureError as exc:
        axis_mask = None
        discrepancy = None
        arc["error"] = str(exc)
    return SymmetryReport(
        time=state.time,
        convention=convention,
        best_axis=best,
        best_score=best_score,
        p1=p1,
        score1=float(s1[k1]),
        p2=p2,
        score2=score2,
        p2_tiebreak=p2_tb,
        antipodal_mismatch_angle=mismatch,
        antipodal_mismatch_angle_tiebreak=mismatch_tb,
        degenerate=degenerate,
        mask_bits=mask.bitstring(),
        accumulated_bits=acc_bits,
        arc=arc,
        axis_from_mask=axis_mask,
        axis_mask_discrepancy=discrepancy,
    )
