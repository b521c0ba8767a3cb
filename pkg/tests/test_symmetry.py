import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simlab.domain import Field, PolarGrid, RadialDomain, StatePair, half_domain_mask, on_mirror_mask
from simlab.errors import PositivityError, SimlabError, StructureError
from simlab.solver import Trajectory
from simlab import symmetry as sym

G = PolarGrid(RadialDomain(0.5, 1.0), 6, 32)


def ring_field(fn, grid=G):
    """Field whose value at (r, theta) is ``fn(theta) * (1 + r)``."""
    return Field(grid, (1 + grid.radii)[:, None] * fn(grid.theta)[None, :])


def brute_symmetrize(u, k):
    """Sort nodes by (angular distance to beta_k, clockwise second) and fill in descending order."""
    g = u.grid
    n = g.n_theta
    # distances in units of dtheta / 2 are exact integers
    off = (2 * np.arange(n) - k) % (2 * n)
    dist = np.minimum(off, 2 * n - off)
    ccw = (off > 0) & (off < n)
    order = np.lexsort((~ccw, dist))
    out = np.empty_like(u.values)
    out[:, order] = np.sort(u.values, axis=1)[:, ::-1]
    return out


def brute_score(u, k):
    w = u.grid.cell_areas
    base = math.sqrt(np.sum(w * u.values**2))
    s = brute_symmetrize(u, k)
    val = math.sqrt(np.sum(w * (u.values - s) ** 2))
    # the other tie order: mirror the node labels about beta_k
    n = u.grid.n_theta
    perm = (k - np.arange(n)) % n
    mirrored = brute_symmetrize(u.with_values(u.values[:, perm]), k)[:, perm]
    val = max(val, math.sqrt(np.sum(w * (u.values - mirrored) ** 2)))
    return val / base


def test_fs_symmetrize_examples():
    radial = Field(G, np.repeat(G.radii[:, None], G.n_theta, 1))
    assert np.array_equal(sym.fs_symmetrize(radial, G.direction(5)).values, radial.values)
    u = ring_field(np.cos)
    assert np.allclose(sym.fs_symmetrize(u, G.direction(0)).values, u.values, atol=1e-15)
    v = ring_field(lambda t: np.cos(2 * t))
    s = sym.fs_symmetrize(v, G.direction(0))
    assert np.array_equal(s.values, brute_symmetrize(v, 0))
    assert not np.allclose(s.values, v.values)


@given(st.integers(0, 2**32 - 1), st.integers(0, 63))
def test_fs_symmetrize_matches_brute_force(seed, k):
    v = Field(G, np.random.default_rng(seed).normal(size=G.shape))
    s = sym.fs_symmetrize(v, G.direction(k))
    assert np.array_equal(s.values, brute_symmetrize(v, k))
    assert np.array_equal(np.sort(s.values, axis=1), np.sort(v.values, axis=1))
    assert np.array_equal(sym.fs_symmetrize(s, G.direction(k)).values, s.values)
    assert sym.fs_score(v, G.direction(k)) == pytest.approx(brute_score(v, k), rel=1e-12, abs=1e-15)


def test_fs_score_examples():
    x, y = G.xy
    p = G.direction(0)
    assert sym.fs_score(Field(G, x), p) < 1e-15
    q_score = sym.fs_score(Field(G, y), p)
    assert q_score > 0.1
    assert q_score == pytest.approx(brute_score(Field(G, y), 0), rel=1e-12)
    assert sym.fs_score(Field(G, np.zeros(G.shape)), p) == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(0, 63), st.integers(0, 31))
def test_fs_score_rotation_equivariant(seed, k, m):
    v = Field(G, np.random.default_rng(seed).normal(size=G.shape))
    a = sym.fs_score(v, G.direction(k))
    b = sym.fs_score(v.rotated(m), G.direction(k + 2 * m))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


@given(st.integers(0, 2**32 - 1), st.integers(0, 63))
def test_zero_score_implies_reflection_order(seed, k):
    rng = np.random.default_rng(seed)
    p = G.direction(k)
    u = sym.fs_symmetrize(Field(G, rng.normal(size=G.shape)), p)
    for e in G.directions():
        if math.cos(e.angle - p.angle) > 1e-12:
            perm = G.reflection_permutation(e)
            d = u.values - u.values[:, perm]
            assert d[half_domain_mask(G, e)].min() >= 0.0


@given(st.integers(0, 2**32 - 1), st.integers(0, 63))
def test_score_zero_iff_symmetric_decreasing(seed, k):
    rng = np.random.default_rng(seed)
    p = G.direction(k)
    n = G.n_theta
    # values that depend only on the angular distance to beta_k, decreasing
    off = (2 * np.arange(n) - k) % (2 * n)
    dist = np.minimum(off, 2 * n - off)
    levels = np.sort(rng.normal(size=(G.n_r, 2 * n + 1)), axis=1)[:, ::-1]
    u = Field(G, levels[:, dist])
    assert sym.fs_score(u, p) == 0.0
    assert np.array_equal(sym.fs_symmetrize(u, p).values, u.values)
    generic = sym.fs_symmetrize(Field(G, rng.normal(size=G.shape)), p)
    assert sym.fs_score(generic, p) > 0.0


def test_estimate_axis_examples():
    x, y = G.xy
    for k in (0, 2, 7, 40):
        e = G.direction(k).vector
        p, s = sym.estimate_axis(Field(G, x * e[0] + y * e[1]))
        assert p.index == k and s < 1e-12
    p, s = sym.estimate_axis(Field(G, np.ones(G.shape)))
    assert p.index == 0 and s == 0.0
    with pytest.raises(SimlabError):
        sym.estimate_axis(Field(G, np.zeros(G.shape)))


@pytest.mark.parametrize("amp", [0.2, 0.3])
@pytest.mark.parametrize("theta_star", [0.3, 2.0, 4.4])
def test_estimate_axis_two_mode_profile(amp, theta_star):
    u = ring_field(lambda t: np.cos(t - theta_star) + amp * np.cos(2 * (t - theta_star)))
    p, _ = sym.estimate_axis(u)
    brute = min(range(G.n_directions), key=lambda k: (brute_score(u, k), k))
    assert p.index == brute
    step = math.pi / G.n_theta
    nearest = round(theta_star / step) % G.n_directions
    assert p.index == nearest


@given(st.integers(0, 2**32 - 1), st.integers(0, 31))
def test_estimate_axis_rotation_equivariant(seed, m):
    rng = np.random.default_rng(seed)
    u = ring_field(lambda t: np.cos(t - rng.uniform(0, 6.3)) + 0.1 * rng.normal(size=t.size))
    p, _ = sym.estimate_axis(u)
    q, _ = sym.estimate_axis(u.rotated(m))
    assert q.index == (p.index + 2 * m) % G.n_directions


def tilted_pair(k=0, c1=0.3, c2=-0.3, grid=G):
    x, y = grid.xy
    e = grid.direction(k).vector
    s = x * e[0] + y * e[1]
    return StatePair.from_arrays(grid, 1 + c1 * s, 1 + c2 * s)


def test_difference_pair_examples():
    st_ = tilted_pair()
    e = G.direction(0)
    x, _ = G.xy
    pair = sym.difference_pair(st_, e, "competitive")
    assert np.allclose(pair.d1.values, 0.6 * x, atol=1e-15)
    assert np.allclose(pair.d2.values, 0.6 * x, atol=1e-15)
    st2 = tilted_pair(c2=0.3)
    d2 = sym.difference_pair(st2, e, "competitive").d2.values
    assert d2[half_domain_mask(G, e)].max() < 0
    radial = StatePair.from_arrays(G, np.ones(G.shape), np.ones(G.shape))
    zero = sym.difference_pair(radial, e)
    assert not np.any(zero.d1.values) and not np.any(zero.d2.values)


@given(st.integers(0, 2**32 - 1), st.integers(0, 63), st.sampled_from(sym.CONVENTIONS))
def test_difference_pair_odd_bitwise(seed, k, conv):
    rng = np.random.default_rng(seed)
    s = StatePair.from_arrays(G, rng.normal(size=G.shape), rng.normal(size=G.shape))
    e = G.direction(k)
    pair = sym.difference_pair(s, e, conv)
    perm = G.reflection_permutation(e)
    for d in (pair.d1.values, pair.d2.values):
        assert np.array_equal(d[:, perm], -d)
        assert not np.any(d[on_mirror_mask(G, e)])


def test_direction_set_examples():
    m = sym.direction_set(tilted_pair(), "competitive")
    assert m.inside[0]
    radial = StatePair.from_arrays(G, np.ones(G.shape), np.ones(G.shape))
    assert not sym.direction_set(radial).inside.any()


@pytest.mark.parametrize("k", [0, 5, 17, 40])
def test_direction_set_of_antipodal_fs_pair_is_open_half_lattice(k):
    st_ = tilted_pair(k)
    mask = sym.direction_set(st_, "competitive").inside
    p = G.direction(k)
    expect = np.array([math.cos(e.angle - p.angle) > 1e-12 for e in G.directions()])
    assert np.array_equal(mask, expect)
    assert sym.axis_from_direction_set(mask).index == k
    margins = sym.direction_set(st_).margins
    # brute force margin for one direction
    e = G.direction(k + 3)
    pair = sym.difference_pair(st_, e)
    half = half_domain_mask(G, e)
    assert margins[e.index, 0] == pair.d1.values[half].min()
    assert margins[e.index, 1] == pair.d2.values[half].min()


def test_axis_from_direction_set_cases():
    n = G.n_theta
    bits = np.zeros(2 * n, bool)
    with pytest.raises(StructureError):
        sym.axis_from_direction_set(bits)
    with pytest.raises(StructureError):
        sym.axis_from_direction_set(~bits)
    single = bits.copy()
    single[9] = True
    assert sym.axis_from_direction_set(single).index == 9
    two = single.copy()
    two[30] = True
    with pytest.raises(StructureError):
        sym.axis_from_direction_set(two)
    even = bits.copy()
    even[[62, 63, 0, 1]] = True
    assert sym.axis_from_direction_set(even).index == 63


def test_series_monotone_and_accumulated():
    a = tilted_pair()
    flat = StatePair.from_arrays(G, np.ones(G.shape), np.ones(G.shape), time=1.0)
    worse = StatePair.from_arrays(G, a.u2.values, a.u1.values, time=2.0)
    good = sym.direction_set_series([a, flat])
    assert good.monotone().all() and good.accumulated()[0]
    assert not good.strictly_monotone()[0]
    bad = sym.direction_set_series([a, flat, worse])
    assert not bad.monotone()[0] and not bad.accumulated()[0]


def _traj(states):
    return Trajectory(None, states, 0.1, states[0].grid)


def test_omega_profiles_cases():
    base = tilted_pair()
    const = [StatePair.from_arrays(G, base.u1.values, base.u2.values, t) for t in range(5)]
    assert sym.omega_profiles(_traj(const), 5)[1] == 0.0
    geo = [StatePair.from_arrays(G, 1 + 0.5**t * base.u1.values, base.u2.values, t) for t in range(8)]
    gap = sym.omega_profiles(_traj(geo), 2)[1]
    assert gap == pytest.approx(np.abs(geo[-1].u1.values - geo[-2].u1.values).max())
    osc = [StatePair.from_arrays(G, base.u1.values + 0.1 * (t % 2), base.u2.values, t) for t in range(6)]
    assert sym.omega_profiles(_traj(osc), 4)[1] == pytest.approx(0.1)
    with pytest.raises(SimlabError):
        sym.omega_profiles(_traj(const), 9)


def test_quotient_diagnostic_cases():
    times = np.arange(0, 12.5, 0.5)
    const = _traj([StatePair.from_arrays(G, np.full(G.shape, 2.0), np.full(G.shape, 3.0), t)
                   for t in times])
    assert sym.quotient_diagnostic(const, 6.0) == 1.0
    base = tilted_pair()
    vary = [StatePair.from_arrays(G, (1 + 0.01 * t) * base.u1.values, base.u2.values, t) for t in times]
    scaled = [StatePair.from_arrays(G, 7 * s.u1.values, 7 * s.u2.values, s.time) for s in vary]
    a = sym.quotient_diagnostic(_traj(vary), 6.0)
    assert a > 1 and a == pytest.approx(sym.quotient_diagnostic(_traj(scaled), 6.0), rel=1e-14)
    with pytest.raises(SimlabError):
        sym.quotient_diagnostic(const, 4.0)
    with pytest.raises(SimlabError):
        sym.quotient_diagnostic(const, 10.0)
    neg = _traj([StatePair.from_arrays(G, np.full(G.shape, -1.0), np.ones(G.shape), t) for t in times])
    with pytest.raises(PositivityError):
        sym.quotient_diagnostic(neg, 6.0)


def test_report_pairs_tied_axes_antipodally():
    radial = StatePair.from_arrays(G, np.ones(G.shape), 2 * np.ones(G.shape))
    rep = sym.symmetry_report(radial, "competitive")
    assert rep.degenerate["u1_all_directions_tie"] and rep.degenerate["u2_all_directions_tie"]
    assert rep.antipodal_mismatch_angle == 0.0
    assert rep.antipodal_mismatch_angle_tiebreak == pytest.approx(math.pi)
    d = rep.to_dict()
    assert 0.0 <= d["antipodal_mismatch_angle"] <= math.pi


def test_report_on_tilted_pair():
    rep = sym.symmetry_report(tilted_pair(6), "competitive")
    assert rep.p1.index == 6 and rep.p2.index == 6 + G.n_theta
    assert rep.antipodal_mismatch_angle == 0.0 == rep.antipodal_mismatch_angle_tiebreak
    assert rep.axis_from_mask.index == 6
    assert rep.best_axis.index == 6
    coop = sym.symmetry_report(tilted_pair(6, 0.3, 0.3), "cooperative")
    assert coop.p2.index == 6 and coop.antipodal_mismatch_angle == 0.0


def test_normalized_difference():
    a, b = sym.normalized_difference(tilted_pair(), G.direction(0))
    x, _ = G.xy
    assert a == pytest.approx(0.6 * x.max() / (1 + 0.3 * x.max()))
    assert b == pytest.approx(0.6 * x.max() / (1 + 0.3 * x.max()))
