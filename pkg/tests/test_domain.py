import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simlab.domain import (Direction, Field, PolarGrid, RadialDomain, StatePair, extended_domain,
                           half_domain_mask, invert_point, on_mirror_mask, reflect_field,
                           reflect_point)
from simlab.errors import AlignmentError, DomainError

grids = st.builds(
    lambda a1, n_r, q: PolarGrid(RadialDomain(a1, 1.0), n_r, 4 * q),
    st.sampled_from([0.0, 0.25, 0.5]), st.integers(2, 8), st.integers(1, 12),
)


def test_radial_domain_validation():
    assert RadialDomain(0.0, 1.0).is_disk
    assert RadialDomain(0.5, 1.0).is_annulus
    for a1, a2 in [(-0.1, 1.0), (1.0, 1.0), (0.5, 0.2), (0.0, math.inf)]:
        with pytest.raises(DomainError):
            RadialDomain(a1, a2)


def test_grid_requires_multiple_of_four():
    with pytest.raises(DomainError):
        PolarGrid(RadialDomain(0, 1), 4, 6)
    with pytest.raises(DomainError):
        PolarGrid(RadialDomain(0, 1), 0, 8)


@given(grids)
def test_radii_are_cell_centered(g):
    assert g.radii.min() > g.domain.a1
    assert g.radii.max() < g.domain.a2
    assert np.allclose(np.diff(g.radii), g.dr)
    assert g.faces[0] == g.domain.a1 and g.faces[-1] == g.domain.a2


def test_reflect_point_examples():
    assert np.allclose(reflect_point((0.5, 0.3), (1.0, 0.0)), (-0.5, 0.3))
    assert np.allclose(reflect_point((0.7, 0.0), (0.0, 1.0)), (0.7, 0.0))
    s = math.sqrt(2) / 2
    assert np.allclose(reflect_point((1.0, 0.0), (s, s)), (0.0, -1.0), atol=1e-15)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 2 * math.pi))
def test_reflect_point_is_norm_preserving_involution(x, y, a):
    e = np.array([math.cos(a), math.sin(a)])
    p = np.array([x, y])
    q = reflect_point(p, e)
    assert abs(np.hypot(*q) - np.hypot(*p)) <= 1e-12 * (1 + np.hypot(*p))
    assert np.allclose(reflect_point(q, e), p, atol=1e-12)


def test_reflect_field_examples(annulus_grid):
    g = annulus_grid
    radial = Field(g, np.repeat(g.radii[:, None] ** 2, g.n_theta, axis=1))
    e = g.direction(0)
    assert np.array_equal(reflect_field(radial, e).values, radial.values)
    u = Field(g, np.cos(g.theta)[None, :].repeat(g.n_r, axis=0))
    assert np.allclose(reflect_field(u, e).values, -u.values, atol=1e-15)


@given(grids, st.integers(0, 10**6), st.integers(0, 2**31))
def test_reflect_field_exact_involution_and_commutes(g, k, seed):
    v = np.random.default_rng(seed).normal(size=g.shape)
    u = Field(g, v)
    e = g.direction(k)
    once = reflect_field(u, e)
    assert np.array_equal(reflect_field(once, e).values, v)
    assert once.sup() == u.sup()
    assert np.array_equal(reflect_field(u.with_values(np.tanh(v)), e).values, np.tanh(once.values))


@given(grids, st.integers(0, 10**6))
def test_reflection_matches_point_reflection(g, k):
    e = g.direction(k)
    perm = g.reflection_permutation(e)
    x, y = g.xy
    pts = np.stack([x[-1], y[-1]], axis=1)
    img = np.array([reflect_point(p, e) for p in pts])
    assert np.allclose(img, pts[perm], atol=1e-12)


def test_misaligned_direction_rejected(annulus_grid):
    with pytest.raises(AlignmentError):
        annulus_grid.direction_from_vector((math.cos(0.01), math.sin(0.01)))
    with pytest.raises(AlignmentError):
        annulus_grid.as_direction(Direction(0, 64))
    assert annulus_grid.direction_from_vector((0.0, 1.0)).index == annulus_grid.n_theta // 2


def test_half_domain_mask_example():
    g = PolarGrid(RadialDomain(0.0, 1.0), 1, 8)
    m = half_domain_mask(g, g.direction(0))[0]
    assert m.tolist() == [c > 1e-12 for c in np.cos(g.theta)]
    assert np.flatnonzero(m).tolist() == [0, 1, 7]


@given(grids, st.integers(0, 10**6))
def test_half_domain_partition(g, k):
    e = g.direction(k)
    a = half_domain_mask(g, e)
    b = half_domain_mask(g, e.opposite())
    h = on_mirror_mask(g, e)
    assert not np.any(a & b)
    assert a.sum() + b.sum() + h.sum() == g.n_r * g.n_theta
    perm = g.reflection_permutation(e)
    assert np.array_equal(a, b[:, perm])
    # integer classification agrees with the geometric one away from the line
    c = np.cos(g.theta - e.angle)
    assert np.array_equal(a[0][np.abs(c) > 1e-9], (c > 0)[np.abs(c) > 1e-9])


def test_invert_point_examples():
    d = RadialDomain(0.5, 1.0)
    assert np.allclose(invert_point((1.5, 0.0), d), (2 / 3, 0.0))
    assert np.allclose(invert_point((0.4, 0.0), d), (0.625, 0.0))
    assert np.array_equal(invert_point((1.0, 0.0), d), (1.0, 0.0))
    with pytest.raises(DomainError):
        invert_point((0.75, 0.0), d)
    with pytest.raises(DomainError):
        invert_point((3.0, 0.0), d)


@given(st.floats(1.000001, 1.999), st.floats(0, 2 * math.pi))
def test_inversion_lands_in_closure(rho, a):
    d = RadialDomain(0.5, 1.0)
    p = invert_point((rho * math.cos(a), rho * math.sin(a)), d)
    assert 0.5 - 1e-12 <= np.hypot(*p) <= 1.0 + 1e-12


def test_extended_domain_values():
    assert extended_domain(RadialDomain(0.5, 1.0)) == RadialDomain(0.25, 2.0)
    assert extended_domain(RadialDomain(0.0, 1.0)) == RadialDomain(0.0, 2.0)
    e1 = extended_domain(RadialDomain(0.5, 1.0))
    e2 = extended_domain(e1)
    assert e2.a1 < e1.a1 and e2.a2 > e1.a2


def test_field_invariants_and_csv(tmp_path, annulus_grid):
    g = annulus_grid
    with pytest.raises(DomainError):
        Field(g, np.zeros((3, 3)))
    with pytest.raises(DomainError):
        Field(g, np.full(g.shape, np.nan))
    u = Field.from_function(g, lambda x, y: 1 + x * y)
    assert not u.values.flags.writeable
    text = u.to_csv(tmp_path / "u.csv")
    assert text.splitlines()[0] == "r,theta,value"
    assert len(text.splitlines()) == g.n_r * g.n_theta + 1
    back = Field.from_csv(g, tmp_path / "u.csv")
    assert np.array_equal(back.values, u.values)


def test_field_integral_of_constant(annulus_grid):
    u = Field.constant(annulus_grid, 2.0)
    assert math.isclose(u.integral(), 2.0 * math.pi * (1 - 0.25) / 2 * 2, rel_tol=1e-12)
    assert math.isclose(u.mean(), 2.0, rel_tol=1e-12)


def test_state_pair_checks(annulus_grid, disk_grid):
    a = Field.constant(annulus_grid, 1.0)
    with pytest.raises(DomainError):
        StatePair(a, Field.constant(disk_grid, 1.0))
    with pytest.raises(DomainError):
        StatePair(a, Field.constant(annulus_grid, 1.0, time=1.0))
