import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import jvp, yvp

from simlab import bifurcation as bif
from simlab.domain import Field, PolarGrid, RadialDomain, StatePair
from simlab.errors import AmplitudeError, SearchError


def bessel_neumann(k, eps, j):
    """j-th continuum Neumann eigenvalue on (1 - eps, 1) from the Bessel cross product."""
    a = 1.0 - eps
    cross = lambda s: jvp(k, s * a) * yvp(k, s) - jvp(k, s) * yvp(k, s * a)
    grid = np.linspace(1e-3, (j + 1) * math.pi / eps + 10, 20000)
    vals = cross(grid)
    roots = [brentq(cross, grid[i], grid[i + 1])
             for i in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))]
    # k = 0 has the constant mode at s = 0, not a root of the cross product
    roots = ([0.0] if k == 0 else []) + roots
    return roots[j - 1] ** 2


def test_problem_validation():
    for bad in [dict(k=-1, eps=0.1), dict(k=1.5, eps=0.1), dict(k=1, eps=0.0),
                dict(k=1, eps=1.0), dict(k=1, eps=0.1, n=8)]:
        with pytest.raises(ValueError):
            bif.SLProblem(**bad)
    with pytest.raises(ValueError):
        bif.sl_eigen(bif.SLProblem(1, 0.1, 32), 9)


def test_zero_mode():
    res = bif.sl_eigen(bif.SLProblem(0, 0.2, 128), 3)
    assert abs(res.eigenvalues[0]) <= 1e-10
    assert np.allclose(res.eigenfunctions[0], 1.0, atol=1e-10)


@pytest.mark.parametrize("k,eps", [(0, 0.05), (3, 0.05), (3, 0.5), (7, 0.2)])
def test_matches_dense_tridiagonal_solver(k, eps):
    p = bif.SLProblem(k, eps, 128)
    d, e = bif._symmetric_tridiagonal(p)
    ref = eigh_tridiagonal(d, e, select="i", select_range=(0, 2), eigvals_only=True)
    got = bif.sl_eigen(p, 3).eigenvalues
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-8)


@pytest.mark.parametrize("k,eps,j", [(0, 0.05, 2), (3, 0.05, 1), (3, 0.5, 1), (3, 0.5, 2), (5, 0.2, 3)])
def test_matches_continuum_bessel_values(k, eps, j):
    exact = bessel_neumann(k, eps, j)
    got = bif.sl_eigen(bif.SLProblem(k, eps, 512), 3).eigenvalues[j - 1]
    assert got == pytest.approx(exact, rel=2e-5)


@pytest.mark.parametrize("k,eps", [(0, 0.05), (3, 0.05), (5, 0.3)])
def test_second_order_convergence(k, eps):
    lam = np.array([bif.sl_eigen(bif.SLProblem(k, eps, n), 3).eigenvalues for n in (64, 128, 256)])
    d1 = np.abs(lam[0] - lam[1])
    d2 = np.abs(lam[1] - lam[2])
    for j in range(3):
        if d1[j] > 1e-9:
            assert 3.5 < d1[j] / d2[j] < 4.5


def test_richardson_close_to_fine_value():
    fine, coarse, extrap = bif.richardson(bif.SLProblem(3, 1e-3, 512))
    assert abs(fine - extrap) < 1e-3
    assert abs(extrap - 9.0) <= 0.1


@settings(max_examples=15)
@given(st.integers(0, 8), st.floats(0.01, 0.9))
def test_spectral_invariants(k, eps):
    res = bif.sl_eigen(bif.SLProblem(k, eps, 96), 3)
    lam = res.eigenvalues
    assert lam[0] >= -1e-12 and np.all(np.diff(lam) > 0)
    assert np.allclose(np.abs(res.eigenfunctions).max(axis=1), 1.0)
    phi1 = res.eigenfunctions[0]
    assert phi1.min() > 0
    for i in range(3):
        for j in range(i):
            cos = res.weighted_inner(i, j) / math.sqrt(res.weighted_inner(i, i) * res.weighted_inner(j, j))
            assert abs(cos) <= 1e-8
    # j-th eigenfunction has j - 1 sign changes
    for j, phi in enumerate(res.eigenfunctions):
        assert np.count_nonzero(np.diff(np.sign(phi)) != 0) == j


def test_monotone_in_k():
    lam = [bif.sl_eigen(bif.SLProblem(k, 0.05, 128), 1).eigenvalues[0] for k in range(6)]
    assert np.all(np.diff(lam) > 0)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_find_bifurcation_postcondition(k):
    eps, lam = bif.find_bifurcation(k)
    assert 0 < eps <= 0.5
    lam2 = bif.sl_eigen(bif.SLProblem(0, eps, 128), 2).eigenvalues[1]
    lam1 = bif.sl_eigen(bif.SLProblem(k, eps, 128), 1).eigenvalues[0]
    assert lam == pytest.approx(lam1, rel=1e-12)
    assert lam2 >= 1.1 * lam1


def test_find_bifurcation_bisects_to_the_boundary():
    eps, _ = bif.find_bifurcation(8)
    assert eps < 0.5
    ok, _, _ = bif._admissible(8, eps * (1 + 1e-5), 128, bif.MARGIN)
    assert not ok


def test_k3_near_nine_on_thin_annulus():
    lam = bif.sl_eigen(bif.SLProblem(3, 0.05, 128), 1).eigenvalues[0]
    assert abs(lam - 9) <= 0.2 * 9


def test_find_bifurcation_errors():
    with pytest.raises(ValueError):
        bif.find_bifurcation(0)
    with pytest.raises(SearchError):
        bif.find_bifurcation(3, margin=1e9, eps_min=1e-2)


def test_grid_symbol():
    assert bif.grid_symbol(3, 4096) == pytest.approx(9.0, rel=1e-5)
    assert bif.grid_symbol(0, 64) == 0.0


def test_branch_state_examples():
    eps = 0.3
    st0, lam = bif.build_branch_state(3, eps, 0.0, 16, 64)
    assert np.all(st0.u1.values == lam) and np.all(st0.u2.values == lam)
    st1, lam1 = bif.build_branch_state(3, eps, 0.05 * lam, 16, 64)
    assert lam1 == lam
    assert np.allclose(st1.u1.values + st1.u2.values, 2 * lam, rtol=0, atol=1e-13)
    g = st1.grid
    perm = g.reflection_permutation(g.direction(g.n_theta // 2))
    assert np.allclose(st1.u1.values[:, perm], st1.u1.values, rtol=1e-14)
    assert st1.u1.values.min() > 0 and st1.u2.values.min() > 0
    with pytest.raises(AmplitudeError):
        bif.build_branch_state(3, eps, 0.11 * lam, 16, 64)


def test_residual_examples():
    g = bif.branch_grid(0.3, 16, 64)
    lam = 2.5
    const = StatePair.from_arrays(g, np.full(g.shape, lam), np.full(g.shape, lam))
    r1, r2 = bif.elliptic_residual(const, lam)
    assert r1.sup() < 1e-12 and r2.sup() < 1e-12


def test_residual_is_quadratic_in_amplitude():
    eps, _ = bif.find_bifurcation(3)
    amps = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    _, sups, slope = bif.residual_scaling(3, eps, amps)
    assert abs(slope - 2.0) <= 0.1
    _, pair, _ = bif.residual_scaling(3, eps, [0.02, 0.04])
    assert pair[1] / pair[0] == pytest.approx(4.0, rel=0.05)
    # and it equals t^2 psi^2 to leading order
    state, lam = bif.build_branch_state(3, eps, 1e-2)
    psi, _ = bif.branch_profile(3, state.grid)
    r1, _ = bif.elliptic_residual(state, lam)
    assert np.allclose(r1.values, -1e-4 * psi.values**2, atol=1e-9)


def test_kernel_direction():
    eps, _ = bif.find_bifurcation(3)
    base, lam = bif.build_branch_state(3, eps, 0.0)
    psi, _ = bif.branch_profile(3, base.grid)
    g = base.grid
    bound = (g.dr**2 + (2 * math.pi / g.n_theta) ** 2) * lam
    v = StatePair.from_arrays(g, psi.values, -psi.values)
    l1, l2 = bif.linearized_residual(base, lam, v)
    assert max(l1.sup(), l2.sup()) <= bound
    # the symmetric direction is not in the kernel
    w = StatePair.from_arrays(g, psi.values, psi.values)
    assert bif.linearized_residual(base, lam, w)[0].sup() > 100 * bound


def test_angular_sign_changes():
    g = PolarGrid(RadialDomain(0.5, 1.0), 4, 64)
    radial = Field(g, np.repeat(g.radii[:, None], g.n_theta, 1))
    assert bif.angular_sign_changes(radial, 2) == 0
    for k in (1, 3, 5):
        u = Field(g, np.cos(k * g.theta + 0.1)[None, :].repeat(g.n_r, 0))
        assert bif.angular_sign_changes(u, 0) == 2 * k
    st_, _ = bif.build_branch_state(3, 0.4, 0.1)
    assert [bif.angular_sign_changes(st_.u1, j) for j in range(st_.grid.n_r)] == [6] * st_.grid.n_r
