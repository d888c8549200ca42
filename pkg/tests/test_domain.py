import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvnonlocal.domain import (
    PROFILES,
    Regime,
    assemble_dispersal,
    build_grid,
    build_kernel,
)
from lvnonlocal.errors import ValidationError

from conftest import make_operator


def test_grid_is_cell_centred_and_symmetric():
    g = build_grid(1, 2.0, 8, "neumann")
    x = g.coords[:, 0]
    assert x[0] == pytest.approx(-1 + 0.125)
    assert np.allclose(x, -x[::-1])
    assert g.weights.sum() == pytest.approx(g.measure)


def test_grid_2d_c_order():
    g = build_grid(2, [2.0, 4.0], [3, 4], "dirichlet")
    assert g.size == 12
    # last axis varies fastest
    assert g.coords[1, 0] == g.coords[0, 0]
    assert g.coords[1, 1] > g.coords[0, 1]
    assert g.cell_volume == pytest.approx((2 / 3) * 1.0)


@pytest.mark.parametrize("kw", [
    dict(dimension=3, extents=[1, 1, 1], nodes_per_axis=[4, 4, 4]),
    dict(dimension=1, extents=0.0, nodes_per_axis=8),
    dict(dimension=1, extents=-1.0, nodes_per_axis=8),
    dict(dimension=1, extents=1.0, nodes_per_axis=2),
    dict(dimension=2, extents=[1.0], nodes_per_axis=[4, 4]),
])
def test_grid_rejects_bad_input(kw):
    with pytest.raises(ValidationError):
        build_grid(regime="neumann", **kw)


def test_regime_parse_aliases():
    assert Regime.parse("Neumann-type") is Regime.NEUMANN
    assert Regime.parse("DirichletType") is Regime.DIRICHLET
    with pytest.raises(ValidationError):
        Regime.parse("robin")


def test_periodic_minimal_image_three_nodes():
    g = build_grid(1, 1.0, 3, "periodic")
    assert g.distance(0, 2) == pytest.approx(1 / 3)
    assert np.all(np.isinf(g.boundary_distance()))


def test_kernel_lattice_mass_is_one():
    g = build_grid(1, 2.0, 64, "neumann")
    k = build_kernel(g, 0.5)
    assert k.mass == pytest.approx(1.0, abs=1e-14)
    assert k.support_nodes == 31


def _brute_force_matrix(grid, r, profile, norm):
    N = grid.size
    M = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            z = grid.coords[j] - grid.coords[i]
            s = math.sqrt(float(z @ z)) / r
            M[i, j] = PROFILES[profile](np.array([s]))[0] / norm
    return M


@pytest.mark.parametrize("profile", sorted(PROFILES))
def test_kernel_matrix_matches_double_loop(profile):
    g = build_grid(2, [2.0, 2.0], [6, 5], "dirichlet")
    k = build_kernel(g, 0.9, profile)
    ref = _brute_force_matrix(g, 0.9, profile, k.normalization)
    assert np.allclose(k.matrix, ref, rtol=1e-13, atol=1e-15)


def test_periodic_kernel_sums_images():
    g = build_grid(1, 1.0, 5, "periodic")
    k = build_kernel(g, 0.7)
    N, h = g.size, g.spacing[0]
    ref = np.zeros((N, N))
    for i, j in itertools.product(range(N), repeat=2):
        for shift in range(-3, 4):
            d = abs((j - i + shift * N) * h)
            ref[i, j] += PROFILES["smooth_bump"](np.array([d / 0.7]))[0]
    assert np.allclose(k.matrix, ref / k.normalization, rtol=1e-13)
    # every row of a periodic kernel integrates to one
    assert np.allclose(k.matrix.sum(axis=1) * h, 1.0, atol=1e-14)


@pytest.mark.parametrize("r", [0.0, -0.1, 2.0, 0.05])
def test_kernel_radius_rejected(r):
    g = build_grid(1, 2.0, 32, "neumann")
    with pytest.raises(ValidationError):
        build_kernel(g, r)


def test_unknown_profile():
    g = build_grid(1, 2.0, 32, "neumann")
    with pytest.raises(ValidationError):
        build_kernel(g, 0.5, "gaussian")


def test_operator_regimes():
    d = make_operator("dirichlet", 32)
    n = make_operator("neumann", 32)
    p = make_operator("periodic", 32)
    assert np.all(d.m == -1.0)
    assert np.abs(n.matrix.sum(axis=1)).max() < 1e-15
    assert np.abs(p.matrix.sum(axis=1)).max() < 1e-15
    # near the boundary a Dirichlet row loses mass
    assert d.matrix.sum(axis=1)[0] < d.matrix.sum(axis=1)[16] <= 1e-15
    assert np.allclose(n.m, -n.kernel_mass)


def test_operator_rejects_foreign_kernel():
    g1 = build_grid(1, 2.0, 16, "neumann")
    g2 = build_grid(1, 2.0, 16, "neumann")
    with pytest.raises(ValidationError):
        assemble_dispersal(g1, build_kernel(g2, 0.5))
    with pytest.raises(ValidationError):
        assemble_dispersal(g1, build_kernel(g1, 0.5), "periodic")


def test_apply_and_generator(neumann32):
    u = np.linspace(0, 1, 32)
    assert np.allclose(neumann32.apply(u), neumann32.matrix @ u)
    G = neumann32.generator(2.0, 1.0)
    assert np.allclose(G, 2 * neumann32.matrix + np.eye(32))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(8, 48), r_frac=st.floats(0.1, 0.9),
       regime=st.sampled_from(["dirichlet", "neumann", "periodic"]),
       profile=st.sampled_from(sorted(PROFILES)))
def test_kernel_properties(n, r_frac, regime, profile):
    g = build_grid(1, 2.0, n, regime)
    r = r_frac * 2.0
    if r <= g.spacing[0]:
        return
    k = build_kernel(g, r, profile)
    assert abs(k.mass - 1.0) < 1e-12
    assert np.array_equal(k.matrix, k.matrix.T)
    assert k.matrix.min() >= 0
    op = assemble_dispersal(g, k)
    rows = op.matrix.sum(axis=1)
    if regime == "dirichlet":
        assert rows.max() <= 1e-12
    else:
        assert np.abs(rows).max() <= 1e-12
