import numpy as np
import pytest
import scipy.linalg as la

from cavitypzw import (DomainSpec, FieldVector, ValidationError, build_curl, build_grid,
                       eval_mode_at, harmonic_basis, project_R, transverse_modes)
from cavitypzw._linalg import principal_angles
from cavitypzw.modes import all_transverse_modes, mode_residuals
from cavitypzw.operators import operators_for


def _face_laplacian_spectrum(g):
    """Nonzero spectrum of C C^T: the curl-potential (Neumann) reduction."""
    C = build_curl(g).toarray()
    lam = la.eigvalsh(C @ C.T)
    return lam[lam > 1e-9 * lam.max()]


def _discrete_neumann(h, n, count):
    m = np.arange(n)
    lam = (4 / h ** 2) * (np.sin(m[:, None] * np.pi * h / 2) ** 2
                          + np.sin(m[None, :] * np.pi * h / 2) ** 2)
    return np.sort(lam.ravel())[1:count + 1]


def test_dense_oracle_unit_square():
    h = 1 / 16
    g = build_grid(DomainSpec(1, 1, h))
    basis = transverse_modes(g, 8)
    oracle = _face_laplacian_spectrum(g)[:8]
    assert np.allclose(basis.omegas ** 2, oracle, rtol=1e-10)
    assert np.allclose(basis.omegas ** 2, _discrete_neumann(h, 16, 8), rtol=1e-10)


def test_lowest_frequencies_h64():
    g = build_grid(DomainSpec(1, 1, 1 / 64))
    basis = transverse_modes(g, 3)
    ref = np.pi * np.array([1, 1, np.sqrt(2)])
    assert np.all(np.abs(basis.omegas / ref - 1) < 2e-3)


def test_second_order_convergence():
    w = [transverse_modes(build_grid(DomainSpec(1, 1, h)), 1).omegas[0]
         for h in (1 / 16, 1 / 32, 1 / 64)]
    order = np.log2((w[0] - w[1]) / (w[1] - w[2]))
    assert abs(order - 2.0) < 0.3


def test_mode_invariants(two_holes):
    basis = transverse_modes(two_holes, 10)
    res = mode_residuals(basis)
    assert res["eigen"] <= 1e-8
    assert res["divergence"] <= 1e-8
    assert res["orthonormality"] <= 1e-10
    assert basis.zero_mode_count == 2
    assert np.all(basis.omegas[:2] == 0) and np.all(basis.omegas[2:] > 0)
    assert np.all(np.diff(basis.omegas) >= 0)


def test_holed_nonzero_spectrum_matches_oracle(annulus):
    basis = transverse_modes(annulus, 9)
    oracle = _face_laplacian_spectrum(annulus)[:8]
    assert np.allclose(basis.omegas[1:] ** 2, oracle, rtol=1e-9)


@pytest.mark.parametrize("fixture", ["annulus", "two_holes"])
def test_zero_modes_are_harmonic(fixture, request):
    g = request.getfixturevalue(fixture)
    hb = harmonic_basis(g)
    basis = transverse_modes(g, hb.dimension + 1)
    Z = basis.as_matrix()[:, :basis.zero_mode_count]
    assert basis.zero_mode_count == hb.dimension
    assert principal_angles(Z, hb.as_matrix()).max() <= 1e-8


def test_single_hole_zero_mode_equals_harmonic_vector(annulus):
    f = transverse_modes(annulus, 1).vectors[0].values
    hvec = harmonic_basis(annulus).vectors[0].values
    assert np.allclose(f, hvec, atol=1e-10 * np.abs(hvec).max())


def test_completeness_over_divfree_block(rng):
    g = build_grid(DomainSpec(1, 1, 1 / 8, [(0.375, 0.375, 0.25, 0.25)]))
    basis = all_transverse_modes(g)
    F = basis.as_matrix()
    assert F.shape[1] == g.n_dof_edges - g.n_dof_vertices
    v = project_R(FieldVector(rng.standard_normal(g.n_dof_edges), g)).values
    recon = g.h ** 2 * F @ (F.T @ v)
    assert np.linalg.norm(recon - v) <= 1e-8 * np.linalg.norm(v)


def test_sparse_and_dense_paths_agree():
    g = build_grid(DomainSpec(1, 0.5, 1 / 16, [(0.25, 0.125, 0.125, 0.25)]))
    dense = transverse_modes(g, 6)
    sparse = transverse_modes(g, 6, dense_max=10)
    assert np.allclose(dense.omegas, sparse.omegas, rtol=1e-9)
    # subspaces of each frequency agree
    assert principal_angles(dense.as_matrix(), sparse.as_matrix()).max() < 1e-7


def test_sign_and_determinism():
    g = build_grid(DomainSpec(1, 1, 1 / 16))
    a = transverse_modes(g, 5)
    b = transverse_modes(build_grid(g.spec), 5)
    assert np.array_equal(a.as_matrix(), b.as_matrix())
    for f in a.vectors:
        v = f.values
        first = v[np.flatnonzero(np.abs(v) > 1e-3 * np.abs(v).max())[0]]
        assert first > 0


def test_mode_shape_against_analytic_profile():
    g = build_grid(DomainSpec(1, 1, 1 / 32))
    basis = transverse_modes(g, 2)
    F = basis.as_matrix()
    isx = g.is_xedge_dof()
    mids = g.edge_midpoints()
    # the lowest pair spans sin(pi y) x-hat and sin(pi x) y-hat
    ref = np.column_stack([np.where(isx, np.sin(np.pi * mids[:, 1]), 0.0),
                           np.where(~isx, np.sin(np.pi * mids[:, 0]), 0.0)])
    assert principal_angles(F, ref).max() < 0.02
    centre = np.array([0.5, 0.5])
    for lam in range(2):
        fx, fy = eval_mode_at(basis, lam, centre)
        f = basis.vectors[lam]
        scale = np.abs(f.values).max()
        # centre row / column carries the antinode of each live component
        for val, comp in ((fx, f.x), (fy, f.y)):
            if np.abs(comp).max() > 1e-8 * scale:
                assert abs(val) >= (1 - 2e-3) * np.abs(comp).max()


def test_eval_bounded_by_max(annulus):
    basis = transverse_modes(annulus, 4)
    for lam in range(4):
        val = eval_mode_at(basis, lam, (0.2, 0.7))
        assert np.all(np.abs(val) <= np.abs(basis.vectors[lam].values).max())


def test_too_many_modes_rejected():
    g = build_grid(DomainSpec(1, 1, 1 / 4))
    with pytest.raises(ValidationError, match="dimension"):
        transverse_modes(g, g.n_dof_edges)


def test_curlcurl_commutes_with_gradient_penalty(annulus):
    ops = operators_for(annulus)
    A = ops.curlcurl @ (ops.G @ ops.GT)
    assert abs(A).max() == 0.0
