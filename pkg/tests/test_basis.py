import numpy as np
import pytest

from dmdsolve.basis import SplineBasis, build_basis, n_basis_1d, project
from dmdsolve.model import build_career_model, unpack_state


def _random_states(model, rng, n):
    return [unpack_state(model, int(i)) for i in rng.integers(model.n_states, size=n)]


def test_basis_counts_match_clamped_formula():
    m4 = build_career_model(4, 10, 0.95)
    b = build_basis(m4, knots_per_dim=5, degree=3)
    assert b.n_per_dim == 7  # knots + degree - 1
    assert b.k == 7**3 * 3 == 1029
    m3 = build_career_model(3, 20, 0.95)
    b3 = build_basis(m3, knots_per_dim=5, degree=3)
    assert b3.k == 7**2 * 3 == 147


def test_degree_zero_indicator_limit():
    model = build_career_model(3, 5, 0.95)
    b = build_basis(model, knots_per_dim=model.T, degree=0)
    assert b.k == model.n_states
    # each state activates exactly its own indicator
    seen = set()
    for i in range(model.n_states):
        s = unpack_state(model, i)
        phi = b.evaluate(s)
        nz = np.nonzero(phi)[0]
        assert len(nz) == 1 and phi[nz[0]] == 1.0
        seen.add(int(nz[0]))
    assert len(seen) == model.n_states


def test_partition_of_unity_everywhere():
    for p, T, degree, knots in [(4, 10, 3, 5), (3, 20, 3, 5), (4, 8, 2, 4), (5, 6, 1, 4)]:
        model = build_career_model(p, T, 0.95)
        b = build_basis(model, knots_per_dim=knots, degree=degree)
        rng = np.random.default_rng(7)
        for s in _random_states(model, rng, 50):
            assert abs(b.evaluate(s).sum() - 1.0) < 1e-12


def test_boundary_corner_function_is_one():
    model = build_career_model(4, 10, 0.95)
    b = build_basis(model, knots_per_dim=5, degree=3)
    corner = model.state([0, 0, 0, 0])
    phi = b.evaluate(corner)
    assert phi[0] == pytest.approx(1.0, abs=1e-14)
    assert np.count_nonzero(np.abs(phi) > 1e-14) == 1
    top = model.state([9, 9, 9, 2])
    phi_top = b.evaluate(top)
    assert phi_top[-1] == pytest.approx(1.0, abs=1e-14)


def test_entries_in_unit_interval_and_local_support():
    model = build_career_model(4, 10, 0.95)
    b = build_basis(model, knots_per_dim=5, degree=3)
    rng = np.random.default_rng(3)
    for s in _random_states(model, rng, 100):
        phi = b.evaluate(s)
        assert np.all(phi >= 0.0) and np.all(phi <= 1.0 + 1e-15)
        nz = np.count_nonzero(phi)
        assert nz <= (b.degree + 1) ** b.n_dims == 64


def test_out_of_range_rejected():
    model = build_career_model(4, 10, 0.95)
    b = build_basis(model, 5, 3)
    with pytest.raises(ValueError):
        b.active([0.0, 0.0, 10.0], 0)
    with pytest.raises(ValueError):
        b.active([0.0, 0.0, 0.0], 3)


def test_matches_scipy_bspline_design():
    # third route: per-dimension values agree with scipy's BSpline basis
    scipy_interp = pytest.importorskip("scipy.interpolate")
    from dmdsolve.basis import basis_funs_1d, _extended_knots

    ext = _extended_knots(0.0, 9.0, 5, 3)
    xs = np.linspace(0.0, 9.0, 37)
    design = scipy_interp.BSpline.design_matrix(xs, ext, 3).toarray()
    for i, x in enumerate(xs):
        first, vals = basis_funs_1d(ext, 3, float(x))
        row = np.zeros(design.shape[1])
        row[first : first + 4] = vals
        assert np.allclose(row, design[i], atol=1e-12)


def test_projection_recovers_representable_targets():
    model = build_career_model(3, 8, 0.95)
    b = build_basis(model, knots_per_dim=4, degree=2)
    rng = np.random.default_rng(0)
    w0 = rng.normal(size=b.k)
    states = [unpack_state(model, i) for i in range(model.n_states)]
    targets = np.array([b.evaluate(s) @ w0 for s in states])
    w = project(b, states, targets)
    fitted = np.array([b.evaluate(s) @ w for s in states])
    assert np.max(np.abs(fitted - targets)) < 1e-8


def test_projection_constant_in_span():
    model = build_career_model(3, 8, 0.95)
    b = build_basis(model, knots_per_dim=4, degree=2)
    states = [unpack_state(model, i) for i in range(model.n_states)]
    targets = np.full(len(states), 4.25)
    w = project(b, states, targets)
    fitted = np.array([b.evaluate(s) @ w for s in states])
    assert np.max(np.abs(fitted - 4.25)) < 1e-8


def test_projection_residual_nonincreasing_in_k():
    # nested bases: more knots never fit the same data worse
    model = build_career_model(3, 12, 0.95)
    states = [unpack_state(model, i) for i in range(model.n_states)]
    coords = np.array([s.coords for s in states])
    targets = np.sin(coords[:, 0] * 0.7) + 0.3 * (coords[:, 1] ** 1.5)
    resid = []
    for knots in (2, 3, 5, 9):
        b = build_basis(model, knots_per_dim=knots, degree=1)
        w = project(b, states, targets)
        fitted = np.array([b.evaluate(s) @ w for s in states])
        resid.append(np.linalg.norm(fitted - targets))
    assert all(resid[i + 1] <= resid[i] + 1e-9 for i in range(len(resid) - 1))


def test_projection_ridge_fallback_and_disable():
    model = build_career_model(3, 10, 0.95)
    b = build_basis(model, knots_per_dim=5, degree=3)  # k = 147
    rng = np.random.default_rng(5)
    few = _random_states(model, rng, 30)  # underdetermined
    targets = np.ones(len(few))
    w = project(b, few, targets)
    assert np.all(np.isfinite(w))
    b_noridge = SplineBasis(
        dim_sizes=b.dim_sizes,
        knots_per_dim=b.knots_per_dim,
        degree=b.degree,
        n_lag=b.n_lag,
        ridge=0.0,
    )
    with pytest.raises(np.linalg.LinAlgError):
        project(b_noridge, few, targets)


def test_basis_validation_errors():
    with pytest.raises(ValueError):
        n_basis = SplineBasis(dim_sizes=(10,), knots_per_dim=3, degree=3)  # knots < degree+1
        del n_basis
    with pytest.raises(ValueError):
        SplineBasis(dim_sizes=(1,), knots_per_dim=5, degree=3)  # degenerate range
