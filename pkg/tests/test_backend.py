import numpy as np
import pytest

from dmdsolve import backend
from dmdsolve.basis import SplineBasis, build_basis
from dmdsolve.model import build_career_model, unpack_coords
from dmdsolve.simulate import simulate_dataset
from dmdsolve.slstd import SolverConfig, StepSchedule, TransitionPack, slstd_solve
from dmdsolve.values import SplineValues

THETA = np.array([1.0, 2.0, 1.0, 9.0])

needs_compiled = pytest.mark.skipif(
    not backend.COMPILED_AVAILABLE, reason="compiled backend not built"
)


def test_backend_selection_and_context():
    start = backend.active_backend()
    with backend.use_backend("python"):
        assert backend.active_backend() == "python"
    assert backend.active_backend() == start
    with pytest.raises(ValueError):
        backend.set_backend("fortran")


@needs_compiled
def test_values_on_coords_agree_across_backends():
    rng = np.random.default_rng(0)
    for degree, knots in [(3, 5), (0, 10), (1, 4), (2, 6)]:
        model = build_career_model(4, 10, 0.95)
        basis = build_basis(model, knots_per_dim=knots, degree=degree)
        w = rng.normal(size=basis.k)
        packed = rng.integers(model.n_states, size=500)
        coords = unpack_coords(model, packed)
        vals = {}
        for name in ("python", "compiled"):
            with backend.use_backend(name):
                vals[name] = SplineValues(model, basis, w).values_on(coords)
        assert np.allclose(vals["python"], vals["compiled"], atol=1e-12, rtol=0)


@needs_compiled
def test_slstd_passes_agree_across_backends():
    model = build_career_model(3, 6, 0.95)
    basis = build_basis(model, knots_per_dim=4, degree=2)
    ds = simulate_dataset(model, THETA, 40, seed=3)
    pack = TransitionPack.from_dataset(model, ds)
    out = {}
    for name in ("python", "compiled"):
        with backend.use_backend(name):
            out[name], _ = slstd_solve(
                model,
                basis,
                THETA,
                pack,
                StepSchedule(20.0, 500.0),
                SolverConfig(tolerance=1e-9, max_passes=3),
            )
    assert np.allclose(out["python"], out["compiled"], atol=1e-10, rtol=0)


@needs_compiled
def test_oversized_basis_routes_to_python_kernels():
    import dmdsolve._kernels_py as pyk

    big = SplineBasis(dim_sizes=(9,) * 5, knots_per_dim=8, degree=7)
    assert big.n_active > 4096
    with backend.use_backend("compiled"):
        assert backend.kernels_for(big) is pyk
        small = SplineBasis(dim_sizes=(9, 9), knots_per_dim=5, degree=3)
        assert backend.kernels_for(small).BACKEND_NAME == "cython"
