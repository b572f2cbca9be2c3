import numpy as np
import pytest

from topolig.elasticity import LoadSpec, VectorField, solve_state
from topolig.errors import MissingLevelSet
from topolig.functionals import FunctionalSpec, Kind, adjoint_rhs, compliance, evaluate, volume
from topolig.material import LameField, LevelSet
from topolig.mesh import build_structured

from conftest import cantilever_mesh


def test_volume_of_full_and_empty():
    m = build_structured(2.0, 1.0, 20, 10)
    assert volume(LevelSet(-np.ones(m.n_vertices), m)) == pytest.approx(2.0, rel=1e-12)
    assert volume(LevelSet(np.ones(m.n_vertices), m)) == 0.0


def test_volume_half_plane():
    # symmetric ramp around a mesh line: smoothing error cancels exactly
    m = build_structured(2.0, 1.0, 40, 20)
    phi = LevelSet(m.vertices[:, 0] - 0.75, m)
    assert volume(phi) == pytest.approx(0.75, rel=1e-10)


def test_volume_disk():
    m = build_structured(2.0, 2.0, 128, 128)
    x = m.vertices - 1.0
    phi = LevelSet(np.hypot(x[:, 0], x[:, 1]) - 0.5, m)
    assert volume(phi) == pytest.approx(np.pi * 0.25, rel=5e-3)


def test_compliance_is_work(tip_load):
    m = cantilever_mesh(16, 8)
    u = solve_state(m, LameField.uniform(m, 1, 1), tip_load)
    assert compliance(u, tip_load) > 0
    assert evaluate(FunctionalSpec.compliance(), u, loads=tip_load) == compliance(u, tip_load)


def test_squared_norm_exact_for_affine():
    # |u|^2 is quadratic for affine u; the edge-midpoint rule is exact
    m = build_structured(1.0, 1.0, 3, 3)
    u = VectorField(np.column_stack([m.vertices[:, 0], 1.0 + 0 * m.vertices[:, 1]]), m)
    assert evaluate(FunctionalSpec.squared_norm(), u) == pytest.approx(1.0 / 3.0 + 1.0, rel=1e-13)


def test_volume_needs_level_set(tip_load):
    m = cantilever_mesh(8, 4)
    u = solve_state(m, LameField.uniform(m, 1, 1), tip_load)
    with pytest.raises(MissingLevelSet):
        evaluate(FunctionalSpec.volume(), u)


def test_inconsistent_derivative_rejected():
    with pytest.raises(ValueError):
        FunctionalSpec(Kind.DOMAIN_INTEGRAND, j=lambda u: (u * u).sum(-1), dj=lambda u: u)


def test_adjoint_rhs_is_minus_gradient():
    m = build_structured(1.0, 1.0, 5, 5)
    spec = FunctionalSpec.squared_norm()
    rng = np.random.default_rng(4)
    u = VectorField(rng.normal(size=(m.n_vertices, 2)), m)
    v = rng.normal(size=(m.n_vertices, 2))
    h = 1e-6
    fd = (evaluate(spec, VectorField(u.values + h * v, m)) - evaluate(spec, VectorField(u.values - h * v, m))) / (2 * h)
    rhs = adjoint_rhs(spec, u, None)
    assert -rhs @ v.ravel() == pytest.approx(fd, rel=1e-7)


def test_adjoint_rhs_compliance():
    m = cantilever_mesh(8, 4)
    loads = LoadSpec(traction=(1.0, 0.5))
    u = VectorField(np.zeros((m.n_vertices, 2)), m)
    from topolig.elasticity import load_vector
    assert np.array_equal(adjoint_rhs(FunctionalSpec.compliance(), u, loads), -load_vector(m, loads))
