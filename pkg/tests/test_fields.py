import numpy as np
import pytest

from tonekit import assembly, fields, geometry as geo
from tonekit.cli import STANDARD_CORPUS


@pytest.fixture(scope="module")
def square():
    return geo.build_mesh(geo.DomainSpec.square(1), 1 / 16)


def test_energy_density_linear():
    a = fields.Multiplier.from_expression("x", 2)
    pts = np.random.default_rng(0).uniform(0, 1, (10, 2))
    assert np.allclose(fields.energy_density(a, pts), 1.0, atol=0)


def test_energy_density_half_radius_squared():
    a = fields.field_from_expression("(x^2 + y^2)/2", 2)
    assert fields.energy_density(a, np.array([[3.0, 4.0]]))[0] == pytest.approx(25.0, abs=1e-13)


def test_energy_density_constant():
    a = fields.field_from_expression("7", 2)
    assert fields.energy_density(a, np.array([[0.3, 0.4]]))[0] == 0.0


def test_dirichlet_energy_linear(square):
    a = fields.field_from_expression("x", 2)
    assert fields.dirichlet_energy(a, square) == pytest.approx(1.0, abs=1e-13)


def test_dirichlet_energy_product(square):
    # D[x*y] = int (y^2 + x^2) = 2/3, integrand quadratic so the rule is exact
    a = fields.field_from_expression("x*y", 2)
    assert fields.dirichlet_energy(a, square) == pytest.approx(2.0 / 3.0, abs=1e-13)


def test_dirichlet_energy_constant(square):
    a = fields.field_from_expression("3", 2)
    assert fields.dirichlet_energy(a, square) == 0.0


def test_multiplier_seminorm_linear(square):
    a = fields.Multiplier.from_expression("x", 2, square)
    assert fields.multiplier_seminorm(a, square) == pytest.approx(1.0, abs=1e-9)


def test_multiplier_seminorm_constant(square):
    a = fields.Multiplier.from_expression("5", 2, square)
    assert fields.multiplier_seminorm(a, square) == 0.0


def test_multiplier_seminorm_homogeneous(square):
    a = fields.field_from_expression("sin(x)*y", 2)
    ta = fields.field_from_expression("3*(sin(x)*y)", 2)
    e1 = fields.multiplier_seminorm(a, square)
    e3 = fields.multiplier_seminorm(ta, square)
    assert abs(e3 - 3 * e1) / (3 * e1) < 1e-10


def test_seminorm_monotone_under_refinement():
    a = fields.field_from_expression("sin(2*x) + cos(2*y)", 2)
    vals = []
    for h in (1 / 4, 1 / 8, 1 / 16):
        m = geo.build_mesh(geo.DomainSpec.square(1), h)
        vals.append(fields.multiplier_seminorm(a, m))
    assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12


def test_corpus_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.05, 0.95, size=(100, 2))
    for src in STANDARD_CORPUS:
        f = fields.field_from_expression(src, 2)
        assert fields.validate_gradient(f, pts) < 1e-6, src


def test_energy_consistency_three_ways(square):
    # 1' M_Gamma 1 = sum load = quadrature Dirichlet energy, within 1e-12 rel
    for src in ("x", "x*y", "sin(x)*cos(y)", "x^2 - y^2"):
        a = fields.Multiplier.from_expression(src, 2, square)
        de = fields.dirichlet_energy(a, square)
        load = assembly.assemble_energy_load(square, a)
        mw = assembly.assemble_weighted_mass(square, assembly.gamma_weight(a, square))
        one = np.ones(square.n_nodes)
        assert abs(load.sum() - de) <= 1e-12 * de
        assert abs(one @ (mw @ one) - de) <= 1e-12 * de


def test_sup_bound_sampled(square):
    a = fields.Multiplier.from_expression("sin(x) + 2", 2, square)
    assert a.sup_bound == pytest.approx(2 + np.sin(1.0), abs=1e-6)


def test_nodal_field_gradient(square):
    vals = 2.0 * square.nodes[:, 0] - 0.5 * square.nodes[:, 1]
    nf = fields.NodalField(square, vals)
    g = nf.element_gradients()
    assert np.allclose(g, [2.0, -0.5], atol=1e-12)
    qe = nf.quad_energy_density(square)
    assert np.allclose(qe, 4.25, atol=1e-12)


def test_nodal_field_wrong_mesh(square):
    other = geo.build_mesh(geo.DomainSpec.square(1), 1 / 4)
    nf = fields.NodalField(square, np.zeros(square.n_nodes))
    with pytest.raises(ValueError):
        nf.quad_values(other)


def test_gaussian_bump_support():
    f = fields.gaussian_bump([1.0, 2.0, 0.0], 0.1, 3)
    lo, hi = np.asarray(f.support[0]), np.asarray(f.support[1])
    assert np.allclose(hi - lo, 1.2)
    edge = f.evaluate(np.array([hi]))
    assert edge[0] < 1e-7


def test_dimension_validation():
    with pytest.raises(ValueError):
        fields.field_from_expression("z", 2)
