import math

import numpy as np
import pytest

from tonekit import geometry as geo
from tonekit.mobius import AnalyticMap, MobiusMap
from tonekit import expressions as ex


def _max_edge(mesh):
    mx = 0.0
    d = mesh.dim + 1
    for i in range(d):
        for j in range(i + 1, d):
            e = mesh.nodes[mesh.elems[:, i]] - mesh.nodes[mesh.elems[:, j]]
            mx = max(mx, float(np.max(np.linalg.norm(e, axis=1))))
    return mx


def test_square_h_half():
    m = geo.build_mesh(geo.DomainSpec.square(1), 0.5)
    assert m.n_nodes == 9 and m.n_elems == 8
    assert geo.volume(m) == 1.0


def test_disk_area_quadratic_convergence():
    errs = []
    for h in (0.2, 0.1, 0.05):
        m = geo.build_mesh(geo.DomainSpec.disk(1), h)
        errs.append(abs(geo.volume(m) - math.pi))
    assert errs[0] / errs[1] > 3.5
    assert errs[1] / errs[2] > 3.5


def test_disk_area_fine():
    m = geo.build_mesh(geo.DomainSpec.disk(1), 0.02)
    assert abs(geo.volume(m) - math.pi) / math.pi < 1e-3


def test_ball_volume_and_positivity():
    coarse = geo.build_mesh(geo.DomainSpec.ball(1), 0.4)
    assert np.all(coarse.vol > 0)
    assert geo.volume(coarse) < 4 * math.pi / 3
    m = geo.build_mesh(geo.DomainSpec.ball(1), 0.1)
    assert abs(geo.volume(m) - 4 * math.pi / 3) / (4 * math.pi / 3) < 0.02


def test_ball_boundary_nodes_on_sphere():
    m = geo.build_mesh(geo.DomainSpec.ball(1), 0.25)
    b = geo.boundary_nodes(m)
    r = np.linalg.norm(m.nodes[b], axis=1)
    assert np.max(np.abs(r - 1.0)) < 1e-12


def test_max_edge_bound():
    for spec, h in [
        (geo.DomainSpec.square(1), 0.13),
        (geo.DomainSpec.disk(1), 0.11),
        (geo.DomainSpec.annulus(0.5, 1.0), 0.09),
        (geo.DomainSpec.ball(1), 0.3),
        (geo.DomainSpec.box(1, 1, 1), 0.27),
    ]:
        m = geo.build_mesh(spec, h)
        assert _max_edge(m) <= 1.5 * h + 1e-12, spec.kind


def test_quadrature_weights_sum_to_volume():
    for spec, h in [(geo.DomainSpec.disk(1), 0.2), (geo.DomainSpec.ball(1), 0.4)]:
        m = geo.build_mesh(spec, h)
        _, qw = m.quad()
        assert np.allclose(qw.sum(axis=1), m.vol, rtol=1e-14)


def test_resolution_errors():
    with pytest.raises(geo.ResolutionError):
        geo.build_mesh(geo.DomainSpec.square(1), 1.5)
    with pytest.raises(geo.ResolutionError):
        geo.build_mesh(geo.DomainSpec.disk(1), -0.1)
    with pytest.raises(geo.ResolutionError):
        geo.build_mesh(geo.DomainSpec.annulus(0.9, 1.0), 0.2)


def test_domain_validation():
    with pytest.raises(ValueError):
        geo.DomainSpec.annulus(1.0, 0.5)
    with pytest.raises(ValueError):
        geo.DomainSpec.square(-2.0)


def test_map_mesh_identity_translation_dilation():
    m = geo.build_mesh(geo.DomainSpec.square(1), 0.25)
    ident = geo.map_mesh(m, MobiusMap.identity(2))
    assert np.array_equal(ident.nodes, m.nodes)

    v = np.array([0.37, -1.2])
    t = geo.map_mesh(m, MobiusMap.translation(v))
    assert np.allclose(t.nodes, m.nodes + v, atol=0, rtol=0)
    assert np.array_equal(t.vol, m.vol) or np.allclose(t.vol, m.vol, rtol=1e-12)

    d = geo.map_mesh(m, MobiusMap.dilation(2.0, 2))
    assert np.array_equal(d.vol, 4.0 * m.vol)


def test_map_mesh_similarity_scaling_3d():
    m = geo.build_mesh(geo.DomainSpec.ball(1), 0.45)
    s = 1.7
    d = geo.map_mesh(m, MobiusMap.dilation(s, 3))
    assert np.allclose(d.vol, s**3 * m.vol, rtol=1e-13)


def test_map_mesh_reflection_reorients():
    m = geo.build_mesh(geo.DomainSpec.square(1), 0.25)
    refl = AnalyticMap.affine(np.array([[-1.0, 0.0], [0.0, 1.0]]))
    r = geo.map_mesh(m, refl)
    assert np.all(r.vol > 0)
    assert geo.volume(r) == pytest.approx(1.0, rel=1e-12)


def test_map_mesh_fold_error():
    # x -> x^2 folds any mesh straddling x = 0
    m = geo.build_mesh(geo.DomainSpec.disk(1), 0.3)
    fold = AnalyticMap(
        (ex.parse_expr("x^2"), ex.parse_expr("y")), 2, None
    )
    with pytest.raises(geo.FoldError):
        geo.map_mesh(m, fold)


def test_mesh_text_roundtrip_bit_exact(tmp_path):
    m = geo.build_mesh(geo.DomainSpec.disk(1.3, (0.2, -0.4)), 0.3)
    path = tmp_path / "mesh.txt"
    geo.save_mesh(m, path)
    m2 = geo.load_mesh(path)
    assert m2.dim == m.dim
    assert np.array_equal(m2.nodes, m.nodes)
    assert np.array_equal(m2.elems, m.elems)


def test_boundary_nodes_square():
    m = geo.build_mesh(geo.DomainSpec.square(1), 0.25)
    b = geo.boundary_nodes(m)
    on_edge = (
        (np.abs(m.nodes[:, 0]) < 1e-14)
        | (np.abs(m.nodes[:, 0] - 1) < 1e-14)
        | (np.abs(m.nodes[:, 1]) < 1e-14)
        | (np.abs(m.nodes[:, 1] - 1) < 1e-14)
    )
    assert set(b) == set(np.nonzero(on_edge)[0])


def test_validate_mesh_connectivity():
    for spec, h in [(geo.DomainSpec.rect(2, 1), 0.3), (geo.DomainSpec.box(1, 1, 1), 0.5)]:
        assert geo.validate_mesh(geo.build_mesh(spec, h))


def test_ball_family_validation():
    spec = geo.DomainSpec.disk(1)
    geo.BallFamily(((0.0, 0.0), (0.4, 0.0)), (0.5, 0.3), spec)
    with pytest.raises(ValueError):
        geo.BallFamily(((0.8, 0.0),), (0.5,), spec)
    with pytest.raises(ValueError):
        geo.BallFamily(((0.0, 0.0),), (-0.1,))


def test_domain_parse():
    s = geo.DomainSpec.parse("disk:2:0.5,0.5")
    assert s.kind == "disk" and s.params == (2.0,) and s.center == (0.5, 0.5)
    assert geo.DomainSpec.parse("box:1,2,3").dim == 3
    with pytest.raises(ValueError):
        geo.DomainSpec.parse("torus:1")


def test_mesh_immutable():
    m = geo.build_mesh(geo.DomainSpec.square(1), 0.5)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 99.0
