import numpy as np
import pytest

from tonekit import distortion as dist, geometry as geo
from tonekit.mobius import AnalyticMap, MobiusMap


def _samples(rng, n=200):
    return rng.uniform(0.5, 1.5, size=(n, 2))


def test_identity_direct():
    m = AnalyticMap.affine(np.eye(2))
    assert dist.direct_distortion(m, np.random.default_rng(0).uniform(-1, 1, (50, 2))) == 1.0


def test_affine_diag_direct():
    m = AnalyticMap.affine(np.diag([4.0, 1.0]))
    k = dist.direct_distortion(m, np.random.default_rng(0).uniform(-1, 1, (50, 2)))
    assert abs(k - 2.0) < 1e-12


def test_mobius_direct_is_one():
    rng = np.random.default_rng(1)
    w = MobiusMap.translation([1.5, 0.3]).then(MobiusMap.inversion(2)).then(
        MobiusMap.dilation(2.5, 2)
    )
    k = dist.direct_distortion(w, _samples(rng))
    assert abs(k - 1.0) < 1e-9


def test_affine_singular_value_closed_form():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    m = AnalyticMap.affine(A)
    s = np.linalg.svd(A, compute_uv=False)
    expect = s[0] / np.prod(s) ** (1.0 / 3.0)
    k = dist.direct_distortion(m, rng.uniform(-1, 1, (40, 3)))
    assert abs(k - expect) / expect < 1e-12


def test_sign_change_rejected():
    from tonekit import expressions as ex

    fold = AnalyticMap((ex.parse_expr("x^2"), ex.parse_expr("y")), 2, None)
    pts = np.array([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(dist.DistortionSignError):
        dist.direct_distortion(fold, pts)


def test_grid_directions_unit():
    for dim in (2, 3):
        u = dist.grid_directions(9, dim)
        assert np.allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-12)


def test_distortion_constant():
    assert dist.distortion_constant(2) == pytest.approx(2 * np.sqrt(2), rel=1e-14)
    assert dist.distortion_constant(3) == pytest.approx(2.053, abs=2e-3)


def test_spectral_identity():
    gamma = AnalyticMap.affine(np.eye(2))
    balls = geo.BallFamily(((0.0, 0.0),), (0.4,), geo.DomainSpec.disk(1))
    sp = dist.spectral_distortion(gamma, geo.DomainSpec.disk(1), balls, dist.grid_directions(4, 2), h=1 / 24)
    assert abs(sp.k_spec - 1.0) < 0.01
    rep = dist.bracket_check(1.0, sp, 2)
    assert rep.passed


def test_spectral_dilation_ratios_one():
    gamma = MobiusMap.dilation(2.0, 2)
    balls = geo.BallFamily(((0.0, 0.0), (0.4, 0.2)), (0.3, 0.25))
    sp = dist.spectral_distortion(gamma, geo.DomainSpec.disk(1), balls, dist.grid_directions(4, 2), h=1 / 24)
    for row in sp.rows:
        assert row[5] == pytest.approx(1.0, rel=0.01)


def test_spectral_similarity_invariance():
    # rotation by 45 degrees keeps the optimal direction inside a 4-point grid
    base = AnalyticMap.affine(np.diag([2.0, 1.0]))
    rot = 0.5 * np.array([[np.sqrt(2), -np.sqrt(2)], [np.sqrt(2), np.sqrt(2)]])
    sim = AnalyticMap.affine(1.7 * rot @ np.diag([2.0, 1.0]))
    balls = geo.BallFamily(((0.0, 0.0),), (0.3,))
    dirs = dist.grid_directions(4, 2)
    k1 = dist.spectral_distortion(base, geo.DomainSpec.disk(1), balls, dirs, h=1 / 16).k_spec
    k2 = dist.spectral_distortion(sim, geo.DomainSpec.disk(1), balls, dirs, h=1 / 16).k_spec
    assert abs(k1 - k2) / k1 < 0.01
    kd1 = dist.direct_distortion(base, np.random.default_rng(3).uniform(-1, 1, (50, 2)))
    kd2 = dist.direct_distortion(sim, np.random.default_rng(3).uniform(-1, 1, (50, 2)))
    assert abs(kd1 - kd2) / kd1 < 1e-12


def test_two_sided_affine():
    gamma = AnalyticMap.affine(np.diag([2.0, 1.0]))
    balls = geo.BallFamily(((0.0, 0.0),), (0.3,))
    dirs = dist.grid_directions(6, 2)
    dom = geo.DomainSpec.disk(1)
    ks = dist.spectral_distortion(gamma, dom, balls, dirs, h=1 / 16).k_spec
    ks_inv = dist.spectral_distortion(gamma.inverse(), dom, balls, dirs, h=1 / 16).k_spec
    assert ks >= 0.99 and ks_inv >= 0.99
    k_dir = dist.direct_distortion(gamma, np.random.default_rng(4).uniform(-1, 1, (50, 2)))
    assert max(ks, ks_inv) >= k_dir / dist.distortion_constant(2) * 0.99


def test_per_ball_failures_recorded():
    gamma = MobiusMap.dilation(2.0, 2)
    balls = geo.BallFamily(((0.0, 0.0), (9.0, 9.0)), (0.3, 1e-4))  # 2nd unresolvable at h
    sp = dist.spectral_distortion(gamma, geo.DomainSpec.disk(1), balls, dist.grid_directions(2, 2), h=1 / 16)
    assert len(sp.failures) == 1
    assert sp.k_spec == pytest.approx(1.0, rel=0.02)
