"""Distortion coefficient estimation: directly from the Jacobian field, and
spectrally from fundamental-tone ratios over families of balls and eikonal
directions, with the dimensional bracket between the two.

The spectral estimate is reported with its family size: it is the smallest
constant validating the tone-ratio inequality over the tested family only,
never presented as the distortion coefficient itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .tones import _tone_from_weight, ball_volume, sphere_volume

__all__ = [
    "DistortionSignError",
    "DistortionReport",
    "SpectralDistortion",
    "direct_distortion",
    "spectral_distortion",
    "bracket_check",
    "distortion_constant",
    "grid_directions",
]


class DistortionSignError(RuntimeError):
    """Jacobian determinant changes sign or vanishes: not a bounded-distortion map."""


def direct_distortion(gamma, samples):
    """max over samples of ||gamma'(x)||_2 / |J(x)|^(1/n).

    The spectral norm comes from the symmetric matrix gamma'^T gamma'.
    Requires a nonvanishing Jacobian determinant of constant sign.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    n = pts.shape[1]
    J = gamma.jacobian_at(pts)
    det = np.linalg.det(J)
    if np.any(det == 0) or not np.all(np.isfinite(det)):
        raise DistortionSignError("singular Jacobian in the sample set")
    if det.max() > 0 and det.min() < 0:
        raise DistortionSignError("not bounded-distortion: Jacobian determinant changes sign")
    JtJ = np.einsum("mji,mjk->mik", J, J)
    sig2 = np.linalg.eigvalsh(JtJ)[:, -1]
    ratio = np.sqrt(sig2) / np.abs(det) ** (1.0 / n)
    return float(ratio.max())


def grid_directions(n_dir, dim):
    """Evenly spread unit directions: planar fan in 2D, Fibonacci points in 3D."""
    if dim == 2:
        ang = np.pi * np.arange(n_dir) / n_dir
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 3:
        i = np.arange(n_dir) + 0.5
        phi = math.pi * (1.0 + math.sqrt(5.0)) * i
        z = 1.0 - 2.0 * i / n_dir
        r = np.sqrt(np.maximum(1.0 - z**2, 0.0))
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise ValueError("directions defined for dimension 2 or 3")


@dataclass(frozen=True)
class SpectralDistortion:
    k_spec: float
    rows: tuple  # (center, radius, direction, mu_num, mu_den, ratio)
    failures: tuple
    h: float
    family_size: int


def spectral_distortion(gamma, domain, balls, directions, h, tol=1e-8, seed=0):
    """K_spec = sqrt(max tone ratio) over (ball, direction) pairs.

    For each ball B in gamma(domain) and unit direction u: the numerator is
    the Neumann tone of B under the eikonal weight |u|^2, the denominator the
    tone of A = gamma^-1(B) (the pulled-back mesh) under the composed eikonal
    weight |gamma'(x)^T u|^2 assembled at quadrature points.  Per-ball
    failures are recorded, not fatal.
    """
    dim = domain.dim
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    rows = []
    failures = []
    ginv = gamma.inverse()
    for center, radius in zip(balls.centers, balls.radii):
        spec = (
            geometry.DomainSpec.disk(radius, center)
            if dim == 2
            else geometry.DomainSpec.ball(radius, center)
        )
        try:
            mesh_b = geometry.build_mesh(spec, h)
            mesh_a = geometry.map_mesh(mesh_b, ginv)
            base = _tone_from_weight(mesh_b, 1.0, "neumann", tol=tol, seed=seed)
            mu_ball = float(base.eigenvalues[0])
            qp, _ = mesh_a.quad()
            flat = qp.reshape(-1, dim)
            J = gamma.jacobian_at(flat)
            for u in dirs:
                u2 = float(u @ u)
                mu_num = mu_ball / u2
                w = np.einsum("pij,i->pj", J, u)
                wq = np.einsum("pj,pj->p", w, w).reshape(qp.shape[0], qp.shape[1])
                den = _tone_from_weight(mesh_a, wq, "neumann", tol=tol, seed=seed)
                mu_den = float(den.eigenvalues[0])
                rows.append((tuple(center), float(radius), tuple(u), mu_num, mu_den, mu_num / mu_den))
        except Exception as exc:  # per-ball failures are recorded, not fatal
            failures.append((tuple(center), float(radius), f"{type(exc).__name__}: {exc}"))
            continue
    if not rows:
        raise RuntimeError(f"all {len(balls)} balls failed: {failures}")
    k_spec = math.sqrt(max(r[5] for r in rows))
    return SpectralDistortion(k_spec, tuple(rows), tuple(failures), float(h), len(rows))


def distortion_constant(n):
    """C_n = sqrt(n/(n-1)) (V(S^n)/V(B^n))^(1/n)."""
    return math.sqrt(n / (n - 1.0)) * (sphere_volume(n) / ball_volume(n)) ** (1.0 / n)


@dataclass(frozen=True)
class DistortionReport:
    k_dir: float
    k_spec: float
    c_n: float
    tau: float
    pass_upper: bool  # K_spec <= K_dir (1 + tau)
    pass_lower: bool  # K_dir <= C_n K_spec (1 + tau)
    rows: tuple
    failures: tuple
    h: float
    family_size: int
    note: str = (
        "K_spec is a lower estimate from a finite family; the bracket "
        "validates consistency, not equivalence"
    )

    @property
    def passed(self):
        return self.pass_upper and self.pass_lower


def bracket_check(k_dir, spectral, n, tau=0.02):
    """Verdict on K_spec <= K_dir (1+tau) and K_dir <= C_n K_spec (1+tau)."""
    c_n = distortion_constant(n)
    return DistortionReport(
        k_dir=float(k_dir),
        k_spec=float(spectral.k_spec),
        c_n=c_n,
        tau=float(tau),
        pass_upper=spectral.k_spec <= k_dir * (1.0 + tau),
        pass_lower=k_dir <= c_n * spectral.k_spec * (1.0 + tau),
        rows=spectral.rows,
        failures=spectral.failures,
        h=spectral.h,
        family_size=spectral.family_size,
    )
