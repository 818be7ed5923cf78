"""Fundamental tones of multiplier-weighted Dirichlet integrals, the radial
ODE constant c_n, effective conformal volume, the inequality suite, and
Dirichlet-spectrum equivalence under conformal maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import assembly, eigen, fields, geometry
from ._kernels import radial_ode_span, radial_ode_sweep

__all__ = [
    "ToneResult",
    "BoundReport",
    "fundamental_tone",
    "tone_spectrum",
    "bessel_cn",
    "ball_volume",
    "sphere_volume",
    "effective_conformal_volume",
    "check_bounds",
    "dirichlet_spectrum_equivalence",
    "mesh_size",
]


@dataclass(frozen=True)
class ToneResult:
    mu1: float
    bc: str
    h: float
    residual: float
    multiplier: str
    iterations: int
    seed: int
    n_dofs: int


@dataclass(frozen=True)
class BoundReport:
    inequality: str
    lhs: float
    rhs: float
    mesh_h: float
    multiplier: str

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return self.slack >= -1e-9 * abs(self.rhs)

    def as_record(self):
        return {
            "inequality": self.inequality,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": bool(self.passed),
            "mesh_h": self.mesh_h,
            "multiplier": self.multiplier,
        }


def mesh_size(mesh):
    """Longest element edge; the h recorded in tone reports."""
    mx = 0.0
    d = mesh.dim + 1
    for i in range(d):
        for j in range(i + 1, d):
            e = mesh.nodes[mesh.elems[:, i]] - mesh.nodes[mesh.elems[:, j]]
            mx = max(mx, float(np.max(np.einsum("md,md->m", e, e))))
    return math.sqrt(mx)


def _multiplier_label(a):
    if hasattr(a, "source") and a.source:
        return a.source
    f = a.field if hasattr(a, "field") else a
    if isinstance(f, fields.AnalyticField):
        return str(f.expr)
    return type(f).__name__


def _tone_from_weight(mesh, wq, bc, k=1, tol=1e-8, seed=0):
    K = assembly.assemble_stiffness(mesh, bc="neumann")
    Mw = assembly.assemble_weighted_mass(mesh, wq)
    if bc == "neumann":
        return eigen.solve_smallest(K, Mw, k, deflate=np.ones(mesh.n_nodes), tol=tol, seed=seed)
    if bc == "dirichlet":
        idx = assembly.interior_dofs(mesh)
        Kr = assembly.restrict_matrix(K, idx)
        Mr = assembly.restrict_matrix(Mw, idx)
        return eigen.solve_smallest(Kr, Mr, k, tol=tol, seed=seed)
    raise ValueError(f"unknown boundary condition {bc!r}")


def _gamma_quad_weight(mesh, a):
    wq = assembly.gamma_weight(a, mesh)
    if not np.any(wq > 0):
        raise ValueError("multiplier is constant: energy measure has empty support")
    return wq


def fundamental_tone(mesh, a, bc="neumann", tol=1e-8, seed=0):
    """Smallest nonzero eigenvalue of the Dirichlet integral on L^2(U, Gamma[a]).

    Neumann deflates the constant mode of the pencil (K, M_Gamma); Dirichlet
    eliminates boundary rows/columns and takes the smallest eigenvalue.
    """
    wq = _gamma_quad_weight(mesh, a)
    r = _tone_from_weight(mesh, wq, bc, k=1, tol=tol, seed=seed)
    return ToneResult(
        mu1=float(r.eigenvalues[0]),
        bc=bc,
        h=mesh_size(mesh),
        residual=float(r.residuals[0]),
        multiplier=_multiplier_label(a),
        iterations=r.iterations,
        seed=seed,
        n_dofs=r.eigenvectors.shape[0],
    )


def tone_spectrum(mesh, a, bc, k, tol=1e-8, seed=0):
    """First k eigenvalues of the weighted pencil (ascending)."""
    wq = _gamma_quad_weight(mesh, a)
    r = _tone_from_weight(mesh, wq, bc, k=k, tol=tol, seed=seed)
    return r.eigenvalues.copy()


# ---------------------------------------------------------------------------
# Radial ODE constant c_n and conformal-volume constants


def bessel_cn(n, step=1e-5, t0=1e-6, t_max=20.0, bisect_tol=1e-10):
    """First critical point of z'' + (n-1)/t z' + (1-(n-1)/t^2) z = 0, z ~ t.

    Fixed-step RK4 from t0 with the series start z(t0)=t0, z'(t0)=1, followed
    by bisection on z' inside the bracketing step.
    """
    if n < 2:
        raise ValueError("dimension must be >= 2")
    max_steps = int(math.ceil((t_max - t0) / step))
    found, _, tp, zq, zpq, t, _, zp = radial_ode_sweep(float(n), t0, t0, 1.0, step, max_steps)
    if not found:
        raise RuntimeError(f"no critical point found in (0, {t_max}]")

    def zprime_at(tm):
        ns = max(int(math.ceil((tm - tp) / (step / 64.0))), 1)
        _, _, zpm = radial_ode_span(float(n), tp, zq, zpq, (tm - tp) / ns, ns)
        return zpm

    lo, hi = tp, t
    flo = zpq
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        fm = zprime_at(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ball_volume(n):
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_volume(n):
    """Surface measure of the unit n-sphere embedded in R^(n+1)."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def effective_conformal_volume(n, cn=None):
    """V(B^n) (c_n / sqrt(n))^n; independent of the ball's center and radius."""
    c = bessel_cn(n) if cn is None else cn
    return ball_volume(n) * (c / math.sqrt(n)) ** n


# ---------------------------------------------------------------------------
# Bound suite

_REFERENCE_TONE_CACHE = {}


def _reference_ball_tone(n, r, h, tol, seed):
    key = (n, round(float(r), 12), round(float(h), 12))
    if key not in _REFERENCE_TONE_CACHE:
        spec = geometry.DomainSpec.disk(r) if n == 2 else geometry.DomainSpec.ball(r)
        mesh = geometry.build_mesh(spec, h)
        a = fields.Multiplier.attach(fields.linear_field([1.0] + [0.0] * (n - 1)))
        t = fundamental_tone(mesh, a, "neumann", tol=tol, seed=seed)
        _REFERENCE_TONE_CACHE[key] = (t.mu1, geometry.volume(mesh))
    return _REFERENCE_TONE_CACHE[key]


def check_bounds(mesh, a, domain=None, h=None, tol=1e-8, seed=0):
    """Evaluate the inequality suite for one multiplier on one mesh.

    All quantities are computed by this toolkit on the given mesh: the
    unweighted tone (via the eikonal multiplier x1), the weighted tone, the
    discrete seminorm eta, the energy-measure mass, and the 1-potential.  The
    Szego-Weinberger reference ball is meshed at the same resolution; when the
    domain itself is a ball the report compares the mesh against itself (the
    equality case).
    """
    n = mesh.dim
    label = _multiplier_label(a)
    hh = float(h) if h is not None else mesh_size(mesh)

    a_lin = fields.Multiplier.attach(fields.linear_field([1.0] + [0.0] * (n - 1)))
    mu_U = fundamental_tone(mesh, a_lin, "neumann", tol=tol, seed=seed).mu1
    mu_a = fundamental_tone(mesh, a, "neumann", tol=tol, seed=seed).mu1
    eta = fields.multiplier_seminorm(a, mesh, seed=seed)
    V = geometry.volume(mesh)

    K = assembly.assemble_stiffness(mesh, bc="neumann")
    M = assembly.assemble_weighted_mass(mesh, 1.0)
    load = assembly.assemble_energy_load(mesh, a)
    dir_energy = float(load.sum())
    pot = assembly.solve_potential(K, M, load)

    vc = sphere_volume(n)
    nu = dir_energy

    reports = [
        BoundReport(
            "persistence-of-spectral-gap",
            (mu_U / (1.0 + mu_U)) / eta**2,
            mu_a,
            hh,
            label,
        ),
        BoundReport("potential-norm", pot.h1_norm, eta * math.sqrt(dir_energy), hh, label),
        # stated as ||G||/sqrt(D) <= eta (equivalent to 0 <= eta - ||G||/sqrt(D),
        # but with a well-scaled right-hand side at the equality case)
        BoundReport(
            "potential-seminorm-lower", pot.h1_norm / math.sqrt(dir_energy), eta, hh, label
        ),
        BoundReport(
            "potential-seminorm-upper",
            eta - pot.h1_norm / math.sqrt(dir_energy),
            1.0 / math.sqrt(mu_a),
            hh,
            label,
        ),
        BoundReport(
            "energy-seminorm-lower", math.sqrt(dir_energy / V), eta, hh, label
        ),
        BoundReport("el-soufi-ilias", mu_U * V ** (2.0 / n), n * vc ** (2.0 / n), hh, label),
        BoundReport(
            "ces-upper-bound", mu_a, n * (vc / V) ** (2.0 / n) * V / nu, hh, label
        ),
    ]

    if domain is not None and domain.kind in ("disk", "ball"):
        ref_mu, ref_vol = mu_U, V
    else:
        r_star = (V / ball_volume(n)) ** (1.0 / n)
        ref_mu, ref_vol = _reference_ball_tone(n, r_star, hh, tol, seed)
    reports.append(
        BoundReport(
            "szego-weinberger",
            mu_U * V ** (2.0 / n),
            ref_mu * ref_vol ** (2.0 / n),
            hh,
            label,
        )
    )
    return reports


def dirichlet_spectrum_equivalence(mesh_b, a, gamma, k, tol=1e-8, seed=0):
    """Compare the first k Dirichlet eigenvalues of (D, Gamma[a]) on mesh_b
    with those of (D, Gamma[a o gamma]) on gamma^-1(mesh_b).

    Returns (max relative gap, spectrum_b, spectrum_a).
    """
    from . import mobius

    mesh_a = geometry.map_mesh(mesh_b, gamma.inverse())
    f = a.field if hasattr(a, "field") else a
    f_pulled = mobius.compose_field(f, gamma)

    spec_b = tone_spectrum(mesh_b, a, "dirichlet", k, tol=tol, seed=seed)
    spec_a = tone_spectrum(mesh_a, fields.Multiplier.attach(f_pulled), "dirichlet", k, tol=tol, seed=seed)
    gap = float(np.max(np.abs(spec_b - spec_a) / np.abs(spec_b)))
    return gap, spec_b, spec_a
