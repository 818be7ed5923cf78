"""Scalar fields: parsed analytic expressions with symbolic gradients, nodal
P1 fields, multipliers, energy densities and the discrete multiplier seminorm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .expressions import EvaluationError, ParseError, parse_expr

__all__ = [
    "AnalyticField",
    "NodalField",
    "Multiplier",
    "parse_expr",
    "ParseError",
    "EvaluationError",
    "field_from_expression",
    "linear_field",
    "gaussian_bump",
    "energy_density",
    "dirichlet_energy",
    "multiplier_seminorm",
    "validate_gradient",
]


@dataclass(frozen=True)
class AnalyticField:
    """Analytic scalar field with a symbolically differentiated gradient.

    `support` optionally records a bounding box (lo, hi) outside which the
    field is treated as negligible by the quadrature-based checks.
    """

    expr: ex.Expr
    dim: int
    grad: tuple
    support: tuple | None = None

    @staticmethod
    def from_expr(expr, dim, support=None):
        used = expr.variables()
        if used and max(used) >= dim:
            bad = ex.VAR_NAMES[max(used)]
            raise ValueError(f"expression uses {bad!r} but the ambient dimension is {dim}")
        grad = tuple(ex.diff(expr, i) for i in range(dim))
        if support is not None:
            support = (tuple(float(v) for v in support[0]), tuple(float(v) for v in support[1]))
        return AnalyticField(expr, dim, grad, support)

    def evaluate(self, points, check=True):
        return ex.evaluate(self.expr, points, check=check)

    def gradient(self, points, check=True):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        out = np.empty((pts.shape[0], self.dim))
        for i in range(self.dim):
            out[:, i] = ex.evaluate(self.grad[i], pts, check=check)
        return out

    def energy_density_at(self, points, check=True):
        g = self.gradient(points, check=check)
        return np.einsum("md,md->m", g, g)

    def quad_values(self, mesh):
        qp, _ = mesh.quad()
        return self.evaluate(qp.reshape(-1, mesh.dim)).reshape(qp.shape[0], qp.shape[1])

    def quad_energy_density(self, mesh):
        qp, _ = mesh.quad()
        return self.energy_density_at(qp.reshape(-1, mesh.dim)).reshape(qp.shape[0], qp.shape[1])


@dataclass(frozen=True)
class NodalField:
    """P1 field given by one value per mesh node; gradient is constant per element."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise ValueError("nodal value count must match the mesh")
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return self.mesh.dim

    def element_gradients(self):
        g = self.mesh.p1_gradients()  # (m, dim+1, dim)
        vals = self.values[self.mesh.elems]  # (m, dim+1)
        return np.einsum("mi,mid->md", vals, g)

    def quad_values(self, mesh):
        if mesh is not self.mesh:
            raise ValueError("nodal field can only be sampled on its own mesh")
        from ._kernels import _ref

        phi = _ref.TRI_PHI if mesh.dim == 2 else _ref.TET_PHI
        return self.values[mesh.elems] @ phi.T

    def quad_energy_density(self, mesh):
        if mesh is not self.mesh:
            raise ValueError("nodal field can only be sampled on its own mesh")
        g = self.element_gradients()
        dens = np.einsum("md,md->m", g, g)
        nq = 3 if mesh.dim == 2 else 4
        return np.repeat(dens[:, None], nq, axis=1)

    def h1_norm(self):
        from . import assembly

        K = assembly.assemble_stiffness(self.mesh, bc="neumann")
        M = assembly.assemble_weighted_mass(self.mesh, 1.0)
        v = self.values
        return float(np.sqrt(v @ (K @ v) + v @ (M @ v)))


def field_from_expression(source, dim):
    """Parse and wrap an expression as an analytic field of the given dimension."""
    return AnalyticField.from_expr(parse_expr(source), dim)


def linear_field(direction):
    """The eikonal multiplier <u, x> for a direction vector u."""
    u = np.asarray(direction, dtype=float)
    e = ex.const(0.0)
    for i, ui in enumerate(u):
        e = ex.add(e, ex.mul(ex.const(ui), ex.var(i)))
    return AnalyticField.from_expr(e, len(u))


def gaussian_bump(center, sigma, dim, cut=6.0):
    """Gaussian atom exp(-|x-c|^2 / (2 sigma^2)) with its effective support box.

    The tails beyond `cut` standard deviations fall below 2e-8, so truncating
    the support box there perturbs energy integrals at the 1e-14 level.
    """
    c = np.asarray(center, dtype=float)
    q = ex.const(0.0)
    for i in range(dim):
        q = ex.add(q, ex.powi(ex.sub(ex.var(i), ex.const(c[i])), 2))
    expr = ex.func("exp", ex.div(ex.mul(ex.const(-1.0), q), ex.const(2.0 * sigma**2)))
    lo = tuple(c - cut * sigma)
    hi = tuple(c + cut * sigma)
    return AnalyticField.from_expr(expr, dim, support=(lo, hi))


@dataclass(frozen=True)
class Multiplier:
    """A bounded scalar field acting as a multiplier; sup_bound is a sampled
    lower bound of the true sup-norm."""

    field: object
    sup_bound: float = float("nan")

    @staticmethod
    def from_expression(source, dim, mesh=None):
        f = field_from_expression(source, dim)
        return Multiplier.attach(f, mesh)

    @staticmethod
    def attach(f, mesh=None):
        sup = float("nan")
        if mesh is not None:
            samples = [np.abs(f.evaluate(mesh.nodes))]
            qp, _ = mesh.quad()
            samples.append(np.abs(f.evaluate(qp.reshape(-1, mesh.dim))))
            sup = float(max(s.max() for s in samples))
        return Multiplier(f, sup)

    @property
    def dim(self):
        return self.field.dim


def _as_field(a):
    return a.field if isinstance(a, Multiplier) else a


def energy_density(a, points):
    """|grad a|^2 at the given points (analytic fields only)."""
    f = _as_field(a)
    if not isinstance(f, AnalyticField):
        raise TypeError("pointwise energy density requires an analytic field")
    return f.energy_density_at(points)


def dirichlet_energy(a, mesh):
    """Quadrature approximation of the Dirichlet integral of a on the mesh."""
    f = _as_field(a)
    _, qw = mesh.quad()
    dens = f.quad_energy_density(mesh)
    return float(np.sum(qw * dens))


def multiplier_seminorm(a, mesh, tol=1e-10, seed=0):
    """Discrete eta(a): sqrt of the largest eigenvalue of M_a v = lam (K+M) v.

    Vanishes exactly on constants and is 1-homogeneous; nondecreasing under
    mesh refinement toward the continuum embedding norm.
    """
    from . import assembly, eigen

    f = _as_field(a)
    dens = f.quad_energy_density(mesh)
    if not np.any(dens > 0):
        return 0.0
    K = assembly.assemble_stiffness(mesh, bc="neumann")
    M = assembly.assemble_weighted_mass(mesh, 1.0)
    Ma = assembly.assemble_weighted_mass(mesh, dens)
    lam = eigen.solve_largest(Ma, (K + M).tocsr(), tol=tol, seed=seed)
    return float(np.sqrt(max(lam, 0.0)))


def validate_gradient(f, points, step=1e-5, rtol=1e-6):
    """Check the symbolic gradient against central differences; returns the
    worst relative deviation."""
    pts = np.asarray(points, dtype=float)
    g = f.gradient(pts)
    worst = 0.0
    for i in range(f.dim):
        dp = np.zeros(pts.shape[1])
        dp[i] = step
        fd = (f.evaluate(pts + dp) - f.evaluate(pts - dp)) / (2.0 * step)
        scale = np.maximum(np.abs(g[:, i]), 1.0)
        worst = max(worst, float(np.max(np.abs(fd - g[:, i]) / scale)))
    if worst > rtol:
        raise EvaluationError(f"symbolic gradient deviates from finite differences by {worst:g}")
    return worst
