"""P1 assembly of the Dirichlet-integral stiffness matrix, weighted mass
matrices, energy-measure load vectors, and the 1-potential solve.

Weights are evaluated at quadrature points (not element-averaged) so that the
assembly is exact for element-wise constant weights; with the 3/4-point rules
this makes b' M_w b exact for P1 b and constant w per element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .geometry import boundary_nodes

__all__ = [
    "assemble_stiffness",
    "assemble_weighted_mass",
    "assemble_energy_load",
    "solve_potential",
    "PotentialSolve",
    "cg_solve",
    "ConvergenceError",
    "gamma_weight",
    "interior_dofs",
    "restrict_matrix",
    "export_matrix",
]


class ConvergenceError(RuntimeError):
    """Iterative solver failed to reach the requested residual."""


def _weight_at_quad(mesh, w):
    nq = 3 if mesh.dim == 2 else 4
    if np.isscalar(w):
        return np.full((mesh.n_elems, nq), float(w))
    if isinstance(w, np.ndarray):
        if w.shape == (mesh.n_elems, nq):
            return w
        if w.shape == (mesh.n_elems,):
            return np.repeat(w[:, None], nq, axis=1)
        raise ValueError(f"weight array of shape {w.shape} does not match the mesh")
    if hasattr(w, "quad_values"):
        return w.quad_values(mesh)
    raise TypeError("weight must be a scalar, an array, or a field with quad_values")


def gamma_weight(a, mesh):
    """Energy density |grad a|^2 at the quadrature points of the mesh."""
    f = a.field if hasattr(a, "field") else a
    return f.quad_energy_density(mesh)


def _element_arrays(mesh, wq):
    vol, kv, mv, fv = mesh.element_arrays(wq)
    if np.any(vol <= 0):
        raise ValueError("degenerate element encountered during assembly")
    return kv, mv, fv


def _scatter(mesh, vals):
    nv = mesh.dim + 1
    rows = np.repeat(mesh.elems, nv, axis=1).ravel()
    cols = np.tile(mesh.elems, (1, nv)).ravel()
    A = csr_matrix((vals.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    A.sum_duplicates()
    return A


def assemble_stiffness(mesh, bc="neumann"):
    """Stiffness K with b'Kb = sum_e |grad b|^2 vol_e; Dirichlet bc eliminates
    boundary rows/columns (the returned matrix acts on interior nodes)."""
    nq = 3 if mesh.dim == 2 else 4
    wq = np.ones((mesh.n_elems, nq))
    kv, _, _ = _element_arrays(mesh, wq)
    K = _scatter(mesh, kv)
    if bc == "neumann":
        return K
    if bc == "dirichlet":
        return restrict_matrix(K, interior_dofs(mesh))
    raise ValueError(f"unknown boundary condition {bc!r}")


def assemble_weighted_mass(mesh, w):
    """Weighted mass M_w with b'M_w b ~ int b^2 w dx; w >= 0 required."""
    wq = _weight_at_quad(mesh, w)
    if np.any(wq < 0):
        raise ValueError("negative weight at a quadrature point")
    _, mv, _ = _element_arrays(mesh, wq)
    return _scatter(mesh, mv)


def assemble_energy_load(mesh, a):
    """Load vector f_i = int phi_i dGamma[a]; sums to the Dirichlet energy of a."""
    wq = gamma_weight(a, mesh)
    _, _, fv = _element_arrays(mesh, wq)
    f = np.zeros(mesh.n_nodes)
    np.add.at(f, mesh.elems.ravel(), fv.ravel())
    return f


def interior_dofs(mesh):
    mask = np.ones(mesh.n_nodes, dtype=bool)
    mask[boundary_nodes(mesh)] = False
    return np.nonzero(mask)[0]


def restrict_matrix(A, dofs):
    return A[dofs][:, dofs].tocsr()


def cg_solve(A, b, rtol=1e-10, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients; deterministic, single-threaded.

    Returns (x, relative_residual, iterations); raises ConvergenceError when
    maxiter is hit first.
    """
    n = b.shape[0]
    if maxiter is None:
        maxiter = 20 * n
    d = A.diagonal()
    if np.any(d <= 0):
        raise ValueError("operator diagonal must be positive for Jacobi preconditioning")
    dinv = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.astype(float, copy=True)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0.0, 0
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r))
        if res <= rtol * bnorm:
            return x, res / bnorm, it
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach rtol={rtol} in {maxiter} iterations (residual {res / bnorm:.3e})")


@dataclass(frozen=True)
class PotentialSolve:
    """1-potential of an energy measure: (K+M) g = load, with its H^1 norm."""

    values: np.ndarray
    h1_norm: float
    residual: float
    iterations: int


def solve_potential(K, M, f, rtol=1e-10):
    A = (K + M).tocsr()
    g, res, it = cg_solve(A, f, rtol=rtol)
    h1 = float(np.sqrt(max(g @ (A @ g), 0.0)))
    return PotentialSolve(g, h1, res, it)


def export_matrix(A, path):
    """Coordinate text format: `row col value` triples, 0-based."""
    coo = A.tocoo()
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {repr(float(v))}\n")
