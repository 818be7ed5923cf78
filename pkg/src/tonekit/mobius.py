"""The Moebius group of R^n as composable generator words with exact
derivatives, pullbacks, and numerical verification of conformal energy
invariance and the flow of energy measures.

Maps are stored as generator words, never as matrices, so Jacobian
determinants are exact products of the generator formulas.
"""

from __future__ import annotations

import functools as _functools
import math
from dataclasses import dataclass

import numpy as np

from . import boxquad
from . import expressions as ex
from .fields import AnalyticField

__all__ = [
    "Translation",
    "Rotation",
    "Dilation",
    "Inversion",
    "MobiusMap",
    "AnalyticMap",
    "SingularPointError",
    "PulledBackField",
    "pullback",
    "compose_field",
    "map_box",
    "poles",
    "energy_invariance_check",
    "energy_measure_flow_check",
    "CheckResult",
    "map_to_text",
    "map_from_text",
]

POLE_MARGIN_FACTOR = 1e-6  # times the diameter of the region being integrated


class SingularPointError(ValueError):
    """Evaluation requested at (or too close to) an inversion pole."""


@dataclass(frozen=True)
class Translation:
    v: tuple

    def inverse(self):
        return Translation(tuple(-c for c in self.v))


@dataclass(frozen=True)
class Rotation:
    matrix: tuple  # row-major tuple of tuples, orthogonal

    def inverse(self):
        m = np.asarray(self.matrix)
        return Rotation(tuple(tuple(row) for row in m.T))


@dataclass(frozen=True)
class Dilation:
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("dilation factor must be positive")

    def inverse(self):
        return Dilation(1.0 / self.s)


@dataclass(frozen=True)
class Inversion:
    def inverse(self):
        return Inversion()


def _rotation_array(g):
    R = np.asarray(g.matrix, dtype=float)
    if not np.allclose(R @ R.T, np.eye(R.shape[0]), atol=1e-12):
        raise ValueError("rotation matrix is not orthogonal")
    return R


@dataclass(frozen=True)
class MobiusMap:
    """Word of elementary generators, applied first-to-last."""

    word: tuple
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("Moebius maps need dimension >= 2")

    @staticmethod
    def identity(dim):
        return MobiusMap((), dim)

    @staticmethod
    def translation(v):
        return MobiusMap((Translation(tuple(float(c) for c in v)),), len(v))

    @staticmethod
    def rotation(R):
        R = np.asarray(R, dtype=float)
        return MobiusMap((Rotation(tuple(tuple(row) for row in R)),), R.shape[0])

    @staticmethod
    def dilation(s, dim):
        return MobiusMap((Dilation(float(s)),), dim)

    @staticmethod
    def inversion(dim):
        return MobiusMap((Inversion(),), dim)

    def then(self, other):
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return MobiusMap(self.word + other.word, self.dim)

    def inverse(self):
        return MobiusMap(tuple(g.inverse() for g in reversed(self.word)), self.dim)

    def apply(self, points, pole_tol=1e-12, on_pole="raise"):
        u = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        bad = np.zeros(u.shape[0], dtype=bool)
        for g in self.word:
            if isinstance(g, Translation):
                u = u + np.asarray(g.v)
            elif isinstance(g, Rotation):
                u = u @ _rotation_array(g).T
            elif isinstance(g, Dilation):
                u = g.s * u
            else:
                r2 = np.einsum("md,md->m", u, u)
                hit = r2 < pole_tol**2
                if np.any(hit & ~bad):
                    if on_pole == "raise":
                        raise SingularPointError("evaluation at an inversion pole")
                    bad |= hit
                    r2 = np.where(hit, 1.0, r2)
                u = u / r2[:, None]
        if np.any(bad):
            u[bad] = np.nan
        return u if np.asarray(points).ndim > 1 else u[0]

    def jacobian_det(self, points, pole_tol=1e-12):
        """Signed determinant of the composed Jacobian via the chain rule."""
        u = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        det = np.ones(u.shape[0])
        n = self.dim
        for g in self.word:
            if isinstance(g, Translation):
                u = u + np.asarray(g.v)
            elif isinstance(g, Rotation):
                det = det * float(np.linalg.det(_rotation_array(g)))
                u = u @ _rotation_array(g).T
            elif isinstance(g, Dilation):
                det = det * g.s**n
                u = g.s * u
            else:
                r2 = np.einsum("md,md->m", u, u)
                if np.any(r2 < pole_tol**2):
                    raise SingularPointError("Jacobian requested at an inversion pole")
                det = det * (-(r2 ** (-n)))
                u = u / r2[:, None]
        return det if np.asarray(points).ndim > 1 else float(det[0])

    def jacobian_at(self, points, pole_tol=1e-12):
        """Full Jacobian matrices, shape (m, n, n)."""
        u = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        m, n = u.shape
        J = np.broadcast_to(np.eye(n), (m, n, n)).copy()
        for g in self.word:
            if isinstance(g, Translation):
                u = u + np.asarray(g.v)
            elif isinstance(g, Rotation):
                R = _rotation_array(g)
                J = np.einsum("ij,mjk->mik", R, J)
                u = u @ R.T
            elif isinstance(g, Dilation):
                J = g.s * J
                u = g.s * u
            else:
                r2 = np.einsum("md,md->m", u, u)
                if np.any(r2 < pole_tol**2):
                    raise SingularPointError("Jacobian requested at an inversion pole")
                A = np.eye(n)[None, :, :] - 2.0 * u[:, :, None] * u[:, None, :] / r2[:, None, None]
                A = A / r2[:, None, None]
                J = np.einsum("mij,mjk->mik", A, J)
                u = u / r2[:, None]
        return J if np.asarray(points).ndim > 1 else J[0]

    def component_exprs(self):
        """Symbolic component expressions of the map (composition by substitution)."""
        comps = tuple(ex.var(i) for i in range(self.dim))
        for g in self.word:
            if isinstance(g, Translation):
                comps = tuple(ex.add(c, ex.const(vi)) for c, vi in zip(comps, g.v))
            elif isinstance(g, Rotation):
                R = _rotation_array(g)
                new = []
                for i in range(self.dim):
                    e = ex.const(0.0)
                    for j in range(self.dim):
                        e = ex.add(e, ex.mul(ex.const(R[i, j]), comps[j]))
                    new.append(e)
                comps = tuple(new)
            elif isinstance(g, Dilation):
                comps = tuple(ex.mul(ex.const(g.s), c) for c in comps)
            else:
                q = ex.const(0.0)
                for c in comps:
                    q = ex.add(q, ex.powi(c, 2))
                comps = tuple(ex.div(c, q) for c in comps)
        return comps


def poles(gamma):
    """Points where evaluating gamma hits an inversion singularity."""
    out = []
    for i, g in enumerate(gamma.word):
        if isinstance(g, Inversion):
            prefix = MobiusMap(gamma.word[:i], gamma.dim)
            try:
                out.append(np.asarray(prefix.inverse().apply(np.zeros(gamma.dim))))
            except SingularPointError:
                continue  # this pole sits at infinity
    return out


# ---------------------------------------------------------------------------
# Pullbacks


def _jacobian_factor_expr(inv_word, dim, p):
    """|J_{gamma^-1}(y)|^{1/p} as an expression, or None when not expressible.

    Inversion generators contribute (|u|^2)^(-n/p); this is built from integer
    powers and sqrt whenever 2n/p is an integer (true for p in {1, 2, n/(n-2),
    2n/(n-2), 2n/(n+2), inf} at integer n).
    """
    if math.isinf(p):
        return ex.const(1.0)
    m2 = 2.0 * dim / p
    has_inversion = any(isinstance(g, Inversion) for g in inv_word)
    if has_inversion and abs(m2 - round(m2)) > 1e-12:
        return None
    m2 = int(round(m2))
    factor = ex.const(1.0)
    comps = tuple(ex.var(i) for i in range(dim))
    for g in inv_word:
        if isinstance(g, Translation):
            comps = tuple(ex.add(c, ex.const(vi)) for c, vi in zip(comps, g.v))
        elif isinstance(g, Rotation):
            R = _rotation_array(g)
            comps = tuple(_linear_combo(R[i], comps) for i in range(dim))
        elif isinstance(g, Dilation):
            factor = ex.mul(factor, ex.const(g.s ** (dim / p)))
            comps = tuple(ex.mul(ex.const(g.s), c) for c in comps)
        else:
            q = ex.const(0.0)
            for c in comps:
                q = ex.add(q, ex.powi(c, 2))
            k, j = divmod(m2, 2)
            den = ex.const(1.0)
            if k:
                den = ex.powi(q, k)
            if j:
                den = ex.mul(den, ex.func("sqrt", q))
            factor = ex.div(factor, den)
            comps = tuple(ex.div(c, q) for c in comps)
    return factor


def _linear_combo(coeffs, comps):
    e = ex.const(0.0)
    for c, comp in zip(coeffs, comps):
        e = ex.add(e, ex.mul(ex.const(c), comp))
    return e


@dataclass(frozen=True)
class PulledBackField:
    """Numeric gamma_p^* f for exponents without a sqrt-expressible Jacobian
    factor; supports evaluation only."""

    gamma: MobiusMap
    p: float
    base: object
    support: tuple | None = None

    @property
    def dim(self):
        return self.gamma.dim

    def evaluate(self, points, check=True):
        inv = self.gamma.inverse()
        x = inv.apply(points)
        vals = self.base.evaluate(x, check=check)
        if math.isinf(self.p):
            return vals
        jd = np.abs(inv.jacobian_det(points))
        return jd ** (1.0 / self.p) * vals


def pullback(gamma, p, f):
    """gamma_p^*(f)(y) = |J_{gamma^-1}(y)|^{1/p} f(gamma^-1(y)).

    Returns an AnalyticField with a symbolic chain-rule gradient whenever the
    Jacobian factor is expressible in the expression grammar, otherwise a
    numeric PulledBackField.
    """
    if not isinstance(f, AnalyticField):
        raise TypeError("pullback requires an analytic field")
    if not (p >= 1):
        raise ValueError("exponent p must be in [1, inf]")
    inv = gamma.inverse()
    sup = _mapped_support(gamma, f.support)
    factor = _jacobian_factor_expr(inv.word, gamma.dim, p)
    if factor is None:
        return PulledBackField(gamma, p, f, sup)
    comps = inv.component_exprs()
    expr = ex.mul(factor, ex.compose(f.expr, comps))
    return AnalyticField.from_expr(expr, gamma.dim, support=sup)


def compose_field(f, gamma):
    """f o gamma as an analytic field (the multiplier transported to the source side)."""
    if not isinstance(f, AnalyticField):
        raise TypeError("compose_field requires an analytic field")
    comps = gamma.component_exprs()
    sup = None
    if f.support is not None:
        sup = _mapped_support(gamma.inverse(), f.support)
    return AnalyticField.from_expr(ex.compose(f.expr, comps), gamma.dim, support=sup)


def _mapped_support(gamma, support, pad=0.05, nface=12):
    if support is None:
        return None
    lo, hi = (np.asarray(support[0]), np.asarray(support[1]))
    blo, bhi = map_box(gamma, lo, hi, pad=pad, nface=nface)
    return (tuple(blo), tuple(bhi))


def map_box(gamma, lo, hi, pad=0.02, nface=24):
    """Bounding box of the image of a box (face sampling; requires pole-free faces)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.shape[0]
    samples = []
    lin = [np.linspace(lo[k], hi[k], nface) for k in range(d)]
    for axis in range(d):
        for val in (lo[axis], hi[axis]):
            grids = np.meshgrid(*[lin[k] for k in range(d) if k != axis], indexing="ij")
            face = np.empty((grids[0].size, d))
            idx = 0
            for k in range(d):
                if k == axis:
                    face[:, k] = val
                else:
                    face[:, k] = grids[idx].ravel()
                    idx += 1
            samples.append(face)
    pts = gamma.apply(np.concatenate(samples, axis=0))
    blo = pts.min(axis=0)
    bhi = pts.max(axis=0)
    width = bhi - blo
    return blo - pad * width, bhi + pad * width


# ---------------------------------------------------------------------------
# Conformal invariance checks


@dataclass(frozen=True)
class CheckResult:
    error: float
    converged: bool
    lhs: float
    rhs: float


def _require_pole_margin(gamma, lo, hi):
    diam = float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))
    margin = POLE_MARGIN_FACTOR * diam
    for pole in poles(gamma):
        gap = np.linalg.norm(np.clip(pole, lo, hi) - pole)
        inside = np.all(pole >= np.asarray(lo) - margin) and np.all(pole <= np.asarray(hi) + margin)
        if inside or gap < margin:
            raise SingularPointError(
                f"pole at {pole} is within the margin of the integration box"
            )


def _box_mask(gamma, lo, hi):
    """Indicator of gamma(box): tests whether gamma^-1(y) lands back in the box."""
    inv = gamma.inverse()
    lo = np.asarray(lo)
    hi = np.asarray(hi)

    def mask(points):
        with np.errstate(invalid="ignore", divide="ignore"):
            x = inv.apply(points, on_pole="nan")
        good = np.all(np.isfinite(x), axis=1)
        inside = np.zeros(points.shape[0], dtype=bool)
        inside[good] = np.all((x[good] >= lo) & (x[good] <= hi), axis=1)
        return inside

    return mask


def sobolev_exponent(n):
    return math.inf if n == 2 else 2.0 * n / (n - 2.0)


@_functools.lru_cache(maxsize=64)
def _base_energy(f, rel_tol, start_cells, max_doublings, p):
    lo, hi = np.asarray(f.support[0]), np.asarray(f.support[1])
    return boxquad.dyadic_integrate(
        lambda pts: f.energy_density_at(pts),
        lo,
        hi,
        rel_tol=rel_tol,
        start_cells=start_cells,
        max_doublings=max_doublings,
        p=p,
    )


def energy_invariance_check(gamma, f, rel_tol=1e-8, start_cells=2, max_doublings=4, p=10):
    """Relative error between the Dirichlet energies of f and of its conformal
    pullback gamma_r^* f, both by dyadically refined tensor Gauss quadrature."""
    if f.support is None:
        raise ValueError("energy_invariance_check needs a field with a stated support box")
    n = f.dim
    r = sobolev_exponent(n)
    lo, hi = np.asarray(f.support[0]), np.asarray(f.support[1])
    _require_pole_margin(gamma, lo, hi)

    base = _base_energy(f, rel_tol, start_cells, max_doublings, p)

    g = pullback(gamma, r, f)
    ilo, ihi = map_box(gamma, lo, hi)
    _require_pole_margin(gamma.inverse(), ilo, ihi)
    mask = _box_mask(gamma, lo, hi)
    image = boxquad.dyadic_integrate(
        lambda pts: g.energy_density_at(pts),
        ilo,
        ihi,
        rel_tol=rel_tol,
        start_cells=start_cells,
        max_doublings=max_doublings,
        p=p,
        mask=mask,
    )
    err = abs(image.value - base.value) / max(abs(base.value), 1e-300)
    return CheckResult(err, base.converged and image.converged, base.value, image.value)


def energy_measure_flow_check(gamma, a, b, rel_tol=1e-8, start_cells=2, max_doublings=4, p=10):
    """Relative difference of int |b|^2 dGamma[a o gamma] and
    int |gamma_r^* b|^2 dGamma[a] (unitarity of the energy-measure flow)."""
    if b.support is None:
        raise ValueError("energy_measure_flow_check needs b with a stated support box")
    n = b.dim
    r = sobolev_exponent(n)
    lo, hi = np.asarray(b.support[0]), np.asarray(b.support[1])
    _require_pole_margin(gamma, lo, hi)

    a_pulled = compose_field(a, gamma)

    def lhs_fn(pts):
        return b.evaluate(pts) ** 2 * a_pulled.energy_density_at(pts)

    lhs = boxquad.dyadic_integrate(
        lhs_fn, lo, hi, rel_tol=rel_tol, start_cells=start_cells, max_doublings=max_doublings, p=p
    )

    g = pullback(gamma, r, b)
    ilo, ihi = map_box(gamma, lo, hi)
    _require_pole_margin(gamma.inverse(), ilo, ihi)
    mask = _box_mask(gamma, lo, hi)

    def rhs_fn(pts):
        return g.evaluate(pts) ** 2 * a.energy_density_at(pts)

    rhs = boxquad.dyadic_integrate(
        rhs_fn, ilo, ihi, rel_tol=rel_tol, start_cells=start_cells,
        max_doublings=max_doublings, p=p, mask=mask,
    )
    err = abs(lhs.value - rhs.value) / max(abs(lhs.value), 1e-300)
    return CheckResult(err, lhs.converged and rhs.converged, lhs.value, rhs.value)


# ---------------------------------------------------------------------------
# Analytic (non-Moebius) maps with exact Jacobians


@dataclass(frozen=True)
class AnalyticMap:
    """Map given by one expression per output coordinate, with the symbolic
    Jacobian matrix; optionally carries its inverse."""

    components: tuple
    dim: int
    inverse_map: object = None

    def __post_init__(self):
        if len(self.components) != self.dim:
            raise ValueError("need one component expression per output coordinate")

    @staticmethod
    def affine(A, b=None, with_inverse=True):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        comps = tuple(
            ex.add(_linear_combo(A[i], tuple(ex.var(j) for j in range(n))), ex.const(b[i]))
            for i in range(n)
        )
        inv = None
        if with_inverse:
            Ai = np.linalg.inv(A)
            inv = AnalyticMap.affine(Ai, -Ai @ b, with_inverse=False)
        out = AnalyticMap(comps, n, inv)
        if inv is not None:
            object.__setattr__(inv, "inverse_map", out)
        return out

    def jacobian_exprs(self):
        return tuple(
            tuple(ex.diff(c, j) for j in range(self.dim)) for c in self.components
        )

    def apply(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty_like(pts)
        for i, c in enumerate(self.components):
            out[:, i] = ex.evaluate(c, pts)
        return out if np.asarray(points).ndim > 1 else out[0]

    def jacobian_at(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = pts.shape[0]
        J = np.empty((m, self.dim, self.dim))
        for i, row in enumerate(self.jacobian_exprs()):
            for j, e in enumerate(row):
                J[:, i, j] = ex.evaluate(e, pts)
        return J if np.asarray(points).ndim > 1 else J[0]

    def jacobian_det(self, points):
        J = self.jacobian_at(np.atleast_2d(np.asarray(points, dtype=float)))
        d = np.linalg.det(J)
        return d if np.asarray(points).ndim > 1 else float(d[0])

    def inverse(self):
        if self.inverse_map is None:
            raise ValueError("this analytic map carries no inverse")
        return self.inverse_map

    def component_exprs(self):
        return self.components


# ---------------------------------------------------------------------------
# Serialization: one generator per line


def map_to_text(gamma):
    lines = []
    for g in gamma.word:
        if isinstance(g, Translation):
            lines.append("translate " + " ".join(repr(float(c)) for c in g.v))
        elif isinstance(g, Rotation):
            flat = [repr(float(v)) for row in g.matrix for v in row]
            lines.append("rotate " + " ".join(flat))
        elif isinstance(g, Dilation):
            lines.append(f"dilate {float(g.s)!r}")
        else:
            lines.append("invert")
    return "\n".join(lines) + ("\n" if lines else "")


def map_from_text(text, dim):
    word = []
    for raw in text.replace(";", "\n").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        op = parts[0].lower()
        args = [float(v) for v in parts[1:]]
        if op == "translate":
            if len(args) != dim:
                raise ValueError(f"translate needs {dim} components")
            word.append(Translation(tuple(args)))
        elif op == "dilate":
            if len(args) != 1:
                raise ValueError("dilate needs one factor")
            word.append(Dilation(args[0]))
        elif op == "invert":
            if args:
                raise ValueError("invert takes no arguments")
            word.append(Inversion())
        elif op == "rotate":
            if len(args) != dim * dim:
                raise ValueError(f"rotate needs {dim * dim} row-major entries")
            R = np.asarray(args).reshape(dim, dim)
            _rotation_array(Rotation(tuple(tuple(r) for r in R)))
            word.append(Rotation(tuple(tuple(r) for r in R)))
        else:
            raise ValueError(f"unknown generator {op!r}")
    return MobiusMap(tuple(word), dim)
