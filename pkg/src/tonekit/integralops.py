"""Riesz potentials, the Green operator, the Hardy-Littlewood-Sobolev
functional, and their conformal covariance/invariance checks.

Singular kernels are handled by subtracting a radial C^2 cutoff at the
evaluation point: the cutoff's kernel integral has a closed radial form, and
the remainder is continuous, so composite tensor Gauss quadrature applies.
The cutoff radius follows the quadrature resolution (two cells).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import boxquad
from .mobius import map_box, pullback, _box_mask, _require_pole_margin, sobolev_exponent
from .tones import sphere_volume

__all__ = [
    "RieszKernel",
    "riesz_potential",
    "riesz_potential_many",
    "green_constant",
    "green_apply",
    "green_apply_many",
    "green_covariance_check",
    "hls_functional",
    "hls_invariance_check",
]

EPS_REL = 1e-12  # regularizer in relative-error denominators


@dataclass(frozen=True)
class RieszKernel:
    lam: float
    dim: int

    def __post_init__(self):
        if not 0.0 < self.lam < self.dim:
            raise ValueError("Riesz exponent must satisfy 0 < lam < dim")


def _cutoff_radial_integral(n, lam):
    """int_0^1 (1 - s^2)^3 s^(n-1-lam) ds by Gauss quadrature (smooth integrand)."""
    xg, wg = np.polynomial.legendre.leggauss(64)
    s = 0.5 * (xg + 1.0)
    w = 0.5 * wg
    return float(np.sum(w * (1.0 - s**2) ** 3 * s ** (n - 1.0 - lam)))


def _field_box(f, box):
    if box is not None:
        return np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    if getattr(f, "support", None) is None:
        raise ValueError("riesz potential needs a field with a stated support box")
    return np.asarray(f.support[0], dtype=float), np.asarray(f.support[1], dtype=float)


def riesz_potential_many(f, lam, xs, box=None, mask=None, rel_tol=1e-5,
                         start_cells=4, max_doublings=2, p=6):
    """(g_lam * f)(x) for several x, sharing the field evaluations per level.

    Returns (values, converged_flags).
    """
    lo, hi = _field_box(f, box)
    n = lo.shape[0]
    RieszKernel(lam, n)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    radial = _cutoff_radial_integral(n, lam)
    sphere = sphere_volume(n - 1)

    fx = f.evaluate(xs)
    prev = None
    conv = np.zeros(xs.shape[0], dtype=bool)
    cells = start_cells
    for _ in range(max_doublings + 1):
        pts, w = boxquad.composite_gauss(lo, hi, cells, p)
        if mask is not None:
            keep = mask(pts)
            fvals = np.zeros(pts.shape[0])
            if np.any(keep):
                fvals[keep] = f.evaluate(pts[keep])
        else:
            fvals = f.evaluate(pts)
        cell = float(np.max((hi - lo) / cells))
        vals = np.empty(xs.shape[0])
        for i, x in enumerate(xs):
            d = pts - x
            r2 = np.einsum("md,md->m", d, d)
            r = np.sqrt(r2)
            with np.errstate(divide="ignore"):
                k = np.where(r > 0, r ** (-lam), 0.0)
            delta = 2.0 * cell
            border = float(np.min(np.minimum(x - lo, hi - x)))
            if border <= 0:
                delta = 0.0
            else:
                delta = min(delta, 0.9 * border)
            if delta > 0:
                s = r / delta
                cut = np.where(s < 1.0, (1.0 - np.minimum(s, 1.0) ** 2) ** 3, 0.0)
                integrand = (fvals - fx[i] * cut) * k
                polar = fx[i] * sphere * delta ** (n - lam) * radial
            else:
                integrand = fvals * k
                polar = 0.0
            vals[i] = float(w @ integrand) + polar
        if prev is not None:
            conv = np.abs(vals - prev) <= rel_tol * np.maximum(np.abs(vals), 1e-300)
            if np.all(conv):
                return vals, conv
        prev = vals
        cells *= 2
    return prev, conv


def riesz_potential(f, lam, x, **kw):
    vals, _ = riesz_potential_many(f, lam, np.atleast_2d(np.asarray(x, dtype=float)), **kw)
    return float(vals[0])


def green_constant(n):
    """c_n = [(n-2) |S^(n-1)|]^(-1)."""
    if n < 3:
        raise ValueError("the Green operator requires dimension >= 3")
    return 1.0 / ((n - 2.0) * sphere_volume(n - 1))


def green_apply_many(f, xs, box=None, mask=None, **kw):
    lo, _ = _field_box(f, box)
    n = lo.shape[0]
    vals, conv = riesz_potential_many(f, n - 2.0, xs, box=box, mask=mask, **kw)
    return green_constant(n) * vals, conv


def green_apply(f, x, **kw):
    vals, _ = green_apply_many(f, np.atleast_2d(np.asarray(x, dtype=float)), **kw)
    return float(vals[0])


def green_covariance_check(gamma, f, points, **kw):
    """max relative error of G(gamma_p^* f) = gamma_r^*(G f) over the points."""
    n = f.dim
    if n < 3:
        raise ValueError("covariance check requires dimension >= 3")
    p = 2.0 * n / (n + 2.0)
    r = 2.0 * n / (n - 2.0)
    pts = np.atleast_2d(np.asarray(points, dtype=float))

    pf = pullback(gamma, p, f)
    lo, hi = _field_box(f, None)
    # pad=0 keeps the image grid an exact translate for isometries; the field
    # carries only tail mass at the box boundary, so under-coverage between
    # face samples is negligible.
    ilo, ihi = map_box(gamma, lo, hi, pad=0.0)
    _require_pole_margin(gamma.inverse(), ilo, ihi)
    mask = _box_mask(gamma, lo, hi)
    lhs, _ = green_apply_many(pf, pts, box=(ilo, ihi), mask=mask, **kw)

    inv = gamma.inverse()
    xsrc = inv.apply(pts)
    base, _ = green_apply_many(f, xsrc, **kw)
    jd = np.abs(inv.jacobian_det(pts))
    rhs = jd ** (1.0 / r) * base
    return float(np.max(np.abs(lhs - rhs) / (np.abs(rhs) + EPS_REL)))


def _pair_integral(fvals, fw, fpts, gvals, gw, gpts, lam, chunk=4096):
    gq = gvals * gw
    g2 = np.einsum("md,md->m", gpts, gpts)
    total = 0.0
    for start in range(0, fpts.shape[0], chunk):
        fp = fpts[start : start + chunk]
        fq = (fvals * fw)[start : start + chunk]
        f2 = np.einsum("md,md->m", fp, fp)
        d2 = f2[:, None] + g2[None, :] - 2.0 * (fp @ gpts.T)
        np.maximum(d2, 0.0, out=d2)
        with np.errstate(divide="ignore"):
            if lam == 1.0:
                kmat = 1.0 / np.sqrt(d2)
            else:
                kmat = d2 ** (-lam / 2.0)
        kmat[~np.isfinite(kmat)] = 0.0
        total += float(fq @ (kmat @ gq))
    return total


def hls_functional(f, g, lam, boxes=None, masks=(None, None), cells=4, p=6):
    """Double-quadrature value of I(f,g) = int int f(x)|x-y|^-lam g(y) dx dy."""
    flo, fhi = _field_box(f, boxes[0] if boxes else None)
    glo, ghi = _field_box(g, boxes[1] if boxes else None)
    RieszKernel(lam, flo.shape[0])
    fpts, fw = boxquad.composite_gauss(flo, fhi, cells, p)
    gpts, gw = boxquad.composite_gauss(glo, ghi, cells, p)

    def field_values(field, pts, mask):
        if mask is None:
            return field.evaluate(pts)
        keep = mask(pts)
        out = np.zeros(pts.shape[0])
        if np.any(keep):
            out[keep] = field.evaluate(pts[keep])
        return out

    fvals = field_values(f, fpts, masks[0])
    gvals = field_values(g, gpts, masks[1])
    return _pair_integral(fvals, fw, fpts, gvals, gw, gpts, lam)


def hls_invariance_check(gamma, f, g, lam, cells=4, p=6):
    """Relative error of I(gamma_p^* f, gamma_p^* g) = I(f, g), p = 2n/(2n-lam)."""
    n = f.dim
    p_exp = 2.0 * n / (2.0 * n - lam)
    base = hls_functional(f, g, lam, cells=cells, p=p)

    pf = pullback(gamma, p_exp, f)
    pg = pullback(gamma, p_exp, g)
    flo, fhi = _field_box(f, None)
    glo, ghi = _field_box(g, None)
    fbox = map_box(gamma, flo, fhi)
    gbox = map_box(gamma, glo, ghi)
    _require_pole_margin(gamma.inverse(), *fbox)
    _require_pole_margin(gamma.inverse(), *gbox)
    lhs = hls_functional(
        pf,
        pg,
        lam,
        boxes=(fbox, gbox),
        masks=(_box_mask(gamma, flo, fhi), _box_mask(gamma, glo, ghi)),
        cells=cells,
        p=p,
    )
    return abs(lhs - base) / (abs(base) + EPS_REL)
