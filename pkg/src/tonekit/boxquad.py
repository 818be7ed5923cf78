"""Composite tensorized Gauss-Legendre quadrature over boxes with dyadic
refinement, used by the conformal-invariance and singular-kernel checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadResult", "composite_gauss", "integrate_box", "dyadic_integrate"]

_CHUNK = 400_000


@dataclass(frozen=True)
class QuadResult:
    value: float
    converged: bool
    cells: int
    history: tuple


def composite_gauss(lo, hi, cells, p=4):
    """Per-axis composite Gauss rule; returns (points (N,d), weights (N,))."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.shape[0]
    xg, wg = np.polynomial.legendre.leggauss(p)
    axes = []
    weights = []
    for k in range(d):
        edges = np.linspace(lo[k], hi[k], cells + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        wts = (half[:, None] * wg[None, :]).ravel()
        axes.append(pts)
        weights.append(wts)
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*weights, indexing="ij")
    w = wgrids[0].ravel().copy()
    for g in wgrids[1:]:
        w *= g.ravel()
    return pts, w


def integrate_box(fn, lo, hi, cells, p=4, mask=None):
    """Integrate fn over the box; fn maps (m,d) points to (m,) values.

    With a mask, fn is evaluated only where mask(points) is True and the
    integrand is taken as zero elsewhere.
    """
    pts, w = composite_gauss(lo, hi, cells, p)
    total = 0.0
    for start in range(0, pts.shape[0], _CHUNK):
        blk = pts[start : start + _CHUNK]
        wb = w[start : start + _CHUNK]
        if mask is not None:
            keep = mask(blk)
            if not np.any(keep):
                continue
            vals = np.zeros(blk.shape[0])
            vals[keep] = fn(blk[keep])
        else:
            vals = fn(blk)
        total += float(wb @ vals)
    return total


def dyadic_integrate(fn, lo, hi, rel_tol=1e-8, start_cells=2, max_doublings=5, p=4, mask=None):
    """Refine cells dyadically until two successive levels agree to rel_tol."""
    cells = start_cells
    prev = None
    history = []
    for _ in range(max_doublings + 1):
        val = integrate_box(fn, lo, hi, cells, p=p, mask=mask)
        history.append((cells, val))
        if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
            return QuadResult(val, True, cells, tuple(history))
        prev = val
        cells *= 2
    return QuadResult(prev, False, cells // 2, tuple(history))
