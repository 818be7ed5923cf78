# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled element-assembly and ODE-sweep kernels.

Mirrors tonekit._kernels._ref operation for operation so that both backends
produce bit-identical arrays.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

# P1 hat-function values at the 3-point (triangle, edge midpoints) and
# 4-point (tetrahedron) quadrature rules, both exact for quadratics.
cdef double TRI_PHI[3][3]
TRI_PHI[0][:] = [0.5, 0.5, 0.0]
TRI_PHI[1][:] = [0.0, 0.5, 0.5]
TRI_PHI[2][:] = [0.5, 0.0, 0.5]

cdef double TET_A = 0.5854101966249685
cdef double TET_B = 0.1381966011250105
cdef double TET_PHI[4][4]
TET_PHI[0][:] = [TET_A, TET_B, TET_B, TET_B]
TET_PHI[1][:] = [TET_B, TET_A, TET_B, TET_B]
TET_PHI[2][:] = [TET_B, TET_B, TET_A, TET_B]
TET_PHI[3][:] = [TET_B, TET_B, TET_B, TET_A]


def tri_element_arrays(const double[:, ::1] nodes, const long[:, ::1] elems, const double[:, ::1] wq):
    """Per-triangle signed area, stiffness, weighted mass and load entries.

    wq holds the weight evaluated at the 3 quadrature points of each element.
    Returns (vol, kvals(m,9), mvals(m,9), load(m,3)).
    """
    cdef Py_ssize_t m = elems.shape[0]
    cdef cnp.ndarray[double, ndim=1] vol_np = np.empty(m)
    cdef cnp.ndarray[double, ndim=2] k_np = np.empty((m, 9))
    cdef cnp.ndarray[double, ndim=2] ms_np = np.empty((m, 9))
    cdef cnp.ndarray[double, ndim=2] f_np = np.empty((m, 3))
    cdef double[::1] vol = vol_np
    cdef double[:, ::1] kv = k_np
    cdef double[:, ::1] mv = ms_np
    cdef double[:, ::1] fv = f_np

    cdef Py_ssize_t e, i, j, q
    cdef long n0, n1, n2
    cdef double e1x, e1y, e2x, e2y, det, v
    cdef double gx[3]
    cdef double gy[3]
    cdef double coeff, acc

    for e in range(m):
        n0 = elems[e, 0]; n1 = elems[e, 1]; n2 = elems[e, 2]
        e1x = nodes[n1, 0] - nodes[n0, 0]
        e1y = nodes[n1, 1] - nodes[n0, 1]
        e2x = nodes[n2, 0] - nodes[n0, 0]
        e2y = nodes[n2, 1] - nodes[n0, 1]
        det = e1x * e2y - e1y * e2x
        v = 0.5 * det
        vol[e] = v
        gx[1] = e2y / det
        gy[1] = -e2x / det
        gx[2] = -e1y / det
        gy[2] = e1x / det
        gx[0] = -gx[1] - gx[2]
        gy[0] = -gy[1] - gy[2]
        for i in range(3):
            for j in range(3):
                kv[e, 3 * i + j] = v * (gx[i] * gx[j] + gy[i] * gy[j])
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for q in range(3):
                    coeff = v * (1.0 / 3.0) * wq[e, q]
                    acc = acc + coeff * (TRI_PHI[q][i] * TRI_PHI[q][j])
                mv[e, 3 * i + j] = acc
        for i in range(3):
            acc = 0.0
            for q in range(3):
                coeff = v * (1.0 / 3.0) * wq[e, q]
                acc = acc + coeff * TRI_PHI[q][i]
            fv[e, i] = acc
    return vol_np, k_np, ms_np, f_np


def tet_element_arrays(const double[:, ::1] nodes, const long[:, ::1] elems, const double[:, ::1] wq):
    """Tetrahedral counterpart of tri_element_arrays (16 entries, 4 loads)."""
    cdef Py_ssize_t m = elems.shape[0]
    cdef cnp.ndarray[double, ndim=1] vol_np = np.empty(m)
    cdef cnp.ndarray[double, ndim=2] k_np = np.empty((m, 16))
    cdef cnp.ndarray[double, ndim=2] ms_np = np.empty((m, 16))
    cdef cnp.ndarray[double, ndim=2] f_np = np.empty((m, 4))
    cdef double[::1] vol = vol_np
    cdef double[:, ::1] kv = k_np
    cdef double[:, ::1] mv = ms_np
    cdef double[:, ::1] fv = f_np

    cdef Py_ssize_t e, i, j, q
    cdef long n0, n1, n2, n3
    cdef double e1x, e1y, e1z, e2x, e2y, e2z, e3x, e3y, e3z
    cdef double c1x, c1y, c1z, c2x, c2y, c2z, c3x, c3y, c3z
    cdef double det, v, coeff, acc
    cdef double gx[4]
    cdef double gy[4]
    cdef double gz[4]

    for e in range(m):
        n0 = elems[e, 0]; n1 = elems[e, 1]; n2 = elems[e, 2]; n3 = elems[e, 3]
        e1x = nodes[n1, 0] - nodes[n0, 0]
        e1y = nodes[n1, 1] - nodes[n0, 1]
        e1z = nodes[n1, 2] - nodes[n0, 2]
        e2x = nodes[n2, 0] - nodes[n0, 0]
        e2y = nodes[n2, 1] - nodes[n0, 1]
        e2z = nodes[n2, 2] - nodes[n0, 2]
        e3x = nodes[n3, 0] - nodes[n0, 0]
        e3y = nodes[n3, 1] - nodes[n0, 1]
        e3z = nodes[n3, 2] - nodes[n0, 2]
        # c1 = e2 x e3, c2 = e3 x e1, c3 = e1 x e2
        c1x = e2y * e3z - e2z * e3y
        c1y = e2z * e3x - e2x * e3z
        c1z = e2x * e3y - e2y * e3x
        c2x = e3y * e1z - e3z * e1y
        c2y = e3z * e1x - e3x * e1z
        c2z = e3x * e1y - e3y * e1x
        c3x = e1y * e2z - e1z * e2y
        c3y = e1z * e2x - e1x * e2z
        c3z = e1x * e2y - e1y * e2x
        det = e1x * c1x + e1y * c1y + e1z * c1z
        v = det / 6.0
        vol[e] = v
        gx[1] = c1x / det; gy[1] = c1y / det; gz[1] = c1z / det
        gx[2] = c2x / det; gy[2] = c2y / det; gz[2] = c2z / det
        gx[3] = c3x / det; gy[3] = c3y / det; gz[3] = c3z / det
        gx[0] = -gx[1] - gx[2] - gx[3]
        gy[0] = -gy[1] - gy[2] - gy[3]
        gz[0] = -gz[1] - gz[2] - gz[3]
        for i in range(4):
            for j in range(4):
                kv[e, 4 * i + j] = v * (gx[i] * gx[j] + gy[i] * gy[j] + gz[i] * gz[j])
        for i in range(4):
            for j in range(4):
                acc = 0.0
                for q in range(4):
                    coeff = v * 0.25 * wq[e, q]
                    acc = acc + coeff * (TET_PHI[q][i] * TET_PHI[q][j])
                mv[e, 4 * i + j] = acc
        for i in range(4):
            acc = 0.0
            for q in range(4):
                coeff = v * 0.25 * wq[e, q]
                acc = acc + coeff * TET_PHI[q][i]
            fv[e, i] = acc
    return vol_np, k_np, ms_np, f_np


cdef inline double _accel(double n, double t, double z, double zp) nogil:
    return -((n - 1.0) / t) * zp - (1.0 - (n - 1.0) / (t * t)) * z


def radial_ode_sweep(double n, double t0, double z0, double zp0, double h,
                     long max_steps):
    """RK4-integrate z'' + (n-1)/t z' + (1-(n-1)/t^2) z = 0 until z' flips sign.

    Returns (found, steps, t_prev, z_prev, zp_prev, t, z, zp) where the sign
    change of z' is bracketed by [t_prev, t].
    """
    cdef double t = t0, z = z0, zp = zp0
    cdef double tp, zq, zpq
    cdef long i
    for i in range(max_steps):
        tp = t; zq = z; zpq = zp
        t, z, zp = _rk4_step(n, t, z, zp, h)
        if zp == 0.0 or (zp > 0.0) != (zpq > 0.0):
            return True, i + 1, tp, zq, zpq, t, z, zp
    return False, max_steps, t, z, zp, t, z, zp


cdef inline (double, double, double) _rk4_step(double n, double t, double z,
                                               double zp, double h) nogil:
    cdef double k1z, k1p, k2z, k2p, k3z, k3p, k4z, k4p
    k1z = zp
    k1p = _accel(n, t, z, zp)
    k2z = zp + 0.5 * h * k1p
    k2p = _accel(n, t + 0.5 * h, z + 0.5 * h * k1z, zp + 0.5 * h * k1p)
    k3z = zp + 0.5 * h * k2p
    k3p = _accel(n, t + 0.5 * h, z + 0.5 * h * k2z, zp + 0.5 * h * k2p)
    k4z = zp + h * k3p
    k4p = _accel(n, t + h, z + h * k3z, zp + h * k3p)
    z = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    zp = zp + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return t + h, z, zp


def radial_ode_span(double n, double t, double z, double zp, double h, long steps):
    """Advance the radial ODE state by a fixed number of RK4 steps."""
    cdef long i
    for i in range(steps):
        t, z, zp = _rk4_step(n, t, z, zp, h)
    return t, z, zp
