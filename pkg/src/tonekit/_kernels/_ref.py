"""Pure-python reference kernels.

These mirror tonekit._kernels._fast one operation at a time; the assembly
routines are numpy-vectorized over elements with the same per-element
arithmetic (same products, same accumulation order over quadrature points), so
both backends return bit-identical arrays.  The ODE sweep is a plain loop and
is the slow path; it exists so the package works without a compiler.
"""

import numpy as np

TRI_PHI = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])

_TET_A = 0.5854101966249685
_TET_B = 0.1381966011250105
TET_PHI = np.array(
    [
        [_TET_A, _TET_B, _TET_B, _TET_B],
        [_TET_B, _TET_A, _TET_B, _TET_B],
        [_TET_B, _TET_B, _TET_A, _TET_B],
        [_TET_B, _TET_B, _TET_B, _TET_A],
    ]
)


def tri_element_arrays(nodes, elems, wq):
    p0 = nodes[elems[:, 0]]
    p1 = nodes[elems[:, 1]]
    p2 = nodes[elems[:, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    vol = 0.5 * det
    m = elems.shape[0]
    gx = np.empty((m, 3))
    gy = np.empty((m, 3))
    gx[:, 1] = e2[:, 1] / det
    gy[:, 1] = -e2[:, 0] / det
    gx[:, 2] = -e1[:, 1] / det
    gy[:, 2] = e1[:, 0] / det
    gx[:, 0] = -gx[:, 1] - gx[:, 2]
    gy[:, 0] = -gy[:, 1] - gy[:, 2]

    kv = np.empty((m, 9))
    for i in range(3):
        for j in range(3):
            kv[:, 3 * i + j] = vol * (gx[:, i] * gx[:, j] + gy[:, i] * gy[:, j])

    mv = np.zeros((m, 9))
    fv = np.zeros((m, 3))
    for q in range(3):
        coeff = vol * (1.0 / 3.0) * wq[:, q]
        for i in range(3):
            for j in range(3):
                mv[:, 3 * i + j] = mv[:, 3 * i + j] + coeff * (TRI_PHI[q, i] * TRI_PHI[q, j])
            fv[:, i] = fv[:, i] + coeff * TRI_PHI[q, i]
    return vol, kv, mv, fv


def tet_element_arrays(nodes, elems, wq):
    p0 = nodes[elems[:, 0]]
    e1 = nodes[elems[:, 1]] - p0
    e2 = nodes[elems[:, 2]] - p0
    e3 = nodes[elems[:, 3]] - p0
    c1 = np.cross(e2, e3)
    c2 = np.cross(e3, e1)
    c3 = np.cross(e1, e2)
    det = e1[:, 0] * c1[:, 0] + e1[:, 1] * c1[:, 1] + e1[:, 2] * c1[:, 2]
    vol = det / 6.0
    m = elems.shape[0]
    g = np.empty((m, 4, 3))
    g[:, 1] = c1 / det[:, None]
    g[:, 2] = c2 / det[:, None]
    g[:, 3] = c3 / det[:, None]
    g[:, 0] = -g[:, 1] - g[:, 2] - g[:, 3]

    kv = np.empty((m, 16))
    for i in range(4):
        for j in range(4):
            kv[:, 4 * i + j] = vol * (
                g[:, i, 0] * g[:, j, 0] + g[:, i, 1] * g[:, j, 1] + g[:, i, 2] * g[:, j, 2]
            )

    mv = np.zeros((m, 16))
    fv = np.zeros((m, 4))
    for q in range(4):
        coeff = vol * 0.25 * wq[:, q]
        for i in range(4):
            for j in range(4):
                mv[:, 4 * i + j] = mv[:, 4 * i + j] + coeff * (TET_PHI[q, i] * TET_PHI[q, j])
            fv[:, i] = fv[:, i] + coeff * TET_PHI[q, i]
    return vol, kv, mv, fv


def _accel(n, t, z, zp):
    return -((n - 1.0) / t) * zp - (1.0 - (n - 1.0) / (t * t)) * z


def _rk4_step(n, t, z, zp, h):
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


def radial_ode_sweep(n, t0, z0, zp0, h, max_steps):
    t, z, zp = t0, z0, zp0
    for i in range(max_steps):
        tp, zq, zpq = t, z, zp
        t, z, zp = _rk4_step(n, t, z, zp, h)
        if zp == 0.0 or (zp > 0.0) != (zpq > 0.0):
            return True, i + 1, tp, zq, zpq, t, z, zp
    return False, max_steps, t, z, zp, t, z, zp


def radial_ode_span(n, t, z, zp, h, steps):
    for _ in range(steps):
        t, z, zp = _rk4_step(n, t, z, zp, h)
    return t, z, zp
