"""Simplicial meshes of canonical domains, mesh mapping, and quadrature.

Meshes are immutable after construction (node/element arrays are marked
read-only) and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import _ref, tet_element_arrays, tri_element_arrays

__all__ = [
    "DomainSpec",
    "Mesh",
    "BallFamily",
    "ResolutionError",
    "FoldError",
    "build_mesh",
    "map_mesh",
    "volume",
    "boundary_nodes",
    "save_mesh",
    "load_mesh",
    "validate_mesh",
]


class ResolutionError(ValueError):
    """h is too large (or not positive) to resolve the requested domain."""


class FoldError(RuntimeError):
    """A mapped mesh contains both positively and negatively oriented elements."""


@dataclass(frozen=True)
class DomainSpec:
    """Canonical domain: square(L), rect(Lx,Ly), disk(r), annulus(r0,r1), box(Lx,Ly,Lz), ball(r)."""

    kind: str
    params: tuple
    center: tuple = ()

    @staticmethod
    def square(L):
        return DomainSpec("square", (float(L),))

    @staticmethod
    def rect(Lx, Ly):
        return DomainSpec("rect", (float(Lx), float(Ly)))

    @staticmethod
    def disk(r, center=(0.0, 0.0)):
        return DomainSpec("disk", (float(r),), tuple(float(c) for c in center))

    @staticmethod
    def annulus(r0, r1, center=(0.0, 0.0)):
        return DomainSpec("annulus", (float(r0), float(r1)), tuple(float(c) for c in center))

    @staticmethod
    def box(Lx, Ly, Lz):
        return DomainSpec("box", (float(Lx), float(Ly), float(Lz)))

    @staticmethod
    def ball(r, center=(0.0, 0.0, 0.0)):
        return DomainSpec("ball", (float(r),), tuple(float(c) for c in center))

    def __post_init__(self):
        if self.kind not in ("square", "rect", "disk", "annulus", "box", "ball"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if any(p <= 0 for p in self.params):
            raise ValueError("domain lengths must be positive")
        if self.kind == "annulus" and not self.params[1] > self.params[0]:
            raise ValueError("annulus requires r1 > r0 > 0")

    @property
    def dim(self):
        return 3 if self.kind in ("box", "ball") else 2

    @property
    def feature_size(self):
        """Smallest length scale that a mesh must resolve."""
        if self.kind == "annulus":
            return self.params[1] - self.params[0]
        return min(self.params)

    @staticmethod
    def parse(text):
        """Parse CLI form, e.g. 'square:1', 'disk:1', 'disk:2:0.5,0.5', 'rect:2,1'."""
        parts = text.split(":")
        kind = parts[0]
        factory = {
            "square": DomainSpec.square,
            "rect": DomainSpec.rect,
            "disk": DomainSpec.disk,
            "annulus": DomainSpec.annulus,
            "box": DomainSpec.box,
            "ball": DomainSpec.ball,
        }.get(kind)
        if factory is None or len(parts) < 2:
            raise ValueError(f"cannot parse domain spec {text!r}")
        params = [float(v) for v in parts[1].split(",")]
        if len(parts) > 2:
            center = tuple(float(v) for v in parts[2].split(","))
            return factory(*params, center=center)
        return factory(*params)


@dataclass
class Mesh:
    """P1 simplicial mesh with per-element volumes and a quadrature rule."""

    dim: int
    nodes: np.ndarray
    elems: np.ndarray
    vol: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        self.elems = np.ascontiguousarray(self.elems, dtype=np.int64)
        self.vol = np.ascontiguousarray(self.vol, dtype=np.float64)
        for a in (self.nodes, self.elems, self.vol):
            a.setflags(write=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elems(self):
        return self.elems.shape[0]

    def quad(self):
        """Quadrature points (m, q, dim) and weights (m, q); weights of an element sum to its volume."""
        if "quad" not in self._cache:
            phi = _ref.TRI_PHI if self.dim == 2 else _ref.TET_PHI
            corners = self.nodes[self.elems]  # (m, dim+1, dim)
            qp = np.einsum("qi,mid->mqd", phi, corners)
            qw = np.repeat(self.vol[:, None] / phi.shape[0], phi.shape[0], axis=1)
            self._cache["quad"] = (qp, qw)
        return self._cache["quad"]

    def element_arrays(self, wq):
        """Kernel dispatch: per-element (vol, stiffness, weighted mass, load) entries."""
        kern = tri_element_arrays if self.dim == 2 else tet_element_arrays
        return kern(self.nodes, self.elems, np.ascontiguousarray(wq, dtype=np.float64))

    def p1_gradients(self):
        """Constant P1 basis gradients per element, shape (m, dim+1, dim)."""
        if "grads" not in self._cache:
            p0 = self.nodes[self.elems[:, 0]]
            m = self.n_elems
            g = np.empty((m, self.dim + 1, self.dim))
            if self.dim == 2:
                e1 = self.nodes[self.elems[:, 1]] - p0
                e2 = self.nodes[self.elems[:, 2]] - p0
                det = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])[:, None]
                g[:, 1] = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det
                g[:, 2] = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det
                g[:, 0] = -g[:, 1] - g[:, 2]
            else:
                e1 = self.nodes[self.elems[:, 1]] - p0
                e2 = self.nodes[self.elems[:, 2]] - p0
                e3 = self.nodes[self.elems[:, 3]] - p0
                det = np.einsum("md,md->m", e1, np.cross(e2, e3))[:, None]
                g[:, 1] = np.cross(e2, e3) / det
                g[:, 2] = np.cross(e3, e1) / det
                g[:, 3] = np.cross(e1, e2) / det
                g[:, 0] = -g[:, 1] - g[:, 2] - g[:, 3]
            self._cache["grads"] = g
        return self._cache["grads"]


def _signed_volumes(dim, nodes, elems):
    p0 = nodes[elems[:, 0]]
    if dim == 2:
        e1 = nodes[elems[:, 1]] - p0
        e2 = nodes[elems[:, 2]] - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    e1 = nodes[elems[:, 1]] - p0
    e2 = nodes[elems[:, 2]] - p0
    e3 = nodes[elems[:, 3]] - p0
    return np.einsum("md,md->m", e1, np.cross(e2, e3)) / 6.0


def _orient_and_finish(dim, nodes, elems):
    """Enforce positive orientation by swapping the last two vertices where needed."""
    elems = np.asarray(elems, dtype=np.int64)
    vol = _signed_volumes(dim, nodes, elems)
    flip = vol < 0
    if np.any(flip):
        elems = elems.copy()
        elems[flip, -2], elems[flip, -1] = elems[flip, -1].copy(), elems[flip, -2].copy()
        vol = _signed_volumes(dim, nodes, elems)
    if np.any(vol <= 0):
        raise ValueError("degenerate element produced during mesh construction")
    return Mesh(dim, nodes, elems, vol)


def build_mesh(spec, h):
    """Mesh a canonical domain at target edge length h (max edge <= 1.5 h)."""
    if not h > 0:
        raise ResolutionError("h must be positive")
    if h >= spec.feature_size:
        raise ResolutionError(
            f"h={h} too large to resolve {spec.kind} with feature size {spec.feature_size}"
        )
    if spec.kind in ("square", "rect"):
        Lx, Ly = (spec.params[0], spec.params[0]) if spec.kind == "square" else spec.params
        return _grid2d(Lx, Ly, h)
    if spec.kind == "disk":
        return _disk(spec.params[0], spec.center or (0.0, 0.0), h)
    if spec.kind == "annulus":
        return _annulus(spec.params[0], spec.params[1], spec.center or (0.0, 0.0), h)
    if spec.kind == "box":
        return _grid3d(*spec.params, h)
    if spec.kind == "ball":
        return _ball(spec.params[0], spec.center or (0.0, 0.0, 0.0), h)
    raise ValueError(spec.kind)  # pragma: no cover


def _grid2d(Lx, Ly, h):
    nx = math.ceil(Lx / h)
    ny = math.ceil(Ly / h)
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = nid(i, j), nid(i + 1, j)
            v01, v11 = nid(i, j + 1), nid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return _orient_and_finish(2, nodes, np.array(tris))


def _ring_points(r, n_theta, center):
    k = np.arange(n_theta)
    ang = 2.0 * np.pi * k / n_theta
    return np.stack([center[0] + r * np.cos(ang), center[1] + r * np.sin(ang)], axis=1)


def _disk(r, center, h):
    m = math.ceil(r / h)
    n_theta = max(math.ceil(2.0 * np.pi * r / h), 8)
    nodes = [np.array([center], dtype=float)[0][None, :]]
    for i in range(1, m + 1):
        nodes.append(_ring_points(r * i / m, n_theta, center))
    nodes = np.concatenate(nodes, axis=0)

    def ring(i, k):  # ring i >= 1
        return 1 + (i - 1) * n_theta + (k % n_theta)

    tris = []
    for k in range(n_theta):
        tris.append((0, ring(1, k), ring(1, k + 1)))
    for i in range(1, m):
        for k in range(n_theta):
            a0, a1 = ring(i, k), ring(i, k + 1)
            b0, b1 = ring(i + 1, k), ring(i + 1, k + 1)
            tris.append((a0, b0, b1))
            tris.append((a0, b1, a1))
    return _orient_and_finish(2, nodes, np.array(tris))


def _annulus(r0, r1, center, h):
    m = math.ceil((r1 - r0) / h)
    n_theta = max(math.ceil(2.0 * np.pi * r1 / h), 8)
    nodes = []
    for i in range(m + 1):
        nodes.append(_ring_points(r0 + (r1 - r0) * i / m, n_theta, center))
    nodes = np.concatenate(nodes, axis=0)

    def ring(i, k):
        return i * n_theta + (k % n_theta)

    tris = []
    for i in range(m):
        for k in range(n_theta):
            a0, a1 = ring(i, k), ring(i, k + 1)
            b0, b1 = ring(i + 1, k), ring(i + 1, k + 1)
            tris.append((a0, b0, b1))
            tris.append((a0, b1, a1))
    return _orient_and_finish(2, nodes, np.array(tris))


# Five-tet decomposition of a cube (no body diagonal, so the longest edge is a
# face diagonal); parity-flipped on a checkerboard to stay conforming.
_FIVE_TETS_EVEN = [(0, 1, 2, 4), (1, 3, 2, 7), (1, 4, 5, 7), (2, 4, 7, 6), (1, 2, 4, 7)]
_FIVE_TETS_ODD = [(1, 0, 3, 5), (0, 2, 3, 6), (0, 5, 4, 6), (3, 5, 6, 7), (0, 3, 5, 6)]


def _grid3d_raw(nx, ny, nz, xs, ys, zs):
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    tets = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                corner = [
                    nid(i + di, j + dj, k + dk)
                    for di in (0, 1)
                    for dj in (0, 1)
                    for dk in (0, 1)
                ]
                # corner index bit order: (di<<2)|(dj<<1)|dk
                pattern = _FIVE_TETS_EVEN if (i + j + k) % 2 == 0 else _FIVE_TETS_ODD
                for t in pattern:
                    tets.append(tuple(corner[c] for c in t))
    return nodes, np.array(tets)


def _grid3d(Lx, Ly, Lz, h):
    nx, ny, nz = (math.ceil(L / h) for L in (Lx, Ly, Lz))
    nodes, tets = _grid3d_raw(
        nx, ny, nz, np.linspace(0, Lx, nx + 1), np.linspace(0, Ly, ny + 1), np.linspace(0, Lz, nz + 1)
    )
    return _orient_and_finish(3, nodes, tets)


def _ball(r, center, h):
    n = math.ceil(2.0 * r / h)
    n += n % 2  # even count so a node sits at the center
    s = np.linspace(-1.0, 1.0, n + 1)
    nodes, tets = _grid3d_raw(n, n, n, s, s, s)
    # Radial cube-to-ball map: identity near the center blending into the exact
    # sphere at the cube surface, so boundary vertices land on |x| = r.
    ninf = np.max(np.abs(nodes), axis=1)
    n2 = np.linalg.norm(nodes, axis=1)
    with np.errstate(invalid="ignore"):
        ratio = np.where(n2 > 0, ninf / np.where(n2 > 0, n2, 1.0), 1.0)
    blend = ninf**2
    factor = (1.0 - blend) + blend * ratio
    mapped = center + r * nodes * factor[:, None]
    return _orient_and_finish(3, mapped, tets)


def map_mesh(mesh, gamma):
    """Push a mesh through an invertible map; re-orients a uniformly reflected image.

    Raises FoldError when the image contains elements of both orientations
    (h too coarse for the curvature of gamma).
    """
    new_nodes = np.asarray(gamma.apply(mesh.nodes), dtype=float)
    if not np.all(np.isfinite(new_nodes)):
        raise FoldError("map produced non-finite node coordinates")
    vol = _signed_volumes(mesh.dim, new_nodes, mesh.elems)
    if np.all(vol > 0):
        return Mesh(mesh.dim, new_nodes, mesh.elems, vol)
    if np.all(vol < 0):
        elems = np.array(mesh.elems, copy=True)
        elems[:, -2], elems[:, -1] = elems[:, -1].copy(), elems[:, -2].copy()
        return Mesh(mesh.dim, new_nodes, elems, -vol)
    raise FoldError("mapped mesh folds: elements of both orientations")


def volume(mesh):
    return float(mesh.vol.sum())


def boundary_nodes(mesh):
    """Indices of nodes on faces that belong to exactly one element."""
    if "boundary" in mesh._cache:
        return mesh._cache["boundary"]
    d = mesh.dim
    faces = []
    for drop in range(d + 1):
        idx = [i for i in range(d + 1) if i != drop]
        faces.append(mesh.elems[:, idx])
    faces = np.sort(np.concatenate(faces, axis=0), axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    out = np.unique(uniq[counts == 1].ravel())
    mesh._cache["boundary"] = out
    return out


def validate_mesh(mesh):
    """Structural checks: positive volumes, index bounds, connectivity."""
    if np.any(mesh.vol <= 0):
        raise ValueError("non-positive element volume")
    if mesh.elems.min() < 0 or mesh.elems.max() >= mesh.n_nodes:
        raise ValueError("element index out of range")
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    i = np.repeat(mesh.elems[:, 0], mesh.dim)
    j = mesh.elems[:, 1:].ravel()
    g = coo_matrix(
        (np.ones_like(i), (i, j)), shape=(mesh.n_nodes, mesh.n_nodes)
    )
    ncomp, _ = connected_components(g, directed=False)
    if ncomp != 1:
        raise ValueError(f"mesh is disconnected ({ncomp} components)")
    return True


def save_mesh(mesh, path):
    """Plain-text export: header `dim n_nodes n_elems`, node lines, element lines."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.n_nodes} {mesh.n_elems}\n")
        for row in mesh.nodes:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        for row in mesh.elems:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_mesh(path):
    with open(path) as fh:
        dim, n_nodes, n_elems = (int(v) for v in fh.readline().split())
        nodes = np.array(
            [[float(v) for v in fh.readline().split()] for _ in range(n_nodes)]
        )
        elems = np.array(
            [[int(v) for v in fh.readline().split()] for _ in range(n_elems)], dtype=np.int64
        )
    vol = _signed_volumes(dim, nodes, elems)
    if np.any(vol <= 0):
        raise ValueError("mesh file contains non-positively-oriented elements")
    return Mesh(dim, nodes, elems, vol)


@dataclass(frozen=True)
class BallFamily:
    """Balls (centers, radii) that are all required to lie inside a stated domain."""

    centers: tuple
    radii: tuple
    domain: DomainSpec | None = None

    def __post_init__(self):
        if len(self.centers) != len(self.radii):
            raise ValueError("centers and radii must pair up")
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        if self.domain is not None:
            for c, r in zip(self.centers, self.radii):
                if not _ball_inside(np.asarray(c, dtype=float), r, self.domain):
                    raise ValueError(f"ball at {c} with radius {r} leaves the domain")

    def __len__(self):
        return len(self.radii)


def _ball_inside(c, r, spec):
    if spec.kind in ("disk", "ball"):
        c0 = np.asarray(spec.center or (0.0,) * len(c))
        return np.linalg.norm(c - c0) + r <= spec.params[0] + 1e-12
    if spec.kind == "annulus":
        c0 = np.asarray(spec.center or (0.0, 0.0))
        d = np.linalg.norm(c - c0)
        return d - r >= spec.params[0] - 1e-12 and d + r <= spec.params[1] + 1e-12
    if spec.kind in ("square", "rect", "box"):
        L = (spec.params[0],) * len(c) if spec.kind == "square" else spec.params
        return all(r - 1e-12 <= ci <= Li - r + 1e-12 for ci, Li in zip(c, L))
    raise ValueError(spec.kind)
