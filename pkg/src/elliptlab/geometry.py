"""Polar triangulations of the unit disc, quadrature, discrete balls and
element-wise calculus for piecewise-affine fields.

The mesh is structured: a fan of ``sector_count`` triangles around the
origin, then ``ring_count - 1`` annuli of quadrilaterals each split into two
triangles.  ``sector_count`` must be a multiple of 8 so that the rays
``theta = k*pi/4`` are element edges; coefficients vanishing on cones bounded
by those rays are then resolved exactly by the element partition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "FeFunction",
    "DiscreteBall",
    "MeshError",
    "build_disc_mesh",
    "default_sectors",
    "discrete_ball",
    "averaged_norm",
    "element_gradient",
    "quadrature_rule",
    "disc_intersection_areas",
    "clip_positive_part",
    "write_mesh",
    "read_mesh",
]


class MeshError(ValueError):
    """Invalid mesh request or degenerate geometric query."""


# barycentric points / weights (weights sum to one)
_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3),
    ),
    4: (
        np.array(
            [
                [0.108103018168070, 0.445948490915965, 0.445948490915965],
                [0.445948490915965, 0.108103018168070, 0.445948490915965],
                [0.445948490915965, 0.445948490915965, 0.108103018168070],
                [0.816847572980459, 0.091576213509771, 0.091576213509771],
                [0.091576213509771, 0.816847572980459, 0.091576213509771],
                [0.091576213509771, 0.091576213509771, 0.816847572980459],
            ]
        ),
        np.array([0.223381589678011] * 3 + [0.109951743655322] * 3),
    ),
}


def quadrature_rule(order):
    """Barycentric quadrature on triangles exact for polynomials of degree ``order``.

    Returns ``(bary, weights)`` with ``bary`` of shape (Q, 3) and weights
    summing to one (multiply by the element area).
    """
    if order not in _RULES:
        raise MeshError(f"no quadrature rule of order {order}; available: {sorted(_RULES)}")
    bary, w = _RULES[order]
    return bary.copy(), w / w.sum()


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    sector_count: int
    ring_count: int
    radii: np.ndarray = field(repr=False)

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_elements(self):
        return len(self.triangles)

    @cached_property
    def signed_areas(self):
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def areas(self):
        a = self.signed_areas
        if np.any(a <= 0):
            raise MeshError("degenerate or inverted triangle in mesh")
        return a

    @cached_property
    def basis_gradients(self):
        """Gradients of the three barycentric hat functions, shape (M, 3, 2)."""
        p = self.nodes[self.triangles]
        area2 = 2.0 * self.areas
        g = np.empty((len(p), 3, 2))
        for k in range(3):
            a = p[:, (k + 1) % 3]
            b = p[:, (k + 2) % 3]
            g[:, k, 0] = (a[:, 1] - b[:, 1]) / area2
            g[:, k, 1] = (b[:, 0] - a[:, 0]) / area2
        return g

    @cached_property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def free_nodes(self):
        mask = np.ones(self.num_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @cached_property
    def is_boundary(self):
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    @property
    def total_area(self):
        return float(self.areas.sum())

    @property
    def inner_radius(self):
        """Radius of the largest origin-centred disc inside the polygonal domain."""
        return float(self.radii[-1] * np.cos(np.pi / self.sector_count))

    def quadrature_points(self, order=2):
        """Physical quadrature points (M, Q, 2) and weights (Q,) summing to one."""
        bary, w = quadrature_rule(order)
        p = self.nodes[self.triangles]
        return np.einsum("qk,mkd->mqd", bary, p), w

    def integrate_elementwise(self, func, order=4):
        """Per-element integrals of a vectorised function ``func(points) -> values``."""
        pts, w = self.quadrature_points(order)
        vals = np.asarray(func(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
        return self.areas * (vals @ w)

    def locate(self, points, tol=1e-10):
        """Element index containing each point, -1 outside the polygonal domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        S, R = self.sector_count, self.ring_count
        rho = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
        ring = np.searchsorted(self.radii, rho)  # annulus index in 0..R
        sector = np.floor(theta / (2 * np.pi / S)).astype(int) % S

        cands = []
        for dr in (-1, 0, 1):
            for ds in (-1, 0, 1):
                i = np.clip(ring + dr, 0, R - 1)
                j = (sector + ds) % S
                fan = i == 0
                base = S + 2 * ((i - 1) * S + j)
                cands.append(np.where(fan, j, base))
                cands.append(np.where(fan, j, base + 1))
        cands = np.stack(cands, axis=1)
        cands = np.clip(cands, 0, self.num_elements - 1)

        bary = self._barycentric(cands, pts)
        score = bary.min(axis=2)
        best = np.argmax(score, axis=1)
        out = cands[np.arange(len(pts)), best]
        out[score[np.arange(len(pts)), best] < -tol] = -1
        return out

    def _barycentric(self, elements, pts):
        p = self.nodes[self.triangles[elements]]  # (..., 3, 2)
        g = self.basis_gradients[elements]  # (..., 3, 2)
        shape = (len(pts),) + (1,) * (np.ndim(elements) - 1) + (2,)
        rel = pts.reshape(shape) - p[..., 0, :]
        lam = np.einsum("...kd,...d->...k", g, rel)
        lam[..., 0] += 1.0
        return lam


def default_sectors(ring_count):
    """Sector count giving roughly isotropic outer elements (4 per ring, multiple of 8)."""
    return max(8, 8 * int(np.ceil(ring_count / 2)))


def build_disc_mesh(ring_count, sector_count=None, grading=1.0):
    """Structured polar triangulation of the unit disc.

    Ring ``i`` sits at radius ``(i / ring_count) ** grading``; ``grading > 1``
    clusters rings near the origin.
    """
    if sector_count is None:
        sector_count = default_sectors(ring_count)
    ring_count, sector_count = int(ring_count), int(sector_count)
    if ring_count < 1:
        raise MeshError("ring_count must be >= 1")
    if sector_count < 8 or sector_count % 8:
        raise MeshError(
            f"sector_count={sector_count} must be a positive multiple of 8 so that "
            "the cone rays theta = k*pi/4 are mesh edges"
        )
    if grading <= 0:
        raise MeshError("grading must be positive")

    R, S = ring_count, sector_count
    radii = (np.arange(1, R + 1) / R) ** grading
    radii[-1] = 1.0
    angles = 2 * np.pi * np.arange(S) / S
    ring_nodes = np.stack(
        [np.outer(radii, np.cos(angles)), np.outer(radii, np.sin(angles))], axis=-1
    ).reshape(-1, 2)
    nodes = np.vstack([[0.0, 0.0], ring_nodes])
    # exact zeros on the axes and diagonals keep symmetric data symmetric
    nodes[np.abs(nodes) < 1e-15] = 0.0

    def idx(i, j):  # ring i in 1..R, sector j
        return 1 + (i - 1) * S + (j % S)

    j = np.arange(S)
    tris = [np.stack([np.zeros(S, dtype=int), idx(1, j), idx(1, j + 1)], axis=1)]
    for i in range(1, R):
        a, b = idx(i, j), idx(i, j + 1)
        c, d = idx(i + 1, j + 1), idx(i + 1, j)
        quad = np.stack([np.stack([a, c, b], 1), np.stack([a, d, c], 1)], axis=1)
        tris.append(quad.reshape(-1, 3))
    triangles = np.vstack(tris).astype(np.int64)
    boundary = np.arange(1 + (R - 1) * S, 1 + R * S)
    mesh = Mesh(nodes, triangles, boundary, S, R, radii)
    mesh.areas  # validates orientation
    return mesh


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Continuous piecewise-affine field given by its nodal values."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.num_nodes,):
            raise MeshError(
                f"expected {self.mesh.num_nodes} nodal values, got shape {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def interpolate(cls, mesh, func):
        return cls(mesh, np.asarray(func(mesh.nodes), dtype=float))

    def gradient(self):
        return element_gradient(self)

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        el = self.mesh.locate(pts)
        if np.any(el < 0):
            raise MeshError("evaluation point outside the meshed domain")
        lam = self.mesh._barycentric(el, pts)
        return np.einsum("pk,pk->p", lam, self.values[self.mesh.triangles[el]])

    def at_quadrature(self, order=2):
        bary, w = quadrature_rule(order)
        return self.values[self.mesh.triangles] @ bary.T, w

    def __mul__(self, t):
        return FeFunction(self.mesh, self.values * t)

    __rmul__ = __mul__


def element_gradient(u):
    """Constant gradient on every triangle, shape (M, 2)."""
    mesh = u.mesh
    v = u.values[mesh.triangles]
    # differences against vertex 0 make constants map to exactly zero
    d = v[:, 1:] - v[:, :1]
    return np.einsum("mkd,mk->md", mesh.basis_gradients[:, 1:], d)


@dataclass(frozen=True, eq=False)
class DiscreteBall:
    center: np.ndarray
    radius: float
    element_ids: np.ndarray
    element_areas: np.ndarray = field(repr=False)

    @property
    def measure(self):
        return float(self.element_areas.sum())

    @property
    def is_empty(self):
        return len(self.element_ids) == 0


def discrete_ball(mesh, center, radius):
    """Inner approximation of ``B_radius(center)``: triangles with all vertices inside."""
    c = np.asarray(center, dtype=float).reshape(2)
    if radius <= 0:
        raise MeshError("ball radius must be positive")
    d = np.linalg.norm(mesh.nodes - c, axis=1)
    inside = d <= radius * (1 + 1e-9) + 1e-14
    ids = np.flatnonzero(inside[mesh.triangles].all(axis=1))
    return DiscreteBall(c, float(radius), ids, mesh.areas[ids])


def averaged_norm(u, ball, kappa, order=4):
    """``|B|^{-1/kappa} ||u||_{L^kappa(B)}`` over the elements of a discrete ball.

    ``u`` is an :class:`FeFunction` (integrated with the rule of degree
    ``order``) or a per-element array over the whole mesh, taken as piecewise
    constant.
    """
    if ball.is_empty:
        raise MeshError("averaged norm over an empty discrete ball")
    if kappa <= 0:
        raise MeshError("kappa must be positive")
    ids, a = ball.element_ids, ball.element_areas
    if isinstance(u, FeFunction):
        bary, w = quadrature_rule(order)
        vals = (np.abs(u.values[u.mesh.triangles[ids]] @ bary.T) ** kappa) @ w
    else:
        vals = np.abs(np.asarray(u, dtype=float)[ids]) ** kappa
    return float((np.sum(a * vals) / ball.measure) ** (1.0 / kappa))


# ---------------------------------------------------------------------------
# exact geometry of discs against triangles


def _segment_disc_area(ax, ay, bx, by, r):
    """Signed area of (origin, A, B) intersected with the disc of radius r."""
    dx, dy = bx - ax, by - ay
    a = dx * dx + dy * dy
    b = 2 * (ax * dx + ay * dy)
    c = ax * ax + ay * ay - r * r
    disc = b * b - 4 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    a_safe = np.where(a > 0, a, 1.0)
    t1 = np.where(disc > 0, (-b - sq) / (2 * a_safe), 1.0)
    t2 = np.where(disc > 0, (-b + sq) / (2 * a_safe), 1.0)
    s1 = np.clip(t1, 0.0, 1.0)
    s2 = np.clip(t2, 0.0, 1.0)
    p1x, p1y = ax + s1 * dx, ay + s1 * dy
    p2x, p2y = ax + s2 * dx, ay + s2 * dy

    def sector(ux, uy, vx, vy):
        return 0.5 * r * r * np.arctan2(ux * vy - uy * vx, ux * vx + uy * vy)

    tri = 0.5 * (p1x * p2y - p1y * p2x)
    return sector(ax, ay, p1x, p1y) + tri + sector(p2x, p2y, bx, by)


def disc_intersection_areas(mesh, center, radii, elements=None):
    """Exact areas ``|T ∩ B_r(center)|`` for every element and each radius.

    Returns shape (len(radii), M) (or (M,) for scalar radius).
    """
    scalar = np.ndim(radii) == 0
    rr = np.atleast_1d(np.asarray(radii, dtype=float))
    tri = mesh.triangles if elements is None else mesh.triangles[elements]
    p = mesh.nodes[tri] - np.asarray(center, dtype=float).reshape(1, 1, 2)
    out = np.zeros((len(rr), len(tri)))
    rcol = rr[:, None]
    for k in range(3):
        a, b = p[:, k], p[:, (k + 1) % 3]
        out += _segment_disc_area(a[None, :, 0], a[None, :, 1], b[None, :, 0], b[None, :, 1], rcol)
    np.clip(out, 0.0, None, out=out)
    return out[0] if scalar else out


def clip_positive_part(mesh, values, kappa, elements=None):
    """Split every triangle's superlevel set ``{v > kappa}`` into sub-triangles.

    ``values`` are nodal values of a piecewise-affine ``v``.  Returns
    ``(coords, vals, owner)``: sub-triangle vertex coordinates (K, 3, 2), the
    values of ``v - kappa`` at those vertices (K, 3, all >= 0) and the owning
    element index (K,).  Integrals of any function of ``(v - kappa)_+`` are
    then integrals of a nonnegative affine function over exact pieces.
    """
    tri = mesh.triangles if elements is None else mesh.triangles[elements]
    owner_all = np.arange(mesh.num_elements) if elements is None else np.asarray(elements)
    pts = mesh.nodes[tri]
    vals = values[tri] - kappa
    order = np.argsort(vals, axis=1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=1)
    pts = np.take_along_axis(pts, order[..., None], axis=1)
    v0, v1, v2 = vals[:, 0], vals[:, 1], vals[:, 2]
    P0, P1, P2 = pts[:, 0], pts[:, 1], pts[:, 2]

    def cut(Pa, Pb, va, vb):
        t = va / np.where(va != vb, va - vb, 1.0)
        return Pa + t[:, None] * (Pb - Pa)

    coords, vv, own = [], [], []
    full = v0 >= 0
    if full.any():
        coords.append(pts[full])
        vv.append(vals[full])
        own.append(owner_all[full])
    one = (v0 < 0) & (v1 <= 0) & (v2 > 0)
    if one.any():
        Q0 = cut(P2[one], P0[one], v2[one], v0[one])
        Q1 = cut(P2[one], P1[one], v2[one], v1[one])
        coords.append(np.stack([P2[one], Q0, Q1], axis=1))
        z = np.zeros(one.sum())
        vv.append(np.stack([v2[one], z, z], axis=1))
        own.append(owner_all[one])
    two = (v0 < 0) & (v1 > 0)
    if two.any():
        Q01 = cut(P1[two], P0[two], v1[two], v0[two])
        Q02 = cut(P2[two], P0[two], v2[two], v0[two])
        z = np.zeros(two.sum())
        coords.append(np.stack([P1[two], P2[two], Q02], axis=1))
        vv.append(np.stack([v1[two], v2[two], z], axis=1))
        coords.append(np.stack([P1[two], Q02, Q01], axis=1))
        vv.append(np.stack([v1[two], z, z], axis=1))
        own.append(owner_all[two])
        own.append(owner_all[two])
    if not coords:
        return np.zeros((0, 3, 2)), np.zeros((0, 3)), np.zeros(0, dtype=int)
    return np.concatenate(coords), np.concatenate(vv), np.concatenate(own)


def triangle_areas(coords):
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


# ---------------------------------------------------------------------------
# text format


def write_mesh(mesh, path):
    path = Path(path)
    lines = [f"nodes {mesh.num_nodes}"]
    flags = mesh.is_boundary.astype(int)
    lines += [f"{x!r} {y!r} {f}" for (x, y), f in zip(mesh.nodes.tolist(), flags)]
    lines.append(f"triangles {mesh.num_elements}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_mesh(path):
    """Read the text format written by :func:`write_mesh`.

    Ring and sector counts are recovered from the polar structure (boundary
    node count and total node count).
    """
    lines = Path(path).read_text().split("\n")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "nodes":
        raise MeshError(f"{path}: first line must be 'nodes N'")
    n = int(head[1])
    rows = np.array([[float(t) for t in ln.split()] for ln in lines[1 : 1 + n]])
    nodes, flags = rows[:, :2], rows[:, 2].astype(int)
    thead = lines[1 + n].split()
    if len(thead) != 2 or thead[0] != "triangles":
        raise MeshError(f"{path}: expected 'triangles M' after node block")
    m = int(thead[1])
    tris = np.array([[int(t) for t in ln.split()] for ln in lines[2 + n : 2 + n + m]], dtype=np.int64)
    boundary = np.flatnonzero(flags)
    S = len(boundary)
    R = (n - 1) // S if S else 0
    rho = np.hypot(nodes[:, 0], nodes[:, 1])
    radii = np.array([rho[1 + i * S] for i in range(R)]) if R else np.array([1.0])
    return Mesh(nodes, tris, boundary, S, R, radii)
