"""Ball-aware P1 meshes, weighted mass/stiffness forms and node classification.

The stiffness form realizes the Cheeger energy of a weighted interval:
``u^T A v = int w u' v' dt``; the mass form realizes the measure:
``u^T M v = int w u v dt``.  Both are kept at element level as well, so that
energies can be evaluated as sums of squared differences, which is free of the
cancellation that plagues ``u @ (A @ u)`` on fine meshes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, MeshError
from .mmspace import (
    ConstantWeight,
    ball_region,
    distances,
    geom_tol,
)

H0 = "H0"
HHAT0 = "Hhat0"
CONVENTIONS = (H0, HHAT0)

_GAUSS2 = np.array([-1.0, 1.0]) / math.sqrt(3.0)


def check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    return convention


# --------------------------------------------------------------------------
# mesh
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Mesh:
    """Nodes in an unwrapped chart; ``cyclic`` meshes close the last element
    back onto node 0 across one period."""

    nodes: np.ndarray
    cyclic: bool = False
    period: float | None = None
    ball_endpoint_node_indices: tuple = ()
    target_h: float = math.nan

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def elements(self):
        n = self.n_nodes
        i = np.arange(n - 1)
        el = np.column_stack([i, i + 1])
        if self.cyclic:
            el = np.vstack([el, [n - 1, 0]])
        return el

    @property
    def element_bounds(self):
        """Left/right chart coordinates of each element (wrap element unwrapped)."""
        x = self.nodes
        left, right = x[:-1], x[1:]
        if self.cyclic:
            left = np.append(left, x[-1])
            right = np.append(right, x[0] + self.period)
        return left, right

    @property
    def lengths(self):
        left, right = self.element_bounds
        return right - left

    @property
    def h_max(self):
        return float(self.lengths.max())

    @property
    def h_min(self):
        return float(self.lengths.min())


def _subdivide(breaks, h):
    pts = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((b - a) / h))
        if (b - a) / n > h:
            n += 1
        pts.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return np.asarray(pts)


def _unique_breaks(values, tol):
    vals = sorted(values)
    out = [vals[0]]
    for v in vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    return out


def build_mesh(space, ball, target_h):
    """Mesh the closed ball plus a one-element collar where the space extends.

    Ball endpoints, space boundary points inside the span and the pole of a
    power weight are inserted as nodes, then every segment is split uniformly
    so that no element exceeds ``target_h``.
    """
    if not (target_h > 0 and math.isfinite(target_h)):
        raise MeshError(f"target_h must be positive, got {target_h}")
    if target_h > 2.0 * ball.radius:
        raise MeshError(f"target_h = {target_h} exceeds the ball diameter {2 * ball.radius}")
    region = ball_region(space, ball)
    if region.length <= 0:
        raise MeshError("empty ball region")
    tol = geom_tol(space, ball)
    c = ball.center

    if space.is_circle:
        L = space.topology.circumference
        half = 0.5 * L
        if region.full or region.endpoint_tags[0][0] == "wrap_cut" or 2 * (ball.radius + target_h) >= L:
            breaks = [c - half, c + half]
            if ball.radius < half - tol:
                breaks += [c - ball.radius, c + ball.radius]
            breaks = _unique_breaks(breaks, tol)
            nodes = _subdivide(breaks, target_h)[:-1]  # c + L/2 is node 0 again
            ends = _endpoint_indices(nodes, [c - ball.radius, c + ball.radius], tol, L)
            return Mesh(_frozen(nodes), True, L, ends, target_h)
        lo, hi = c - ball.radius, c + ball.radius
        breaks = [lo - target_h, lo, hi, hi + target_h]
        nodes = _subdivide(breaks, target_h)
        return Mesh(_frozen(nodes), False, L, _endpoint_indices(nodes, [lo, hi], tol), target_h)

    lo_space, hi_space = space.bounds
    lo, hi = region.lo, region.hi
    lo_mesh = max(lo - target_h, lo_space) if lo > lo_space + tol else lo
    hi_mesh = min(hi + target_h, hi_space) if hi < hi_space - tol else hi
    breaks = [lo_mesh, lo, hi, hi_mesh]
    pole = space.pole
    if pole is not None and lo_mesh < pole < hi_mesh:
        breaks.append(pole)
    breaks = _unique_breaks(breaks, tol)
    nodes = _subdivide(breaks, target_h)
    ball_ends = [v for v, tag in zip((lo, hi), region.endpoint_tags[0]) if tag == "ball_boundary"]
    return Mesh(_frozen(nodes), False, None, _endpoint_indices(nodes, ball_ends, tol), target_h)


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _endpoint_indices(nodes, points, tol, period=None):
    idx = []
    for p in points:
        d = np.abs(nodes - p)
        if period is not None:
            d = np.minimum(np.mod(d, period), period - np.mod(d, period))
        j = int(np.argmin(d))
        if d[j] <= tol:
            idx.append(j)
    return tuple(sorted(set(idx)))


# --------------------------------------------------------------------------
# forms
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FormPair:
    """Mass ``M`` and stiffness ``A`` with their element-level data.

    ``stiff[e]`` is ``int_e w / h_e^2`` and ``mass_e[e]`` holds the element
    mass entries ``(m_ii, m_ij, m_jj)``.
    """

    M: sp.csr_matrix
    A: sp.csr_matrix
    edges: np.ndarray
    stiff: np.ndarray
    mass_e: np.ndarray
    lumped: bool = False

    @property
    def n(self):
        return self.M.shape[0]

    def _diff(self, u):
        u = np.asarray(u, dtype=float)
        return u[self.edges[:, 1]] - u[self.edges[:, 0]]

    def energy(self, u, v=None):
        """``int w u' v' dt`` (twice the Cheeger energy when ``v`` is ``u``)."""
        du = self._diff(u)
        dv = du if v is None else self._diff(v)
        if du.ndim == 1 and dv.ndim == 1:
            return float(np.sum(self.stiff * du * dv))
        du = du.reshape(len(self.stiff), -1)
        dv = dv.reshape(len(self.stiff), -1)
        return (du * self.stiff[:, None]).T @ dv

    def mass(self, u, v=None):
        """``int w u v dt`` for the consistent (or lumped) mass."""
        u = np.asarray(u, dtype=float)
        v = u if v is None else np.asarray(v, dtype=float)
        if u.ndim == 1 and v.ndim == 1:
            return float(u @ (self.M @ v))
        return u.T @ (self.M @ v)

    def h1_norm(self, u):
        return math.sqrt(max(self.mass(u) + self.energy(u), 0.0))

    def l2_norm(self, u):
        return math.sqrt(max(self.mass(u), 0.0))

    def restricted(self, element_mask):
        """Forms assembled only over the elements selected by ``element_mask``."""
        mask = np.asarray(element_mask, dtype=bool)
        return _build_forms(self.n, self.edges[mask], self.stiff[mask], self.mass_e[mask], self.lumped)

    def to_triplets(self, which="A"):
        """Plain-text ``row col value`` lines of one form, for debugging."""
        mat = (self.A if which == "A" else self.M).tocoo()
        order = np.lexsort((mat.col, mat.row))
        return "".join(
            f"{mat.row[i]} {mat.col[i]} {mat.data[i]:.17g}\n" for i in order
        )


def _build_forms(n, edges, stiff, mass_e, lumped):
    i, j = edges[:, 0], edges[:, 1]
    rows = np.concatenate([i, i, j, j])
    cols = np.concatenate([i, j, i, j])
    A = sp.coo_matrix((np.concatenate([stiff, -stiff, -stiff, stiff]), (rows, cols)), shape=(n, n)).tocsr()
    if lumped:
        d = np.zeros(n)
        np.add.at(d, i, mass_e[:, 0] + mass_e[:, 1])
        np.add.at(d, j, mass_e[:, 2] + mass_e[:, 1])
        M = sp.diags(d).tocsr()
        mass_e = np.column_stack([mass_e[:, 0] + mass_e[:, 1], np.zeros(len(mass_e)), mass_e[:, 2] + mass_e[:, 1]])
    else:
        vals = np.concatenate([mass_e[:, 0], mass_e[:, 1], mass_e[:, 1], mass_e[:, 2]])
        M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    M.sum_duplicates()
    return FormPair(M, A, np.asarray(edges), np.asarray(stiff), np.asarray(mass_e), lumped)


def _weight_moments(weight, left, right, quadrature, tol):
    """Moments ``int_e w (t - left)^m dt``, m = 0, 1, 2, for every element."""
    h = right - left
    n_el = len(h)
    mom = np.empty((n_el, 3))
    if isinstance(weight, ConstantWeight):
        for m in range(3):
            mom[:, m] = weight.c * h ** (m + 1) / (m + 1)
        return mom
    exact = np.ones(n_el, dtype=bool) if quadrature == "exact" else (
        (left <= weight.origin + tol) & (right >= weight.origin - tol)
    )
    # 2-point Gauss on elements away from the pole
    mid, half = 0.5 * (left + right), 0.5 * h
    s_q = half[:, None] * (1.0 + _GAUSS2[None, :])  # t - left at Gauss points
    w_q = weight(mid[:, None] + half[:, None] * _GAUSS2[None, :])
    for m in range(3):
        mom[:, m] = half * np.sum(w_q * s_q**m, axis=1)
    for e in np.flatnonzero(exact):
        for m in range(3):
            mom[e, m] = weight.moment(left[e], right[e], m)
    return mom


def assemble(space, mesh, lumped=False, quadrature="gauss"):
    """Assemble the weighted P1 mass and stiffness forms on ``mesh``.

    ``quadrature="gauss"`` uses 2-point Gauss per element, switching to exact
    power-weight moments on elements touching the pole; ``"exact"`` uses the
    exact moments everywhere.
    """
    if quadrature not in ("gauss", "exact"):
        raise ValueError(f"unknown quadrature {quadrature!r}")
    left, right = mesh.element_bounds
    h = right - left
    if np.any(h <= 0):
        raise MeshError("degenerate element of zero length")
    tol = 1e-12 * max(1.0, float(np.max(np.abs(mesh.nodes))))
    mom = _weight_moments(space.weight, left, right, quadrature, tol)
    m0, m1, m2 = mom[:, 0], mom[:, 1], mom[:, 2]
    stiff = m0 / h**2
    mass_e = np.column_stack([m0 - 2.0 * m1 / h + m2 / h**2, m1 / h - m2 / h**2, m2 / h**2])
    return _build_forms(mesh.n_nodes, mesh.elements, stiff, mass_e, lumped)


# --------------------------------------------------------------------------
# node classification
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NodeSets:
    convention: str
    free: np.ndarray
    constrained: np.ndarray

    def same_free(self, other):
        return np.array_equal(self.free, other.free)


def node_distances(space, mesh, ball):
    return distances(space, ball.center, mesh.nodes)


def outside_elements(space, mesh, ball):
    """Mask of elements not contained in the closed ball.

    Element endpoints carry the extreme distances because the antipode of a
    circle is always a node of a cyclic mesh.
    """
    d = node_distances(space, mesh, ball)
    tol = geom_tol(space, ball)
    el = mesh.elements
    return np.maximum(d[el[:, 0]], d[el[:, 1]]) > ball.radius + tol


def _check_cover(space, mesh, ball):
    if mesh.cyclic:
        return
    region = ball_region(space, ball)
    tol = geom_tol(space, ball)
    lo, hi = region.lo, region.hi
    if space.is_circle:
        shift = mesh.period * round((0.5 * (mesh.nodes[0] + mesh.nodes[-1]) - ball.center) / mesh.period)
        lo, hi = lo + shift, hi + shift
    if lo < mesh.nodes[0] - tol or hi > mesh.nodes[-1] + tol:
        raise MeshError("mesh does not cover the closed ball")


def classify_nodes(space, mesh, ball, convention):
    """Split mesh nodes into free/constrained sets for ``H0`` or ``Hhat0``.

    ``H0``: a node is free iff it lies in the open ball and every incident
    element lies in the closed ball.  On a ball-aware mesh the second clause
    is implied by the first.

    ``Hhat0``: a node is free iff every incident element lies in the closed
    ball, i.e. the complement of the ball has zero measure near the node.
    """
    check_convention(convention)
    _check_cover(space, mesh, ball)
    d = node_distances(space, mesh, ball)
    tol = geom_tol(space, ball)
    bad_el = outside_elements(space, mesh, ball)
    touches_outside = np.zeros(mesh.n_nodes, dtype=bool)
    el = mesh.elements
    touches_outside[el[bad_el, 0]] = True
    touches_outside[el[bad_el, 1]] = True
    free_mask = ~touches_outside & (d <= ball.radius + tol)
    if convention == H0:
        free_mask &= d < ball.radius - tol
    free = np.flatnonzero(free_mask)
    constrained = np.flatnonzero(~free_mask)
    return NodeSets(convention, free, constrained)


def ball_element_mask(space, mesh, ball):
    return ~outside_elements(space, mesh, ball)


# --------------------------------------------------------------------------
# exact-function norms
# --------------------------------------------------------------------------


def h1_error(space, mesh, u, func, dfunc, element_mask=None, order=6):
    """``||u_h - func||_{H^1}`` with ``u_h`` the P1 field, by Gauss quadrature."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    left, right = mesh.element_bounds
    el = mesh.elements
    if element_mask is not None:
        left, right, el = left[element_mask], right[element_mask], el[element_mask]
    h = right - left
    t = 0.5 * (left + right)[:, None] + 0.5 * h[:, None] * xg[None, :]
    lam = 0.5 * (1.0 + xg)[None, :]
    u = np.asarray(u, dtype=float)
    ui, uj = u[el[:, 0]][:, None], u[el[:, 1]][:, None]
    uh = ui * (1.0 - lam) + uj * lam
    duh = (uj - ui) / h[:, None]
    w = space.weight(t)
    err = w * ((uh - func(t)) ** 2 + (duh - dfunc(t)) ** 2)
    return math.sqrt(float(np.sum(0.5 * h[:, None] * wg[None, :] * err)))


def interpolate(mesh, func):
    """Nodal interpolant of ``func`` (evaluated in chart coordinates)."""
    return np.asarray(func(np.asarray(mesh.nodes)), dtype=float)


def validate_field(mesh, f, name="field"):
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_nodes,):
        raise DomainError(f"{name} has shape {f.shape}, expected ({mesh.n_nodes},)")
    return f


__all__ = [
    "H0",
    "HHAT0",
    "CONVENTIONS",
    "Mesh",
    "FormPair",
    "NodeSets",
    "build_mesh",
    "assemble",
    "classify_nodes",
    "outside_elements",
    "ball_element_mask",
    "h1_error",
    "interpolate",
]
