"""Parameter sweeps: eigenvalue curves, exceptional-radius scans,
eigenfunction distances and the radial scaling map of a cone."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..fem import H0, HHAT0, Mesh, assemble, build_mesh, classify_nodes
from ..mmspace import BallSpec, Circle, HalfLine, Interval, distance, geom_tol
from ..spectral import reduced_pairs
from .report import Curve

JUMP_TOL = 1e-6


def _row(args):
    param, space, ball, convention, k, target_h = args
    try:
        mesh = build_mesh(space, ball, target_h)
        forms = assemble(space, mesh)
        free = classify_nodes(space, mesh, ball, convention).free
        vals, _, _, _ = reduced_pairs(forms, free, min(k, len(free)), length_scale=2 * ball.radius)
        return param, list(vals), ""
    except (ValueError, ArithmeticError) as exc:
        return param, [math.nan] * k, f"{type(exc).__name__}: {exc}"


def spectrum_curve(family, convention, k, target_h, name="spectrum", max_workers=None):
    """First ``k`` eigenvalues for each ``(param, space, ball)`` of ``family``.

    Rows come back ordered by parameter whatever the completion order; a
    failing point yields NaNs plus an annotation instead of aborting the sweep.
    """
    jobs = [(p, s, b, convention, k, target_h) for p, s, b in family]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            rows = list(pool.map(_row, jobs))
    else:
        rows = [_row(j) for j in jobs]
    rows.sort(key=lambda r: r[0])
    return Curve(
        name=name,
        params=[r[0] for r in rows],
        eigenvalues=[r[1] for r in rows],
        annotations=[r[2] for r in rows],
    )


# --------------------------------------------------------------------------
# exceptional radii
# --------------------------------------------------------------------------


def candidate_radii(space, center):
    """Radii at which a ball about ``center`` can see the two conventions differ."""
    top = space.topology
    if isinstance(top, Circle):
        return [0.5 * top.circumference]
    if isinstance(top, HalfLine):
        return [distance(space, center, top.a)]
    if isinstance(top, Interval):
        return sorted({distance(space, center, top.a), distance(space, center, top.b)})
    return []


@dataclass(frozen=True)
class RadiusResult:
    radius: float
    free_equal: bool
    lam_h0: np.ndarray
    lam_hhat0: np.ndarray
    rel_diff: float
    envelope: np.ndarray  # lambda^{Hhat0}(R) vs lambda^{H0}(R + eps) relative gaps
    n_nodes: int


@dataclass(frozen=True)
class JumpScan:
    radii: np.ndarray
    results: tuple
    excluded: tuple
    exceptional: tuple
    tol: float

    @property
    def agreement(self):
        """Largest relative gap between the conventions at non-exceptional radii."""
        gaps = [r.rel_diff for r in self.results if r.radius not in self.exceptional]
        return max(gaps, default=0.0)

    @property
    def envelope_gap(self):
        return max((float(np.max(r.envelope)) for r in self.results if len(r.envelope)), default=0.0)

    @property
    def ordering_ok(self):
        return all(np.all(r.lam_h0 >= r.lam_hhat0 * (1 - 1e-10)) for r in self.results)

    def monotone_in_radius(self, convention=H0, rtol=1e-10):
        """Eigenvalues nonincreasing as the radius grows."""
        key = "lam_h0" if convention == H0 else "lam_hhat0"
        rows = [getattr(r, key) for r in self.results]
        for a, b in zip(rows[:-1], rows[1:]):
            m = min(len(a), len(b))
            if np.any(b[:m] > a[:m] * (1 + rtol)):
                return False
        return True

    def curve(self, convention):
        key = "lam_h0" if convention == H0 else "lam_hhat0"
        return Curve(
            name=f"scan_{convention}",
            params=[r.radius for r in self.results],
            eigenvalues=[list(getattr(r, key)) for r in self.results],
            errors=[r.rel_diff for r in self.results],
        )


def _relgap(a, b):
    m = min(len(a), len(b))
    if m == 0:
        return 0.0
    return float(np.max(np.abs(a[:m] - b[:m]) / np.maximum(np.abs(b[:m]), 1.0)))


def _pairs(forms, free, k, scale):
    if len(free) == 0:
        return np.zeros(0)
    return reduced_pairs(forms, free, min(k, len(free)), length_scale=scale)[0]


def scan_radius(space, center, radius, k=3, target_h=1e-2, envelope_k=5):
    """Both conventions at one radius plus the right-continuity comparison.

    The envelope compares ``lambda^{Hhat0}(R)`` with ``lambda^{H0}(R + eps)``
    on the mesh built for ``R``, with ``eps`` half the smallest element.
    """
    ball = BallSpec(center, radius)
    mesh = build_mesh(space, ball, min(target_h, 2 * radius))
    forms = assemble(space, mesh)
    s0 = classify_nodes(space, mesh, ball, H0)
    s1 = classify_nodes(space, mesh, ball, HHAT0)
    kk = max(k, envelope_k)
    scale = 2 * radius
    lam1 = _pairs(forms, s1.free, kk, scale)
    if s0.same_free(s1):
        lam0 = lam1.copy()
    else:
        lam0 = _pairs(forms, s0.free, kk, scale)
    eps = 0.5 * mesh.h_min
    wider = classify_nodes(space, mesh, ball.with_radius(radius + eps), H0)
    lam_env = lam1 if wider.same_free(s1) else _pairs(forms, wider.free, kk, scale)
    m = min(envelope_k, len(lam1), len(lam_env))
    envelope = np.abs(lam1[:m] - lam_env[:m]) / np.maximum(np.abs(lam1[:m]), 1.0)
    if len(lam_env) != len(lam1):
        envelope = np.append(envelope, np.inf)
    return RadiusResult(
        radius=float(radius),
        free_equal=bool(s0.same_free(s1)),
        lam_h0=lam0[:k],
        lam_hhat0=lam1[:k],
        rel_diff=_relgap(lam0[:k], lam1[:k]) if len(lam0) == len(lam1) else math.inf,
        envelope=envelope,
        n_nodes=mesh.n_nodes,
    )


def jump_scan(space, center, radius_grid, k=3, tol=JUMP_TOL, target_h=1e-2, include_near=False, envelope_k=5):
    """Radii on ``radius_grid`` where the two conventions give different spectra.

    A radius counts as exceptional only when the free node sets differ and the
    relative eigenvalue gap ``max_j |l_j^H0 - l_j^Hhat0| / max(l_j^Hhat0, 1)``
    exceeds ``tol``.  Grid radii within one mesh cell of a candidate radius,
    but not on it, are skipped unless ``include_near`` is set.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    grid = np.asarray(radius_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise DomainError("radius grid must be strictly increasing")
    cands = candidate_radii(space, center)
    results, excluded = [], []
    for R in grid:
        near = [c for c in cands if abs(R - c) <= target_h and abs(R - c) > geom_tol(space, BallSpec(center, R))]
        if near and not include_near:
            excluded.append(float(R))
            continue
        results.append(scan_radius(space, center, R, k, target_h, envelope_k))
    exceptional = tuple(r.radius for r in results if not r.free_equal and r.rel_diff > tol)
    return JumpScan(grid, tuple(results), tuple(excluded), exceptional, tol)


def right_continuity_check(scan):
    """Largest relative gap of the right-continuity envelope over a scan."""
    return scan.envelope_gap


# --------------------------------------------------------------------------
# eigenfunctions
# --------------------------------------------------------------------------


def _same_chart(ma, mb):
    if ma.cyclic != mb.cyclic:
        return False
    if ma.period is None or mb.period is None:
        return ma.period is None and mb.period is None
    return math.isclose(ma.period, mb.period, rel_tol=1e-12)


def transfer(src_mesh, values, dst_mesh):
    """Linear interpolation of a P1 field onto other nodes, zero off its support."""
    values = np.asarray(values, dtype=float)
    x = np.asarray(src_mesh.nodes)
    if src_mesh.cyclic:
        return np.interp(dst_mesh.nodes, x, values, period=src_mesh.period)
    y = np.asarray(dst_mesh.nodes)
    if src_mesh.period is not None:  # arc chart on a circle: shift into range
        mid = 0.5 * (x[0] + x[-1])
        y = y - src_mesh.period * np.round((y - mid) / src_mesh.period)
    return np.interp(y, x, values, left=0.0, right=0.0)


def _target_mesh(fine, coarse):
    """The finer mesh, extended by nodes of the other mesh lying beyond its span."""
    fm, cm = fine.mesh, coarse.mesh
    if fm.cyclic or fine.space is None:
        return fm, fine.forms
    x, y = np.asarray(fm.nodes), np.asarray(cm.nodes)
    if fm.period is not None:
        mid = 0.5 * (x[0] + x[-1])
        y = y - fm.period * np.round((y - mid) / fm.period)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(x))))
    extra = y[(y < x[0] - tol) | (y > x[-1] + tol)]
    if len(extra) == 0:
        return fm, fine.forms
    nodes = np.concatenate([x, extra])
    nodes.sort()
    mesh = Mesh(nodes, False, fm.period, (), fm.target_h)
    return mesh, assemble(fine.space, mesh)


def eigfun_distance(spec_a, spec_b, k, rtol=1e-8):
    """L2 distance between the ``k``-th eigenfunctions (1-based) of two spectra.

    Both fields are moved to the finer mesh (extended where the other mesh
    reaches further), renormalized there and sign aligned.  If ``k`` sits in a
    degenerate cluster of either spectrum, the Frobenius distance between the
    cluster projections is returned instead.
    """
    if not _same_chart(spec_a.mesh, spec_b.mesh):
        raise DomainError("eigenfunction distance needs a common coordinate chart")
    if k < 1 or k > min(spec_a.k, spec_b.k):
        raise ValueError(f"eigenpair {k} not resolved by both spectra")
    fine, coarse = (spec_a, spec_b) if spec_a.mesh.h_max <= spec_b.mesh.h_max else (spec_b, spec_a)
    mesh, M = _target_mesh(fine, coarse)
    ga = fine.cluster_of(k - 1, rtol)
    gb = coarse.cluster_of(k - 1, rtol)
    Qa = np.column_stack([transfer(fine.mesh, fine.eigenvectors[:, j], mesh) for j in ga])
    Qb = np.column_stack([transfer(coarse.mesh, coarse.eigenvectors[:, j], mesh) for j in gb])
    if len(ga) == 1 and len(gb) == 1:
        a = Qa[:, 0] / M.l2_norm(Qa[:, 0])
        b = Qb[:, 0] / M.l2_norm(Qb[:, 0])
        return min(M.l2_norm(a - b), M.l2_norm(a + b))
    Qa = _m_orthonormal(M, Qa)
    Qb = _m_orthonormal(M, Qb)
    cross = M.mass(Qa, Qb)
    val = Qa.shape[1] + Qb.shape[1] - 2.0 * float(np.sum(cross**2))
    return math.sqrt(max(val, 0.0))


def _m_orthonormal(forms, Q):
    G = forms.mass(Q, Q)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return np.linalg.solve(L, Q.T).T


# --------------------------------------------------------------------------
# cone scaling
# --------------------------------------------------------------------------


def pullback_scale(space, mesh, f, eps, inverse=False):
    """Radial rescaling of a field about the pole of ``space``.

    ``inverse=False`` gives ``g(t) = f(o + (1 - eps)(t - o))``; ``inverse=True``
    gives ``g(t) = f(o + (t - o)/(1 - eps))``, whose support is pulled towards
    the pole.  Values are obtained by linear interpolation, zero off the mesh.
    """
    if not 0 <= eps < 1:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    pole = space.pole
    if pole is None:
        raise DomainError("pullback needs a space with a designated pole")
    f = np.asarray(f, dtype=float)
    x = np.asarray(mesh.nodes)
    factor = 1.0 / (1.0 - eps) if inverse else (1.0 - eps)
    if eps == 0:
        return f.copy()
    return np.interp(pole + factor * (x - pole), x, f, left=0.0, right=0.0)


__all__ = [
    "spectrum_curve",
    "candidate_radii",
    "jump_scan",
    "scan_radius",
    "right_continuity_check",
    "JumpScan",
    "RadiusResult",
    "eigfun_distance",
    "transfer",
    "pullback_scale",
]
