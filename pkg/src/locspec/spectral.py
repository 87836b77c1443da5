"""Dirichlet spectra of balls, Rayleigh quotients and the spectral heat flow."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import FactorizationError, IncompleteSpectrum, TrivialBall
from .fem import assemble, classify_nodes, validate_field
from .mmspace import BallSpec

DENSE_MAX = 200
MULTIPLICITY_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (n_nodes, k), zero on constrained nodes
    residuals: np.ndarray
    convention: str
    ball: BallSpec
    free: np.ndarray
    forms: object
    mesh: object
    method: str
    space: object = None

    @property
    def k(self):
        return len(self.eigenvalues)

    @property
    def complete(self):
        return self.k == len(self.free)

    def clusters(self, rtol=MULTIPLICITY_RTOL):
        """Index groups of (numerically) equal eigenvalues."""
        groups, current = [], [0]
        lam = self.eigenvalues
        for j in range(1, self.k):
            ref = max(abs(lam[current[0]]), 1e-300)
            if abs(lam[j] - lam[current[0]]) <= rtol * ref or (lam[j] == 0 and lam[current[0]] == 0):
                current.append(j)
            else:
                groups.append(current)
                current = [j]
        groups.append(current)
        return groups

    def cluster_of(self, index, rtol=MULTIPLICITY_RTOL):
        for g in self.clusters(rtol):
            if index in g:
                return g
        raise IndexError(index)

    def to_csv(self, vectors=False):
        """``k,lambda,residual`` rows, optionally followed by eigenvector columns."""
        buf = io.StringIO()
        head = ["k", "lambda", "residual"]
        if vectors:
            head += [f"x_{i}" for i in range(self.eigenvectors.shape[0])]
        buf.write(",".join(head) + "\n")
        for j in range(self.k):
            row = [str(j + 1), f"{self.eigenvalues[j]:.15g}", f"{self.residuals[j]:.15g}"]
            if vectors:
                row += [f"{v:.15g}" for v in self.eigenvectors[:, j]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _fix_signs(U):
    for j in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
    return U


def _dense_pairs(Aff, Mff, k):
    n = Aff.shape[0]
    try:
        L = sla.cholesky(Mff.toarray(), lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("restricted mass form is not positive definite") from exc
    B = sla.solve_triangular(L, Aff.toarray(), lower=True)
    C = sla.solve_triangular(L, B.T, lower=True)
    C = 0.5 * (C + C.T)
    if k >= n:
        _, Y = sla.eigh(C)
    else:
        _, Y = sla.eigh(C, subset_by_index=[0, k - 1])
    return sla.solve_triangular(L.T, Y, lower=False)


def _sparse_pairs(Aff, Mff, k, length_scale):
    n = Aff.shape[0]
    if np.any(Mff.diagonal() <= 0):
        raise FactorizationError("restricted mass form has a non-positive diagonal")
    sigma = -1.0 / length_scale**2
    nev = min(k + 2, n - 2)
    v0 = np.cos(np.linspace(0.1, 1.3, n))  # deterministic start vector
    try:
        _, U = spla.eigsh(Aff.tocsc(), k=nev, M=Mff.tocsc(), sigma=sigma, which="LM", v0=v0, tol=0.0)
    except (RuntimeError, spla.ArpackError) as exc:
        raise FactorizationError(f"shift-invert eigensolver failed: {exc}") from exc
    return U


def _ritz(forms, free, U_free):
    """Rayleigh-Ritz on span(U): stable element-level energies, exact M-orthonormality."""
    n = forms.n
    U = np.zeros((n, U_free.shape[1]))
    U[free] = U_free
    At = forms.energy(U, U)
    Mt = forms.mass(U, U)
    At = 0.5 * (At + At.T)
    Mt = 0.5 * (Mt + Mt.T)
    vals, Q = sla.eigh(At, Mt)
    return vals, U @ Q


def reduced_pairs(forms, free, k, method="auto", length_scale=1.0):
    """First ``k`` eigenpairs of ``A_ff u = lambda M_ff u`` as full-mesh fields."""
    free = np.asarray(free)
    n = len(free)
    if n == 0:
        raise TrivialBall("free node set is empty")
    if not 1 <= k <= n:
        raise ValueError(f"requested {k} eigenpairs but the free dimension is {n}")
    Aff = forms.A[free][:, free]
    Mff = forms.M[free][:, free]
    if method == "auto":
        method = "dense" if (n <= DENSE_MAX or k + 3 > n // 2) else "sparse"
    if method == "dense":
        U_free = _dense_pairs(Aff, Mff, k)
    elif method == "sparse":
        U_free = _sparse_pairs(Aff, Mff, k, length_scale)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    vals, U = _ritz(forms, free, U_free)
    vals, U = vals[:k], U[:, :k]
    scale = float(np.max(Aff.diagonal() / Mff.diagonal()))
    vals = np.where((vals < 0) & (vals > -1e-13 * scale), 0.0, vals)
    U = _fix_signs(U)
    res = np.empty(k)
    for j in range(k):
        u = U[free, j]
        Mu = Mff @ u
        res[j] = np.linalg.norm(Aff @ u - vals[j] * Mu) / np.linalg.norm(Mu)
    return vals, U, res, method


def dirichlet_spectrum(space, mesh, ball, convention, k, method="auto", forms=None, lumped=False):
    """First ``k`` Dirichlet eigenpairs of the ball under ``convention``.

    The generalized problem on the free node set is reduced to a standard
    symmetric one through the Cholesky factor of ``M_ff`` (dense path) or
    solved by shift-invert Lanczos (sparse path, used for large free sets).
    Either way the result is polished by a Rayleigh-Ritz step.
    """
    if forms is None:
        forms = assemble(space, mesh, lumped=lumped)
    sets = classify_nodes(space, mesh, ball, convention)
    vals, U, res, used = reduced_pairs(forms, sets.free, k, method, length_scale=2.0 * ball.radius)
    return Spectrum(vals, U, res, convention, ball, sets.free, forms, mesh, used, space)


def rayleigh(forms, sets, f):
    """``f^T A f / f^T M f`` for a field vanishing on the constrained nodes."""
    f = np.asarray(f, dtype=float)
    scale = float(np.max(np.abs(f))) if f.size else 0.0
    if len(sets.constrained) and np.max(np.abs(f[sets.constrained])) > 1e-14 * max(scale, 1e-300):
        raise ValueError("field does not vanish on constrained nodes")
    m = forms.mass(f)
    if not m > 0:
        raise ValueError("field has zero mass norm")
    return forms.energy(f) / m


def dirichlet_laplacian(forms, free, u):
    """Discrete ``Delta_{x,R} u = -M_ff^{-1} A_ff u`` on the free set, zero elsewhere."""
    free = np.asarray(free)
    u = np.asarray(u, dtype=float)
    rhs = -(forms.A @ u)[free]
    out = np.zeros(forms.n)
    out[free] = spla.spsolve(forms.M[free][:, free].tocsc(), rhs)
    return out


def heat_flow(f0, t, spectrum=None, forms=None, sets=None):
    """Dirichlet heat semigroup applied to ``f0`` by spectral calculus.

    ``u(t) = sum_k exp(-lambda_k t) <u_k, f0>_M u_k``.  Pass either a complete
    ``spectrum`` or ``forms`` and ``sets`` (a full eigenbasis is then computed).
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if spectrum is None:
        if forms is None or sets is None:
            raise ValueError("heat_flow needs a spectrum or forms and node sets")
        vals, U, res, used = reduced_pairs(forms, sets.free, len(sets.free), method="dense")
        spectrum = Spectrum(vals, U, res, sets.convention, None, sets.free, forms, None, used)
    if not spectrum.complete:
        raise IncompleteSpectrum(
            f"spectral heat flow needs all {len(spectrum.free)} eigenpairs, got {spectrum.k}"
        )
    f0 = np.asarray(f0, dtype=float)
    if spectrum.mesh is not None:
        validate_field(spectrum.mesh, f0, "f0")
    coef = spectrum.forms.mass(spectrum.eigenvectors, f0)
    return spectrum.eigenvectors @ (np.exp(-spectrum.eigenvalues * t) * coef)


@dataclass(frozen=True)
class HeatBounds:
    t: float
    f0_norm: float
    two_cheeger: float
    laplacian_norm: float

    @property
    def energy_bound(self):
        """Squared-norm reading: ``2 Ch(h_t f) <= ||f||^2 / t``."""
        return self.f0_norm**2 / self.t

    @property
    def energy_bound_printed(self):
        """First-power reading ``||f|| / t`` as printed alongside the Laplacian bound."""
        return self.f0_norm / self.t

    @property
    def laplacian_bound(self):
        return self.f0_norm / self.t

    @property
    def energy_ok(self):
        return self.two_cheeger <= self.energy_bound * (1 + 1e-12)

    @property
    def energy_printed_ok(self):
        return self.two_cheeger <= self.energy_bound_printed * (1 + 1e-12)

    @property
    def laplacian_ok(self):
        return self.laplacian_norm <= self.laplacian_bound * (1 + 1e-12)


def heat_bounds(spectrum, f0, t):
    """Evaluate both sides of the heat-flow energy and Laplacian bounds."""
    if not spectrum.complete:
        raise IncompleteSpectrum("heat bounds need a complete spectrum")
    if t <= 0:
        raise ValueError("heat bounds need t > 0")
    coef = spectrum.forms.mass(spectrum.eigenvectors, np.asarray(f0, dtype=float))
    decay = np.exp(-spectrum.eigenvalues * t) * coef
    u = spectrum.eigenvectors @ decay
    lap = -(spectrum.eigenvectors @ (spectrum.eigenvalues * decay))
    return HeatBounds(
        t=float(t),
        f0_norm=spectrum.forms.l2_norm(f0),
        two_cheeger=spectrum.forms.energy(u),
        laplacian_norm=spectrum.forms.l2_norm(lap),
    )


def lumped_copy(forms):
    """Same stiffness, row-sum lumped mass."""
    from .fem import _build_forms

    return _build_forms(forms.n, forms.edges, forms.stiff, forms.mass_e, True)


__all__ = [
    "Spectrum",
    "dirichlet_spectrum",
    "reduced_pairs",
    "rayleigh",
    "dirichlet_laplacian",
    "heat_flow",
    "heat_bounds",
    "HeatBounds",
    "lumped_copy",
]
