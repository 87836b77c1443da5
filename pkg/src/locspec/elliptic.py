"""Poisson problems with nonhomogeneous Dirichlet data, harmonic replacement
and a penalized projection used to probe non-extendable boundary data."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import DomainError, NonCoercive
from .fem import assemble, ball_element_mask, classify_nodes, validate_field
from .mmspace import distance, distances
from .spectral import reduced_pairs

COERCIVITY_TOL = 1e-10


@dataclass(frozen=True)
class BoundReport:
    """Both sides of the a priori gradient and L2 estimates.

    ``*_printed`` use ``1/lambda_1`` and ``1/lambda_1^2``; ``*_consistent`` use
    the scale-consistent ``1/sqrt(lambda_1)`` and ``1/lambda_1``.
    """

    lambda1: float
    grad_solution: float
    grad_data: float
    l2_solution: float
    l2_data: float
    l2_source: float

    @property
    def grad_printed(self):
        return 2.0 * self.grad_data + self.l2_source / self.lambda1

    @property
    def grad_consistent(self):
        return 2.0 * self.grad_data + self.l2_source / math.sqrt(self.lambda1)

    @property
    def l2_printed(self):
        return self.l2_data + self.grad_data / self.lambda1 + self.l2_source / self.lambda1**2

    @property
    def l2_consistent(self):
        s = math.sqrt(self.lambda1)
        return self.l2_data + self.grad_data / s + self.l2_source / self.lambda1

    def holds(self, which="printed", rtol=1e-10):
        if which == "printed":
            g, l2 = self.grad_printed, self.l2_printed
        elif which == "consistent":
            g, l2 = self.grad_consistent, self.l2_consistent
        else:
            raise ValueError(which)
        return self.grad_solution <= g * (1 + rtol) and self.l2_solution <= l2 * (1 + rtol)

    def as_dict(self):
        return {
            "lambda1": self.lambda1,
            "grad_solution": self.grad_solution,
            "grad_bound_printed": self.grad_printed,
            "grad_bound_consistent": self.grad_consistent,
            "l2_solution": self.l2_solution,
            "l2_bound_printed": self.l2_printed,
            "l2_bound_consistent": self.l2_consistent,
        }


@dataclass(frozen=True, eq=False)
class EllipticSolution:
    solution: np.ndarray
    boundary_data: np.ndarray
    source: np.ndarray
    convention: str
    lambda1: float
    galerkin_residual: float
    energy_value: float
    bounds: BoundReport
    mesh: object = field(repr=False)
    forms: object = field(repr=False)
    free: np.ndarray = field(repr=False)

    @property
    def diagnostics(self):
        return {
            "galerkin_residual": self.galerkin_residual,
            "energy_value": self.energy_value,
            "bound_checks": self.bounds.as_dict(),
        }

    def to_csv(self):
        buf = io.StringIO()
        buf.write("coordinate,value\n")
        for x, v in zip(self.mesh.nodes, self.solution):
            buf.write(f"{x:.15g},{v:.15g}\n")
        return buf.getvalue()


def first_eigenvalue(forms, free, length_scale=1.0):
    vals, _, _, _ = reduced_pairs(forms, free, 1, length_scale=length_scale)
    return float(vals[0])


def galerkin_residual(forms, free, u, g):
    """``max_i |(A u + M g)_i| / (||A u|| + ||M g||)`` over free nodes ``i``."""
    Au = forms.A @ u
    Mg = forms.M @ g
    r = (Au + Mg)[free]
    scale = np.linalg.norm(Au) + np.linalg.norm(Mg)
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(r)) / scale) if len(r) else 0.0


def poisson_dirichlet(space, mesh, ball, convention, f, g, forms=None, lambda1=None):
    """Solve ``Delta u = g`` on the ball with ``u - f`` in the chosen zero-trace class.

    The sign follows ``int (Delta u) v = -int <grad u, grad v>``, so on an
    unweighted interval ``Delta u = u''``.  Discretely, ``A u + M g`` is
    orthogonal to every free hat function and ``u = f`` on constrained nodes.
    """
    if forms is None:
        forms = assemble(space, mesh)
    f = validate_field(mesh, f, "boundary data")
    g = validate_field(mesh, g, "source")
    sets = classify_nodes(space, mesh, ball, convention)
    free = sets.free
    if lambda1 is None:
        lambda1 = first_eigenvalue(forms, free, 2.0 * ball.radius) if len(free) else 0.0
    if not lambda1 > COERCIVITY_TOL:
        raise NonCoercive(lambda1, COERCIVITY_TOL)

    Aff = forms.A[free][:, free].tocsc()
    lu = spla.splu(Aff)
    u = f.copy()
    for _ in range(2):  # one step of iterative refinement
        rhs = -(forms.A @ u + forms.M @ g)[free]
        u[free] += lu.solve(rhs)

    ball_forms = forms.restricted(ball_element_mask(space, mesh, ball))
    bounds = BoundReport(
        lambda1=lambda1,
        grad_solution=math.sqrt(ball_forms.energy(u)),
        grad_data=math.sqrt(ball_forms.energy(f)),
        l2_solution=ball_forms.l2_norm(u),
        l2_data=ball_forms.l2_norm(f),
        l2_source=ball_forms.l2_norm(g),
    )
    return EllipticSolution(
        solution=u,
        boundary_data=f,
        source=g,
        convention=convention,
        lambda1=lambda1,
        galerkin_residual=galerkin_residual(forms, free, u, g),
        energy_value=0.5 * forms.energy(u) + forms.mass(u, g),
        bounds=bounds,
        mesh=mesh,
        forms=forms,
        free=free,
    )


def harmonic_replacement(space, mesh, ball, convention, f, forms=None, lambda1=None):
    """The energy minimizer among fields agreeing with ``f`` off the free set."""
    return poisson_dirichlet(space, mesh, ball, convention, f, np.zeros(mesh.n_nodes), forms, lambda1)


def dirichlet_functional(forms, u, g):
    return 0.5 * forms.energy(u) + forms.mass(u, g)


def penalized_projection(space, mesh, g, subregion_node_mask, tau, forms=None):
    """Minimize ``u^T A u + u^T M u + ||u - g||^2_{L2(S)} / tau`` over all fields.

    ``S`` is the union of elements whose two nodes are both flagged in
    ``subregion_node_mask``.  Returns the minimizer and its H1 norm.
    """
    if not tau > 0:
        raise DomainError(f"penalty parameter must be positive, got {tau}")
    if forms is None:
        forms = assemble(space, mesh)
    g = validate_field(mesh, g, "arc data")
    mask = np.asarray(subregion_node_mask, dtype=bool)
    if mask.shape != (mesh.n_nodes,):
        raise DomainError("subregion mask does not match the mesh")
    el = forms.edges
    sub = forms.restricted(mask[el[:, 0]] & mask[el[:, 1]])
    K = (forms.A + forms.M + sub.M / tau).tocsc()
    u = spla.spsolve(K, sub.M @ g / tau)
    return u, forms.h1_norm(u)


def excess_field(space, base, far, points):
    """``e(z) = d(far, base) - d(far, z)`` evaluated at ``points``."""
    return distance(space, far, base) - distances(space, far, np.asarray(points, dtype=float))


__all__ = [
    "COERCIVITY_TOL",
    "BoundReport",
    "EllipticSolution",
    "poisson_dirichlet",
    "harmonic_replacement",
    "penalized_projection",
    "excess_field",
    "dirichlet_functional",
    "galerkin_residual",
    "first_eigenvalue",
]
