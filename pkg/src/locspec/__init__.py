"""Dirichlet spectra, Poisson problems and convergence experiments on balls of
weighted one-dimensional metric measure spaces."""

from .elliptic import EllipticSolution, harmonic_replacement, penalized_projection, poisson_dirichlet
from .errors import (
    DomainError,
    FactorizationError,
    IncompleteSpectrum,
    MeshError,
    NonCoercive,
    TrivialBall,
    UnknownPreset,
)
from .fem import H0, HHAT0, FormPair, Mesh, NodeSets, assemble, build_mesh, classify_nodes
from .mmspace import (
    BallSpec,
    ConstantWeight,
    PowerWeight,
    Region,
    SpaceDescriptor,
    annulus_ratio,
    ball_measure,
    ball_region,
    distance,
)
from .spectral import Spectrum, dirichlet_spectrum, heat_flow, rayleigh

__version__ = "0.1.0"

__all__ = [
    "H0",
    "HHAT0",
    "BallSpec",
    "ConstantWeight",
    "DomainError",
    "EllipticSolution",
    "FactorizationError",
    "FormPair",
    "IncompleteSpectrum",
    "Mesh",
    "MeshError",
    "NodeSets",
    "NonCoercive",
    "PowerWeight",
    "Region",
    "SpaceDescriptor",
    "Spectrum",
    "TrivialBall",
    "UnknownPreset",
    "annulus_ratio",
    "assemble",
    "ball_measure",
    "ball_region",
    "build_mesh",
    "classify_nodes",
    "dirichlet_spectrum",
    "distance",
    "harmonic_replacement",
    "heat_flow",
    "penalized_projection",
    "poisson_dirichlet",
    "rayleigh",
]
