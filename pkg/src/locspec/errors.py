"""Exception types raised across the package."""


class DomainError(ValueError):
    """A coordinate or parameter lies outside the admissible domain."""


class MeshError(ValueError):
    """A mesh cannot be built, or does not match the ball it is used with."""


class TrivialBall(ValueError):
    """The free node set of a ball is empty."""


class FactorizationError(ArithmeticError):
    """The restricted mass form is not positive definite."""


class NonCoercive(ArithmeticError):
    """The first Dirichlet eigenvalue is (numerically) zero."""

    def __init__(self, lambda1, tol):
        super().__init__(
            f"Dirichlet problem is not coercive: lambda_1 = {lambda1:.3e} <= {tol:.1e}"
        )
        self.lambda1 = lambda1
        self.tol = tol


class IncompleteSpectrum(ValueError):
    """A full eigenbasis was required but only a partial spectrum was given."""


class UnknownPreset(KeyError):
    """No experiment preset is registered under the requested id."""

    def __str__(self):
        return f"unknown preset: {self.args[0]!r}"
