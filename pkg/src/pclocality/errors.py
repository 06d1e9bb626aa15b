"""Exception types raised by the library."""


class BallSizeError(ValueError):
    """A ball would exceed the configured vertex cap."""


class IsomorphismUndecided(RuntimeError):
    """The rooted isomorphism search hit its step budget without a verdict."""


class NonBracketingError(ValueError):
    """The target crossing level is not bracketed on [0, 1]."""


class SolverError(RuntimeError):
    """A linear solve did not reach the required residual."""
