"""Exception types raised by the solver pipeline."""


class GhostPoissonError(ValueError):
    """Base class; carries an optional grid node ``(i, j)``."""

    def __init__(self, message: str, node: tuple[int, int] | None = None):
        if node is not None:
            message = f"{message} [node (i={node[0]}, j={node[1]})]"
        super().__init__(message)
        self.node = node


class StencilError(GhostPoissonError):
    """A stencil leaves the rectangle or touches a node without a value."""


class ProjectionError(GhostPoissonError):
    """The boundary-projection walk failed to converge or left its stencil."""


class AssemblyError(GhostPoissonError):
    pass


class SolverError(GhostPoissonError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (best relative residual {residual:.3e})")
        self.residual = residual
