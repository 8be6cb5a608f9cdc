"""Domain exception hierarchy.

All toolkit errors derive from NPSpectraError so the CLI can map them to
exit code 1 with a machine-readable payload.
"""


class NPSpectraError(Exception):
    """Base class for domain errors."""

    def payload(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class InvalidCurveError(NPSpectraError):
    pass


class SelfIntersectionError(InvalidCurveError):
    def __init__(self, message, segments=None):
        super().__init__(message)
        self.segments = segments or []

    def payload(self) -> dict:
        out = super().payload()
        out["segments"] = [list(map(int, pair)) for pair in self.segments[:32]]
        return out


class AssemblyError(NPSpectraError):
    pass


class GramNotPositiveDefiniteError(NPSpectraError):
    pass


class NonRealEigenvalueError(NPSpectraError):
    pass


class NearSingularResolventError(NPSpectraError):
    def __init__(self, message, nearest_eigenvalue=None):
        super().__init__(message)
        self.nearest_eigenvalue = nearest_eigenvalue

    def payload(self) -> dict:
        out = super().payload()
        if self.nearest_eigenvalue is not None:
            out["nearest_eigenvalue"] = float(self.nearest_eigenvalue)
        return out


class MultipleEigenvalueError(NPSpectraError):
    """Shape derivative requested at a non-simple eigenvalue; perturbation
    splits the eigenvalue and a single derivative is undefined."""


class BranchCrossingError(NPSpectraError):
    pass


class OverlapError(NPSpectraError):
    pass


class DesignError(NPSpectraError):
    pass
