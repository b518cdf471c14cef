from typing import Any

class PhylodynError(Exception):
    """A general exception class to raise any reconstruction related errors."""

    def __init__(self, message: str = None, error: Any = None, **kwargs) -> None:
        self.error = error
        super(PhylodynError, self).__init__(message, **kwargs)

    def to_dict(self) -> dict:
        """Returns a JSON friendly description of the error."""
        return {"error": type(self).__name__, "message": str(self), "detail": self.error}

class NewickParseError(PhylodynError):
    """Raised on malformed Newick text. `offset` is the character offset of the problem."""

    def __init__(self, message: str = None, offset: int = None, **kwargs) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super(NewickParseError, self).__init__(message, error = {"offset": offset}, **kwargs)

class GenealogyError(PhylodynError):
    """Raised when a genealogy violates the binary coalescent structure."""

class GridMismatchError(PhylodynError):
    """Raised when data and trajectory live on different grids."""

class ConvergenceError(PhylodynError):
    """Raised when an iterative solver runs out of iterations or evaluations."""

class DegenerateDataError(PhylodynError):
    """Raised when the data carry no information about the trajectory (singular Newton system)."""

class SimulationError(PhylodynError):
    """Raised when a simulator is asked for something it cannot produce."""
