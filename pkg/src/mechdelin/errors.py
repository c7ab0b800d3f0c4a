"""Exception types shared by every module.

The CLI maps ``DomainError`` to exit code 2 and ``ResourceError`` to exit code 3.
"""


class DomainError(ValueError):
    """Input outside an operation's domain (bad bundle, bad parameters, bad file)."""


class ResourceError(RuntimeError):
    """An enumeration or grid would exceed its configured size limit."""


class GeometryError(RuntimeError):
    """A cell is too thin to place the points an operation needs."""


class ConsistencyError(RuntimeError):
    """Profit failed to be affine inside a cell that should be linear."""
