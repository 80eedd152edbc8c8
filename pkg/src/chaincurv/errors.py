"""Exception hierarchy shared across the package."""


class ChainError(ValueError):
    """Invalid chain construction input (kernel, conductances, metric)."""


class ErgodicityError(ChainError):
    """The chain has no unique stationary measure."""


class TransportError(ValueError):
    """Inputs to a transport computation are inconsistent."""


class AbsoluteContinuityError(ValueError):
    """A target measure charges states the base walk cannot reach."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NotReversibleError(ValueError):
    """An operation defined only for reversible chains got a non-reversible one."""


class InstanceTooLargeError(ValueError):
    """Exhaustive path enumeration was requested on too large an instance."""


class ChainFileError(ValueError):
    """Malformed chain description file, with an optional 1-based line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
