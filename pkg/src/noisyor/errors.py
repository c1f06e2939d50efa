"""Exception hierarchy shared by every stage of the package."""


class NoisyOrError(Exception):
    """Base class. ``stage`` is filled in by the pipeline when known."""

    stage = None

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class InvalidInputError(NoisyOrError, ValueError):
    pass


class RankError(NoisyOrError):
    """A matrix needed to have rank ``m`` and did not."""

    def __init__(self, msg, sigma=None):
        super().__init__(msg)
        self.sigma = sigma


class NumericError(NoisyOrError):
    pass


class DegenerateModelError(NoisyOrError):
    pass


class InsufficientDataError(NoisyOrError):
    """A zero count made a plug-in PMI entry undefined."""

    def __init__(self, msg, indices=()):
        super().__init__(msg)
        self.indices = tuple(indices)


class PartialResultError(NoisyOrError):
    """Decomposition ended before ``target_r`` components were accepted."""

    def __init__(self, msg, found=None):
        super().__init__(msg)
        self.found = found
