"""Exception types shared across the pipeline."""


class InputDomainError(ValueError):
    """A sample violates the PCS input domain (marker count or coordinates)."""


class NoUsableSeed(ValueError):
    """Seed extraction or verification left nothing to test with."""


class TransportError(OSError):
    """The SUT could not be reached or the connection broke mid-session."""


class SutProtocolError(RuntimeError):
    """The SUT answered with an error response or an unparsable line."""


class UnsupportedRelation(NotImplementedError):
    """Evaluation requested for a relation kind that is only declared."""


class SeedRegression(RuntimeError):
    """A verified seed sample was not classified correctly by the source run."""

    def __init__(self, index, output):
        super().__init__(f"source test {index} returned {output}, expected (true, [0, 1, 2])")
        self.index = index
        self.output = output


class CampaignError(RuntimeError):
    """A follow-up run stopped early; ``completed`` verdicts are kept for resuming."""

    def __init__(self, message, completed, cause=None):
        super().__init__(message)
        self.completed = completed
        self.cause = cause
