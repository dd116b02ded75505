"""Exception hierarchy for the wassmap package."""


class WassmapError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(WassmapError, ValueError):
    pass


class AllZeroImage(WassmapError, ValueError):
    def __init__(self, message="image has no positive pixel", index=None):
        self.index = index
        if index is not None:
            message = f"{message} (image index {index})"
        super().__init__(message)


class AxisOutOfRange(WassmapError, IndexError):
    pass


class NonConvergence(WassmapError, RuntimeError):
    pass


class UnsupportedInstance(WassmapError, ValueError):
    pass


class MaxIterExceeded(WassmapError, RuntimeError):
    pass


class PairSolveError(WassmapError, RuntimeError):
    """A pairwise solve failed; ``pair`` holds the (i, j) indices."""

    def __init__(self, pair, cause):
        self.pair = pair
        super().__init__(f"transport solve failed for pair {pair}: {cause}")


class DimensionTooLarge(WassmapError, ValueError):
    pass


class DisconnectedGraph(WassmapError, ValueError):
    def __init__(self, component_sizes):
        self.component_sizes = sorted(component_sizes, reverse=True)
        super().__init__(
            f"neighbor graph has {len(self.component_sizes)} connected components "
            f"(sizes {self.component_sizes})"
        )


class ShapeMismatch(WassmapError, ValueError):
    pass


class DegenerateLabels(WassmapError, ValueError):
    pass


class EmptyShape(WassmapError, ValueError):
    pass


class NonPositiveDilation(WassmapError, ValueError):
    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class BadMagic(WassmapError, ValueError):
    pass


class TruncatedFile(WassmapError, ValueError):
    pass


class CountMismatch(WassmapError, ValueError):
    pass


class InsufficientClassSamples(WassmapError, ValueError):
    pass


class MissingArtifacts(WassmapError, FileNotFoundError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing artifacts: " + ", ".join(map(str, self.missing)))


class ConfigError(WassmapError, ValueError):
    pass
