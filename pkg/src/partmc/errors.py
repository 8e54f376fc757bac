class OutsideSupportError(ValueError):
    """A chain was started (or a sample supplied) where the target density is zero."""


class RegionError(ValueError):
    """A restricted chain was initialised outside its region."""


class UnreachablePointError(ValueError):
    """The point has zero affinity to every landmark, so its embedding is undefined."""


class DegenerateAffinityError(ValueError):
    """The landmark affinity matrix has an all-zero row or a vanishing eigenvalue."""


class EmptyRegionError(RuntimeError):
    """A partition region contains no sample-bank points."""


class StageError(RuntimeError):
    """Failure inside one stage of the partitioned sampler."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
