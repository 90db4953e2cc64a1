"""Exception types shared across the package."""


class DeconvError(Exception):
    """Base class for deconvolution failures."""


class ObjectCollapseError(DeconvError):
    """The object estimate lost all mass (all-zero after projection, or its
    apodized spectrum fell entirely below the division threshold)."""


class PsfCollapseError(DeconvError):
    """A local PSF estimate lost all mass during projection."""


class IterationError(DeconvError):
    """A collapse occurred mid-run.  Carries the location and the last
    feasible state so callers can inspect what was computed so far."""

    def __init__(self, message, *, iteration=None, tile=None, frame=None, state=None):
        super().__init__(message)
        self.iteration = iteration
        self.tile = tile
        self.frame = frame
        self.state = state
