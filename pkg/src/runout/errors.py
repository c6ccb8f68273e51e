"""Exception types shared across the toolkit."""


class RunoutError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(RunoutError, ValueError):
    """A parameter is outside its documented domain."""


class GeometryError(RunoutError, ValueError):
    """Grids are incompatible or too small for the requested operation."""


class RasterFormatError(RunoutError, ValueError):
    """A raster file does not parse (bad magic, malformed header, bad values)."""


class TruncationError(RasterFormatError):
    """A raster file holds fewer or more values than its header declares."""


class SplitError(RunoutError, ValueError):
    """A dataset cannot be split as requested (too few distinct tiles)."""


class EnsembleError(RunoutError, RuntimeError):
    """Too many ensemble members failed to produce a usable product."""


class NumericalBlowupError(RunoutError, RuntimeError):
    """The explicit update produced NaN or Inf.

    Carries the simulated time and step size at which the blowup occurred,
    plus the last finite field maxima for diagnosis.
    """

    def __init__(self, t, dt, max_h, max_speed):
        self.t = t
        self.dt = dt
        self.max_h = max_h
        self.max_speed = max_speed
        super().__init__(
            f"non-finite field values at t={t:.3f} s (dt={dt:.3f} s, "
            f"last max h={max_h:.3g} m, max speed={max_speed:.3g} m/s)"
        )
