"""Exception types shared across the toolkit."""


class HypersymError(Exception):
    """Base class for toolkit errors."""


class ConfigError(HypersymError):
    """Invalid experiment configuration or serialized input."""


class WeightOverflowError(HypersymError):
    """Exponential weight exceeds the double-precision safety budget."""


class MatrixExpOverflowError(HypersymError):
    """Matrix exponential would exceed the representable range."""


class StabilityMarginError(HypersymError):
    """Matrix is not safely Hurwitz (stability margin below threshold)."""


class SpectralCheckError(HypersymError):
    """Spectrum of the damped generator violates the certified margin."""


class NotRealRootedError(HypersymError):
    """Polynomial claimed real-rooted has roots off the real axis."""


class AliasingError(HypersymError):
    """Sampled symbol grid too coarse for alias-free quantization."""


class BudgetError(HypersymError):
    """Memory or iteration budget exceeded."""


class SamplingError(HypersymError):
    """Time path sampled too coarsely for the requested mollifier width."""


class NumericAbortError(HypersymError):
    """Evolution produced NaN/overflow; carries the last healthy time."""

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


class InconclusiveError(HypersymError):
    """Measurement lacks enough signal to produce a fit."""
