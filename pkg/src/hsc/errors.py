"""Exception hierarchy for the codec.

Every error raised on a public surface derives from :class:`HscError` so
callers (and the CLI) can distinguish codec failures from programming bugs.
"""


class HscError(Exception):
    """Base class for all codec errors."""


class ShapeError(HscError):
    """Operands have incompatible shapes; the message names both."""


class DistributionError(HscError):
    """A finite distribution violates nonnegativity or normalization."""


class CoderError(HscError):
    """Range-coder misuse: bad table, exhausted source, out-of-order slice."""


class ContainerError(HscError):
    """Malformed bitstream container: bad magic, version, hash or truncation."""


class ConfigError(HscError):
    """Unparseable or inconsistent configuration."""


class MetricError(HscError):
    """Invalid metric computation: degenerate curve, missing overlap."""


class TrainingDiverged(HscError):
    """Training produced a non-finite loss; carries the failing step index."""

    def __init__(self, step, message=""):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")
