"""Exception hierarchy shared by every stage of the toolkit."""


class ForensicsError(Exception):
    """Base class; the CLI maps it to exit code 1."""


class FormatError(ForensicsError):
    """Malformed file contents (bad magic, bad header)."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncationError(FormatError):
    def __init__(self, message, frames_read):
        super().__init__(f"{message}; {frames_read} complete frame(s) read")
        self.frames_read = frames_read


class SizeError(ForensicsError):
    pass


class DimensionError(ForensicsError):
    pass


class StructureError(ForensicsError):
    pass


class ContractError(ForensicsError):
    pass


class TrainingError(ForensicsError):
    pass


class MetricError(ForensicsError):
    pass


class CapabilityError(ForensicsError):
    """A required external tool is missing on this host."""


class EncoderError(ForensicsError):
    """External encoder exited with a nonzero status."""

    def __init__(self, message, stderr=""):
        super().__init__(f"{message}\n{stderr}".rstrip())
        self.stderr = stderr
