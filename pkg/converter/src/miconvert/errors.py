"""Error taxonomy for the converter."""


class ConversionError(Exception):
    """Invalid descriptor or unsupported request."""


class MalformedFileError(ConversionError):
    """A source file exists but cannot be parsed; the message names it."""


class IntegrityError(Exception):
    """A converted file fails its checksum or structural checks."""
