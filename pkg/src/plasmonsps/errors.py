"""Exception and warning types shared across the package.

Every error raised on purpose by the library derives from
:class:`PlasmonSPSError`, so callers (and the command line front end) can
separate library failures from programming mistakes.
"""


class PlasmonSPSError(Exception):
    """Base class for all library errors."""


# waveguide
class NoGuidedMode(PlasmonSPSError):
    """The dispersion relation has no root between the cladding and core lines."""


class NonConvergence(PlasmonSPSError):
    """An iterative solver or fitter did not converge."""


class DegenerateInput(PlasmonSPSError):
    """Input values make the requested quantity undefined."""


# plasmon
class OutOfRange(PlasmonSPSError):
    """A wavelength lies outside the tabulated permittivity data."""


class InsideScatterer(PlasmonSPSError):
    """A field point lies inside the nanorod volume."""


class NoPeak(PlasmonSPSError):
    """A spectrum has no interior maximum on the scanned range."""


class InvalidGeometry(PlasmonSPSError):
    """A rod, fiber or emitter placement is not physically valid."""


# emitter
class InvalidModel(PlasmonSPSError):
    """Emitter, excitation or detector parameters are out of range."""


class UnsortedInput(PlasmonSPSError):
    """An event stream passed to the detector chain is not time ordered."""


# tags
class TagFormatError(PlasmonSPSError):
    """Base class for NTG1 decoding problems."""


class BadMagic(TagFormatError):
    """The file does not start with the NTG1 magic bytes."""


class TruncatedFile(TagFormatError):
    """The file ends before the declared number of records."""


class UnsortedTimestamps(TagFormatError):
    """Timestamps decrease somewhere in the stream.

    Attributes
    ----------
    index : int
        Position of the first record whose timestamp is smaller than its
        predecessor.
    """

    def __init__(self, index: int):
        self.index = int(index)
        super().__init__(f"timestamps decrease at record {self.index}")


class InvalidChannel(TagFormatError):
    """A record uses a channel number not declared in the header."""


class ResolutionMismatch(PlasmonSPSError):
    """Two streams with different tick resolutions were combined."""


# inference
class SingularJacobian(PlasmonSPSError):
    """The normal matrix of a least-squares problem is singular."""


class DegenerateData(PlasmonSPSError):
    """The data cannot constrain the model (for example identical abscissae)."""


class InsufficientPeaks(PlasmonSPSError):
    """A pulsed correlogram does not cover enough side peaks."""


class MissingInput(PlasmonSPSError):
    """A derived metric was requested without the inputs it needs."""


class ConfigError(PlasmonSPSError):
    """A run configuration file is malformed or contains unknown keys."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# warnings
class PlasmonSPSWarning(UserWarning):
    """Base class for library warnings."""


class MultimodeWarning(PlasmonSPSWarning):
    """The fiber supports more than the fundamental mode (V > 2.405)."""


class WarnResolutionLimited(PlasmonSPSWarning):
    """A fitted lifetime is shorter than three times the timing jitter."""


class Unimodal(PlasmonSPSWarning):
    """A blinking trace shows no resolvable second intensity level."""


class RepetitionWarning(PlasmonSPSWarning):
    """The pulse period is not much longer than the emitter lifetime."""
