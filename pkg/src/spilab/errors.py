"""Exception hierarchy shared by all spilab modules."""


class SpilabError(Exception):
    """Base class for every error raised by this package."""


class BadParam(SpilabError):
    """A parameter is outside its documented domain."""


class DimensionMismatch(SpilabError):
    """Two rasters (or a raster and a map) disagree on width/height."""


class BalanceUnachievable(SpilabError):
    """No invertible look-up matrix with balanced rows exists for this map."""


class SingularMatrix(SpilabError):
    """A look-up system could not be solved; inputs are corrupt."""


class BlockMismatch(SpilabError):
    """Measurement block offsets do not align with the pattern set."""


class TooLarge(SpilabError):
    """Raster exceeds the guard for dense operator construction."""


class TooSmall(SpilabError):
    """Raster is below the minimum size a metric window requires."""


class SparsityUnreachable(SpilabError):
    """Scene generation could not satisfy the sparsity budget."""


class FormatError(SpilabError):
    """Base class for binary container parse failures."""


class BadMagic(FormatError):
    """File does not start with the expected magic bytes."""


class Truncated(FormatError):
    """File ends before the declared payload is complete."""


class UnsupportedType(FormatError):
    """Container is recognized but carries an unsupported variant."""
