"""Exception types raised across the package."""


class TorsionMineError(Exception):
    """Base class for all errors raised by this package."""


# --- PDB file parsing ---

class UnreadableFile(TorsionMineError):
    """Input is not readable text."""


class EmptyStructure(TorsionMineError):
    """No standard amino-acid ATOM records were found."""


class MalformedCoordinate(TorsionMineError):
    """An ATOM/HETATM line has unparseable x/y/z fields."""


# --- geometry ---

class DegenerateGeometry(TorsionMineError):
    """Torsion requested on coincident or collinear points."""


class UndefinedAngle(TorsionMineError):
    """Backbone construction given an undefined interior torsion."""


class LengthMismatch(TorsionMineError):
    """RMSD requested on point lists of different lengths."""


class TooFewPoints(TorsionMineError):
    """RMSD requested on fewer than three point pairs."""


# --- torsion store ---

class StoreNotFound(TorsionMineError):
    """Store directory does not exist or has no manifest."""


class StoreCorrupt(TorsionMineError):
    """Store files are inconsistent with the manifest."""


class InvalidKmer(TorsionMineError):
    """k-mer is empty, too long, or contains non-standard letters."""


class StaleOccurrence(TorsionMineError):
    """A k-mer occurrence refers to a chain the store does not hold."""


# --- query engine ---

class SequenceTooShort(TorsionMineError):
    """Query sequence is shorter than the window size."""


class InvalidSequence(TorsionMineError):
    """Query sequence contains a token that is not a standard residue."""


class IoFailure(TorsionMineError):
    """Result files could not be written."""


# --- KDE predictor ---

class EmptyObservations(TorsionMineError):
    """Density estimation requested with no observations."""


class NoMatches(TorsionMineError):
    """R-space export requested for a k-mer absent from the store."""
