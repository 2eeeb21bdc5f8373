"""Exception types shared across the package."""


class MoltokError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(MoltokError):
    """Malformed textual input (SMILES, XYZ, MOL, token files).

    Carries a 0-based character ``offset`` for single-line notations or a
    1-based ``line`` number for line-oriented formats, whichever applies.
    """

    def __init__(self, message, *, offset=None, line=None):
        self.offset = offset
        self.line = line
        loc = ""
        if offset is not None:
            loc = f" (offset {offset})"
        elif line is not None:
            loc = f" (line {line})"
        super().__init__(message + loc)


class DegenerateFrameError(MoltokError):
    """Local frame construction failed (zero-length or collinear references)."""

    def __init__(self, message, *, atom_index=None):
        self.atom_index = atom_index
        if atom_index is not None:
            message = f"{message} (atom {atom_index})"
        super().__init__(message)


class CoincidentAtomsError(MoltokError):
    """Two atoms closer than the degeneracy tolerance."""


class CodecError(MoltokError):
    """Inconsistent artifacts: vocabulary misses, bad ids, file format problems."""


class TrainingDivergedError(MoltokError):
    """Quantizer training aborted because the loss blew up or went non-finite."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
