"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: corpus/data problems -> 2,
model-domain problems (calibration, saturation, bad trees) -> 3.
"""


class LexitreeError(Exception):
    """Base class for all toolkit errors."""


class CorpusFormatError(LexitreeError):
    """Malformed wordlist or transliteration-map input."""


class TransliterationError(CorpusFormatError):
    """A character has no mapping into the a-z + space alphabet.

    Carries enough position information to point at the offending cell.
    """

    def __init__(self, char: str, position: int, row: int | None = None,
                 column: str | int | None = None):
        self.char = char
        self.position = position
        self.row = row
        self.column = column
        where = f"offset {position}"
        if row is not None:
            where = f"row {row}, column {column}, {where}"
        super().__init__(f"unmappable character {char!r} ({where})")


class UndefinedPairError(LexitreeError):
    """A language pair has no shared meanings where a defined distance is required."""


class CalibrationError(LexitreeError):
    """Parameter calibration from anchors failed or is underdetermined."""


class ModelDomainError(LexitreeError):
    """Input outside the divergence model's valid domain."""


class TreeError(LexitreeError):
    """Invalid tree construction or comparison request."""
