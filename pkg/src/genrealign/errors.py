"""Exception hierarchy.

``DataError`` covers anything caused by bad input (files, annotations,
lexicon coverage). The CLI maps it to exit code 1; everything else is 2.
"""


class GenreAlignError(Exception):
    pass


class DataError(GenreAlignError, ValueError):
    pass


class AudioError(DataError):
    pass


class GenreMapError(DataError):
    pass


class LexiconError(DataError):
    pass


class OOVError(LexiconError):
    def __init__(self, word: str):
        super().__init__(f"out-of-vocabulary word: {word!r}")
        self.word = word


class AnnotationError(DataError):
    pass


class ModelFormatError(DataError):
    pass


class ArpaFormatError(DataError):
    pass


class AlignmentError(DataError):
    pass


class DecodeError(GenreAlignError):
    pass


class TrainingError(GenreAlignError):
    pass


class EvalError(DataError):
    pass
