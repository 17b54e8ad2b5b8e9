"""Exception types shared across the toolkit."""


class CtxsumError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CtxsumError):
    def __init__(self, line_no: int, line: str, reason: str):
        self.line_no = line_no
        self.line = line
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}: {line[:200]!r}")


class DuplicateId(CtxsumError):
    pass


class AllWordsFiltered(CtxsumError):
    pass


class UnknownWord(CtxsumError):
    pass


class EmptyCorpus(CtxsumError):
    pass


class DimMismatch(CtxsumError):
    pass


class ShapeMismatch(CtxsumError):
    pass


class BetaNegative(CtxsumError):
    pass


class EmptyDocument(CtxsumError):
    pass


class EmptyBlacklist(CtxsumError):
    pass


class BadProb(CtxsumError):
    pass


class MissingContext(CtxsumError):
    pass


class EmptyTrainingSet(CtxsumError):
    pass


class EmptySentence(CtxsumError):
    pass


class SingleClassData(CtxsumError):
    pass


class BadCheckpoint(CtxsumError):
    pass
