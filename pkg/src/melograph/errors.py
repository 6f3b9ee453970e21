"""Exception hierarchy shared by all melograph modules."""


class MelographError(Exception):
    """Base class for every error raised by melograph."""


class ScoreParseError(MelographError):
    """Malformed MusicXML. Carries the offending line when known."""

    def __init__(self, message, line=None, column=None, context=None):
        self.line = line
        self.column = column
        self.context = context
        detail = message
        if line is not None:
            detail = f"{message} (line {line}, column {column})"
            if context:
                detail += f": {context.strip()!r}"
        super().__init__(detail)


class EmptyScoreError(MelographError):
    """The score contains no pitched notes."""


class UnsupportedFeatureError(MelographError):
    """A timing-relevant MusicXML construct the parser does not handle."""

    def __init__(self, element, reason=""):
        self.element = element
        msg = f"unsupported MusicXML element <{element}>"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class LabelingError(MelographError):
    pass


class CheckpointError(MelographError):
    pass


class CheckpointCorruptError(CheckpointError):
    """A chunk file or manifest failed validation."""

    def __init__(self, chunk, reason):
        self.chunk = chunk
        super().__init__(f"corrupt checkpoint {chunk}: {reason}")


class StaleCacheError(CheckpointError):
    """Cached results were produced under a different corpus or config."""


class DegenerateInputError(MelographError):
    pass


class GraphTooSmallError(MelographError):
    pass


class StageDependencyError(MelographError):
    """An upstream pipeline stage has not been run."""

    def __init__(self, stage, missing):
        self.stage = stage
        self.missing = missing
        super().__init__(
            f"stage {stage!r} needs the output of {missing!r}; "
            f"run `melograph {missing}` first"
        )


class StaleStageError(MelographError):
    pass
