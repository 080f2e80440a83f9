# utils/errors.py


class LikeTallyError(Exception):
    """Base error. Carries the module that raised it and a context dict."""

    module = "liketally"

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self):
        return {
            "error": self.message,
            "type": type(self).__name__,
            "module": self.module,
            "context": {k: _jsonable(v) for k, v in self.context.items()},
        }


def _jsonable(value):
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in value]
    return str(value)


# ---------------- corpus ----------------
class CorpusParseError(LikeTallyError):
    module = "corpus"


class SchemaError(LikeTallyError):
    module = "corpus"


class CorpusValidationError(LikeTallyError):
    module = "corpus"


class EmptyGroupError(LikeTallyError):
    module = "corpus"


class MissingSeriesError(LikeTallyError):
    module = "corpus"


class ArtifactWriteError(LikeTallyError):
    module = "io"


# ---------------- labeler ----------------
class RuleConfigError(LikeTallyError):
    module = "labeler"


# ---------------- features ----------------
class EmptyMatrixError(LikeTallyError):
    module = "features"


# ---------------- negbin ----------------
class DomainError(LikeTallyError):
    module = "negbin"


class LinearPredictorOverflow(LikeTallyError):
    module = "negbin"


class SingularDesign(LikeTallyError):
    module = "negbin"


class NonconcaveAtOptimum(LikeTallyError):
    module = "negbin"


class IncompatibleFits(LikeTallyError):
    module = "negbin"


# ---------------- stepwise ----------------
class SelectionBoundError(LikeTallyError):
    module = "stepwise"


# ---------------- tactics ----------------
class UnknownTopicError(LikeTallyError):
    module = "tactics"


class NoTopicalTweetsError(LikeTallyError):
    module = "tactics"


class DegenerateScoreError(LikeTallyError):
    module = "tactics"


# ---------------- synth ----------------
class SynthSpecError(LikeTallyError):
    module = "synth"


# ---------------- config ----------------
class ConfigError(LikeTallyError):
    module = "config"
