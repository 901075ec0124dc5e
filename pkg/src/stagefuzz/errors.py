"""Exception hierarchy shared by the compiler under test and the fuzzers."""


class StageFuzzError(Exception):
    """Base class for every error raised by this package."""


class GraphTypeError(StageFuzzError):
    """A node's inputs or parameters violate its operator's typing rule."""


class ShapeMismatch(GraphTypeError):
    pass


class InvalidParam(GraphTypeError):
    pass


class MissingInput(StageFuzzError):
    pass


class NumericDomain(StageFuzzError):
    """Evaluation hit an undefined operation, e.g. integer division by zero."""


class ParseError(StageFuzzError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class PassInternal(StageFuzzError):
    """An optimization pass failed; reported as a compiler bug candidate."""

    def __init__(self, pass_name: str, message: str, rule_id: str | None = None):
        self.pass_name = pass_name
        self.rule_id = rule_id
        super().__init__(f"{pass_name}: {message}")


class FixpointNotReached(StageFuzzError):
    pass


class LoweringUnsupported(StageFuzzError):
    pass


class LoopRuntimeError(StageFuzzError):
    """Base class for faults raised while interpreting a loop program."""


class OutOfBounds(LoopRuntimeError):
    pass


class UninitializedRead(LoopRuntimeError):
    pass


class IllegalTransform(StageFuzzError):
    pass


class ConversionError(StageFuzzError):
    """The model loader rejected an operator instance."""


class SchemaViolation(StageFuzzError):
    pass


class CorpusUnreadable(StageFuzzError):
    pass


class DegeneratePattern(StageFuzzError):
    pass


class SynthesisFailed(StageFuzzError):
    pass


class TestLoadError(StageFuzzError):
    __test__ = False


class DocParseError(StageFuzzError):
    pass


class RuleRejected(StageFuzzError):
    pass


class MutationInapplicable(StageFuzzError):
    pass


class ConfigError(StageFuzzError):
    pass
