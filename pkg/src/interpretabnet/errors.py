"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class SchemaError(ValueError):
    """Input file does not match the expected schema (columns, shapes)."""


class ParseError(ValueError):
    """A cell or payload could not be parsed; message carries location."""


class EmptyInputError(ValueError):
    """An input that must contain data is empty."""


class DataError(ValueError):
    """Data values violate a contract (e.g. labels out of range)."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite math is required."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss.

    Carries the partial result (history up to the last finite epoch).
    """

    def __init__(self, message, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result


class NoFeasibleRegError(RuntimeError):
    """Regularizer search exhausted its range with no passing candidate.

    Carries the search ledger so callers can still write a report and
    fall back to an unregularized model.
    """

    def __init__(self, message, ledger=None):
        super().__init__(message)
        self.ledger = ledger


class LlmError(RuntimeError):
    """Base class for LLM client failures."""


class LlmTransportError(LlmError):
    """HTTP transport failed after all retries."""


class LlmParseError(LlmError):
    """No JSON object could be extracted from the model reply.

    ``raw_text`` holds the unparsed reply for post-mortem.
    """

    def __init__(self, message, raw_text=""):
        super().__init__(message)
        self.raw_text = raw_text


class LlmSchemaMismatchError(LlmError):
    """Parsed reply is valid JSON but misses expected keys.

    ``parsed`` holds the raw map so callers can still inspect it.
    """

    def __init__(self, message, parsed=None, missing_keys=()):
        super().__init__(message)
        self.parsed = parsed if parsed is not None else {}
        self.missing_keys = tuple(missing_keys)
