"""Exception hierarchy shared by every subsystem."""


class ArenaError(Exception):
    """Base class; the CLI maps these to single-line JSON errors."""

    kind = "arena_error"


class DimensionError(ArenaError, ValueError):
    kind = "dimension_error"


class DegenerateRowError(ArenaError, ValueError):
    kind = "degenerate_row"


class DisconnectedGraphError(ArenaError, ValueError):
    kind = "disconnected_graph"


class ParameterError(ArenaError, ValueError):
    kind = "parameter_error"


class ConfigError(ArenaError, ValueError):
    kind = "config_error"


class NormalizationError(ArenaError, ArithmeticError):
    kind = "normalization_error"


class LengthError(ArenaError, ValueError):
    kind = "length_error"


class ParseError(ArenaError, ValueError):
    kind = "parse_error"


class FormatError(ArenaError, ValueError):
    kind = "format_error"


class GenerationError(ArenaError, RuntimeError):
    kind = "generation_error"


class UnsupportedMechanismError(ArenaError, ValueError):
    kind = "unsupported_mechanism"


class ContractError(ArenaError, ValueError):
    kind = "contract_error"


class TrainingError(ArenaError, RuntimeError):
    kind = "training_error"
