"""Exception types shared across the pipeline stages."""


class EelabError(Exception):
    """Base class for all package errors."""


class SchemaError(EelabError):
    """A JSONL record failed schema validation."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientTasks(EelabError):
    """A task split bucket would be empty."""


class UnknownEnv(EelabError):
    """No environment registered under that name."""


class MalformedTask(EelabError):
    """TaskSpec is inconsistent with the environment it names."""


class SteppedTerminalState(EelabError):
    """step() was called on a state with done=True."""


class OracleFailure(EelabError):
    """The expert planner failed on a task it should solve by construction."""


class ReplayDivergence(EelabError):
    """Replaying a stored action prefix did not reproduce the stored state text."""


class GeneratorUnavailable(EelabError):
    """An external reflection generator was requested without an endpoint."""


class EmptyCorpus(EelabError):
    """Vocabulary construction received no text."""


class NonFiniteLoss(EelabError):
    """Training produced a NaN or infinite loss; the run is aborted."""


class BudgetInfeasible(EelabError):
    """A training plan stage cannot fit inside the imitation update budget."""


class TokenizerMismatch(EelabError):
    """Checkpoints being compared were trained with different vocabularies."""


class ConfigError(EelabError):
    """Configuration file is malformed or contains unknown/invalid keys."""
