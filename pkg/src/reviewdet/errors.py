"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """An input violates a documented invariant or precondition."""


class ConfigError(ValueError):
    """A run or operation is misconfigured (empty split, bad key, ...)."""


class EmptyAfterCleanError(ValueError):
    """Chatter stripping left no review content behind."""


class GatewayError(RuntimeError):
    """An LLM gateway call failed after exhausting its retry budget."""


class ForgeError(RuntimeError):
    """Forging a record failed; carries the mode and record id."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; names the offending batch."""


class DegenerateEmbeddingError(ValueError):
    """A record embedding has zero norm, so cosine logits are undefined."""


class EncoderError(RuntimeError):
    """An encoder failed on a batch; names the offending record index."""


class VerdictParseError(ValueError):
    """An LLM detector response was not one of the allowed verdicts."""

    def __init__(self, raw: str):
        super().__init__(f"unparseable detector verdict: {raw!r}")
        self.raw = raw


class CheckpointError(RuntimeError):
    """A checkpoint directory is missing parts or fails its manifest."""
