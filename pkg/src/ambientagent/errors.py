"""Exception types shared across the package.

Everything derives from :class:`HarnessError` so callers (notably the CLI)
can distinguish harness failures from programming errors.
"""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all errors raised by this package."""


class AllPartsMissing(HarnessError):
    """Context assembly was attempted with no visual, audio, or notification part."""


class UnknownTool(HarnessError):
    """A tool name does not resolve in the registry."""

    def __init__(self, name: str):
        super().__init__(f"unknown tool: {name!r}")
        self.name = name


class SimulatedFailure(HarnessError):
    """The world fixture marks this call as failing (error-path testing)."""


class MalformedReference(HarnessError):
    """Text begins with $RESULT( but does not match the reference grammar."""

    def __init__(self, value: str, call_index: int | None = None):
        where = f" (call {call_index})" if call_index is not None else ""
        super().__init__(f"malformed result reference{where}: {value!r}")
        self.value = value
        self.call_index = call_index


class DecodeError(HarnessError):
    """Stored data failed strict decoding."""

    def __init__(self, message: str, index: int | None = None, field: str | None = None):
        prefix = ""
        if index is not None:
            prefix += f"record {index}: "
        if field is not None:
            prefix += f"field {field!r}: "
        super().__init__(prefix + message)
        self.index = index
        self.field = field


class UnresolvedReference(HarnessError):
    """A $RESULT reference names a tool with no completed call."""

    def __init__(self, tool: str):
        super().__init__(f"no completed call for referenced tool {tool!r}")
        self.tool = tool


class FieldMissing(HarnessError):
    """A $RESULT reference names a field the tool result does not expose."""

    def __init__(self, tool: str, field: str):
        super().__init__(f"result of {tool!r} has no field {field!r}")
        self.tool = tool
        self.field = field


class BackendUnavailable(HarnessError):
    """The text-generation backend failed after exhausting retries."""


class TranscriptMiss(HarnessError):
    """A replay backend has no canned completion for the requested key."""

    def __init__(self, key: str):
        super().__init__(f"no transcript entry for key {key!r}")
        self.key = key


class CredentialMissing(HarnessError):
    """The configured credential environment variable is not set."""

    def __init__(self, env_var: str):
        super().__init__(f"credential environment variable {env_var!r} is not set")
        self.env_var = env_var


class ClientUnavailable(HarnessError):
    """No perception client is configured and no passthrough text was supplied."""


class UnsupportedMedia(HarnessError):
    """The media descriptor cannot be handled by the perception client."""


class IdMismatch(HarnessError):
    """Prediction ids do not cover exactly the ground-truth sample ids."""


class UnknownScenario(HarnessError):
    """A requested scenario label does not occur in the dataset."""


class ConfigError(HarnessError):
    """Invalid runtime or backend configuration."""
