"""Shared domain types for gated proactive assistance.

This module holds the vocabulary used everywhere else: the assembled
sensory context, user personas, the 1-5 proactive score with its
user-adjustable gate, planned tool calls whose arguments are literals or
references to earlier results, agent outputs, and benchmark samples.

All types are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .errors import AllPartsMissing

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

VISUAL_PREFIX = "Visual information"
AUDIO_PREFIX = "Audio information"
NOTIFICATION_PREFIX = "Notification"

SCORE_MIN = 1
SCORE_MAX = 5
#: Scores at or below this value mean "do not disturb the user": the stored
#: sample then carries no tool chain and no response.
NO_ACTION_MAX_SCORE = 2
#: Fixed boundary used to binarize ground-truth scores for metrics. The
#: runtime gate threshold is configurable; this one is dataset semantics.
PROACTIVE_BOUNDARY = 3


def _is_plain_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass(frozen=True)
class ContextBundle:
    """Sensory context: visual, audio, and notification parts plus their rendering.

    ``combined`` is the text the reasoner consumes. When the bundle is
    assembled from parts, each present part appears verbatim, in the fixed
    order visual, audio, notifications. Bundles decoded from stored samples
    carry only ``combined`` (the parts are not recoverable).
    """

    combined: str
    visual: Optional[str] = None
    audio: Optional[str] = None
    notifications: Optional[str] = None

    def __post_init__(self) -> None:
        present = [p for p in (self.visual, self.audio, self.notifications) if p is not None]
        if present and not self.combined:
            raise ValueError("combined text must be non-empty when a part is present")
        pos = 0
        for part in present:
            idx = self.combined.find(part, pos)
            if idx < 0:
                raise ValueError("combined text must contain each present part verbatim, in order")
            pos = idx + len(part)


def assemble_context(
    visual: Optional[str] = None,
    audio: Optional[str] = None,
    notifications: Optional[str] = None,
) -> ContextBundle:
    """Render present parts into one context text, in visual/audio/notification order.

    Each part is prefixed with its fixed label so missing-modality runs stay
    distinguishable. Raises :class:`AllPartsMissing` when no part is given.
    """
    labelled = [
        (VISUAL_PREFIX, visual),
        (AUDIO_PREFIX, audio),
        (NOTIFICATION_PREFIX, notifications),
    ]
    present = [(label, text) for label, text in labelled if text is not None]
    if not present:
        raise AllPartsMissing("at least one of visual/audio/notifications is required")
    combined = " ".join(f"{label}: {text}" for label, text in present)
    return ContextBundle(combined=combined, visual=visual, audio=audio, notifications=notifications)


@dataclass(frozen=True)
class PersonaSet:
    """Ordered persona statements conditioning the proactive decision. May be empty."""

    entries: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        for entry in self.entries:
            if not entry.strip():
                raise ValueError("persona entries must not be blank")

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ProactiveScore:
    """Integer rating in [1, 5] of how strongly the context warrants unprompted help."""

    value: int

    def __post_init__(self) -> None:
        if not _is_plain_int(self.value) or not SCORE_MIN <= self.value <= SCORE_MAX:
            raise ValueError(f"proactive score must be an integer in [1, 5], got {self.value!r}")


@dataclass(frozen=True)
class GateConfig:
    """User-adjustable sensitivity gate: act only when score >= threshold."""

    threshold: int = PROACTIVE_BOUNDARY

    def __post_init__(self) -> None:
        if not _is_plain_int(self.threshold) or not 2 <= self.threshold <= 5:
            raise ValueError(f"gate threshold must be an integer in [2, 5], got {self.threshold!r}")


def needs_proactive(score: ProactiveScore, gate: GateConfig) -> bool:
    """True iff the score reaches the gate threshold (monotone in the score)."""
    return score.value >= gate.threshold


@dataclass(frozen=True)
class LiteralArg:
    """A verbatim argument value."""

    text: str


@dataclass(frozen=True)
class ResultRef:
    """Reference to a named field of an earlier tool call's result."""

    tool: str
    field: str

    def __post_init__(self) -> None:
        for name in (self.tool, self.field):
            if not IDENT_RE.match(name):
                raise ValueError(f"invalid identifier in result reference: {name!r}")


ArgExpr = Union[LiteralArg, ResultRef]


@dataclass(frozen=True)
class ToolCall:
    """One planned call: tool name plus an ordered parameter-name -> argument map."""

    name: str
    args: dict[str, ArgExpr] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not IDENT_RE.match(self.name):
            raise ValueError(f"invalid tool name: {self.name!r}")
        object.__setattr__(self, "args", dict(self.args))


@dataclass(frozen=True)
class ToolChain:
    """Ordered list of tool calls; empty is the "None" chain.

    Construction does not enforce reference ordering: chains with forward
    references are representable so the validator can report them and the
    executor can abort on them.
    """

    calls: tuple[ToolCall, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "calls", tuple(self.calls))

    @classmethod
    def empty(cls) -> "ToolChain":
        return cls(())

    def __len__(self) -> int:
        return len(self.calls)

    def __iter__(self) -> Iterator[ToolCall]:
        return iter(self.calls)

    def __bool__(self) -> bool:
        return bool(self.calls)

    def tool_names(self) -> tuple[str, ...]:
        return tuple(call.name for call in self.calls)


@dataclass(frozen=True)
class AgentOutput:
    """Parsed agent decision: optional thought trace, score, planned chain, response.

    Scores of 1 or 2 mean no proactivity: the constructor rejects any such
    output carrying a non-empty chain or a response.
    """

    score: ProactiveScore
    chain: ToolChain = ToolChain(())
    thought: Optional[str] = None
    response: Optional[str] = None

    def __post_init__(self) -> None:
        if self.score.value <= NO_ACTION_MAX_SCORE:
            if self.chain:
                raise ValueError("a score of 1 or 2 cannot carry a tool chain")
            if self.response is not None:
                raise ValueError("a score of 1 or 2 cannot carry a response")


@dataclass(frozen=True)
class BenchmarkSample:
    """One benchmark record: context, personas, and the ground-truth annotation."""

    id: str
    context: ContextBundle
    personas: PersonaSet
    annotation: AgentOutput
    scenario: Optional[str] = None
    media: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not IDENT_RE.match(self.id):
            raise ValueError(f"sample id must be an identifier: {self.id!r}")
        object.__setattr__(self, "media", tuple(self.media))


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding. ``kind`` is a stable machine-readable tag."""

    kind: str
    message: str
    call_index: Optional[int] = None
    param: Optional[str] = None

    def render(self) -> str:
        where = "" if self.call_index is None else f" [call {self.call_index}]"
        return f"{self.kind}{where}: {self.message}"


# Diagnostic kinds emitted across the package. Validators report these;
# nothing is thrown for per-sample findings.
D_UNKNOWN_TOOL = "unknown_tool"
D_MISSING_PARAM = "missing_param"
D_UNKNOWN_PARAM = "unknown_param"
D_FORWARD_REFERENCE = "forward_reference"
D_UNKNOWN_FIELD = "unknown_field"
D_MALFORMED_REFERENCE = "malformed_reference"
D_CHAIN_DECODE = "chain_decode"
D_SCORE_RANGE = "score_range"
D_SCORE_CHAIN_MISMATCH = "score_chain_mismatch"
D_UNKNOWN_SCENARIO = "unknown_scenario"
D_MISSING_MEDIA = "missing_media"
D_BLANK_PERSONA = "blank_persona"
