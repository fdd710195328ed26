"""Completion parsing and the per-sample decision pipeline.

A completion is expected to be an optional ``<think>...</think>`` block
followed by one JSON record ``{"proactive_score", "tools", "response"}``.
Small models deviate, so parsing runs a repair ladder (strip code fences,
scan for the first decodable record, regex fallback for the score) and
records what it had to fix; silent failure would skew the missed/false
detection rates downstream. A completion from which no score can be
recovered is a prediction failure and the sample is scored as
non-proactive.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from . import chainlang
from .backends import Backend, FixedStubBackend
from .core import (
    AgentOutput,
    BenchmarkSample,
    Diagnostic,
    GateConfig,
    NO_ACTION_MAX_SCORE,
    ProactiveScore,
    SCORE_MAX,
    SCORE_MIN,
    ToolChain,
    needs_proactive,
)
from .errors import (
    BackendUnavailable,
    ClientUnavailable,
    DecodeError,
    MalformedReference,
    TranscriptMiss,
    UnsupportedMedia,
)
from .executor import ExecutionTrace, execute
from .prompts import (
    build_audio_transcription_prompt,
    build_prompt,
    build_synthesis_prompt,
    build_visual_extraction_prompt,
    render_template_response,
)
from .toolset import ToolRegistry, WorldFixture

PARSE_CLEAN = "clean"
PARSE_REPAIRED = "repaired"
PARSE_FAILED = "failed"

_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_FENCE_RE = re.compile(r"```[a-zA-Z]*\n?|```")
_SCORE_FALLBACK_RE = re.compile(
    r"proactive[\s_-]*score\s*(?:is|was|of|=|:)?\s*\"?([1-5])\b", re.IGNORECASE
)

_SCORE_KEYS = ("proactive_score", "Proactive score", "proactive score", "score")
_TOOLS_KEYS = ("tools", "Tools")
_RESPONSE_KEYS = ("response", "Response")


@dataclass(frozen=True)
class ParsedOutput:
    """Result of decoding one completion."""

    status: str
    thought: Optional[str] = None
    score: Optional[int] = None
    tools_text: str = "None"
    response: Optional[str] = None
    notes: tuple[str, ...] = ()
    reason: Optional[str] = None

    def ok(self) -> bool:
        return self.status != PARSE_FAILED


def _first_record(text: str) -> tuple[Optional[dict], Optional[tuple[int, int]]]:
    """First decodable JSON object containing a score key, with its span."""
    decoder = json.JSONDecoder()
    start = 0
    while True:
        brace = text.find("{", start)
        if brace < 0:
            return None, None
        try:
            value, end = decoder.raw_decode(text, brace)
        except json.JSONDecodeError:
            start = brace + 1
            continue
        if isinstance(value, dict) and any(k in value for k in _SCORE_KEYS):
            return value, (brace, end)
        start = brace + 1


def _pick(record: dict, keys: tuple[str, ...], notes: list[str]) -> object:
    for i, key in enumerate(keys):
        if key in record:
            if i > 0:
                notes.append(f"alternate key {key!r}")
            return record[key]
    return None


def _coerce_score(value: object, notes: list[str]) -> Optional[int]:
    score: Optional[int] = None
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        score = value
    elif isinstance(value, float) and value.is_integer():
        score = int(value)
        notes.append("float score coerced")
    elif isinstance(value, str) and value.strip().isdigit():
        score = int(value.strip())
        notes.append("string score coerced")
    if score is None:
        return None
    if score < SCORE_MIN or score > SCORE_MAX:
        score = min(max(score, SCORE_MIN), SCORE_MAX)
        notes.append("out-of-range score clamped")
    return score


def _sanitize_tools(value: object, notes: list[str]) -> str:
    """Normalize the tools payload to verified chain text, or "None"."""
    if value is None:
        return "None"
    if isinstance(value, str):
        text = value
    elif isinstance(value, list):
        cleaned = []
        for item in value:
            if not isinstance(item, dict):
                notes.append("tools discarded: non-record entry")
                return "None"
            entry = {k: item[k] for k in ("name", "desc", "params") if k in item}
            if set(item) - {"name", "desc", "params"}:
                notes.append("extra tool-record keys dropped")
            params = entry.get("params")
            if isinstance(params, dict):
                fixed = {}
                for k, v in params.items():
                    if isinstance(v, (int, float)) and not isinstance(v, bool):
                        fixed[k] = str(v)
                        notes.append("numeric parameter stringified")
                    else:
                        fixed[k] = v
                entry["params"] = fixed
            cleaned.append(entry)
        text = json.dumps(cleaned, ensure_ascii=False)
    else:
        notes.append("tools discarded: unrecognized shape")
        return "None"
    try:
        chainlang.parse_chain(text)
    except (DecodeError, MalformedReference) as exc:
        notes.append(f"tools discarded: {exc}")
        return "None"
    return text


def parse_output(completion: str) -> ParsedOutput:
    """Decode a completion into thought + (score, tools, response).

    ``clean`` means the completion matched the published format exactly;
    ``repaired`` lists what was fixed; ``failed`` means no score could be
    recovered.
    """
    notes: list[str] = []
    thought: Optional[str] = None
    match = _THINK_RE.search(completion)
    remainder = completion
    if match:
        thought = match.group(1).strip() or None
        remainder = completion[: match.start()] + completion[match.end() :]

    stripped = remainder
    if _FENCE_RE.search(stripped):
        stripped = _FENCE_RE.sub("", stripped)
        notes.append("code fences stripped")

    record, span = _first_record(stripped)
    if record is None:
        fb = _SCORE_FALLBACK_RE.search(stripped) or _SCORE_FALLBACK_RE.search(completion)
        if fb:
            notes.append("score recovered by regex fallback")
            score = int(fb.group(1))
            return ParsedOutput(
                status=PARSE_REPAIRED,
                thought=thought,
                score=score,
                tools_text="None",
                response=None,
                notes=tuple(notes),
            )
        return ParsedOutput(status=PARSE_FAILED, thought=thought, reason="no score found")

    start, end = span
    if stripped[:start].strip() or stripped[end:].strip():
        notes.append("surrounding prose ignored")

    score = _coerce_score(_pick(record, _SCORE_KEYS, notes), notes)
    if score is None:
        return ParsedOutput(status=PARSE_FAILED, thought=thought, reason="unusable score value")

    tools_text = _sanitize_tools(_pick(record, _TOOLS_KEYS, notes), notes)

    response_value = _pick(record, _RESPONSE_KEYS, notes)
    response: Optional[str]
    if response_value is None or (isinstance(response_value, str) and response_value.strip().lower() == "none"):
        response = None
    elif isinstance(response_value, str):
        response = response_value
    else:
        notes.append("non-string response dropped")
        response = None

    # Dataset rule takes precedence: non-proactive scores carry no actions.
    if score <= NO_ACTION_MAX_SCORE:
        if chainlang.parse_chain(tools_text):
            tools_text = "None"
            notes.append("tools cleared for non-proactive score")
        if response is not None:
            response = None
            notes.append("response cleared for non-proactive score")

    status = PARSE_REPAIRED if notes else PARSE_CLEAN
    return ParsedOutput(
        status=status,
        thought=thought,
        score=score,
        tools_text=tools_text,
        response=response,
        notes=tuple(notes),
    )


def to_agent_output(parsed: ParsedOutput) -> AgentOutput:
    """Build the domain output from a clean or repaired parse."""
    if not parsed.ok():
        raise ValueError(f"cannot build an output from a failed parse: {parsed.reason}")
    return AgentOutput(
        score=ProactiveScore(parsed.score),
        chain=chainlang.parse_chain(parsed.tools_text),
        thought=parsed.thought,
        response=parsed.response,
    )


def fallback_output() -> AgentOutput:
    """Conservative stand-in when the prediction cannot be recovered."""
    return AgentOutput(score=ProactiveScore(1), chain=ToolChain.empty())


@dataclass(frozen=True)
class RunOutcome:
    """Everything run_sample produced for one sample."""

    sample_id: str
    output: AgentOutput
    parse_status: str
    parse_notes: tuple[str, ...] = ()
    failed: bool = False
    backend_error: Optional[str] = None
    chain_diagnostics: tuple[Diagnostic, ...] = ()
    trace: Optional[ExecutionTrace] = None
    response: Optional[str] = None


def _synthesize(
    sample: BenchmarkSample,
    thought: Optional[str],
    trace: ExecutionTrace,
    backend: Optional[Backend],
) -> str:
    if backend is None or isinstance(backend, FixedStubBackend):
        return render_template_response(trace)
    prompt = build_synthesis_prompt(sample.context, sample.personas, thought, trace)
    try:
        return backend.generate(prompt, key=f"{sample.id}#response")
    except (BackendUnavailable, TranscriptMiss):
        return render_template_response(trace)


def run_sample(
    sample: BenchmarkSample,
    backend: Backend,
    registry: ToolRegistry,
    fixture: WorldFixture,
    gate: GateConfig = GateConfig(),
    synthesis_backend: Optional[Backend] = None,
) -> RunOutcome:
    """Prompt, generate, parse, gate; when gated on, execute and respond.

    Backend failures never raise: the sample is recorded as a prediction
    failure and scored as non-proactive. No trace or response is produced
    when the gate stays closed.
    """
    bundle = build_prompt(registry, sample.context, sample.personas)
    try:
        completion = backend.generate(bundle.rendered, key=sample.id)
    except (BackendUnavailable, TranscriptMiss) as exc:
        return RunOutcome(
            sample_id=sample.id,
            output=fallback_output(),
            parse_status=PARSE_FAILED,
            failed=True,
            backend_error=str(exc),
        )

    parsed = parse_output(completion)
    if not parsed.ok():
        return RunOutcome(
            sample_id=sample.id,
            output=fallback_output(),
            parse_status=PARSE_FAILED,
            parse_notes=parsed.notes,
            failed=True,
        )

    output = to_agent_output(parsed)
    if not needs_proactive(output.score, gate):
        return RunOutcome(
            sample_id=sample.id,
            output=output,
            parse_status=parsed.status,
            parse_notes=parsed.notes,
        )

    diagnostics = tuple(chainlang.validate_chain(output.chain, registry))
    trace = execute(output.chain, registry, fixture)
    response = _synthesize(sample, output.thought, trace, synthesis_backend)
    return RunOutcome(
        sample_id=sample.id,
        output=output,
        parse_status=parsed.status,
        parse_notes=parsed.notes,
        chain_diagnostics=diagnostics,
        trace=trace,
        response=response,
    )


_VISUAL_SUFFIXES = (".mp4", ".mov", ".avi", ".mkv", ".webm", ".jpg", ".jpeg", ".png", ".gif")
_AUDIO_SUFFIXES = (".wav", ".mp3", ".m4a", ".flac", ".ogg", ".aac")


def _check_media(media: Optional[str], suffixes: tuple[str, ...], kind: str) -> str:
    if not media:
        raise UnsupportedMedia(f"no {kind} descriptor supplied")
    base = media.split("?", 1)[0].lower()
    if not base.endswith(suffixes):
        raise UnsupportedMedia(f"cannot handle {kind} descriptor {media!r}")
    return media


def extract_visual(
    media: Optional[str] = None,
    client: Optional[Backend] = None,
    text: Optional[str] = None,
) -> str:
    """Proactive-oriented visual context from footage, or passthrough text.

    With no client configured, the supplied text is returned unchanged
    (the desk-scale default: benchmark samples already carry textual
    context). With a client, the few-shot extraction prompt plus the media
    descriptor is sent to it.
    """
    if client is None:
        if text is not None:
            return text
        raise ClientUnavailable("no vision client configured and no passthrough text supplied")
    descriptor = _check_media(media, _VISUAL_SUFFIXES, "video")
    return client.generate(build_visual_extraction_prompt(descriptor), key=descriptor)


def extract_audio(
    media: Optional[str] = None,
    client: Optional[Backend] = None,
    text: Optional[str] = None,
) -> str:
    """Audio context (transcript) from a recording, or passthrough text."""
    if client is None:
        if text is not None:
            return text
        raise ClientUnavailable("no speech client configured and no passthrough text supplied")
    descriptor = _check_media(media, _AUDIO_SUFFIXES, "audio")
    return client.generate(build_audio_transcription_prompt(descriptor), key=descriptor)
