"""Benchmark dataset handling.

Stored datasets are line-delimited JSON, one sample per line, using the
exact field names "Context information", "Personas", "Thoughts",
"Proactive score", "Tools", "Response", plus optional "Scenario", "Media",
and "id". An optional first line ``{"scenarios": [...]}`` declares the
legal scenario labels.

Decoding is strict for stored data (reject, don't repair): canonical files
stay canonical, and anything lenient belongs in the completion parser.
The ``validate`` entry points run a lenient pass instead, reporting each
per-record violation as a diagnostic rather than failing the whole file.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from . import chainlang
from .backends import Backend
from .core import (
    AgentOutput,
    BenchmarkSample,
    ContextBundle,
    D_BLANK_PERSONA,
    D_CHAIN_DECODE,
    D_MALFORMED_REFERENCE,
    D_MISSING_MEDIA,
    D_SCORE_CHAIN_MISMATCH,
    D_SCORE_RANGE,
    D_UNKNOWN_SCENARIO,
    Diagnostic,
    NO_ACTION_MAX_SCORE,
    PersonaSet,
    ProactiveScore,
    SCORE_MAX,
    SCORE_MIN,
    ToolChain,
)
from .errors import BackendUnavailable, DecodeError, MalformedReference, TranscriptMiss, UnknownScenario
from .prompts import build_generation_prompt, build_runtime_prompt
from .toolset import ToolRegistry, data_path

F_CONTEXT = "Context information"
F_PERSONAS = "Personas"
F_THOUGHTS = "Thoughts"
F_SCORE = "Proactive score"
F_TOOLS = "Tools"
F_RESPONSE = "Response"
F_SCENARIO = "Scenario"
F_MEDIA = "Media"
F_ID = "id"

_REQUIRED_FIELDS = (F_CONTEXT, F_PERSONAS, F_THOUGHTS, F_SCORE, F_TOOLS, F_RESPONSE)
_KNOWN_FIELDS = set(_REQUIRED_FIELDS) | {F_SCENARIO, F_MEDIA, F_ID}
_HEADER_KEYS = {"scenarios"}

NONE_TEXT = "None"


@dataclass
class Dataset:
    """Loaded samples plus the header-declared scenario labels, if any."""

    samples: list[BenchmarkSample] = field(default_factory=list)
    scenarios: Optional[tuple[str, ...]] = None

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[BenchmarkSample]:
        return iter(self.samples)

    def by_id(self) -> dict[str, BenchmarkSample]:
        return {sample.id: sample for sample in self.samples}


def bundled_samples_path() -> Path:
    """The verified sample set shipped with the package."""
    return data_path("bench_samples.jsonl")


def _is_none_text(value: str) -> bool:
    return value.strip().lower() == "none"


def _decode_sample(
    obj: object,
    index: int,
    fallback_id: str,
    scenarios: Optional[tuple[str, ...]],
    diags: Optional[list[Diagnostic]],
) -> Optional[BenchmarkSample]:
    """Decode one record. Structural problems always raise DecodeError.

    Semantic problems (score range, score/chain consistency, chain text)
    raise in strict mode (``diags is None``) and are collected otherwise.
    """

    def semantic(diag: Diagnostic) -> None:
        if diags is None:
            raise DecodeError(diag.message, index=index)
        diags.append(diag)

    if not isinstance(obj, dict):
        raise DecodeError("record must be a JSON object", index=index)
    unknown = set(obj) - _KNOWN_FIELDS
    if unknown:
        raise DecodeError(f"unknown fields {sorted(unknown)}", index=index)
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            raise DecodeError("required field is missing", index=index, field=name)

    context_text = obj[F_CONTEXT]
    if not isinstance(context_text, str) or not context_text.strip():
        raise DecodeError("must be a non-empty string", index=index, field=F_CONTEXT)
    personas_raw = obj[F_PERSONAS]
    if not isinstance(personas_raw, list) or not all(isinstance(p, str) for p in personas_raw):
        raise DecodeError("must be an array of strings", index=index, field=F_PERSONAS)
    thoughts = obj[F_THOUGHTS]
    if not isinstance(thoughts, str):
        raise DecodeError("must be a string", index=index, field=F_THOUGHTS)
    score_raw = obj[F_SCORE]
    if not isinstance(score_raw, int) or isinstance(score_raw, bool):
        raise DecodeError("must be an integer", index=index, field=F_SCORE)
    tools_text = obj[F_TOOLS]
    if not isinstance(tools_text, str):
        raise DecodeError("must be a string", index=index, field=F_TOOLS)
    response_text = obj[F_RESPONSE]
    if not isinstance(response_text, str):
        raise DecodeError("must be a string", index=index, field=F_RESPONSE)
    scenario = obj.get(F_SCENARIO)
    if scenario is not None and not isinstance(scenario, str):
        raise DecodeError("must be a string", index=index, field=F_SCENARIO)
    media_raw = obj.get(F_MEDIA, [])
    if not isinstance(media_raw, list) or not all(isinstance(m, str) for m in media_raw):
        raise DecodeError("must be an array of strings", index=index, field=F_MEDIA)
    sample_id = obj.get(F_ID, fallback_id)
    if not isinstance(sample_id, str):
        raise DecodeError("must be a string", index=index, field=F_ID)

    bad = False
    if not SCORE_MIN <= score_raw <= SCORE_MAX:
        semantic(Diagnostic(D_SCORE_RANGE, f"proactive score {score_raw} is outside [1, 5]"))
        bad = True
    for persona in personas_raw:
        if not persona.strip():
            semantic(Diagnostic(D_BLANK_PERSONA, "persona entries must not be blank"))
            bad = True
            break

    chain: Optional[ToolChain] = None
    try:
        chain = chainlang.parse_chain(tools_text)
    except MalformedReference as exc:
        semantic(
            Diagnostic(D_MALFORMED_REFERENCE, str(exc), call_index=exc.call_index)
        )
        bad = True
    except DecodeError as exc:
        semantic(Diagnostic(D_CHAIN_DECODE, str(exc)))
        bad = True

    response_none = _is_none_text(response_text)
    if chain is not None and not bad:
        if score_raw <= NO_ACTION_MAX_SCORE:
            if chain:
                semantic(
                    Diagnostic(
                        D_SCORE_CHAIN_MISMATCH,
                        f"score {score_raw} requires Tools to be \"{NONE_TEXT}\"",
                    )
                )
                bad = True
            if not response_none:
                semantic(
                    Diagnostic(
                        D_SCORE_CHAIN_MISMATCH,
                        f"score {score_raw} requires Response to be \"{NONE_TEXT}\"",
                    )
                )
                bad = True
        else:
            if not chain:
                semantic(
                    Diagnostic(
                        D_SCORE_CHAIN_MISMATCH,
                        f"score {score_raw} requires a non-empty tool chain",
                    )
                )
                bad = True
            if response_none:
                semantic(
                    Diagnostic(
                        D_SCORE_CHAIN_MISMATCH,
                        f"score {score_raw} requires a real Response",
                    )
                )
                bad = True

    if scenario is not None and scenarios is not None and scenario not in scenarios:
        semantic(
            Diagnostic(
                D_UNKNOWN_SCENARIO,
                f"scenario {scenario!r} is not declared in the dataset header",
            )
        )
        bad = True

    if bad:
        return None

    annotation = AgentOutput(
        score=ProactiveScore(score_raw),
        chain=chain,
        thought=thoughts,
        response=None if response_none else response_text,
    )
    try:
        return BenchmarkSample(
            id=sample_id,
            context=ContextBundle(combined=context_text),
            personas=PersonaSet(tuple(personas_raw)),
            annotation=annotation,
            scenario=scenario,
            media=tuple(media_raw),
        )
    except ValueError as exc:
        raise DecodeError(str(exc), index=index) from None


def _read_lines(path: Union[str, Path]) -> tuple[Optional[tuple[str, ...]], list[tuple[int, object]]]:
    """Split a dataset file into (header scenarios, numbered raw records)."""
    records: list[tuple[int, object]] = []
    scenarios: Optional[tuple[str, ...]] = None
    with open(path, "r", encoding="utf-8") as fh:
        record_index = 0
        for line_no, line in enumerate(fh):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DecodeError(f"line {line_no + 1} is not valid JSON: {exc}")
            if record_index == 0 and not records and isinstance(obj, dict) and "scenarios" in obj and F_CONTEXT not in obj:
                unknown = set(obj) - _HEADER_KEYS
                if unknown:
                    raise DecodeError(f"unknown header fields {sorted(unknown)}")
                labels = obj["scenarios"]
                if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
                    raise DecodeError("header 'scenarios' must be an array of strings")
                scenarios = tuple(labels)
                continue
            records.append((record_index, obj))
            record_index += 1
    return scenarios, records


def load(path: Union[str, Path]) -> Dataset:
    """Strictly decode a dataset file; any violation raises DecodeError."""
    scenarios, records = _read_lines(path)
    samples: list[BenchmarkSample] = []
    seen: set[str] = set()
    for index, obj in records:
        sample = _decode_sample(obj, index, f"sample_{index + 1:04d}", scenarios, diags=None)
        assert sample is not None
        if sample.id in seen:
            raise DecodeError(f"duplicate sample id {sample.id!r}", index=index)
        seen.add(sample.id)
        samples.append(sample)
    return Dataset(samples=samples, scenarios=scenarios)


def sample_to_record(sample: BenchmarkSample, registry: ToolRegistry) -> dict:
    """Render a sample back to its wire-format record."""
    record: dict = {
        F_ID: sample.id,
        F_CONTEXT: sample.context.combined,
        F_PERSONAS: list(sample.personas.entries),
        F_THOUGHTS: sample.annotation.thought or "",
        F_SCORE: sample.annotation.score.value,
        F_TOOLS: chainlang.serialize_chain(sample.annotation.chain, registry),
        F_RESPONSE: sample.annotation.response if sample.annotation.response is not None else NONE_TEXT,
    }
    if sample.scenario is not None:
        record[F_SCENARIO] = sample.scenario
    if sample.media:
        record[F_MEDIA] = list(sample.media)
    return record


def save(dataset: Dataset, path: Union[str, Path], registry: ToolRegistry) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if dataset.scenarios is not None:
            fh.write(json.dumps({"scenarios": list(dataset.scenarios)}, ensure_ascii=False) + "\n")
        for sample in dataset:
            fh.write(json.dumps(sample_to_record(sample, registry), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class ReportEntry:
    ref: str
    diagnostics: tuple[Diagnostic, ...]


@dataclass
class ValidationReport:
    entries: list[ReportEntry]
    n_samples: int

    @property
    def ok(self) -> bool:
        return all(not entry.diagnostics for entry in self.entries)

    @property
    def n_failed(self) -> int:
        return sum(1 for entry in self.entries if entry.diagnostics)

    def counts_by_kind(self) -> dict[str, int]:
        counts: Counter[str] = Counter()
        for entry in self.entries:
            for diag in entry.diagnostics:
                counts[diag.kind] += 1
        return dict(counts)

    def all_kinds(self) -> set[str]:
        return set(self.counts_by_kind())

    def render(self) -> str:
        lines = []
        for entry in self.entries:
            for diag in entry.diagnostics:
                lines.append(f"{entry.ref}: {diag.render()}")
        passed = self.n_samples - self.n_failed
        lines.append(f"{self.n_samples} samples: {passed} passed, {self.n_failed} failed")
        for kind, count in sorted(self.counts_by_kind().items()):
            lines.append(f"  {kind}: {count}")
        return "\n".join(lines)


def _sample_semantic_diags(
    sample: BenchmarkSample,
    registry: ToolRegistry,
    scenarios: Optional[tuple[str, ...]],
    base_dir: Optional[Path],
) -> list[Diagnostic]:
    diags = list(chainlang.validate_chain(sample.annotation.chain, registry))
    if sample.scenario is not None and scenarios is not None and sample.scenario not in scenarios:
        diags.append(
            Diagnostic(D_UNKNOWN_SCENARIO, f"scenario {sample.scenario!r} is not declared")
        )
    if base_dir is not None:
        for ref in sample.media:
            if not (base_dir / ref).exists():
                diags.append(Diagnostic(D_MISSING_MEDIA, f"media file {ref!r} does not exist"))
    return diags


def validate(source: Union[Dataset, str, Path], registry: ToolRegistry) -> ValidationReport:
    """Per-sample format and chain checks.

    For a file path, decoding is lenient: records whose structure is sound
    but whose content breaks a rule (score/chain consistency, malformed
    references, out-of-range scores, ...) contribute diagnostics instead of
    aborting. Structural damage still raises DecodeError.
    """
    if isinstance(source, Dataset):
        entries = [
            ReportEntry(sample.id, tuple(_sample_semantic_diags(sample, registry, source.scenarios, None)))
            for sample in source
        ]
        return ValidationReport(entries=entries, n_samples=len(source))

    path = Path(source)
    scenarios, records = _read_lines(path)
    entries = []
    for index, obj in records:
        diags: list[Diagnostic] = []
        sample = _decode_sample(obj, index, f"sample_{index + 1:04d}", scenarios, diags=diags)
        ref = sample.id if sample is not None else f"record_{index + 1}"
        if sample is not None:
            diags.extend(_sample_semantic_diags(sample, registry, scenarios, path.parent))
        entries.append(ReportEntry(ref, tuple(diags)))
    return ValidationReport(entries=entries, n_samples=len(records))


@dataclass(frozen=True)
class RandomRatio:
    """Shuffle with a seed and cut at the given train fraction."""

    fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0 < self.fraction < 1:
            raise ValueError("train fraction must be in (0, 1)")


@dataclass(frozen=True)
class ScenarioHoldout:
    """Every sample of the held-out scenarios goes to the test side."""

    labels: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", frozenset(self.labels))


SplitMode = Union[RandomRatio, ScenarioHoldout]


def split(dataset: Dataset, mode: SplitMode) -> tuple[Dataset, Dataset]:
    """Partition into (train, test); deterministic given the mode."""
    if isinstance(mode, RandomRatio):
        indices = list(range(len(dataset)))
        random.Random(mode.seed).shuffle(indices)
        n_train = round(mode.fraction * len(dataset))
        chosen = set(indices[:n_train])
        train = [s for i, s in enumerate(dataset.samples) if i in chosen]
        test = [s for i, s in enumerate(dataset.samples) if i not in chosen]
    else:
        present = {s.scenario for s in dataset if s.scenario is not None}
        missing = mode.labels - present
        if missing:
            raise UnknownScenario(f"scenarios not in dataset: {sorted(missing)}")
        train = [s for s in dataset if s.scenario not in mode.labels]
        test = [s for s in dataset if s.scenario in mode.labels]
    return (
        Dataset(samples=train, scenarios=dataset.scenarios),
        Dataset(samples=test, scenarios=dataset.scenarios),
    )


def sft_records(dataset: Dataset, registry: ToolRegistry) -> Iterator[dict]:
    """Training triples: rendered input, think-wrapped trace, score+tools target."""
    for sample in dataset:
        target = {
            "proactive_score": sample.annotation.score.value,
            "tools": chainlang.serialize_chain(sample.annotation.chain, registry),
        }
        yield {
            "input": build_runtime_prompt(sample.context, sample.personas),
            "thought": f"<think>{sample.annotation.thought or ''}</think>",
            "target": json.dumps(target, ensure_ascii=False),
        }


def export_sft(dataset: Dataset, registry: ToolRegistry, path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in sft_records(dataset, registry):
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def reference_completion(sample: BenchmarkSample, registry: ToolRegistry) -> str:
    """The completion an ideal backend would emit for this sample.

    Used to build replay transcripts that reproduce the annotations
    exactly (the oracle round trip).
    """
    tools_text = chainlang.serialize_chain(sample.annotation.chain, registry)
    payload = {
        "proactive_score": sample.annotation.score.value,
        "tools": json.loads(tools_text) if sample.annotation.chain else NONE_TEXT,
        "response": sample.annotation.response if sample.annotation.response is not None else NONE_TEXT,
    }
    thought = sample.annotation.thought or ""
    return f"<think>{thought}</think>\n" + json.dumps(payload, ensure_ascii=False)


def build_transcript(dataset: Dataset, registry: ToolRegistry) -> dict[str, str]:
    return {sample.id: reference_completion(sample, registry) for sample in dataset}


@dataclass(frozen=True)
class ScenarioAware:
    label: str


@dataclass(frozen=True)
class ScoreAware:
    score: int

    def __post_init__(self) -> None:
        if not SCORE_MIN <= self.score <= SCORE_MAX:
            raise ValueError("target score must be in [1, 5]")


Strategy = Union[ScenarioAware, ScoreAware]


@dataclass
class GenerationJob:
    strategy: Strategy
    exemplars: list[BenchmarkSample]
    personas: list[str]
    count: int
    seed: int = 0
    attempt_budget: Optional[int] = None  # default: 5x the requested count

    def __post_init__(self) -> None:
        if not self.exemplars:
            raise ValueError("the exemplar pool must be non-empty")
        if self.count < 1:
            raise ValueError("count must be positive")


@dataclass(frozen=True)
class RejectedCandidate:
    attempt: int
    candidate: int
    reason: str


@dataclass
class GenerationResult:
    accepted: list[BenchmarkSample]
    rejected: list[RejectedCandidate]
    attempts: int
    budget_exhausted: bool = False


def _context_digest(text: str) -> str:
    normalized = " ".join(text.lower().split())
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


def _strategy_directive(strategy: Strategy) -> str:
    if isinstance(strategy, ScenarioAware):
        return (
            f"every record must belong to the {strategy.label!r} scenario "
            f'(set "Scenario" to "{strategy.label}")'
        )
    return f'every record must have "Proactive score" exactly {strategy.score}'


def _matching_exemplars(strategy: Strategy, pool: list[BenchmarkSample]) -> list[BenchmarkSample]:
    if isinstance(strategy, ScenarioAware):
        matching = [s for s in pool if s.scenario == strategy.label]
    else:
        matching = [s for s in pool if s.annotation.score.value == strategy.score]
    return matching or list(pool)


def _candidates_from_completion(completion: str) -> list[object]:
    text = completion.strip()
    if text.startswith("```"):
        text = re.sub(r"```[a-zA-Z]*\n?|```", "", text).strip()
    doc = json.loads(text)
    if isinstance(doc, dict):
        return [doc]
    if isinstance(doc, list):
        return doc
    raise ValueError("completion must decode to a record or an array of records")


def generate(job: GenerationJob, backend: Backend, registry: ToolRegistry) -> GenerationResult:
    """Synthesize new samples until ``count`` are accepted or the budget runs out.

    Every accepted sample has already re-passed the full validation rules;
    duplicates (by normalized context digest) and strategy mismatches are
    rejected with reasons. One backend call per attempt, keyed
    ``gen-<attempt>`` so replay transcripts can drive the loop.
    """
    budget = job.attempt_budget if job.attempt_budget is not None else 5 * job.count
    rng = random.Random(job.seed)
    exemplar_pool = _matching_exemplars(job.strategy, job.exemplars)
    exemplar_records = [
        json.dumps(sample_to_record(s, registry), ensure_ascii=False)
        for s in rng.sample(exemplar_pool, min(4, len(exemplar_pool)))
    ]
    persona_excerpts = rng.sample(job.personas, min(8, len(job.personas))) if job.personas else []
    prompt = build_generation_prompt(
        registry, _strategy_directive(job.strategy), exemplar_records, persona_excerpts
    )

    accepted: list[BenchmarkSample] = []
    rejected: list[RejectedCandidate] = []
    digests: set[str] = set()
    attempts = 0
    exhausted = False
    while len(accepted) < job.count:
        if attempts >= budget:
            exhausted = True
            break
        try:
            completion = backend.generate(prompt, key=f"gen-{attempts:04d}")
        except TranscriptMiss:
            exhausted = True
            break
        attempts += 1
        try:
            candidates = _candidates_from_completion(completion)
        except (ValueError, json.JSONDecodeError) as exc:
            rejected.append(RejectedCandidate(attempts - 1, 0, f"undecodable completion: {exc}"))
            continue
        for cand_index, obj in enumerate(candidates):
            if len(accepted) >= job.count:
                break
            context_raw = obj.get(F_CONTEXT) if isinstance(obj, dict) else None
            digest = _context_digest(context_raw) if isinstance(context_raw, str) else None
            try:
                sample = _decode_sample(
                    obj,
                    index=cand_index,
                    fallback_id=f"gen_{digest[:12]}" if digest else f"gen_{attempts}_{cand_index}",
                    scenarios=None,
                    diags=None,
                )
            except (DecodeError, MalformedReference) as exc:
                rejected.append(RejectedCandidate(attempts - 1, cand_index, f"decode: {exc}"))
                continue
            diags = chainlang.validate_chain(sample.annotation.chain, registry)
            if diags:
                kinds = ", ".join(sorted({d.kind for d in diags}))
                rejected.append(RejectedCandidate(attempts - 1, cand_index, f"validation: {kinds}"))
                continue
            if isinstance(job.strategy, ScoreAware):
                if sample.annotation.score.value != job.strategy.score:
                    rejected.append(
                        RejectedCandidate(attempts - 1, cand_index, "strategy mismatch: wrong score")
                    )
                    continue
            else:
                if sample.scenario is None:
                    sample = replace(sample, scenario=job.strategy.label)
                elif sample.scenario != job.strategy.label:
                    rejected.append(
                        RejectedCandidate(attempts - 1, cand_index, "strategy mismatch: wrong scenario")
                    )
                    continue
            if digest in digests:
                rejected.append(RejectedCandidate(attempts - 1, cand_index, "duplicate context"))
                continue
            digests.add(digest)
            accepted.append(sample)
    return GenerationResult(
        accepted=accepted,
        rejected=rejected,
        attempts=attempts,
        budget_exhausted=exhausted and len(accepted) < job.count,
    )


@dataclass
class DatasetStats:
    n_samples: int
    by_score: dict[int, int]
    by_chain_length: dict[int, int]
    by_scenario: dict[str, int]
    by_tool: dict[str, int]

    def render(self) -> str:
        lines = [f"samples: {self.n_samples}"]
        lines.append("score distribution:")
        for score in sorted(self.by_score):
            lines.append(f"  {score}: {self.by_score[score]}")
        lines.append("chain-length distribution:")
        for length in sorted(self.by_chain_length):
            lines.append(f"  {length}: {self.by_chain_length[length]}")
        if self.by_scenario:
            lines.append("scenario distribution:")
            for label in sorted(self.by_scenario):
                lines.append(f"  {label}: {self.by_scenario[label]}")
        if self.by_tool:
            lines.append("tool usage:")
            for name, count in sorted(self.by_tool.items(), key=lambda kv: (-kv[1], kv[0])):
                lines.append(f"  {name}: {count}")
        return "\n".join(lines)


def stats(dataset: Dataset) -> DatasetStats:
    """Distribution counts per scenario, score, chain length, and tool."""
    by_score: Counter[int] = Counter()
    by_length: Counter[int] = Counter()
    by_scenario: Counter[str] = Counter()
    by_tool: Counter[str] = Counter()
    for sample in dataset:
        by_score[sample.annotation.score.value] += 1
        by_length[len(sample.annotation.chain)] += 1
        if sample.scenario is not None:
            by_scenario[sample.scenario] += 1
        for call in sample.annotation.chain:
            by_tool[call.name] += 1
    return DatasetStats(
        n_samples=len(dataset),
        by_score=dict(by_score),
        by_chain_length=dict(by_length),
        by_scenario=dict(by_scenario),
        by_tool=dict(by_tool),
    )


def read_persona_pool(path: Union[str, Path]) -> list[str]:
    """Plain-text persona pool, one persona per line; blank lines ignored."""
    personas = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if text:
                personas.append(text)
    return personas
