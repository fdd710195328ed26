"""Sequential execution of planned tool chains against the mock world.

Calls run strictly in order; each argument is fully resolved before the
call is made, and any error aborts the run. Errors are carried in the
trace, never thrown past this module's boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .core import ArgExpr, LiteralArg, ResultRef, ToolChain
from .errors import (
    FieldMissing,
    SimulatedFailure,
    UnknownTool,
    UnresolvedReference,
)
from .toolset import ToolRegistry, ToolResult, WorldFixture, invoke, validate_args

E_UNRESOLVED_REFERENCE = "unresolved_reference"
E_FIELD_MISSING = "field_missing"
E_UNKNOWN_TOOL = "unknown_tool"
E_SIMULATED_FAILURE = "simulated_failure"
E_INVALID_ARGS = "invalid_args"


class ResultStore:
    """Most recent completed result per tool name."""

    def __init__(self) -> None:
        self._latest: dict[str, ToolResult] = {}

    def put(self, tool: str, result: ToolResult) -> None:
        self._latest[tool] = result

    def get(self, tool: str) -> ToolResult:
        try:
            return self._latest[tool]
        except KeyError:
            raise UnresolvedReference(tool) from None

    def __contains__(self, tool: str) -> bool:
        return tool in self._latest


def resolve(expr: ArgExpr, store: ResultStore) -> str:
    """Literal text, or the referenced field of the most recent result."""
    if isinstance(expr, LiteralArg):
        return expr.text
    result = store.get(expr.tool)
    if expr.field not in result.fields:
        raise FieldMissing(expr.tool, expr.field)
    return result.fields[expr.field]


@dataclass(frozen=True)
class ExecutionStep:
    index: int
    tool: str
    resolved_args: dict[str, str]
    result: Optional[ToolResult] = None
    error_kind: Optional[str] = None
    error: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "resolved_args", dict(self.resolved_args))


@dataclass(frozen=True)
class ExecutionTrace:
    """Steps actually taken (always a prefix of the chain) plus the outcome."""

    steps: tuple[ExecutionStep, ...]
    aborted_at: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.aborted_at is not None:
            last = self.steps[-1]
            if last.index != self.aborted_at or last.error_kind is None:
                raise ValueError("an aborted trace must end with the failing step")

    @property
    def completed(self) -> bool:
        return self.aborted_at is None


def execute(chain: ToolChain, registry: ToolRegistry, fixture: WorldFixture) -> ExecutionTrace:
    """Run a chain to completion or to its first error.

    Deterministic: equal (chain, registry, fixture) inputs produce equal
    traces. Chains that passed validation never abort here.
    """
    store = ResultStore()
    steps: list[ExecutionStep] = []
    for index, call in enumerate(chain):
        resolved: dict[str, str] = {}
        try:
            for param, expr in call.args.items():
                resolved[param] = resolve(expr, store)
            descriptor = registry.lookup(call.name)
            bad = validate_args(descriptor, resolved)
            if bad:
                raise _InvalidArgs("; ".join(d.message for d in bad))
            result = invoke(registry, fixture, call.name, resolved)
        except (UnresolvedReference, FieldMissing, UnknownTool, SimulatedFailure, _InvalidArgs) as exc:
            steps.append(
                ExecutionStep(
                    index=index,
                    tool=call.name,
                    resolved_args=resolved,
                    error_kind=_kind_of(exc),
                    error=str(exc),
                )
            )
            return ExecutionTrace(tuple(steps), aborted_at=index)
        store.put(call.name, result)
        steps.append(ExecutionStep(index=index, tool=call.name, resolved_args=resolved, result=result))
    return ExecutionTrace(tuple(steps))


class _InvalidArgs(Exception):
    pass


def _kind_of(exc: Exception) -> str:
    if isinstance(exc, UnresolvedReference):
        return E_UNRESOLVED_REFERENCE
    if isinstance(exc, FieldMissing):
        return E_FIELD_MISSING
    if isinstance(exc, UnknownTool):
        return E_UNKNOWN_TOOL
    if isinstance(exc, SimulatedFailure):
        return E_SIMULATED_FAILURE
    return E_INVALID_ARGS


def trace_to_dict(trace: ExecutionTrace) -> dict:
    """JSON-ready view of a trace (the schema of exported trace files)."""
    return {
        "status": "completed" if trace.completed else "aborted",
        "aborted_at": trace.aborted_at,
        "steps": [
            {
                "index": step.index,
                "tool": step.tool,
                "args": dict(step.resolved_args),
                "result": dict(step.result.fields) if step.result is not None else None,
                "error_kind": step.error_kind,
                "error": step.error,
            }
            for step in trace.steps
        ],
    }


def write_trace(trace: ExecutionTrace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(trace_to_dict(trace), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
