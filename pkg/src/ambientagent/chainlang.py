"""Parser, validator, and serializer for the tool-chain wire format.

A stored chain is a string field that is either the literal ``None`` or a
JSON array of ``{"name", "desc", "params"}`` records. ``desc`` is display
metadata: it is ignored on parse and regenerated from the registry on
serialization. ``params`` is either the string ``None`` (no arguments) or
an object mapping parameter names to values.

Argument grammar: a value that is exactly ``$RESULT(tool_name.field)``
denotes a reference to the named field of an earlier call's result; any
value not beginning with ``$RESULT(`` is a verbatim literal. Values that
begin with ``$RESULT(`` but do not match the grammar are malformed. A
consequence of the format is that a literal spelled exactly like a
reference is not representable; no benchmark sample uses one.
"""

from __future__ import annotations

import json
import re
from typing import Optional

from .core import (
    ArgExpr,
    D_FORWARD_REFERENCE,
    D_UNKNOWN_FIELD,
    D_UNKNOWN_TOOL,
    Diagnostic,
    LiteralArg,
    ResultRef,
    ToolCall,
    ToolChain,
)
from .errors import DecodeError, MalformedReference, UnknownTool
from .toolset import ToolRegistry, validate_args

REF_PREFIX = "$RESULT("
_REF_RE = re.compile(r"\$RESULT\(([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\)\Z")

EMPTY_CHAIN_TEXT = "None"
_RECORD_KEYS = {"name", "desc", "params"}


def parse_arg(value: str) -> ArgExpr:
    """Classify one argument value.

    Exactly ``$RESULT(ident.ident)`` parses to a :class:`ResultRef`; text
    not beginning with ``$RESULT(`` is always a :class:`LiteralArg`;
    anything else raises :class:`MalformedReference`.
    """
    if not value.startswith(REF_PREFIX):
        return LiteralArg(value)
    match = _REF_RE.match(value)
    if match is None:
        raise MalformedReference(value)
    return ResultRef(match.group(1), match.group(2))


def render_arg(expr: ArgExpr) -> str:
    if isinstance(expr, ResultRef):
        return f"$RESULT({expr.tool}.{expr.field})"
    return expr.text


def _is_none_text(value: str) -> bool:
    return value.strip().lower() == "none"


def parse_chain(raw: str) -> ToolChain:
    """Decode the stored "Tools" text into a chain.

    ``None`` (case-insensitive, surrounding whitespace ignored) is the
    empty chain. Otherwise the text must be a JSON array of tool records;
    order is preserved. Raises :class:`DecodeError` for structural
    problems and :class:`MalformedReference` (with the call index) for bad
    argument references.
    """
    text = raw.strip()
    if _is_none_text(text):
        return ToolChain.empty()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"chain text is not valid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise DecodeError("chain text must be a JSON array of tool records")

    calls: list[ToolCall] = []
    for index, record in enumerate(doc):
        if not isinstance(record, dict):
            raise DecodeError("tool record must be an object", index=index)
        unknown = set(record) - _RECORD_KEYS
        if unknown:
            raise DecodeError(f"unexpected keys {sorted(unknown)}", index=index)
        name = record.get("name")
        if not isinstance(name, str) or not name:
            raise DecodeError("tool record is missing a 'name'", index=index)
        params = record.get("params")
        args: dict[str, ArgExpr] = {}
        if params is None or (isinstance(params, str) and _is_none_text(params)):
            pass
        elif isinstance(params, dict):
            for key, value in params.items():
                if not isinstance(value, str):
                    raise DecodeError(
                        f"parameter {key!r} must be a string", index=index
                    )
                try:
                    args[str(key)] = parse_arg(value)
                except MalformedReference as exc:
                    raise MalformedReference(exc.value, call_index=index) from None
        else:
            raise DecodeError("'params' must be an object or the string 'None'", index=index)
        try:
            calls.append(ToolCall(name, args))
        except ValueError as exc:
            raise DecodeError(str(exc), index=index) from None
    return ToolChain(tuple(calls))


def serialize_chain(chain: ToolChain, registry: ToolRegistry) -> str:
    """Render a chain back to the canonical wire text.

    The empty chain serializes to ``None``; descriptions come from the
    registry, so every tool name must resolve.
    """
    if not chain:
        return EMPTY_CHAIN_TEXT
    records = []
    for call in chain:
        descriptor = registry.lookup(call.name)
        params: object = EMPTY_CHAIN_TEXT if not call.args else {
            key: render_arg(value) for key, value in call.args.items()
        }
        records.append({"name": call.name, "desc": descriptor.description, "params": params})
    return json.dumps(records, ensure_ascii=False)


def validate_chain(chain: ToolChain, registry: ToolRegistry) -> list[Diagnostic]:
    """Check a chain against the registry and the reference-ordering rule.

    An empty list means the chain will execute on any fixture without
    unknown-tool, unresolved-reference, or missing-field errors. Each
    finding carries the offending call index.
    """
    diags: list[Diagnostic] = []
    earlier: set[str] = set()
    for index, call in enumerate(chain):
        descriptor = None
        try:
            descriptor = registry.lookup(call.name)
        except UnknownTool:
            diags.append(
                Diagnostic(D_UNKNOWN_TOOL, f"tool {call.name!r} is not in the registry", call_index=index)
            )
        if descriptor is not None:
            for diag in validate_args(descriptor, {k: "" for k in call.args}):
                diags.append(Diagnostic(diag.kind, diag.message, call_index=index, param=diag.param))
        for param, expr in call.args.items():
            if not isinstance(expr, ResultRef):
                continue
            if expr.tool not in earlier:
                diags.append(
                    Diagnostic(
                        D_FORWARD_REFERENCE,
                        f"parameter {param!r} references {expr.tool!r}, which has no earlier call",
                        call_index=index,
                        param=param,
                    )
                )
            elif expr.tool in registry and expr.field not in registry.lookup(expr.tool).output_fields:
                diags.append(
                    Diagnostic(
                        D_UNKNOWN_FIELD,
                        f"{expr.tool!r} results expose no field {expr.field!r}",
                        call_index=index,
                        param=param,
                    )
                )
        earlier.add(call.name)
    return diags


def chain_length(raw_or_chain: str | ToolChain) -> int:
    """Number of calls; accepts either wire text or a parsed chain."""
    if isinstance(raw_or_chain, ToolChain):
        return len(raw_or_chain)
    return len(parse_chain(raw_or_chain))
