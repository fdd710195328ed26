"""Tool registry and deterministic mock execution.

The registry describes the tools an agent may plan with: names, prose
descriptions, parameters, and the named fields each result exposes. Mock
execution is driven by a :class:`WorldFixture` so a given (fixture, tool,
args) triple always yields an identical :class:`ToolResult`. Live APIs are
deliberately out of scope; the fixture file is the single source of world
state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

import yaml

from .core import D_MISSING_PARAM, D_UNKNOWN_PARAM, Diagnostic, IDENT_RE
from .errors import SimulatedFailure, UnknownTool


def data_path(name: str) -> Path:
    """Path of a packaged data file (registry, world fixture, sample sets)."""
    return Path(str(resources.files("ambientagent") / "data" / name))


@dataclass(frozen=True)
class ParamSpec:
    """One tool parameter."""

    name: str
    description: str
    required: bool = True


@dataclass(frozen=True)
class ToolDescriptor:
    """A tool's public contract: params in, named result fields out."""

    name: str
    description: str
    params: tuple[ParamSpec, ...] = ()
    output_fields: tuple[str, ...] = ("text",)

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "output_fields", tuple(self.output_fields))
        if not IDENT_RE.match(self.name):
            raise ValueError(f"tool name must be a snake_case identifier: {self.name!r}")
        if "text" not in self.output_fields:
            raise ValueError(f"tool {self.name!r} must expose a 'text' output field")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"tool {self.name!r} has duplicate parameter names")

    def required_params(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params if p.required)

    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)


@dataclass(frozen=True)
class ToolRegistry:
    """Immutable name -> descriptor map."""

    tools: dict[str, ToolDescriptor]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tools", dict(self.tools))

    @classmethod
    def of(cls, descriptors: Iterable[ToolDescriptor]) -> "ToolRegistry":
        out: dict[str, ToolDescriptor] = {}
        for desc in descriptors:
            if desc.name in out:
                raise ValueError(f"duplicate tool in registry: {desc.name!r}")
            out[desc.name] = desc
        return cls(out)

    def lookup(self, name: str) -> ToolDescriptor:
        try:
            return self.tools[name]
        except KeyError:
            raise UnknownTool(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.tools

    def __len__(self) -> int:
        return len(self.tools)

    def names(self) -> tuple[str, ...]:
        return tuple(self.tools)


def load_registry(path: str | Path) -> ToolRegistry:
    """Load a registry from its YAML config file."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("tools"), list):
        raise ValueError(f"registry config {path} must contain a top-level 'tools' list")
    descriptors = []
    for entry in doc["tools"]:
        params = tuple(
            ParamSpec(p["name"], p.get("description", ""), bool(p.get("required", True)))
            for p in entry.get("params") or []
        )
        descriptors.append(
            ToolDescriptor(
                name=entry["name"],
                description=str(entry.get("description", "")).strip(),
                params=params,
                output_fields=tuple(entry.get("output_fields") or ("text",)),
            )
        )
    return ToolRegistry.of(descriptors)


@lru_cache(maxsize=1)
def registry_default() -> ToolRegistry:
    """The shipped twenty-tool registry."""
    return load_registry(data_path("registry.yaml"))


def validate_args(descriptor: ToolDescriptor, args: Mapping[str, str]) -> list[Diagnostic]:
    """Check an argument map against a descriptor.

    Returns one diagnostic per violation (missing required parameter,
    unknown parameter name); an empty list means the args are acceptable.
    """
    diags: list[Diagnostic] = []
    known = set(descriptor.param_names())
    for required in descriptor.required_params():
        if required not in args:
            diags.append(
                Diagnostic(
                    D_MISSING_PARAM,
                    f"{descriptor.name} requires parameter {required!r}",
                    param=required,
                )
            )
    for name in args:
        if name not in known:
            diags.append(
                Diagnostic(
                    D_UNKNOWN_PARAM,
                    f"{descriptor.name} has no parameter {name!r}",
                    param=name,
                )
            )
    return diags


@dataclass(frozen=True)
class ToolResult:
    """Named result fields of one call; "text" is always present."""

    fields: dict[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields", dict(self.fields))
        if "text" not in self.fields:
            raise ValueError("tool results must include a 'text' field")

    @property
    def text(self) -> str:
        return self.fields["text"]


@dataclass(frozen=True)
class AgendaEvent:
    event: str
    time: str


@dataclass(frozen=True)
class CannedResponse:
    tool: str
    args: dict[str, str]
    fields: dict[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", dict(self.args))
        object.__setattr__(self, "fields", dict(self.fields))


@dataclass(frozen=True)
class FailureRule:
    tool: str
    args: Optional[dict[str, str]]
    message: str

    def __post_init__(self) -> None:
        if self.args is not None:
            object.__setattr__(self, "args", dict(self.args))


@dataclass(frozen=True)
class WorldFixture:
    """Frozen world state backing mock execution."""

    clock: datetime
    city: str
    coordinates: str
    weather: dict[tuple[str, str], str] = field(default_factory=dict)
    agenda: tuple[AgendaEvent, ...] = ()
    canned: tuple[CannedResponse, ...] = ()
    failures: tuple[FailureRule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "weather", dict(self.weather))
        object.__setattr__(self, "agenda", tuple(self.agenda))
        object.__setattr__(self, "canned", tuple(self.canned))
        object.__setattr__(self, "failures", tuple(self.failures))


def load_world(path: str | Path) -> WorldFixture:
    """Load a world fixture from its YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    location = doc.get("location") or {}
    weather = {
        (str(row["city"]).strip(), str(row["time"]).strip()): str(row["text"])
        for row in doc.get("weather") or []
    }
    agenda = tuple(
        AgendaEvent(str(row["event"]), str(row["time"])) for row in doc.get("agenda") or []
    )
    canned = []
    for row in doc.get("canned") or []:
        fields = {str(k): str(v) for k, v in (row.get("fields") or {}).items()}
        if "text" in row:
            fields.setdefault("text", str(row["text"]))
        canned.append(
            CannedResponse(
                tool=str(row["tool"]),
                args={str(k): str(v) for k, v in (row.get("args") or {}).items()},
                fields=fields,
            )
        )
    failures = tuple(
        FailureRule(
            tool=str(row["tool"]),
            args=None
            if row.get("args") is None
            else {str(k): str(v) for k, v in row["args"].items()},
            message=str(row.get("message", "simulated failure")),
        )
        for row in doc.get("failures") or []
    )
    clock = doc.get("clock", "2025-01-01T00:00:00")
    return WorldFixture(
        clock=datetime.fromisoformat(str(clock)),
        city=str(location.get("city", "Springfield")),
        coordinates=str(location.get("coordinates", "0.0,0.0")),
        weather=weather,
        agenda=agenda,
        canned=tuple(canned),
        failures=failures,
    )


@lru_cache(maxsize=1)
def default_world() -> WorldFixture:
    return load_world(data_path("world.yaml"))


def _norm_args(args: Mapping[str, str]) -> dict[str, str]:
    return {k: v.strip() for k, v in args.items()}


def _default_text(name: str, args: Mapping[str, str]) -> str:
    if not args:
        return f"{name}: completed."
    signature = ", ".join(f"{k}={args[k]}" for k in sorted(args))
    return f"{name}: completed ({signature})."


def _builtin_fields(fixture: WorldFixture, name: str, args: dict[str, str]) -> Optional[dict[str, str]]:
    """World-state-backed behaviors for the tools the fixture models directly."""
    if name == "get_current_gps_coordinates":
        return {
            "text": f"GPS coordinates: {fixture.coordinates} ({fixture.city}).",
            "city": fixture.city,
            "coordinates": fixture.coordinates,
        }
    if name == "get_current_datetime":
        stamp = fixture.clock.strftime("%Y-%m-%d %H:%M")
        return {"text": f"Current date and time: {stamp}."}
    if name == "get_city_weather":
        city = args.get("city", "").strip()
        when = args.get("time", "").strip()
        text = fixture.weather.get(
            (city, when), f"Weather for {city} at {when}: mild, 22C, mostly clear."
        )
        return {"text": text}
    if name == "check_agenda_time_conflict":
        if not fixture.agenda:
            summary = "The agenda is empty."
        else:
            listing = "; ".join(f"{e.event} at {e.time}" for e in fixture.agenda)
            summary = f"Agenda: {listing}."
        when = args.get("time", "").strip()
        if not when:
            return {"text": f"{summary} No time given, so no conflict check was performed."}
        hits = [e for e in fixture.agenda if when in e.time or e.time in when]
        if hits:
            return {"text": f"{summary} Conflict at {when}: {hits[0].event}."}
        return {"text": f"{summary} No conflict at {when}."}
    return None


def invoke(
    registry: ToolRegistry,
    fixture: WorldFixture,
    name: str,
    args: Mapping[str, str],
) -> ToolResult:
    """Run one mock call. Pure in (fixture, name, args).

    Resolution order: fixture failure rules, canned responses keyed by
    normalized args, world-state builtins, then the deterministic default
    derived from the tool name and sorted args. The result always exposes
    every output field the descriptor declares.
    """
    descriptor = registry.lookup(name)
    norm = _norm_args(args)

    for rule in fixture.failures:
        if rule.tool == name and (rule.args is None or _norm_args(rule.args) == norm):
            raise SimulatedFailure(f"{name}: {rule.message}")

    fields: Optional[dict[str, str]] = None
    for entry in fixture.canned:
        if entry.tool == name and _norm_args(entry.args) == norm:
            fields = dict(entry.fields)
            break
    if fields is None:
        fields = _builtin_fields(fixture, name, norm)
    if fields is None:
        fields = {}

    fields.setdefault("text", _default_text(name, norm))
    for declared in descriptor.output_fields:
        fields.setdefault(declared, f"{name}.{declared}: {_default_text(name, norm)}")
    return ToolResult(fields)
