import pytest
import yaml

from ambientagent.core import D_MISSING_PARAM, D_UNKNOWN_PARAM
from ambientagent.errors import SimulatedFailure, UnknownTool
from ambientagent.toolset import (
    ParamSpec,
    ToolDescriptor,
    ToolRegistry,
    invoke,
    load_world,
    validate_args,
)

# Independent enumeration of the published tool table (one row per tool).
EXPECTED_TOOLS = [
    "get_city_weather",
    "get_current_datetime",
    "check_agenda_time_conflict",
    "wikipedia_search",
    "get_current_gps_coordinates",
    "get_online_product_price",
    "search_rednote",
    "visual_language_model",
    "google_map",
    "book_uber",
    "get_health_data",
    "get_medical_knowledge",
    "play_music",
    "add_to_agenda",
    "check_bus_schedule",
    "google_search",
    "set_timer",
    "query_stock",
    "add_meeting",
    "send_email",
]


def test_default_registry_has_twenty_tools(registry):
    assert len(registry) == 20
    for name in EXPECTED_TOOLS:
        registry.lookup(name)  # must resolve
    assert sorted(registry.names()) == sorted(EXPECTED_TOOLS)


def test_weather_params(registry):
    desc = registry.lookup("get_city_weather")
    assert [p.name for p in desc.params] == ["city", "time"]
    assert all(p.required for p in desc.params)


def test_datetime_takes_no_params(registry):
    assert registry.lookup("get_current_datetime").params == ()


def test_book_uber_params(registry):
    assert [p.name for p in registry.lookup("book_uber").params] == ["start", "destination"]


def test_agenda_time_is_optional(registry):
    # benchmark chains call this tool with no params at all
    desc = registry.lookup("check_agenda_time_conflict")
    assert [p.name for p in desc.params] == ["time"]
    assert desc.required_params() == ()


def test_gps_exposes_city_field(registry):
    assert "city" in registry.lookup("get_current_gps_coordinates").output_fields


def test_unknown_tool(registry):
    with pytest.raises(UnknownTool):
        registry.lookup("no_such_tool")


def test_validate_args_ok(registry):
    desc = registry.lookup("get_city_weather")
    assert validate_args(desc, {"city": "Hong Kong", "time": "now"}) == []


def test_validate_args_missing(registry):
    desc = registry.lookup("get_city_weather")
    diags = validate_args(desc, {"city": "Hong Kong"})
    assert [d.kind for d in diags] == [D_MISSING_PARAM]
    assert diags[0].param == "time"


def test_validate_args_unknown(registry):
    desc = registry.lookup("get_current_datetime")
    diags = validate_args(desc, {"foo": "x"})
    assert [d.kind for d in diags] == [D_UNKNOWN_PARAM]
    assert diags[0].param == "foo"


def test_gps_echoes_fixture_city(registry, world):
    result = invoke(registry, world, "get_current_gps_coordinates", {})
    assert result.fields["city"] == "Hong Kong"
    assert "text" in result.fields


def test_datetime_echoes_fixture_clock(registry, world):
    result = invoke(registry, world, "get_current_datetime", {})
    assert "2025-01-15" in result.text


def test_weather_table_lookup(registry, world):
    hit = invoke(registry, world, "get_city_weather", {"city": "Hong Kong", "time": "this weekend"})
    assert "Clear skies" in hit.text
    miss = invoke(registry, world, "get_city_weather", {"city": "Paris", "time": "tomorrow"})
    assert "Paris" in miss.text and "tomorrow" in miss.text


def test_agenda_conflict_summary(registry, world):
    listed = invoke(registry, world, "check_agenda_time_conflict", {})
    assert "Dentist appointment" in listed.text
    conflict = invoke(registry, world, "check_agenda_time_conflict", {"time": "2025-01-15 14:00"})
    assert "Conflict" in conflict.text
    clear = invoke(registry, world, "check_agenda_time_conflict", {"time": "2030-06-01 08:00"})
    assert "No conflict" in clear.text


def test_invoke_deterministic_for_every_tool(registry, world):
    for name in registry.names():
        desc = registry.lookup(name)
        args = {p.name: f"value-{i}" for i, p in enumerate(desc.params)}
        first = invoke(registry, world, name, args)
        second = invoke(registry, world, name, args)
        assert first == second


def test_results_expose_declared_fields(registry, world):
    for name in registry.names():
        desc = registry.lookup(name)
        args = {p.name: "x" for p in desc.params}
        result = invoke(registry, world, name, args)
        for declared in desc.output_fields:
            assert declared in result.fields


def test_canned_response_matches_on_normalized_args(registry, world):
    raw = invoke(registry, world, "check_bus_schedule", {"bus_stop": "  Central Station "})
    assert "Route 11" in raw.text


def test_simulated_failure(tmp_path, registry):
    doc = {
        "clock": "2025-01-15T09:00:00",
        "location": {"city": "Testville", "coordinates": "1,2"},
        "failures": [{"tool": "play_music", "message": "speaker offline"}],
    }
    path = tmp_path / "world.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    fixture = load_world(path)
    with pytest.raises(SimulatedFailure):
        invoke(registry, fixture, "play_music", {})
    # other tools still work
    assert invoke(registry, fixture, "get_current_gps_coordinates", {}).fields["city"] == "Testville"


def test_descriptor_invariants():
    with pytest.raises(ValueError):
        ToolDescriptor(name="x", description="d", output_fields=("city",))  # no text
    with pytest.raises(ValueError):
        ToolDescriptor(
            name="x",
            description="d",
            params=(ParamSpec("a", ""), ParamSpec("a", "")),
        )
    with pytest.raises(ValueError):
        ToolRegistry.of([
            ToolDescriptor(name="dup", description=""),
            ToolDescriptor(name="dup", description=""),
        ])
