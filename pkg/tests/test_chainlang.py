import json
import random
import string

import pytest

from ambientagent.chainlang import (
    parse_arg,
    parse_chain,
    serialize_chain,
    validate_chain,
)
from ambientagent.core import (
    D_FORWARD_REFERENCE,
    D_MISSING_PARAM,
    D_UNKNOWN_FIELD,
    D_UNKNOWN_PARAM,
    D_UNKNOWN_TOOL,
    LiteralArg,
    ResultRef,
    ToolCall,
    ToolChain,
)
from ambientagent.errors import DecodeError, MalformedReference

from conftest import chain_of


def test_parse_arg_reference():
    assert parse_arg("$RESULT(get_current_gps_coordinates.city)") == ResultRef(
        "get_current_gps_coordinates", "city"
    )


def test_parse_arg_literal():
    assert parse_arg("this weekend") == LiteralArg("this weekend")


@pytest.mark.parametrize(
    "bad",
    ["$RESULT(gps)", "$RESULT(", "$RESULT()", "$RESULT(a.b", "$RESULT(a.b) ", "$RESULT(a.b)x", "$RESULT(a..b)", "$RESULT(1a.b)"],
)
def test_parse_arg_malformed(bad):
    with pytest.raises(MalformedReference):
        parse_arg(bad)


def test_parse_arg_totality_on_non_prefixed_text():
    # anything not beginning with $RESULT( is a literal, verbatim
    rng = random.Random(7)
    population = string.printable
    for _ in range(300):
        text = "".join(rng.choice(population) for _ in range(rng.randint(0, 30)))
        if text.startswith("$RESULT("):
            continue
        assert parse_arg(text) == LiteralArg(text)
    assert parse_arg("city of $RESULT(a.b)") == LiteralArg("city of $RESULT(a.b)")


def test_parse_chain_none_variants():
    for raw in ("None", "none", "  NONE  "):
        assert parse_chain(raw) == ToolChain.empty()


def test_parse_chain_shipped_four_call_chain(bench):
    chain = bench.by_id()["sample_001"].annotation.chain
    assert chain.tool_names() == (
        "get_current_gps_coordinates",
        "get_city_weather",
        "get_current_datetime",
        "check_agenda_time_conflict",
    )
    weather = chain.calls[1]
    assert weather.args["city"] == ResultRef("get_current_gps_coordinates", "city")
    assert weather.args["time"] == LiteralArg("this weekend")
    assert chain.calls[0].args == {} and chain.calls[3].args == {}


def test_parse_chain_errors():
    with pytest.raises(DecodeError):
        parse_chain("{}")
    with pytest.raises(DecodeError):
        parse_chain("[1]")
    with pytest.raises(DecodeError):
        parse_chain('[{"desc": "missing name", "params": "None"}]')
    with pytest.raises(DecodeError):
        parse_chain('[{"name": "x", "params": 3}]')
    with pytest.raises(DecodeError):
        parse_chain('[{"name": "x", "params": {"a": 1}}]')
    with pytest.raises(DecodeError):
        parse_chain("not json at all [")


def test_parse_chain_reports_call_index_for_bad_reference():
    raw = json.dumps([
        {"name": "get_current_gps_coordinates", "params": "None"},
        {"name": "get_city_weather", "params": {"city": "$RESULT(gps)", "time": "now"}},
    ])
    with pytest.raises(MalformedReference) as err:
        parse_chain(raw)
    assert err.value.call_index == 1


def test_serialize_empty_chain(registry):
    assert serialize_chain(ToolChain.empty(), registry) == "None"


def test_serialize_renders_reference_form(registry):
    chain = chain_of(
        "get_current_gps_coordinates",
        ToolCall(
            "get_city_weather",
            {"city": ResultRef("get_current_gps_coordinates", "city"), "time": LiteralArg("now")},
        ),
    )
    text = serialize_chain(chain, registry)
    assert "$RESULT(get_current_gps_coordinates.city)" in text
    assert json.loads(text)[0]["desc"]  # descriptions regenerated from the registry


def test_roundtrip_shipped_chains(bench, registry):
    for sample in bench:
        chain = sample.annotation.chain
        assert parse_chain(serialize_chain(chain, registry)) == chain


def test_params_none_string_roundtrip(registry):
    text = serialize_chain(chain_of("get_current_datetime"), registry)
    assert json.loads(text)[0]["params"] == "None"


def test_validate_shipped_chains_clean(bench, registry):
    for sample in bench:
        assert validate_chain(sample.annotation.chain, registry) == []


def test_validate_forward_reference(registry):
    chain = chain_of(
        ToolCall(
            "get_city_weather",
            {"city": ResultRef("get_current_gps_coordinates", "city"), "time": LiteralArg("now")},
        ),
        "get_current_gps_coordinates",
    )
    kinds = [d.kind for d in validate_chain(chain, registry)]
    assert kinds == [D_FORWARD_REFERENCE]


def test_validate_unknown_tool(registry):
    kinds = [d.kind for d in validate_chain(chain_of("get_whether"), registry)]
    assert kinds == [D_UNKNOWN_TOOL]


def test_validate_missing_and_unknown_params(registry):
    chain = chain_of(ToolCall("get_city_weather", {"city": LiteralArg("x"), "extra": LiteralArg("y")}))
    kinds = {d.kind for d in validate_chain(chain, registry)}
    assert kinds == {D_MISSING_PARAM, D_UNKNOWN_PARAM}


def test_validate_unknown_result_field(registry):
    chain = chain_of(
        ToolCall("get_city_weather", {"city": LiteralArg("x"), "time": LiteralArg("now")}),
        ToolCall("wikipedia_search", {"query": ResultRef("get_city_weather", "city")}),
    )
    kinds = [d.kind for d in validate_chain(chain, registry)]
    assert kinds == [D_UNKNOWN_FIELD]


def test_diagnostics_carry_call_index(registry):
    chain = chain_of("get_current_datetime", "get_whether")
    diags = validate_chain(chain, registry)
    assert diags[0].call_index == 1
