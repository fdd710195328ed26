import itertools

import pytest

from ambientagent.core import (
    AgentOutput,
    ContextBundle,
    GateConfig,
    LiteralArg,
    PersonaSet,
    ProactiveScore,
    ResultRef,
    ToolCall,
    ToolChain,
    assemble_context,
    needs_proactive,
)
from ambientagent.errors import AllPartsMissing

from conftest import chain_of


def test_gate_examples():
    assert needs_proactive(ProactiveScore(5), GateConfig(3)) is True
    assert needs_proactive(ProactiveScore(1), GateConfig(3)) is False
    assert needs_proactive(ProactiveScore(3), GateConfig(3)) is True


def test_gate_threshold_duality_exhaustive():
    # 20 cases: fires exactly when score >= threshold
    for score, threshold in itertools.product(range(1, 6), range(2, 6)):
        fired = needs_proactive(ProactiveScore(score), GateConfig(threshold))
        assert fired == (score >= threshold)
        assert (not fired) == (score < threshold)


def test_gate_monotone_in_score():
    for threshold in range(2, 6):
        gate = GateConfig(threshold)
        results = [needs_proactive(ProactiveScore(s), gate) for s in range(1, 6)]
        assert results == sorted(results)


@pytest.mark.parametrize("bad", [0, 6, -1, 100, "3", 3.0, True])
def test_score_rejects_out_of_scale(bad):
    with pytest.raises(ValueError):
        ProactiveScore(bad)


def test_score_accepts_full_scale():
    assert [ProactiveScore(s).value for s in range(1, 6)] == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("bad", [1, 6, 0, "3"])
def test_gate_threshold_bounds(bad):
    with pytest.raises(ValueError):
        GateConfig(bad)


def test_assemble_single_part():
    bundle = assemble_context(visual="user at bus stop")
    assert bundle.combined == "Visual information: user at bus stop"
    assert bundle.audio is None and bundle.notifications is None


def test_assemble_ordering_visual_then_audio():
    bundle = assemble_context(visual="sees a bus", audio="hears an announcement")
    assert bundle.combined.index("sees a bus") < bundle.combined.index("hears an announcement")
    assert bundle.combined.startswith("Visual information:")
    assert "Audio information: hears an announcement" in bundle.combined


def test_assemble_all_missing():
    with pytest.raises(AllPartsMissing):
        assemble_context()


def test_assemble_presence_patterns_distinct():
    text = "same text"
    patterns = [p for p in itertools.product([None, text], repeat=3) if any(v is not None for v in p)]
    rendered = [assemble_context(*p).combined for p in patterns]
    assert len(set(rendered)) == len(rendered)


def test_bundle_rejects_non_verbatim_combined():
    with pytest.raises(ValueError):
        ContextBundle(combined="something else", visual="the visual text")


def test_bundle_rejects_out_of_order_parts():
    with pytest.raises(ValueError):
        ContextBundle(combined="B then A", visual="A", audio="B")


def test_bundle_without_parts_is_legal():
    # loaded samples carry only the combined text
    ContextBundle(combined="any stored context text")


def test_personas_reject_blank_entries():
    with pytest.raises(ValueError):
        PersonaSet(("a valid persona", "   "))
    assert len(PersonaSet(())) == 0


def test_agent_output_rejects_low_score_with_actions():
    chain = chain_of("get_current_datetime")
    for score in (1, 2):
        with pytest.raises(ValueError):
            AgentOutput(score=ProactiveScore(score), chain=chain)
        with pytest.raises(ValueError):
            AgentOutput(score=ProactiveScore(score), response="hello")
    # score 3 with a chain is fine
    AgentOutput(score=ProactiveScore(3), chain=chain, response="hello")


def test_result_ref_validates_identifiers():
    ResultRef("get_current_gps_coordinates", "city")
    with pytest.raises(ValueError):
        ResultRef("1bad", "city")
    with pytest.raises(ValueError):
        ResultRef("tool", "bad-field")


def test_tool_call_validates_name():
    with pytest.raises(ValueError):
        ToolCall("not a name")
    call = ToolCall("ok_tool", {"x": LiteralArg("v")})
    assert call.args["x"] == LiteralArg("v")


def test_chain_basics():
    empty = ToolChain.empty()
    assert len(empty) == 0 and not empty
    chain = chain_of("a_tool", "b_tool")
    assert chain.tool_names() == ("a_tool", "b_tool")
    assert list(chain)[0].name == "a_tool"
