"""Prompt assembly.

Prompts have two layers: a static part (task instructions plus the full
toolset definition, constant for a fixed registry) and a runtime part
(personas plus context, varying per sample). Both renderings are
deterministic, byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ContextBundle, PersonaSet
from .executor import ExecutionTrace
from .toolset import ToolDescriptor, ToolRegistry

NO_PERSONA_MARKER = "(no persona available)"

TASK_INSTRUCTIONS = """\
You are a proactive personal assistant. You continuously share the user's \
perception through wearable devices and decide, without being asked, \
whether to step in and help. You receive the user's persona statements and \
a context report built from what they currently see and hear plus any \
device notifications.

Rate how strongly the situation warrants unprompted assistance on a scale \
from 1 to 5:
  1: no proactive help is warranted; stay silent.
  2: little potential for help; the need is not real yet; stay silent.
  3: moderate need; helpful information is available and worth surfacing.
  4: clear need; the user would likely welcome assistance now.
  5: strong need; assistance is clearly valuable right now.

With a score of 1 or 2 you must not act: plan no tools and give no \
response. With a score of 3 or higher, plan the chain of tools to run, in \
order, and draft a short, unobtrusive response for the user. Be \
conservative: interrupting without cause is worse than staying silent.\
"""

OUTPUT_FORMAT_SPEC = """\
Output format. Optionally begin with your reasoning wrapped in <think> and \
</think>. Then emit exactly one JSON object:
{"proactive_score": <integer 1-5>, "tools": <tool array or "None">, "response": <string or "None">}
Each entry of the tool array is {"name": "<tool_name>", "params": <object or "None">}. \
Parameter values are strings; to pass a named field of an earlier tool's \
result, use the exact form "$RESULT(tool_name.field)". Use "None" for \
params when a tool takes no arguments, and "None" for tools and response \
when the score is 1 or 2.\
"""

#: Exemplar scene descriptions for proactive-oriented visual extraction.
#: Five are included in the extraction prompt to pin detail and tone.
VISUAL_EXEMPLARS = (
    "The user stands at a bus stop on a wet street, looking down the road; "
    "a bus is pulling away about twenty meters ahead, and the shelter's "
    "timetable display is visible on the right.",
    "The user is in a gym free-weights area, sitting on a bench and tying "
    "a shoe; a rack of dumbbells and two occupied squat racks are in view.",
    "The user sits at a dining table with a plate of pasta, grilled "
    "chicken, and salad; a phone lies face up beside the plate.",
    "The user walks through a supermarket produce aisle pushing a cart "
    "holding milk and bread, pausing in front of the citrus shelf.",
    "The user is at an office desk with two monitors showing a calendar "
    "and an unread-email pane; a colleague approaches holding a laptop.",
)


def render_tool_block(descriptor: ToolDescriptor) -> str:
    lines = [f"- {descriptor.name}: {descriptor.description}"]
    if descriptor.params:
        rendered = "; ".join(
            f"{p.name} ({'required' if p.required else 'optional'}): {p.description}"
            for p in descriptor.params
        )
        lines.append(f"  parameters: {rendered}")
    else:
        lines.append("  parameters: none")
    lines.append(f"  result fields: {', '.join(descriptor.output_fields)}")
    return "\n".join(lines)


def build_static_prompt(registry: ToolRegistry) -> str:
    """Task instructions, every tool definition, and the output contract."""
    blocks = [TASK_INSTRUCTIONS, "Available tools:"]
    for name in registry.names():
        blocks.append(render_tool_block(registry.lookup(name)))
    blocks.append(OUTPUT_FORMAT_SPEC)
    return "\n\n".join(blocks)


def build_runtime_prompt(context: ContextBundle, personas: PersonaSet) -> str:
    """Personas section (possibly marked empty) followed by the context verbatim."""
    if len(personas):
        persona_block = "\n".join(f"- {entry}" for entry in personas)
    else:
        persona_block = NO_PERSONA_MARKER
    return f"User personas:\n{persona_block}\n\nContext: {context.combined}"


@dataclass(frozen=True)
class PromptBundle:
    """Static + runtime prompt for one sample."""

    static_part: str
    runtime_part: str

    @property
    def rendered(self) -> str:
        return f"{self.static_part}\n\n{self.runtime_part}"


def build_prompt(registry: ToolRegistry, context: ContextBundle, personas: PersonaSet) -> PromptBundle:
    return PromptBundle(build_static_prompt(registry), build_runtime_prompt(context, personas))


def build_synthesis_prompt(
    context: ContextBundle,
    personas: PersonaSet,
    thought: str | None,
    trace: ExecutionTrace,
) -> str:
    """Prompt for the final-response call: context, personas, thoughts, tool results."""
    results = "\n".join(
        f"- {step.tool}: {step.result.text}" for step in trace.steps if step.result is not None
    ) or "- (no tool results)"
    thought_block = thought or "(none recorded)"
    return (
        "You are a proactive personal assistant. Using the situation below, "
        "write one short, friendly, unobtrusive message for the user. Lead "
        "with the most useful finding; offer a follow-up only if natural.\n\n"
        f"{build_runtime_prompt(context, personas)}\n\n"
        f"Assistant reasoning so far: {thought_block}\n\n"
        f"Tool results:\n{results}\n\n"
        "Reply with the message text only."
    )


def render_template_response(trace: ExecutionTrace) -> str:
    """Deterministic fallback response when no synthesis backend is usable."""
    findings = [step for step in trace.steps if step.result is not None]
    if not findings:
        return "I looked into this but could not gather any tool results."
    body = " ".join(f"{step.tool.replace('_', ' ')}: {step.result.text}" for step in findings)
    return f"Here is what I found. {body}"


def build_visual_extraction_prompt(media_ref: str) -> str:
    """ICL prompt for proactive-oriented scene description of a video/image."""
    examples = "\n".join(f"{i + 1}. {text}" for i, text in enumerate(VISUAL_EXEMPLARS))
    return (
        "Describe the egocentric footage below for a proactive assistant. "
        "Focus on objective scene understanding and the cues that matter "
        "for deciding whether the wearer needs help: location, salient "
        "objects, and what the wearer is doing. Two to four sentences, "
        "matching the tone and level of detail of these examples:\n"
        f"{examples}\n\n"
        f"Footage: {media_ref}\n"
        "Description:"
    )


def build_audio_transcription_prompt(media_ref: str) -> str:
    return (
        "Transcribe the speech in the audio below. Return the transcript "
        "text only, attributing speakers as 'user' or 'other' when clear.\n\n"
        f"Audio: {media_ref}\n"
        "Transcript:"
    )


def build_generation_prompt(
    registry: ToolRegistry,
    directive: str,
    exemplar_records: list[str],
    personas: list[str],
) -> str:
    """Prompt for synthesizing new benchmark records.

    ``exemplar_records`` are pre-rendered JSON sample records; ``directive``
    states the scenario- or score-targeting constraint.
    """
    tool_blocks = "\n".join(render_tool_block(registry.lookup(name)) for name in registry.names())
    exemplars = "\n".join(exemplar_records) or "(none)"
    persona_block = "\n".join(f"- {p}" for p in personas) or "- (invent plausible personas)"
    return (
        "Create new records for a benchmark of proactive assistants.\n\n"
        "Record format: one JSON object per record with exactly these "
        'fields: "Context information" (string), "Personas" (array of '
        'strings), "Thoughts" (string), "Proactive score" (integer 1-5), '
        '"Tools" (string: either "None" or a JSON array of '
        '{"name", "desc", "params"} records), "Response" (string, "None" '
        'when the score is 1 or 2), and optionally "Scenario" (string). '
        'When the score is 1 or 2, both "Tools" and "Response" must be '
        'exactly "None"; otherwise plan a tool chain using only the tools '
        "defined below, with valid parameters, where later calls may use "
        '"$RESULT(tool_name.field)" to consume earlier results.\n\n'
        f"Targeting constraint: {directive}\n\n"
        f"Available tools:\n{tool_blocks}\n\n"
        f"Persona excerpts you may draw from:\n{persona_block}\n\n"
        f"Completed example records:\n{exemplars}\n\n"
        "Reply with a JSON array of new records. Vary settings, personas, "
        "and wording; do not copy the examples."
    )
