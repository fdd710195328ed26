"""Runtime and benchmark harness for context-gated proactive assistants.

The pipeline: assemble sensory/persona context into prompts, generate a
decision with a pluggable backend, parse it into a scored tool plan, gate
on the user's sensitivity threshold, execute the plan against a
deterministic mock tool world, and score predictions with the metric
suite. The dataset module loads, validates, splits, exports, and grows
benchmark data.
"""

from .backends import (
    Backend,
    BackendConfig,
    FixedStubBackend,
    ReplayBackend,
    RemoteBackend,
    make_backend,
    write_transcript,
)
from .chainlang import parse_arg, parse_chain, serialize_chain, validate_chain
from .core import (
    AgentOutput,
    ArgExpr,
    BenchmarkSample,
    ContextBundle,
    Diagnostic,
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
from .dataset import (
    Dataset,
    GenerationJob,
    RandomRatio,
    ScenarioAware,
    ScenarioHoldout,
    ScoreAware,
    build_transcript,
    bundled_samples_path,
    export_sft,
    generate,
    load,
    reference_completion,
    save,
    split,
    stats,
    validate,
)
from .evalsuite import (
    MetricsReport,
    Prediction,
    evaluate,
    level_breakdown,
    load_predictions,
    render_table,
    write_predictions,
)
from .executor import ExecutionTrace, ResultStore, execute, resolve
from .prompts import PromptBundle, build_prompt, build_runtime_prompt, build_static_prompt
from .reasoner import (
    ParsedOutput,
    RunOutcome,
    extract_audio,
    extract_visual,
    parse_output,
    run_sample,
)
from .toolset import (
    ToolDescriptor,
    ToolRegistry,
    ToolResult,
    WorldFixture,
    default_world,
    invoke,
    load_registry,
    load_world,
    registry_default,
    validate_args,
)

__version__ = "0.1.0"
