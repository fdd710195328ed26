import pytest

from ambientagent.backends import write_transcript
from ambientagent.core import (
    AgentOutput,
    BenchmarkSample,
    ContextBundle,
    PersonaSet,
    ProactiveScore,
    ToolCall,
    ToolChain,
)
from ambientagent.dataset import build_transcript, bundled_samples_path, load
from ambientagent.evalsuite import Prediction
from ambientagent.toolset import default_world, registry_default


@pytest.fixture(scope="session")
def registry():
    return registry_default()


@pytest.fixture(scope="session")
def world():
    return default_world()


@pytest.fixture(scope="session")
def bench_path():
    return bundled_samples_path()


@pytest.fixture(scope="session")
def bench(bench_path):
    return load(bench_path)


@pytest.fixture()
def gt_transcript_path(bench, registry, tmp_path):
    """Replay transcript whose completions reproduce the annotations exactly."""
    path = tmp_path / "transcript.jsonl"
    write_transcript(build_transcript(bench, registry), path)
    return path


def chain_of(*calls) -> ToolChain:
    """Build a chain from tool names or (name, args) ToolCall instances."""
    built = []
    for call in calls:
        built.append(ToolCall(call) if isinstance(call, str) else call)
    return ToolChain(tuple(built))


def mk_sample(sample_id: str, score: int, chain: ToolChain = ToolChain(()), scenario=None) -> BenchmarkSample:
    response = None if score <= 2 else "ok"
    return BenchmarkSample(
        id=sample_id,
        context=ContextBundle(combined=f"context for {sample_id}"),
        personas=PersonaSet(()),
        annotation=AgentOutput(
            score=ProactiveScore(score),
            chain=chain,
            thought="t",
            response=response,
        ),
        scenario=scenario,
    )


def mk_pred(sample_id: str, score: int, chain: ToolChain = ToolChain(()), failed: bool = False) -> Prediction:
    return Prediction(id=sample_id, score=ProactiveScore(score), chain=chain, failed=failed)
