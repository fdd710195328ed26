"""Operator command line.

Subcommands: validate, run, eval, split, gen, export-sft, stats, infer,
tools. Exit codes: 0 success, 1 diagnostics or id mismatches, 2 I/O,
decode, or configuration failures. Settings may come from a YAML config
file (--config) with flags taking precedence; credentials only ever come
from the environment variable named in the backend config.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import chainlang, dataset as ds, evalsuite, reasoner
from .backends import (
    BackendConfig,
    KIND_FIXED,
    KIND_REMOTE,
    KIND_REPLAY,
    make_backend,
)
from .core import GateConfig
from .errors import ConfigError, DecodeError, HarnessError, IdMismatch
from .executor import trace_to_dict
from .toolset import (
    ToolRegistry,
    WorldFixture,
    data_path,
    load_registry,
    load_world,
)

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_FAILURE = 2


def _registry(path: Optional[str]) -> ToolRegistry:
    return load_registry(path if path else data_path("registry.yaml"))


def _world(path: Optional[str]) -> WorldFixture:
    return load_world(path if path else data_path("world.yaml"))


def _require(path: Optional[str], what: str) -> Path:
    if not path:
        raise ConfigError(f"missing required {what}")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} does not exist: {path}")
    return p


@dataclass
class RunConfig:
    dataset: str
    out: str
    registry: Optional[str] = None
    world: Optional[str] = None
    backend: BackendConfig = BackendConfig(kind=KIND_FIXED)
    threshold: int = 3
    parallelism: int = 1
    seed: int = 0
    timings: bool = False

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError("config file must contain a mapping")
    return doc


def _setting(args_value, config: dict, key: str, default):
    if args_value is not None:
        return args_value
    if key in config:
        return config[key]
    return default


def _backend_config(args: argparse.Namespace, config: dict) -> BackendConfig:
    section = config.get("backend", {}) if isinstance(config.get("backend"), dict) else {}

    def pick(flag, key, default):
        return _setting(flag, section, key, default)

    kind = pick(args.backend, "kind", KIND_FIXED)
    return BackendConfig(
        kind=kind,
        endpoint=pick(args.endpoint, "endpoint", None),
        model=pick(args.model, "model", None),
        credential_env=pick(args.credential_env, "credential_env", "AGENT_API_KEY"),
        temperature=float(pick(args.temperature, "temperature", 0.0)),
        max_output_tokens=int(pick(args.max_tokens, "max_output_tokens", 1024)),
        max_attempts=int(pick(args.max_attempts, "max_attempts", 3)),
        timeout_seconds=float(pick(args.timeout, "timeout_seconds", 30.0)),
        transcript_path=pick(args.transcript, "transcript", None),
        completion=pick(args.completion, "completion", None),
    )


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=[KIND_REMOTE, KIND_REPLAY, KIND_FIXED])
    parser.add_argument("--endpoint")
    parser.add_argument("--model")
    parser.add_argument("--credential-env", dest="credential_env")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--max-tokens", dest="max_tokens", type=int)
    parser.add_argument("--max-attempts", dest="max_attempts", type=int)
    parser.add_argument("--timeout", type=float)
    parser.add_argument("--transcript", help="replay transcript path")
    parser.add_argument("--completion", help="fixed-stub completion text")
    parser.add_argument("--config", help="YAML config file; flags override it")


def cmd_validate(args: argparse.Namespace) -> int:
    registry = _registry(args.registry)
    path = _require(args.dataset, "dataset path")
    report = ds.validate(path, registry)
    print(report.render())
    return EXIT_OK if report.ok else EXIT_DIAGNOSTICS


def cmd_tools(args: argparse.Namespace) -> int:
    registry = _registry(args.registry)
    for name in registry.names():
        descriptor = registry.lookup(name)
        params = ", ".join(
            p.name + ("" if p.required else "?") for p in descriptor.params
        ) or "-"
        print(f"{name}  [{params}]  {descriptor.description}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    run_config = RunConfig(
        dataset=str(_require(_setting(args.dataset, config, "dataset", None), "dataset path")),
        out=str(_setting(args.out, config, "out", "runs")),
        registry=_setting(args.registry, config, "registry", None),
        world=_setting(args.world, config, "world", None),
        backend=_backend_config(args, config),
        threshold=int(_setting(args.threshold, config, "threshold", 3)),
        parallelism=int(_setting(args.parallelism, config, "parallelism", 1)),
        seed=int(_setting(args.seed, config, "seed", 0)),
        timings=bool(args.timings),
    )
    registry = _registry(run_config.registry)
    world = _world(run_config.world)
    data = ds.load(run_config.dataset)
    backend = make_backend(run_config.backend)
    gate = GateConfig(run_config.threshold)

    out_dir = Path(run_config.out)
    (out_dir / "predictions").mkdir(parents=True, exist_ok=True)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)
    (out_dir / "reports").mkdir(parents=True, exist_ok=True)

    def run_one(sample):
        started = time.perf_counter()
        outcome = reasoner.run_sample(sample, backend, registry, world, gate)
        return outcome, time.perf_counter() - started

    if run_config.parallelism > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=run_config.parallelism) as pool:
            outcomes = list(pool.map(run_one, data.samples))
    else:
        outcomes = [run_one(sample) for sample in data.samples]

    preds = {}
    for outcome, _ in outcomes:
        preds[outcome.sample_id] = evalsuite.Prediction(
            id=outcome.sample_id,
            score=outcome.output.score,
            chain=outcome.output.chain,
            failed=outcome.failed,
        )
    predictions_path = out_dir / "predictions" / "predictions.jsonl"
    evalsuite.write_predictions(preds, predictions_path, registry)

    report_path = out_dir / "reports" / "run_report.jsonl"
    with open(report_path, "w", encoding="utf-8") as fh:
        header = {
            "kind": "header",
            "dataset": run_config.dataset,
            "n_samples": len(data),
            "threshold": run_config.threshold,
            "backend": run_config.backend.kind,
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for outcome, elapsed in outcomes:
            trace_ref = None
            if outcome.trace is not None:
                trace_ref = f"traces/{outcome.sample_id}.json"
                trace_path = out_dir / "traces" / f"{outcome.sample_id}.json"
                trace_path.write_text(
                    json.dumps(trace_to_dict(outcome.trace), ensure_ascii=False, indent=2) + "\n",
                    encoding="utf-8",
                )
            record = {
                "id": outcome.sample_id,
                "score": outcome.output.score.value,
                "tools": chainlang.serialize_chain(outcome.output.chain, registry),
                "parse_status": outcome.parse_status,
                "failed": outcome.failed,
                "backend_error": outcome.backend_error,
                "diagnostics": [d.render() for d in outcome.chain_diagnostics],
                "trace": trace_ref,
                "response": outcome.response,
            }
            if run_config.timings:
                record["elapsed_ms"] = round(elapsed * 1000.0, 3)
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    n_failed = sum(1 for outcome, _ in outcomes if outcome.failed)
    print(f"ran {len(outcomes)} samples ({n_failed} prediction failures)")
    print(f"predictions: {predictions_path}")
    print(f"run report:  {report_path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    data = ds.load(_require(args.dataset, "dataset path"))
    preds = evalsuite.load_predictions(_require(args.predictions, "predictions path"))
    report = evalsuite.evaluate(
        preds,
        data,
        boundary=args.boundary,
        averaging=args.averaging,
        args_granularity=args.args_granularity,
        levels=args.levels,
    )
    if args.out:
        evalsuite.write_report(report, args.out)
    if args.format == "records":
        print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    else:
        print(evalsuite.render_table(report))
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    data = ds.load(_require(args.dataset, "dataset path"))
    registry = _registry(args.registry)
    if args.holdout:
        mode: ds.SplitMode = ds.ScenarioHoldout(frozenset(args.holdout.split(",")))
    else:
        mode = ds.RandomRatio(args.ratio, args.seed)
    train, test = ds.split(data, mode)
    ds.save(train, args.out_train, registry)
    ds.save(test, args.out_test, registry)
    print(f"train: {len(train)} samples -> {args.out_train}")
    print(f"test:  {len(test)} samples -> {args.out_test}")
    return EXIT_OK


def cmd_export_sft(args: argparse.Namespace) -> int:
    data = ds.load(_require(args.dataset, "dataset path"))
    registry = _registry(args.registry)
    count = ds.export_sft(data, registry, args.out)
    print(f"wrote {count} training records -> {args.out}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    data = ds.load(_require(args.dataset, "dataset path"))
    print(ds.stats(data).render())
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    registry = _registry(args.registry)
    seeds = ds.load(_require(args.seeds, "seed dataset path"))
    personas = ds.read_persona_pool(args.personas) if args.personas else []
    target = args.strategy
    if target.startswith("score:"):
        strategy: ds.Strategy = ds.ScoreAware(int(target.split(":", 1)[1]))
    elif target.startswith("scenario:"):
        strategy = ds.ScenarioAware(target.split(":", 1)[1])
    else:
        raise ConfigError("strategy must look like score:<1-5> or scenario:<label>")
    job = ds.GenerationJob(
        strategy=strategy,
        exemplars=list(seeds.samples),
        personas=personas,
        count=args.count,
        seed=args.seed if args.seed is not None else 0,
        attempt_budget=args.budget,
    )
    backend = make_backend(_backend_config(args, config))
    result = ds.generate(job, backend, registry)
    ds.save(ds.Dataset(samples=result.accepted, scenarios=seeds.scenarios), args.out, registry)
    print(
        f"accepted {len(result.accepted)}/{job.count} after {result.attempts} attempts; "
        f"{len(result.rejected)} rejected"
    )
    for rej in result.rejected:
        print(f"  rejected (attempt {rej.attempt}, candidate {rej.candidate}): {rej.reason}")
    if result.budget_exhausted:
        print("warning: attempt budget exhausted before reaching the requested count")
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    registry = _registry(args.registry)
    world = _world(args.world)
    data = ds.load(_require(args.dataset, "dataset path"))
    by_id = data.by_id()
    if args.id:
        if args.id not in by_id:
            raise ConfigError(f"no sample with id {args.id!r}")
        sample = by_id[args.id]
    else:
        sample = data.samples[0]
    backend = make_backend(_backend_config(args, config))
    gate = GateConfig(args.threshold if args.threshold is not None else 3)
    outcome = reasoner.run_sample(sample, backend, registry, world, gate)

    print(f"sample:   {sample.id}")
    print(f"thought:  {outcome.output.thought or '(none)'}")
    print(f"score:    {outcome.output.score.value}  (parse: {outcome.parse_status})")
    print(f"chain:    {chainlang.serialize_chain(outcome.output.chain, registry)}")
    if outcome.trace is not None:
        status = "completed" if outcome.trace.completed else f"aborted at {outcome.trace.aborted_at}"
        print(f"trace:    {len(outcome.trace.steps)} steps ({status})")
        for step in outcome.trace.steps:
            if step.result is not None:
                print(f"  [{step.index}] {step.tool}({step.resolved_args}) -> {step.result.text}")
            else:
                print(f"  [{step.index}] {step.tool}({step.resolved_args}) !! {step.error}")
    else:
        print("trace:    (not proactive; nothing executed)")
    print(f"response: {outcome.response or '(none)'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ambientagent",
        description="Proactive-assistant benchmark harness: validate, run, evaluate, and grow datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check dataset format and tool chains")
    p.add_argument("--dataset", required=True)
    p.add_argument("--registry")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("tools", help="list the tool registry")
    p.add_argument("--registry")
    p.set_defaults(func=cmd_tools)

    p = sub.add_parser("run", help="run the reasoner over every sample")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--registry")
    p.add_argument("--world")
    p.add_argument("--threshold", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--timings", action="store_true", help="record per-sample latency")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a prediction file against ground truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--boundary", type=int, default=3)
    p.add_argument("--averaging", choices=[evalsuite.MACRO, evalsuite.MICRO], default=evalsuite.MACRO)
    p.add_argument(
        "--args-granularity",
        dest="args_granularity",
        choices=[evalsuite.SAMPLE_LEVEL, evalsuite.TOOL_LEVEL],
        default=evalsuite.SAMPLE_LEVEL,
    )
    p.add_argument("--levels", action="store_true", help="add per-chain-length sub-reports")
    p.add_argument("--format", choices=["table", "records"], default="table")
    p.add_argument("--out", help="write the structured report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="partition a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--registry")
    p.add_argument("--ratio", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", help="comma-separated scenario labels for the test side")
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("export-sft", help="write training triples")
    p.add_argument("--dataset", required=True)
    p.add_argument("--registry")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_sft)

    p = sub.add_parser("stats", help="dataset distribution report")
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen", help="synthesize new samples with verification")
    p.add_argument("--seeds", required=True, help="exemplar dataset path")
    p.add_argument("--personas", help="persona pool file (one per line)")
    p.add_argument("--registry")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--strategy", required=True, help="score:<1-5> or scenario:<label>")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int, help="attempt budget (default 5x count)")
    p.add_argument("--out", required=True)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("infer", help="run one sample and pretty-print the outcome")
    p.add_argument("--dataset", required=True)
    p.add_argument("--id")
    p.add_argument("--registry")
    p.add_argument("--world")
    p.add_argument("--threshold", type=int)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_infer)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IdMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except (HarnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    main_entry()
