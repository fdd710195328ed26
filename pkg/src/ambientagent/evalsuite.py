"""Metric suite over prediction sets vs. ground truth.

Proactive-decision metrics (Acc-P, MD, FD, RMSE) binarize both sides at a
boundary score (default 3). Acc-P + MD + FD = 1 holds exactly, not just
within rounding: every fraction-valued metric is aggregated as an exact
``fractions.Fraction``, which also makes aggregation order-independent.
RMSE is the one real-valued metric (square root of the exact mean squared
error, over all samples).

Tool-calling metrics score only samples whose ground-truth chain is
non-empty. Precision/recall/F1 compare tool-name sets (duplicates
collapsed); an empty prediction against a non-empty truth scores zero.
Argument accuracy is all-or-nothing per sample over the correctly named
tools, with literals compared after trimming and case-folding and
references compared structurally. Macro averaging (per-sample metrics
averaged) is the default; micro is available for comparison, as is a
per-tool argument-accuracy denominator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Union

from . import chainlang
from .core import (
    ArgExpr,
    BenchmarkSample,
    LiteralArg,
    PROACTIVE_BOUNDARY,
    ProactiveScore,
    ToolCall,
    ToolChain,
)
from .dataset import Dataset
from .errors import IdMismatch
from .toolset import ToolRegistry

MACRO = "macro"
MICRO = "micro"
SAMPLE_LEVEL = "sample"
TOOL_LEVEL = "tool"

LEVEL_NAMES = ("level1", "level2", "level3")

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class Prediction:
    """One system output for one sample."""

    id: str
    score: ProactiveScore
    chain: ToolChain
    failed: bool = False


def load_predictions(path: Union[str, Path]) -> dict[str, Prediction]:
    """Read a prediction file: one ``{"id", "score", "tools"}`` record per line."""
    preds: dict[str, Prediction] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            pred = Prediction(
                id=str(record["id"]),
                score=ProactiveScore(int(record["score"])),
                chain=chainlang.parse_chain(str(record["tools"])),
                failed=bool(record.get("failed", False)),
            )
            if pred.id in preds:
                raise IdMismatch(f"duplicate prediction for id {pred.id!r}")
            preds[pred.id] = pred
    return preds


def write_predictions(
    preds: Mapping[str, Prediction], path: Union[str, Path], registry: ToolRegistry
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pred in preds.values():
            record: dict = {
                "id": pred.id,
                "score": pred.score.value,
                "tools": chainlang.serialize_chain(pred.chain, registry),
            }
            if pred.failed:
                record["failed"] = True
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class MetricsReport:
    """Exact metric values plus the knobs that produced them."""

    acc_p: Fraction
    md: Fraction
    fd: Fraction
    rmse: float
    precision: Fraction
    recall: Fraction
    f1: Fraction
    acc_args: Fraction
    n_samples: int
    n_tool_scored: int
    n_args_scored: int
    n_failures: int = 0
    boundary: int = PROACTIVE_BOUNDARY
    averaging: str = MACRO
    args_granularity: str = SAMPLE_LEVEL
    levels: Optional[dict[str, "MetricsReport"]] = None

    def to_dict(self) -> dict:
        out: dict = {}
        for name in ("acc_p", "md", "fd", "precision", "recall", "f1", "acc_args"):
            value: Fraction = getattr(self, name)
            out[name] = float(value)
            out[f"{name}_exact"] = str(value)
        out.update(
            rmse=self.rmse,
            n_samples=self.n_samples,
            n_tool_scored=self.n_tool_scored,
            n_args_scored=self.n_args_scored,
            n_failures=self.n_failures,
            boundary=self.boundary,
            averaging=self.averaging,
            args_granularity=self.args_granularity,
        )
        if self.levels is not None:
            out["levels"] = {name: report.to_dict() for name, report in self.levels.items()}
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        levels = doc.get("levels")
        return cls(
            acc_p=Fraction(doc["acc_p_exact"]),
            md=Fraction(doc["md_exact"]),
            fd=Fraction(doc["fd_exact"]),
            rmse=float(doc["rmse"]),
            precision=Fraction(doc["precision_exact"]),
            recall=Fraction(doc["recall_exact"]),
            f1=Fraction(doc["f1_exact"]),
            acc_args=Fraction(doc["acc_args_exact"]),
            n_samples=int(doc["n_samples"]),
            n_tool_scored=int(doc["n_tool_scored"]),
            n_args_scored=int(doc["n_args_scored"]),
            n_failures=int(doc.get("n_failures", 0)),
            boundary=int(doc.get("boundary", PROACTIVE_BOUNDARY)),
            averaging=str(doc.get("averaging", MACRO)),
            args_granularity=str(doc.get("args_granularity", SAMPLE_LEVEL)),
            levels=None
            if levels is None
            else {name: cls.from_dict(sub) for name, sub in levels.items()},
        )


def _check_ids(preds: Mapping[str, Prediction], gt: Mapping[str, BenchmarkSample]) -> None:
    if not gt:
        raise IdMismatch("the ground-truth set is empty")
    missing = sorted(set(gt) - set(preds))
    extra = sorted(set(preds) - set(gt))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing predictions for {missing[:5]}")
        if extra:
            parts.append(f"predictions for unknown ids {extra[:5]}")
        raise IdMismatch("; ".join(parts))


def _pairs(
    preds: Mapping[str, Prediction], gt: Mapping[str, BenchmarkSample]
) -> list[tuple[Prediction, BenchmarkSample]]:
    return [(preds[sample_id], gt[sample_id]) for sample_id in gt]


def proactive_metrics(
    preds: Mapping[str, Prediction],
    gt: Mapping[str, BenchmarkSample],
    boundary: int = PROACTIVE_BOUNDARY,
) -> tuple[Fraction, Fraction, Fraction, float]:
    """(accuracy, missed-detection rate, false-detection rate, RMSE).

    The three rates partition the sample set, so they sum to exactly 1.
    RMSE is over the raw 1-5 scores of all samples.
    """
    _check_ids(preds, gt)
    pairs = _pairs(preds, gt)
    n = len(pairs)
    n_md = n_fd = 0
    sq_sum = Fraction(0)
    for pred, sample in pairs:
        gt_on = sample.annotation.score.value >= boundary
        pred_on = pred.score.value >= boundary
        if gt_on and not pred_on:
            n_md += 1
        elif pred_on and not gt_on:
            n_fd += 1
        sq_sum += Fraction((pred.score.value - sample.annotation.score.value) ** 2)
    n_match = n - n_md - n_fd
    rmse = math.sqrt(float(sq_sum / n))
    return Fraction(n_match, n), Fraction(n_md, n), Fraction(n_fd, n), rmse


def _f1(p: Fraction, r: Fraction) -> Fraction:
    if p + r == 0:
        return ZERO
    return 2 * p * r / (p + r)


def tool_metrics(
    preds: Mapping[str, Prediction],
    gt: Mapping[str, BenchmarkSample],
    averaging: str = MACRO,
) -> tuple[Fraction, Fraction, Fraction, int]:
    """(precision, recall, F1, n scored) over samples with a non-empty truth chain.

    Comparison is on tool-name sets. With nothing to score, all three are 0.
    """
    _check_ids(preds, gt)
    scored = [
        (set(pred.chain.tool_names()), set(sample.annotation.chain.tool_names()))
        for pred, sample in _pairs(preds, gt)
        if sample.annotation.chain
    ]
    if not scored:
        return ZERO, ZERO, ZERO, 0
    if averaging == MICRO:
        hit = sum(len(p & g) for p, g in scored)
        n_pred = sum(len(p) for p, _ in scored)
        n_gt = sum(len(g) for _, g in scored)
        precision = Fraction(hit, n_pred) if n_pred else ZERO
        recall = Fraction(hit, n_gt)
        return precision, recall, _f1(precision, recall), len(scored)
    p_sum = r_sum = f_sum = Fraction(0)
    for pred_set, gt_set in scored:
        hit = len(pred_set & gt_set)
        p = Fraction(hit, len(pred_set)) if pred_set else ZERO
        r = Fraction(hit, len(gt_set))
        p_sum += p
        r_sum += r
        f_sum += _f1(p, r)
    n = len(scored)
    return p_sum / n, r_sum / n, f_sum / n, n


def _norm_expr(expr: ArgExpr) -> tuple:
    if isinstance(expr, LiteralArg):
        return ("lit", expr.text.strip().casefold())
    return ("ref", expr.tool, expr.field)


def _args_equal(pred_call: ToolCall, gt_call: ToolCall) -> bool:
    if set(pred_call.args) != set(gt_call.args):
        return False
    return all(_norm_expr(pred_call.args[k]) == _norm_expr(gt_call.args[k]) for k in gt_call.args)


def _first_by_name(chain: ToolChain) -> dict[str, ToolCall]:
    calls: dict[str, ToolCall] = {}
    for call in chain:
        calls.setdefault(call.name, call)
    return calls


def args_accuracy(
    preds: Mapping[str, Prediction],
    gt: Mapping[str, BenchmarkSample],
    granularity: str = SAMPLE_LEVEL,
) -> tuple[Fraction, int]:
    """All-or-nothing argument accuracy over the correctly named tools.

    Sample granularity (default): a sample counts only if it has at least
    one correctly named tool, and it is correct only if every such tool's
    arguments match exactly after normalization. Tool granularity scores
    each correctly named tool independently.
    """
    _check_ids(preds, gt)
    n_correct = 0
    n_scored = 0
    for pred, sample in _pairs(preds, gt):
        if not sample.annotation.chain:
            continue
        pred_calls = _first_by_name(pred.chain)
        gt_calls = _first_by_name(sample.annotation.chain)
        shared = set(pred_calls) & set(gt_calls)
        if not shared:
            continue
        if granularity == TOOL_LEVEL:
            for name in shared:
                n_scored += 1
                if _args_equal(pred_calls[name], gt_calls[name]):
                    n_correct += 1
        else:
            n_scored += 1
            if all(_args_equal(pred_calls[name], gt_calls[name]) for name in shared):
                n_correct += 1
    if n_scored == 0:
        return ZERO, 0
    return Fraction(n_correct, n_scored), n_scored


def evaluate(
    preds: Mapping[str, Prediction],
    dataset: Union[Dataset, Mapping[str, BenchmarkSample]],
    boundary: int = PROACTIVE_BOUNDARY,
    averaging: str = MACRO,
    args_granularity: str = SAMPLE_LEVEL,
    levels: bool = False,
) -> MetricsReport:
    """The full metric suite; optionally with per-chain-length level reports."""
    gt = dataset.by_id() if isinstance(dataset, Dataset) else dict(dataset)
    _check_ids(preds, gt)
    acc_p, md, fd, rmse = proactive_metrics(preds, gt, boundary)
    precision, recall, f1, n_tool = tool_metrics(preds, gt, averaging)
    acc_args, n_args = args_accuracy(preds, gt, args_granularity)
    level_reports = None
    if levels:
        level_reports = {}
        for name, id_set in _level_partition(gt).items():
            sub_gt = {i: gt[i] for i in id_set}
            sub_preds = {i: preds[i] for i in id_set}
            if sub_gt:
                level_reports[name] = evaluate(
                    sub_preds,
                    sub_gt,
                    boundary=boundary,
                    averaging=averaging,
                    args_granularity=args_granularity,
                )
            else:
                level_reports[name] = MetricsReport(
                    acc_p=ZERO, md=ZERO, fd=ZERO, rmse=0.0,
                    precision=ZERO, recall=ZERO, f1=ZERO, acc_args=ZERO,
                    n_samples=0, n_tool_scored=0, n_args_scored=0,
                    boundary=boundary, averaging=averaging, args_granularity=args_granularity,
                )
    return MetricsReport(
        acc_p=acc_p,
        md=md,
        fd=fd,
        rmse=rmse,
        precision=precision,
        recall=recall,
        f1=f1,
        acc_args=acc_args,
        n_samples=len(gt),
        n_tool_scored=n_tool,
        n_args_scored=n_args,
        n_failures=sum(1 for p in preds.values() if p.failed),
        boundary=boundary,
        averaging=averaging,
        args_granularity=args_granularity,
        levels=level_reports,
    )


def level_of(chain_length: int) -> str:
    """Bucket by ground-truth chain length: 0-1, exactly 2, and 3 or more tools."""
    if chain_length <= 1:
        return "level1"
    if chain_length == 2:
        return "level2"
    return "level3"


def _level_partition(gt: Mapping[str, BenchmarkSample]) -> dict[str, list[str]]:
    parts: dict[str, list[str]] = {name: [] for name in LEVEL_NAMES}
    for sample_id, sample in gt.items():
        parts[level_of(len(sample.annotation.chain))].append(sample_id)
    return parts


def level_breakdown(
    preds: Mapping[str, Prediction],
    gt: Mapping[str, BenchmarkSample],
    boundary: int = PROACTIVE_BOUNDARY,
    averaging: str = MACRO,
) -> dict[str, MetricsReport]:
    """Full metric suite per chain-length level."""
    report = evaluate(preds, gt, boundary=boundary, averaging=averaging, levels=True)
    assert report.levels is not None
    return report.levels


_COLUMNS = (
    ("Acc-P", "acc_p"),
    ("MD", "md"),
    ("FD", "fd"),
    ("RMSE", "rmse"),
    ("Precision", "precision"),
    ("Recall", "recall"),
    ("F1", "f1"),
    ("Acc-Args", "acc_args"),
)


def render_table(report: MetricsReport) -> str:
    """Aligned plain-text table, values rounded to three decimals for display."""

    def row(label: str, rep: MetricsReport) -> str:
        cells = [f"{label:<8}"]
        for _, attr in _COLUMNS:
            cells.append(f"{float(getattr(rep, attr)):>9.3f}")
        cells.append(f"{rep.n_samples:>6d}")
        return " ".join(cells)

    header = " ".join([f"{'':<8}"] + [f"{title:>9}" for title, _ in _COLUMNS] + [f"{'N':>6}"])
    lines = [
        f"boundary={report.boundary} averaging={report.averaging} "
        f"args_granularity={report.args_granularity} failures={report.n_failures}",
        header,
        row("overall", report),
    ]
    if report.levels:
        for name in LEVEL_NAMES:
            if name in report.levels:
                lines.append(row(name, report.levels[name]))
    return "\n".join(lines)


def write_report(report: MetricsReport, path: Union[str, Path]) -> None:
    """Structured report file; raw unrounded values are retained."""
    Path(path).write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def read_report(path: Union[str, Path]) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
