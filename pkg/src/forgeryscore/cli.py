"""Command-line interface.

    forgeryscore score      --pred P --gt G [--out LOG]
    forgeryscore evaluate   --pred P --gt G [--out METRICS.json] [--mf1-css-substitute]
    forgeryscore validate   --pred P [--out DIAG.jsonl]
    forgeryscore advantages --rewards LOG --group-size N [--epsilon E] [--out ADV.json]

Exit codes: 0 ok, 1 validation failures, 2 input/schema errors,
3 embedding-service errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

from . import __version__
from .cct import Finding, Severity, ValidationDiagnostics, parse_trace, validate
from .config import CliConfig, load_config
from .corpus import (
    SCHEMA_VERSION,
    dumps_line,
    join_corpora,
    load_bertscore_sidecar,
    load_ground_truth,
    load_predictions,
    load_reward_log,
    reward_log_row,
)
from .embedder import text_similarity
from .errors import (
    DegenerateRegion,
    EmbeddingUnavailable,
    ForgeryScoreError,
    ProtocolViolation,
    ReportSyntax,
    SchemaViolation,
    ShapeMismatch,
    UnknownVerdict,
)
from .grpo import batch_advantages, grouped_advantages
from .metrics import EvalSample, summarize
from .parser import DEFAULT_KEYWORDS, VerdictKeywords, extract_sections, parse_output
from .reward import total_reward

logger = logging.getLogger("forgeryscore")

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_SERVICE = 0, 1, 2, 3

T = TypeVar("T")
R = TypeVar("R")


def _pmap(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    """Ordered map over a thread pool; output order always matches input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _effective_config(args) -> CliConfig:
    return load_config(args.config, {"embedder": getattr(args, "embedder", None)})


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _load_pairs(args):
    preds = load_predictions(args.pred)
    gts = load_ground_truth(args.gt)
    return join_corpora(preds, gts, allow_partial=args.allow_partial)


def cmd_score(args) -> int:
    cfg = _effective_config(args)
    pairs = _load_pairs(args)
    embedder = cfg.make_embedder()
    chash = cfg.config_hash()

    def score(pair):
        pred, gt = pair
        return total_reward(pred.raw_output, gt, cfg.reward, embedder, cfg.keywords)

    breakdowns = _pmap(score, pairs, args.jobs)
    log = "".join(
        dumps_line(reward_log_row(p.sample_id, b.to_dict(), chash, p.group_id)) for (p, _), b in zip(pairs, breakdowns)
    )
    n = len(breakdowns)
    components = ("r_total", "r_format", "r_grounding", "r_explanation", "r_cls", "r_num", "r_iou", "miou")
    means = {f"mean_{c}": (math.fsum(getattr(b, c) for b in breakdowns) / n if n else None) for c in components}
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": chash,
        "config": cfg.to_dict(),
        "n_scored": n,
        "n_unparseable": sum(1 for b in breakdowns if b.parse_error),
        **means,
    }
    summary_text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write(args.out, log)
        sys.stdout.write(summary_text)
    else:
        sys.stdout.write(log)
        sys.stderr.write(summary_text)
    return EXIT_OK


def _eval_sample(pred, gt, cfg: CliConfig, embedder) -> tuple[EvalSample, float]:
    try:
        _, report = parse_output(pred.raw_output, cfg.keywords)
    except (ReportSyntax, UnknownVerdict, DegenerateRegion):
        return EvalSample(gt, None, (), ""), 0.0
    sim = text_similarity(report.rationale, gt.gt_rationale, embedder)
    return EvalSample(gt, report.verdict, report.regions, report.rationale), sim


def cmd_evaluate(args) -> int:
    cfg = _effective_config(args)
    pairs = _load_pairs(args)
    if not pairs:
        raise SchemaViolation("no joined samples to evaluate")
    embedder = cfg.make_embedder()
    sidecar = load_bertscore_sidecar(args.bertscore) if args.bertscore else None
    results = _pmap(lambda pg: _eval_sample(pg[0], pg[1], cfg, embedder), pairs, args.jobs)
    samples = [s for s, _ in results]
    summary = summarize(
        samples,
        embedder,
        bertscore=sidecar,
        css_substitute=args.mf1_css_substitute,
        css_values=[v for _, v in results],
    )
    for msg in summary.diagnostics:
        logger.warning(msg)
    chash = cfg.config_hash()
    doc = summary.to_json(schema_version=SCHEMA_VERSION, config_hash=chash, config=cfg.to_dict())
    table = summary.to_table(args.name) + f"config_hash {chash}\n"
    sys.stdout.write(table)
    if args.out:
        _write(args.out, doc)
    else:
        sys.stdout.write(doc)
    return EXIT_OK


def validate_output(
    raw: str, cue_threshold: float, keywords: VerdictKeywords = DEFAULT_KEYWORDS
) -> ValidationDiagnostics:
    """Diagnostics for one raw model output, including report parse failures."""
    sections = extract_sections(raw)
    try:
        _, report = parse_output(raw, keywords)
    except (ReportSyntax, UnknownVerdict, DegenerateRegion) as e:
        return ValidationDiagnostics((Finding(Severity.ERROR, "REPORT_UNPARSEABLE", f"{type(e).__name__}: {e}", "report"),))
    diag = validate(parse_trace(sections.think_text, cue_threshold), report)
    if sections.think_text is None:
        diag = ValidationDiagnostics(
            (Finding(Severity.ERROR, "THINK_MISSING", "no complete <think> section", "think"),) + diag.findings
        )
    return diag


def cmd_validate(args) -> int:
    cfg = _effective_config(args)
    preds = load_predictions(args.pred)
    diags = _pmap(lambda p: validate_output(p.raw_output, cfg.cue_threshold, cfg.keywords), preds, args.jobs)
    lines = []
    n_bad = 0
    for p, d in zip(preds, diags):
        n_bad += not d.structurally_valid
        lines.append(dumps_line({"sample_id": p.sample_id, **d.to_dict()}))
    _write(args.out, "".join(lines))
    sys.stderr.write(f"{len(preds) - n_bad}/{len(preds)} records valid\n")
    return EXIT_INVALID if n_bad else EXIT_OK


def cmd_advantages(args) -> int:
    rows = load_reward_log(args.rewards)
    rewards = [float(r["r_total"]) for r in rows]
    if args.group_size is None:
        if not rows or any(r.get("group_id") is None for r in rows):
            raise ShapeMismatch("--group-size is required unless every record carries a group_id")
        adv = grouped_advantages(rewards, [r["group_id"] for r in rows], args.epsilon)
    else:
        adv = batch_advantages(rewards, args.group_size, args.epsilon)
    _write(args.out, json.dumps(adv) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forgeryscore", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, gt=True):
        p.add_argument("--pred", required=True, help="predictions JSONL")
        if gt:
            p.add_argument("--gt", required=True, help="ground-truth JSONL")
            p.add_argument("--allow-partial", action="store_true", help="evaluate the id intersection instead of failing")
            p.add_argument("--embedder", choices=("fallback", "remote"), help="override the configured embedder")
        p.add_argument("--config", help="TOML or JSON config file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads (default: CPU count)")

    p = sub.add_parser("score", help="per-sample reward log")
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="corpus benchmark metrics")
    common(p)
    p.add_argument("--mf1-css-substitute", action="store_true", help="use CSS in M-F1 when BERTScore F1 is absent")
    p.add_argument("--bertscore", help="sidecar JSONL of {sample_id, bertscore_f1}")
    p.add_argument("--name", default="model", help="row label in the text table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate", help="reasoning-trace diagnostics")
    common(p, gt=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("advantages", help="group-relative advantages from a reward log")
    p.add_argument("--rewards", required=True, help="reward log JSONL or JSON array of rewards")
    p.add_argument("--group-size", type=int, help="rollouts per group (omit to group by group_id)")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_advantages)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (EmbeddingUnavailable, ProtocolViolation) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SERVICE
    except (ForgeryScoreError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
