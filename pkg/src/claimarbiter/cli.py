"""Command-line interface.

Exit codes: 0 when a verdict was reached (or an evaluation completed),
1 on operational errors, 2 when a single verified claim ends Unverifiable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from claimarbiter.config import build_gateway, build_provider, load_settings
from claimarbiter.core import Claim, Stance
from claimarbiter.errors import PipelineError
from claimarbiter.evaluation import evaluate_records, load_dataset
from claimarbiter.pipeline import VerdictRecord, verify_batch, verify_claim

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNVERIFIABLE = 2


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="INI config file")
    parser.add_argument("--replay", metavar="DIR",
                        help="answer model calls from this cassette directory")
    parser.add_argument("--record", metavar="DIR",
                        help="append model responses to a cassette in this directory")
    parser.add_argument("--fixtures", metavar="DIR",
                        help="serve search results from this fixture directory")
    parser.add_argument("--tau", metavar="T",
                        help="agreement gate threshold, e.g. 0.7 or 7/10")
    parser.add_argument("--max-rounds", type=int, metavar="M",
                        help="debate round cap")
    parser.add_argument("--stage1-only", action="store_true",
                        help="never debate; escalated claims end unverifiable")
    parser.add_argument("--jobs", type=int, default=1, metavar="N",
                        help="claim-level parallelism for batch runs")
    parser.add_argument("--out", default="out", metavar="DIR",
                        help="directory for records and reports")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="claimarbiter",
        description="Verify health claims against web evidence in two stages.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    verify = commands.add_parser("verify", help="verify a single claim")
    verify.add_argument("claim", help="claim text to verify")
    verify.add_argument("--claim-id", help="identifier for the claim record")
    _add_run_options(verify)

    evaluate = commands.add_parser("evaluate", help="run a labeled dataset and score it")
    evaluate.add_argument("dataset", help="line-delimited JSON dataset file")
    _add_run_options(evaluate)

    inspect = commands.add_parser("inspect", help="pretty-print a verdict record")
    inspect.add_argument("record", help="verdict record JSON file")
    return parser


def _fraction_display(value) -> str:
    if value is None:
        return "-"
    return f"{value} ({float(value):.4f})"


def cmd_verify(args: argparse.Namespace) -> int:
    settings = load_settings(args.config, tau=args.tau, max_rounds=args.max_rounds)
    gateway = build_gateway(settings, replay=args.replay, record=args.record)
    provider = build_provider(settings, fixtures=args.fixtures)
    claim_id = args.claim_id or "claim-" + hashlib.sha256(
        args.claim.encode("utf-8")
    ).hexdigest()[:12]
    claim = Claim(id=claim_id, text=args.claim)

    record = verify_claim(claim, settings.pipeline, gateway, provider,
                          stage1_only=args.stage1_only)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    record_path = out_dir / f"{claim.id}.json"
    record_path.write_text(record.to_json(), encoding="utf-8")

    print(f"claim: {claim.id}")
    if record.verdict is not None:
        print(f"verdict: {record.verdict.value}")
        print(f"decided_by: {record.decided_by.value}")
    else:
        print("verdict: unverifiable")
        print(f"reason: {record.unverifiable_reason}")
    print(f"sigma: {_fraction_display(record.sigma)}")
    print(f"rounds_used: {record.rounds_used if record.rounds_used is not None else '-'}")
    print(f"record: {record_path}")
    return EXIT_OK if record.verdict is not None else EXIT_UNVERIFIABLE


def cmd_evaluate(args: argparse.Namespace) -> int:
    # reporting pulls in matplotlib; keep it off the verify path
    from claimarbiter.reporting import (
        format_metric_table,
        render_report_figures,
        write_results_csv,
    )

    settings = load_settings(args.config, tau=args.tau, max_rounds=args.max_rounds)
    gateway = build_gateway(settings, replay=args.replay, record=args.record)
    provider = build_provider(settings, fixtures=args.fixtures)
    dataset = load_dataset(args.dataset)

    records = verify_batch(dataset.claims, settings.pipeline, gateway, provider,
                           jobs=args.jobs, stage1_only=args.stage1_only)

    out_dir = Path(args.out)
    records_dir = out_dir / "records"
    records_dir.mkdir(parents=True, exist_ok=True)
    for record in records:
        (records_dir / f"{record.claim_id}.json").write_text(
            record.to_json(), encoding="utf-8"
        )

    report = evaluate_records(records, dataset)
    report_payload = {
        "dataset": dataset.name,
        "config": settings.pipeline.as_dict(),
        "metrics": report.to_dict(),
    }
    (out_dir / "report.json").write_text(
        json.dumps(report_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    table = format_metric_table(report)
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
    write_results_csv(records, dataset, out_dir / "results.csv")
    figures = render_report_figures(
        report, records, float(settings.pipeline.tau), out_dir / "figures"
    )

    print(f"dataset: {dataset.name} ({len(dataset)} claims)")
    print(table)
    print(f"records: {records_dir}")
    print(f"report: {out_dir / 'report.json'}")
    print(f"results: {out_dir / 'results.csv'}")
    for figure in figures:
        print(f"figure: {figure}")
    return EXIT_OK


def _render_audit_event(event) -> list[str]:
    data = event.data
    kind = event.kind
    if kind == "entities":
        return ["entities: " + ", ".join(data.get("entities", []))]
    if kind == "queries":
        return ["queries:"] + [
            f"  [{query['origin_rank']}] {query['text']}" for query in data.get("queries", [])
        ]
    if kind == "query_shortfall":
        return [f"query shortfall: produced {data['produced']} of {data['requested']}"]
    if kind == "article":
        sources = ",".join(str(s) for s in data.get("source_queries", []))
        return [f"article: {data['url']} (queries {sources}, {data.get('body_chars', '?')} chars)"]
    if kind == "article_dropped":
        return [f"article dropped: {data['url']} ({data['reason']})"]
    if kind == "assessment":
        attrs = ", ".join(data.get("attributes", [])) or "none"
        return [
            f"assessment: {data['url']}"
            f" r={data['relevance']} w={data['weight']} v={data['verdict']:+d} [{attrs}]"
        ]
    if kind == "score":
        lines = ["agreement score:"]
        for term in data.get("terms", []):
            lines.append(
                f"  {term['url']}: r={term['relevance']} w={term['weight']}"
                f" v={term['verdict']:+d} -> {term['term']:+d}"
            )
        lines.append(
            f"  Z = {data['normalizer_z']}, sigma = {data['sigma']}"
            f" ({data['contributing_count']} contributing)"
        )
        return lines
    if kind == "gate":
        return [f"gate: tau={data['tau']} -> {data['decision']}"]
    if kind == "zero_normalizer":
        return ["zero normalizer: no relevant weighted article, score undefined"]
    if kind == "partition":
        def side(name):
            return ", ".join(f"{m['url']} (w={m['weight']})" for m in data.get(name, [])) or "none"
        return [f"partition supporting: {side('supporting')}",
                f"partition refuting: {side('refuting')}"]
    if kind == "evidence_prep":
        detail = f" ({data['detail']})" if data.get("detail") else ""
        return [f"evidence prep: {data['step']} {data['url']}{detail}"]
    if kind == "brief":
        header = f"brief ({data['stance']}):"
        return [header] + ["  " + line for line in data.get("text", "").splitlines()]
    if kind == "statement":
        return [f"[round {data['round']}] {data['author']}: {data['text']}"]
    if kind == "judge_decision":
        forced = " (forced)" if data.get("forced") else ""
        rationale = f" -- {data['rationale']}" if data.get("rationale") else ""
        return [f"[round {data['round']}] judge: {data['outcome']}{forced}{rationale}"]
    if kind == "unverifiable":
        return [f"unverifiable: {data.get('error', '')}: {data.get('reason', '')}"]
    if kind == "llm_call":
        status = "ok" if data.get("ok") else "malformed"
        return [
            f"llm call: {data['template']} attempt {data.get('attempt', 1)}"
            f" {status} [{data['digest'][:12]}]"
        ]
    return [f"{kind}: {json.dumps(data, sort_keys=True)}"]


def cmd_inspect(args: argparse.Namespace) -> int:
    record_path = Path(args.record)
    if not record_path.exists():
        raise FileNotFoundError(f"record file not found: {record_path}")
    record = VerdictRecord.from_json(record_path.read_text(encoding="utf-8"))

    print(f"claim {record.claim_id}: {record.claim_text}")
    if record.verdict is not None:
        forced = " (forced)" if record.forced else ""
        print(f"verdict: {record.verdict.value} via {record.decided_by.value}{forced}")
    else:
        print(f"verdict: unverifiable ({record.unverifiable_reason})")
    print(f"sigma: {_fraction_display(record.sigma)}")
    if record.rounds_used is not None:
        print(f"rounds_used: {record.rounds_used}")
    print("config: " + json.dumps(record.config, sort_keys=True))
    print()
    print("audit trail:")
    for event in record.audit:
        for line in _render_audit_event(event):
            print(f"  {event.seq:>3} | {line}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    handlers = {"verify": cmd_verify, "evaluate": cmd_evaluate, "inspect": cmd_inspect}
    try:
        return handlers[args.command](args)
    except (PipelineError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
