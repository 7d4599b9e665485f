"""Command-line entry points: index, rank, train, eval, explain.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error. Every
command is reproducible: identical inputs, config, and seed produce identical
outputs (no wall-clock anywhere; recency windows use the explicit --now).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline, report as report_mod, training
from .config import RunConfig, load_config, load_weights, with_overrides
from .errors import CheckpointError, DataFormatError, ImpactRankError
from .ingest import (
    fallback_ast_ingest,
    ingest_history,
    ingest_ndjson,
    load_snapshot,
    read_lines,
    save_snapshot,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - exit code 1, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="impactrank", description="Rank repository files by change-request impact.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--config", help="JSON config file mirroring the run configuration")
        p.add_argument("--weights", help="JSON file overriding the deterministic weights block")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--keyword-mode", choices=("local", "llm"), default=None)
        p.add_argument("--top-k", type=int, default=None)

    p_index = sub.add_parser("index", help="ingest NDJSON exports into a snapshot")
    p_index.add_argument("--files", help="files.ndjson path")
    p_index.add_argument("--symbols", help="symbols.ndjson path")
    p_index.add_argument("--calls", help="calls.ndjson path")
    p_index.add_argument("--history", help="history log path (optional)")
    p_index.add_argument("--fallback-ast", help="ingest directly from this source tree instead")
    p_index.add_argument("--now", type=int, default=None,
                         help="UTC seconds used for recency windows (or set in --config)")
    p_index.add_argument("--snapshot", required=True, help="snapshot output path")
    common(p_index)

    p_rank = sub.add_parser("rank", help="rank files for one change request")
    p_rank.add_argument("--snapshot", required=True)
    p_rank.add_argument("--model", help="model checkpoint; omit for deterministic-only ranking")
    p_rank.add_argument("--request", help="change request text")
    p_rank.add_argument("--request-file", help="JSON file with a change request object")
    p_rank.add_argument("--out-dir", help="write report.json here")
    common(p_rank)

    p_train = sub.add_parser("train", help="fit the attention model on a labeled corpus")
    p_train.add_argument("--snapshot", required=True)
    p_train.add_argument("--corpus", required=True, help="labeled-case NDJSON corpus")
    p_train.add_argument("--model", required=True, help="checkpoint output path")
    p_train.add_argument("--out-dir", help="write training log (train_log.ndjson) here")
    common(p_train)

    p_eval = sub.add_parser("eval", help="compare deterministic vs attention-refined rankings")
    p_eval.add_argument("--snapshot", required=True)
    p_eval.add_argument("--corpus", required=True)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--out-dir", help="write eval.json here")
    common(p_eval)

    p_explain = sub.add_parser("explain", help="rank plus attention analysis bundle")
    p_explain.add_argument("--snapshot", required=True)
    p_explain.add_argument("--model", required=True)
    p_explain.add_argument("--request", help="change request text")
    p_explain.add_argument("--request-file", help="JSON file with a change request object")
    p_explain.add_argument("--out-dir", required=True)
    p_explain.add_argument("--top-n", type=int, default=None, help="heatmap block size (default 25)")
    common(p_explain)

    return parser


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "weights", None):
        config = with_overrides(config, weights=load_weights(args.weights))
    return with_overrides(
        config,
        seed=getattr(args, "seed", None),
        keyword_mode=getattr(args, "keyword_mode", None),
        top_k=getattr(args, "top_k", None),
    )


def _require_paths(*paths: str | None) -> None:
    for path in paths:
        if path is not None and not Path(path).exists():
            raise DataFormatError(f"input path does not exist: {path}")


def _check_request_args(args) -> None:
    if bool(args.request) == bool(args.request_file):
        raise UsageError("exactly one of --request / --request-file is required")


def _load_request(args, now: int) -> pipeline.ChangeRequest:
    _check_request_args(args)
    if args.request:
        return pipeline.parse_request(args.request, default_ts=now)
    _require_paths(args.request_file)
    try:
        obj = json.loads(Path(args.request_file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"bad request file {args.request_file}: {exc}") from exc
    return pipeline.parse_request(obj, default_ts=now)


def cmd_index(args) -> int:
    config = _resolve_config(args)
    now = args.now if args.now is not None else config.now
    if now is None:
        raise UsageError("index requires --now (or a now instant in the config file)")
    if args.fallback_ast:
        _require_paths(args.fallback_ast, args.history)
        model = fallback_ast_ingest(args.fallback_ast, now=now)
    else:
        if not (args.files and args.symbols and args.calls):
            raise UsageError("index needs --files/--symbols/--calls or --fallback-ast")
        _require_paths(args.files, args.symbols, args.calls, args.history)
        with read_lines(args.files) as f, read_lines(args.symbols) as s, read_lines(args.calls) as c:
            model = ingest_ndjson(f, s, c, now=now)
    if args.history:
        with read_lines(args.history) as h:
            model.events_by_file.update(ingest_history(h, model.path_to_id, model.warnings))
    digest = save_snapshot(model, args.snapshot)
    print(f"indexed {len(model.files)} files, {len(model.call_edges)} call edges ({model.mode})")
    if model.warning_total():
        print(f"warnings: {dict(sorted(model.warnings.items()))}")
    print(f"snapshot {args.snapshot} content_hash={digest}")
    return EXIT_OK


def _print_report(rep: report_mod.RankingReport) -> None:
    print(f"request {rep.request_id}: top {len(rep.entries)} files")
    print(f"{'rank':>4}  {'final':>10}  {'determ':>10}  {'adjust':>10}  {'pagerank':>10}  path")
    for i, e in enumerate(rep.entries, start=1):
        print(
            f"{i:>4}  {e.final_score:>10.5f}  {e.deterministic:>10.5f}  "
            f"{e.adjustment:>10.5f}  {e.pagerank_term:>10.5f}  {e.path}"
        )


def cmd_rank(args) -> int:
    config = _resolve_config(args)
    _check_request_args(args)
    _require_paths(args.snapshot, args.model)
    model = load_snapshot(args.snapshot)
    request = _load_request(args, model.now)
    att_model = training.load_model(args.model) if args.model else None
    index = pipeline.RepositoryIndex(model, config)
    result = pipeline.rank_request(index, request, config, att_model)
    _print_report(result.report)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(result.report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def _load_cases(args, config: RunConfig) -> tuple[pipeline.RepositoryIndex, list]:
    _require_paths(args.snapshot, args.corpus)
    model = load_snapshot(args.snapshot)
    index = pipeline.RepositoryIndex(model, config)
    with read_lines(args.corpus) as lines:
        cases = pipeline.load_labeled_corpus(lines, index, config)
    if len(cases) < 3:
        raise DataFormatError(f"corpus resolved to {len(cases)} usable cases; need at least 3")
    return index, cases


def cmd_train(args) -> int:
    config = _resolve_config(args)
    if config.seed is None:
        raise UsageError("train requires --seed (or a seed in the config file)")
    _, cases = _load_cases(args, config)
    train_config = training.TrainConfig(
        **{
            **vars(config.train),
            "seed": config.seed,
            "pagerank_weight": config.pagerank_weight,
        }
    )
    model, log_rows = training.train(cases, train_config)
    training.save_model(model, args.model)
    print(f"checkpoint written to {args.model} "
          f"({model.head_count} heads, hidden {model.hidden_dim}, {len(log_rows)} epochs)")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        training.write_training_log(log_rows, out / "train_log.ndjson")
        print(f"training log written to {out / 'train_log.ndjson'}")

    _, val_cases, test_cases = training.temporal_split(cases, train_config.split)
    for name, split in (("val", val_cases), ("test", test_cases)):
        if not split:
            continue
        att = [(training.case_ranking(c, model), c.ground_truth) for c in split]
        recall10, _ = report_mod.mean_recall(att, 10)
        recall50, found50 = report_mod.mean_recall(att, 50)
        rr = report_mod.mrr(att)
        print(f"{name}: recall@10={recall10:.3f} recall@50={recall50:.3f} "
              f"all-found@50={found50:.3f} mrr={rr:.3f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _resolve_config(args)
    _require_paths(args.model)
    _, cases = _load_cases(args, config)
    att_model = training.load_model(args.model)

    per_case = []
    for case in cases:
        det_rank = training.case_ranking(case, None)
        att_rank = training.case_ranking(case, att_model)
        ids = case.candidate_ids or [str(i) for i in range(len(case.deterministic))]
        truth_ids = {ids[i] for i in case.ground_truth}
        per_case.append(
            {
                "request_id": case.request.request_id,
                "det_ranked": [ids[i] for i in det_rank],
                "att_ranked": [ids[i] for i in att_rank],
                "truth": sorted(truth_ids),
            }
        )

    def metrics(key: str) -> dict:
        pairs = [(c[key], set(c["truth"])) for c in per_case]
        recall10, found10 = report_mod.mean_recall(pairs, 10)
        recall50, found50 = report_mod.mean_recall(pairs, 50)
        return {
            "recall10": recall10,
            "recall50": recall50,
            "all_found10": found10,
            "all_found50": found50,
            "mrr": report_mod.mrr(pairs),
        }

    det = metrics("det_ranked")
    att = metrics("att_ranked")
    delta = {k: att[k] - det[k] for k in det}
    print(f"{'metric':<14}{'deterministic':>15}{'attention':>12}{'delta':>10}")
    for key in det:
        print(f"{key:<14}{det[key]:>15.4f}{att[key]:>12.4f}{delta[key]:>10.4f}")

    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {"cases": per_case, "deterministic": det, "attention": att, "delta": delta}
        (out / "eval.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"eval report written to {out / 'eval.json'}")
    return EXIT_OK


def cmd_explain(args) -> int:
    config = _resolve_config(args)
    _check_request_args(args)
    _require_paths(args.snapshot, args.model)
    model = load_snapshot(args.snapshot)
    request = _load_request(args, model.now)
    att_model = training.load_model(args.model)
    index = pipeline.RepositoryIndex(model, config)
    result = pipeline.rank_request(index, request, config, att_model)
    assert result.attention is not None
    top_n = args.top_n if args.top_n is not None else config.heatmap_top_n
    written = report_mod.write_report_bundle(
        args.out_dir,
        result.report,
        result.attention.averaged_attention,
        result.attention.per_head_attention,
        result.attention.attention_pagerank,
        result.order_indices,
        result.candidate_paths,
        top_n=top_n,
    )
    print(f"explain bundle in {args.out_dir}: {', '.join(written)}")
    return EXIT_OK


_COMMANDS = {
    "index": cmd_index,
    "rank": cmd_rank,
    "train": cmd_train,
    "eval": cmd_eval,
    "explain": cmd_explain,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ImpactRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - map anything unexpected to exit 3
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
