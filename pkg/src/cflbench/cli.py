"""Command-line front end: ``gen`` builds benchmark sets, ``eval`` runs a
model or baseline over them into a resumable journal, ``score`` turns
journals into report files, ``judge`` classifies completion strategies, and
``agreement`` compares two strategy-label files.

Every command is reproducible: flags, seeds, and inputs fully determine the
outputs (live-endpoint completions aside).  Exit codes: 0 success, 1 usage
error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from dataclasses import replace
from pathlib import Path

from . import dataset, gen, harness, metrics
from .grammar import EmptyLanguage

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _endpoint_args(p: argparse.ArgumentParser, prefix: str = "") -> None:
    p.add_argument(f"--{prefix}base-url", help="chat-completions endpoint base URL")
    p.add_argument(f"--{prefix}api-key-env", default="OPENAI_API_KEY",
                   help="environment variable holding the bearer key")
    p.add_argument(f"--{prefix}temperature", type=float, default=1.0)
    p.add_argument(f"--{prefix}top-p", type=float, default=1.0)
    p.add_argument(f"--{prefix}max-completion-tokens", type=int, default=None)
    p.add_argument(f"--{prefix}max-parallel", type=int, default=4)
    p.add_argument(f"--{prefix}max-retries", type=int, default=3)
    p.add_argument(f"--{prefix}backoff", type=float, default=1.0)
    p.add_argument(f"--{prefix}timeout", type=float, default=120.0)


def build_parser() -> _Parser:
    parser = _Parser(prog="cflbench")
    parser.add_argument("--workdir", default=".", help="base directory for relative paths")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen",
                       help="generate a decorrelated benchmark set")
    p.add_argument("--out", required=True, help="benchmark-set file (ndjson)")
    p.add_argument("--count", type=int, required=True, help="benchmarks to keep")
    p.add_argument("--cap", type=int, default=500, help="upper bound for all four size parameters")
    p.add_argument("--pool-factor", type=int, default=5,
                   help="oversampling factor before decorrelated selection")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negatives", choices=("unigram", "adversarial"), default="unigram")
    p.add_argument("--max-len", type=int, default=50)
    p.add_argument("--per-len-cap", type=int, default=10)
    p.add_argument("--retry-cap", type=int, default=100)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("eval", help="run a model or baseline")
    p.add_argument("--benchmarks", required=True)
    p.add_argument("--journal", required=True, help="resumable record journal (ndjson)")
    p.add_argument("--model", required=True,
                   help="endpoint model name, or baseline:{oracle,always-yes,always-no,random}")
    p.add_argument("--seed", type=int, default=0, help="seed for baseline:random")
    p.add_argument("--subsample-per-length", type=int, default=None,
                   help="keep at most N examples per length per type")
    p.add_argument("--subsample-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None, help="global parallelism cap")
    p.add_argument("--json", action="store_true")
    _endpoint_args(p)

    p = sub.add_parser("score", help="compute report files from journals")
    p.add_argument("--benchmarks", required=True)
    p.add_argument("--journal", action="append", required=True,
                   help="journal file (repeat for several models)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--partial", action="store_true",
                   help="accept journals that do not cover every example")
    p.add_argument("--token-limit", type=int, default=4096,
                   help="normalisation constant for the compute-by-length curve")
    p.add_argument("--labels", default=None, help="strategy-label file from `judge`")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("judge",
                       help="classify completion strategies with a judge model")
    p.add_argument("--journal", required=True)
    p.add_argument("--out", required=True, help="strategy-label file (ndjson)")
    p.add_argument("--judge-model", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--json", action="store_true")
    _endpoint_args(p, prefix="judge-")

    p = sub.add_parser("agreement",
                       help="fraction of matching categories between two label files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--json", action="store_true")

    return parser


def _resolve(workdir: str, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(workdir) / p


def _draw_params(rng: random.Random, cap: int) -> gen.GenParams:
    """One pool draw: every parameter uniform in [cap/10, cap], with the rule
    counts floored at the symbol counts they must anchor (a lexical rule per
    nonterminal keeps the draw productive, a nonlexical rule per nonterminal
    keeps it connected; draws below that collapse to near-empty grammars
    under reduction)."""
    lo = max(1, cap // 10)
    n_term = rng.randint(lo, cap)
    n_nonterm = rng.randint(lo, cap)
    lex_hi = min(cap, n_term * n_nonterm)
    nonlex_hi = min(cap, (n_nonterm + 1) * n_nonterm * n_nonterm)
    n_lex = rng.randint(min(max(lo, n_nonterm), lex_hi), lex_hi)
    n_nonlex = rng.randint(min(max(lo, n_nonterm), nonlex_hi), nonlex_hi)
    return gen.GenParams(n_term=n_term, n_nonterm=n_nonterm, n_lex=n_lex, n_nonlex=n_nonlex,
                         seed=rng.getrandbits(32))


def generate_with_retries(params: gen.GenParams, tries: int = 100):
    """Redraw with consecutive seeds until the language is nonempty.
    Returns (grammar, params actually used)."""
    for k in range(tries):
        attempt = replace(params, seed=params.seed + k)
        try:
            return gen.generate(attempt), attempt
        except EmptyLanguage:
            continue
    raise EmptyLanguage(f"no nonempty draw in {tries} seeds from {params}")


def _cmd_gen(args) -> int:
    rng = random.Random(args.seed)
    pool_size = args.count * args.pool_factor
    pool = []
    params_of = {}
    for _ in range(pool_size):
        grammar = used = None
        for _ in range(50):  # some parameter vectors are unviable; redraw
            try:
                grammar, used = generate_with_retries(_draw_params(rng, args.cap), tries=20)
                break
            except EmptyLanguage:
                continue
        if grammar is None:
            raise EmptyLanguage(f"no nonempty grammar found at cap {args.cap}")
        pool.append(grammar)
        params_of[id(grammar)] = used
    if pool_size > args.count and args.count >= 3:
        selected = gen.select_decorrelated(pool, args.count)
    else:
        selected = pool[: args.count]  # nothing to decorrelate below three

    benchmarks = []
    for grammar in selected:
        used = params_of[id(grammar)]
        plan = dataset.SamplingPlan(
            max_len=args.max_len,
            per_len_cap=args.per_len_cap,
            goal_total=2 * args.max_len * args.per_len_cap,
            retry_cap=args.retry_cap,
            seed=used.seed,
        )
        b = dataset.build_benchmark(grammar, used, plan, negatives=args.negatives)
        benchmarks.append(b)
        s = b.stats
        print(
            f"{b.grammar_id}  n_term={s.n_term} n_nonterm={s.n_nonterm} "
            f"n_lex={s.n_lex} n_nonlex={s.n_nonlex}  coverage={b.coverage:.3f}",
            file=sys.stderr,
        )

    out = _resolve(args.workdir, args.out)
    dataset.save_benchmark_set(benchmarks, out)
    coverages = [b.coverage for b in benchmarks]
    summary = {
        "out": str(out),
        "count": len(benchmarks),
        "objective": gen.correlation_objective(selected) if len(selected) >= 3 else None,
        "mean_coverage": sum(coverages) / len(coverages) if coverages else None,
        "over_90_coverage": sum(1 for c in coverages if c > 0.9),
    }
    print(json.dumps(summary) if args.json else
          f"wrote {summary['count']} benchmarks to {out} "
          f"(mean coverage {summary['mean_coverage']:.3f})")
    return 0


def _cmd_eval(args) -> int:
    benchmarks = dataset.load_benchmark_set(_resolve(args.workdir, args.benchmarks))
    baseline = harness.parse_model_spec(args.model, seed=args.seed)
    if baseline is None:
        if not args.base_url:
            raise UsageError("--base-url is required for endpoint models")
        parallel = args.max_parallel if args.jobs is None else min(args.max_parallel, args.jobs)
        model = harness.EndpointConfig(
            base_url=args.base_url,
            model_name=args.model,
            max_completion_tokens=args.max_completion_tokens,
            temperature=args.temperature,
            nucleus_p=args.top_p,
            max_parallel_requests=parallel,
            max_retries=args.max_retries,
            backoff=args.backoff,
            timeout=args.timeout,
            api_key_env=args.api_key_env,
        )
    else:
        model = baseline
    records = harness.run_eval(
        benchmarks,
        model,
        _resolve(args.workdir, args.journal),
        subsample=args.subsample_per_length,
        subsample_seed=args.subsample_seed,
    )
    unknown = sum(1 for r in records if r.prediction == harness.UNKNOWN)
    errors = sum(1 for r in records if r.error)
    summary = {"records": len(records), "unknown": unknown, "endpoint_errors": errors}
    print(json.dumps(summary) if args.json else
          f"{len(records)} records ({unknown} unknown, {errors} endpoint errors)")
    return 0


def _load_labels(path):
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _cmd_score(args) -> int:
    benchmarks = dataset.load_benchmark_set(_resolve(args.workdir, args.benchmarks))
    by_id = {b.grammar_id: b for b in benchmarks}
    records = []
    for jpath in args.journal:
        records.extend(harness.read_journal(_resolve(args.workdir, jpath)))
    if not records:
        raise metrics.EmptyInput("journals hold no records")
    unknown_gids = {r.grammar_id for r in records} - set(by_id)
    if unknown_gids:
        raise harness.JournalCorrupt(
            f"journal records reference grammars missing from the benchmark set: "
            f"{sorted(unknown_gids)[:3]}"
        )
    if not args.partial:
        per_model = metrics.group_by_model(records)
        want = {(b.grammar_id, str(i)) for b in benchmarks for i in range(len(b.examples))}
        for model, recs in per_model.items():
            have = {(r.grammar_id, r.example_id) for r in recs}
            if have != want:
                raise harness.JournalCorrupt(
                    f"journal for {model} covers {len(have)}/{len(want)} examples; "
                    "pass --partial to score anyway"
                )

    out_dir = _resolve(args.workdir, args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_model = metrics.group_by_model(records)

    summaries = metrics.summarize(records)
    summary_doc = [s.__dict__ for s in summaries]
    (out_dir / "summary.json").write_text(json.dumps(summary_doc, indent=2) + "\n")

    def write_csv(name, header, rows):
        with open(out_dir / name, "w", encoding="utf-8", newline="") as f:
            import csv as _csv

            w = _csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    rows = []
    for model, recs in sorted(per_model.items()):
        for bin_ in metrics.accuracy_by(recs, benchmarks, "n_nonlex"):
            rows.append([model, bin_.lo, bin_.hi, bin_.accuracy, bin_.sem, bin_.cells])
    write_csv("accuracy_by_nonlex.csv", ["model", "lo", "hi", "accuracy", "sem", "cells"], rows)

    rows = []
    for model, recs in sorted(per_model.items()):
        for bin_ in metrics.accuracy_by(recs, benchmarks, "length"):
            rows.append([model, bin_.lo, bin_.hi, bin_.accuracy, bin_.sem, bin_.cells])
    write_csv("accuracy_by_length.csv", ["model", "lo", "hi", "accuracy", "sem", "cells"], rows)

    rows = []
    for model, recs in sorted(per_model.items()):
        for pt in metrics.prediction_bias(recs):
            rows.append([model, pt.length, pt.positive_rate, pt.unknown_rate, pt.count])
    write_csv("prediction_bias.csv",
              ["model", "length", "positive_rate", "unknown_rate", "count"], rows)

    rows = [[p.model, p.metric, p.param, p.r]
            for p in metrics.pearson_table(per_model, benchmarks)]
    write_csv("pearson.csv", ["model", "metric", "param", "r"], rows)

    if len(per_model) >= 2:
        for unit, fname in (("grammar", "spearman_grammar.csv"),
                            ("example", "spearman_example.csv")):
            dim_max = max(b.stats.n_nonlex for b in benchmarks) if unit == "grammar" else max(
                r.length for r in records)
            width = 100 if unit == "grammar" else 10
            rows = []
            lo = 0
            while lo < dim_max:
                try:
                    models, matrix = metrics.spearman_rank_matrix(
                        per_model, unit, (lo, lo + width), benchmarks)
                except metrics.InsufficientUnits:
                    lo += width
                    continue
                for i in range(len(models)):
                    for j in range(i + 1, len(models)):
                        rows.append([lo, lo + width, models[i], models[j], matrix[i, j]])
                lo += width
            write_csv(fname, ["lo", "hi", "model_a", "model_b", "rho"], rows)

    rows = []
    fits = {}
    for model, recs in sorted(per_model.items()):
        try:
            curve = metrics.ttc_curve(recs, args.token_limit)
        except metrics.InsufficientPoints as exc:
            logger.warning("no compute curve for %s: %s", model, exc)
            continue
        fits[model] = {
            "peak_length": curve.peak_length,
            "cubic_coeff": curve.cubic_coeff,
            "intercept": curve.intercept,
            "token_limit": args.token_limit,
        }
        for length, val in zip(curve.lengths, curve.values):
            rows.append([model, length, val])
    write_csv("ttc_curve.csv", ["model", "length", "relative_tokens"], rows)
    (out_dir / "ttc_fit.json").write_text(json.dumps(fits, indent=2) + "\n")

    metrics.export_regression_csv(records, benchmarks, out_dir / "regression_data.csv")

    if args.labels:
        label_rows = _load_labels(_resolve(args.workdir, args.labels))
        length_of = {(r.grammar_id, r.example_id): r.length for r in records}
        cats, lens = [], []
        for row in label_rows:
            key = (row["grammar_id"], row["example_id"])
            if key in length_of:
                cats.append(row["category"])
                lens.append(length_of[key])
        rows = []
        for sbin in metrics.strategy_proportions(cats, lens):
            for cat, frac in sorted(sbin.fractions.items()):
                rows.append([sbin.lo, sbin.hi, cat, frac, sbin.count])
        write_csv("strategy_proportions.csv", ["lo", "hi", "category", "fraction", "count"], rows)

    doc = {"out_dir": str(out_dir), "models": summary_doc}
    print(json.dumps(doc) if args.json else
          "\n".join(
              f"{s.model}: balanced_accuracy={s.balanced_accuracy:.4f}±{s.balanced_accuracy_sem:.4f} "
              f"macro_f1={s.macro_f1:.4f}±{s.macro_f1_sem:.4f} ({s.n_records} records)"
              for s in summaries))
    return 0


def _cmd_judge(args) -> int:
    records = harness.read_journal(_resolve(args.workdir, args.journal))
    parallel = args.judge_max_parallel if args.jobs is None else min(
        args.judge_max_parallel, args.jobs)
    judge = harness.EndpointConfig(
        base_url=args.judge_base_url or "",
        model_name=args.judge_model,
        max_completion_tokens=args.judge_max_completion_tokens,
        temperature=args.judge_temperature,
        nucleus_p=args.judge_top_p,
        max_parallel_requests=parallel,
        max_retries=args.judge_max_retries,
        backoff=args.judge_backoff,
        timeout=args.judge_timeout,
        api_key_env=args.judge_api_key_env,
    )
    if not args.judge_base_url:
        raise UsageError("--judge-base-url is required")
    labels = harness.classify_strategies([r.raw_completion for r in records], judge)
    out = _resolve(args.workdir, args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        for rec, label in zip(records, labels):
            f.write(json.dumps({
                "grammar_id": rec.grammar_id,
                "example_id": rec.example_id,
                "category": label.category,
                "note": label.note,
            }, separators=(",", ":")) + "\n")
    counts: dict[str, int] = {}
    for label in labels:
        counts[label.category] = counts.get(label.category, 0) + 1
    print(json.dumps({"out": str(out), "counts": counts}) if args.json else
          f"wrote {len(labels)} labels to {out}: {counts}")
    return 0


def _cmd_agreement(args) -> int:
    rows_a = _load_labels(_resolve(args.workdir, args.a))
    rows_b = _load_labels(_resolve(args.workdir, args.b))
    key = lambda row: (row["grammar_id"], row["example_id"])
    map_a = {key(r): r["category"] for r in rows_a}
    map_b = {key(r): r["category"] for r in rows_b}
    if set(map_a) != set(map_b):
        raise harness.LengthMismatch("label files cover different (grammar, example) sets")
    keys = sorted(map_a)
    frac = harness.judge_agreement([map_a[k] for k in keys], [map_b[k] for k in keys])
    print(json.dumps({"agreement": frac}) if args.json else f"agreement: {frac:.4f}")
    return 0


class UsageError(Exception):
    pass


_RUNTIME_ERRORS = (
    EmptyLanguage,
    gen.InsufficientPool,
    harness.EndpointError,
    harness.JournalCorrupt,
    harness.LengthMismatch,
    metrics.EmptyInput,
    metrics.InsufficientUnits,
    metrics.DegenerateVariance,
    dataset.SchemaMismatch,
    dataset.CorruptExample,
    OSError,
    ValueError,
)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits; keep the code, return normally
        return exc.code if isinstance(exc.code, int) else 1
    handler = {
        "gen": _cmd_gen,
        "eval": _cmd_eval,
        "score": _cmd_score,
        "judge": _cmd_judge,
        "agreement": _cmd_agreement,
    }[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"cflbench: error: {exc}", file=sys.stderr)
        return 1
    except _RUNTIME_ERRORS as exc:
        print(f"cflbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
