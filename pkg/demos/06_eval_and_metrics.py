"""Evaluate models against benchmarks and aggregate the journal into the
analysis suite.  A deterministic local endpoint stands in for a real model,
so this demo runs fully offline."""

import tempfile
from pathlib import Path

from cflbench import (
    Baseline,
    EndpointConfig,
    GenParams,
    SamplingPlan,
    accuracy_by,
    balanced_accuracy,
    build_benchmark,
    generate,
    macro_f1,
    prediction_bias,
    run_eval,
    ttc_curve,
)
from cflbench.harness import EvalRecord
from cflbench.sample import POSITIVE
from cflbench.stubserver import StubEndpoint, parity_reply

benchmarks = []
for seed in (3, 4, 5):
    grammar = generate(GenParams(n_term=15, n_nonterm=12, n_lex=25, n_nonlex=30, seed=seed))
    plan = SamplingPlan(max_len=10, per_len_cap=3, goal_total=60, seed=seed)
    benchmarks.append(build_benchmark(grammar, GenParams(15, 12, 25, 30, seed=seed), plan))

with tempfile.TemporaryDirectory() as tmp:
    # Offline baselines anchor the metrics: the oracle scores 1.0 by
    # construction, the coin flip sits at chance.
    oracle = run_eval(benchmarks, Baseline("oracle"), Path(tmp) / "oracle.ndjson")
    coin = run_eval(benchmarks, Baseline("random", seed=0), Path(tmp) / "coin.ndjson")
    for name, records in (("oracle", oracle), ("coin-flip", coin)):
        acc, sem = balanced_accuracy(records, benchmarks)
        f1, _ = macro_f1(records)
        print(f"{name:>9}: balanced accuracy {acc:.3f} ± {sem:.3f}, macro F1 {f1:.3f}")

    # A live-looking run: an HTTP endpoint that answers Yes exactly when the
    # query string has an even number of tokens.  Records land in a journal
    # that a rerun resumes without re-querying.
    with StubEndpoint(parity_reply) as stub:
        config = EndpointConfig(base_url=stub.base_url, model_name="parity-bot",
                                max_parallel_requests=4, backoff=0.01)
        records = run_eval(benchmarks, config, Path(tmp) / "parity.ndjson")
        print(f"\nparity-bot: {len(records)} records over HTTP "
              f"({stub.request_count} requests)")

    acc, sem = balanced_accuracy(records, benchmarks)
    print(f"parity-bot balanced accuracy: {acc:.3f} ± {sem:.3f}")

    print("\naccuracy by length bin:")
    for row in accuracy_by(records, benchmarks, "length", bin_edges=[0, 5, 10]):
        print(f"  ({row.lo:>2}, {row.hi:>2}]: {row.accuracy:.3f} over {row.cells} cells")

    print("\nprediction bias by length (head):")
    for point in prediction_bias(records)[:4]:
        print(f"  length {point.length}: P(positive) = {point.positive_rate:.2f}")

# Test-time-compute curve on a synthetic journal whose token counts grow as
# the cube of the length, the growth a faithful solver would show.
synthetic = [
    EvalRecord(grammar_id="g", example_id=str(i), model="m", label=POSITIVE,
               length=length, prediction=POSITIVE, raw_completion="",
               completion_tokens=2 * length**3)
    for i, length in enumerate(range(1, 31))
]
fit = ttc_curve(synthetic, token_limit=4096)
print(f"\ncubic-compute fit: coefficient {fit.cubic_coeff:.2e} "
      f"(true {2 / 4096:.2e}), peak at length {fit.peak_length}")
