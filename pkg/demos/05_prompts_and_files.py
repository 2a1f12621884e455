"""Render the recognition prompt, persist a benchmark to disk, and export
prompt/answer pairs for supervised tuning."""

import tempfile
from pathlib import Path

from cflbench import (
    GenParams,
    SamplingPlan,
    build_benchmark,
    export_finetune,
    generate,
    load_benchmark,
    render_judge_prompt,
    render_prompt,
    save_benchmark,
    write_finetune_records,
)

benchmarks = []
for seed in range(2, 7):
    params = GenParams(n_term=8, n_nonterm=6, n_lex=10, n_nonlex=12, seed=seed)
    grammar = generate(params)
    plan = SamplingPlan(max_len=8, per_len_cap=2, goal_total=32, seed=seed)
    benchmarks.append(build_benchmark(grammar, params, plan))
benchmark = benchmarks[0]
grammar = benchmark.grammar
print(f"benchmark {benchmark.grammar_id}: {len(benchmark.examples)} examples, "
      f"coverage {benchmark.coverage:.2f}")

# The prompt shown to a model: task statement, the full rule block, the
# query string, and the answer-format reminder.  Byte-stable by contract.
example = benchmark.examples[0]
print("\n" + render_prompt(grammar, example.tokens))

# The judge prompt wraps a model completion for strategy classification.
print(render_judge_prompt("I will try to derive the string... Answer: Yes")[:300] + "...\n")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "benchmark.json"
    save_benchmark(benchmark, path)
    reloaded = load_benchmark(path)  # re-verifies a sample of labels
    assert reloaded == benchmark
    print(f"saved and reloaded byte-faithfully from {path.name}")

    # split at the grammar level: no grammar's examples straddle the boundary
    train, val = export_finetune(benchmarks, train_fraction=0.8, seed=0)
    write_finetune_records(train, Path(tmp) / "train.ndjson")
    print(f"finetune export over {len(benchmarks)} grammars: "
          f"{len(train)} train / {len(val)} validation records")
