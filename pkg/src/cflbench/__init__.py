"""cflbench: build context-free-grammar recognition benchmarks with verified
labels, evaluate chat models (or offline baselines) on them, and compute the
full analysis suite.

The pipeline in one breath: draw a reduced CNF grammar from four size
parameters, sample CYK-verified positive and negative strings, bundle them
into a benchmark file, render each (grammar, string) pair into a fixed
prompt, collect model answers into a resumable journal, and aggregate the
journal into accuracy, bias, correlation, and compute-scaling reports.
"""

from .grammar import (
    START,
    EmptyLanguage,
    Grammar,
    GrammarStats,
    ParseError,
    Rule,
    grammar_stats,
    lexical,
    nonlexical,
    nonterminal,
    parse_text,
    reduce_grammar,
    render_text,
    terminal,
    validate,
)
from .recognize import (
    CotBudgetBounds,
    CykChart,
    LimitExceeded,
    Node,
    TokenString,
    cot_budget_bounds,
    cyk_chart,
    cyk_parse,
    cyk_recognize,
    enumerate_language,
)
from .gen import (
    GenParams,
    InsufficientPool,
    NoveltyBound,
    correlation_objective,
    draw_rules,
    generate,
    novelty_base_grammar,
    novelty_lower_bound,
    reduced_extension_count,
    select_decorrelated,
)
from .sample import (
    ADVERSARIAL_NEGATIVE,
    NEGATIVE,
    PCFG_SAMPLE,
    POSITIVE,
    UNIGRAM_NEGATIVE,
    Coverage,
    Example,
    NoAdversarialFound,
    SamplingPlan,
    coverage,
    make_example,
    sample_negatives_adversarial,
    sample_negatives_unigram,
    sample_positives,
    subsample_per_length,
    verify_examples,
)
from .dataset import (
    Benchmark,
    CorruptExample,
    FinetuneRecord,
    SchemaMismatch,
    build_benchmark,
    export_finetune,
    load_benchmark,
    load_benchmark_set,
    render_judge_prompt,
    render_prompt,
    save_benchmark,
    save_benchmark_set,
    write_finetune_records,
)
from .harness import (
    Baseline,
    EndpointConfig,
    EndpointError,
    EvalRecord,
    JournalCorrupt,
    StrategyLabel,
    classify_strategies,
    classify_strategy,
    extract_prediction,
    judge_agreement,
    parse_model_spec,
    read_journal,
    run_eval,
)
from .metrics import (
    accuracy_by,
    balanced_accuracy,
    export_regression_csv,
    macro_f1,
    pearson_table,
    prediction_bias,
    spearman_rank_matrix,
    strategy_proportions,
    summarize,
    ttc_curve,
)

__version__ = "0.1.0"
