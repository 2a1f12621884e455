"""Benchmark persistence, prompt rendering, and fine-tuning export.

A benchmark bundles one grammar with its verified example set, the
parameters that produced both, and the resulting coverage.  On disk a
benchmark is a single JSON document (the grammar stored in its canonical
text form, examples as token arrays); multi-benchmark sets are
newline-delimited JSON, one benchmark per line.  Writes are atomic
(temp file + rename).

Prompt rendering is bit-exact: the recognition prompt and the strategy-judge
prompt are frozen templates, pinned by golden files in the test suite.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .gen import GenParams
from .grammar import Grammar, GrammarStats, grammar_stats, parse_text, render_text
from .recognize import TokenString, cyk_recognize
from .sample import (
    POSITIVE,
    Example,
    SamplingPlan,
    coverage,
    sample_negatives_adversarial,
    sample_negatives_unigram,
    sample_positives,
)

SCHEMA_VERSION = "1"


class SchemaMismatch(Exception):
    """The file's schema version is not supported by this code."""


class CorruptExample(Exception):
    """A stored label disagrees with the recognizer on re-verification."""


@dataclass(frozen=True)
class Benchmark:
    grammar: Grammar
    stats: GrammarStats
    gen_params: GenParams
    plan: SamplingPlan
    examples: tuple[Example, ...]
    coverage: float
    schema_version: str = SCHEMA_VERSION

    @property
    def grammar_id(self) -> str:
        return self.grammar.grammar_id


@dataclass(frozen=True)
class FinetuneRecord:
    user_text: str
    model_text: str  # "Yes" or "No"


def build_benchmark(
    grammar: Grammar, gen_params: GenParams, plan: SamplingPlan, *, negatives: str = "unigram"
) -> Benchmark:
    """Sample a full example set for ``grammar`` and assemble the bundle.
    ``negatives`` picks the negative sampler: "unigram" or "adversarial"."""
    positives = sample_positives(grammar, plan)
    if negatives == "unigram":
        negs = sample_negatives_unigram(grammar, plan)
    elif negatives == "adversarial":
        negs = sample_negatives_adversarial(grammar, positives, plan) if positives else []
    else:
        raise ValueError(f"unknown negative sampler {negatives!r}")
    examples = tuple(positives) + tuple(negs)
    return Benchmark(
        grammar=grammar,
        stats=grammar_stats(grammar),
        gen_params=gen_params,
        plan=plan,
        examples=examples,
        coverage=coverage(examples, plan).total,
    )


_PROMPT_TASK = (
    "You will be presented with a context-free grammar in Chomsky normal form "
    "and a string which may or may not be in the language defined by the given "
    "grammar. Your job is to determine whether or not the grammar generates the "
    "provided string. You can use any reasoning strategy you like, but you must "
    "end your response with either `Yes' (if the string is generated by the "
    "grammar) or `No' (if it isn't.)"
)


def render_prompt(grammar: Grammar, tokens: TokenString) -> str:
    """The recognition prompt: task statement, fenced rule block (every rule,
    never elided), the space-joined query string, and the answer reminder."""
    return (
        f"{_PROMPT_TASK}\n"
        "\n"
        "Grammar:\n"
        "```\n"
        f"{render_text(grammar)}"
        "```\n"
        "\n"
        "Here is the string you need to evaluate:\n"
        "\n"
        f"String: `{' '.join(tokens)}`.\n"
        "\n"
        "Remember, end your response with either `Yes' or `No'.\n"
    )


_JUDGE_HEAD = """You will be presented with a completion from an LLM which was given a context-free grammar and a string of symbols drawn from that grammar's set of terminal symbols and asked to determine whether the string is generated by the grammar or not. Your job is to classify how the LLM attempted to solve the task by binning the completion strategy into one of the following categories:

- `heuristic`: The LLM attempts to solve the task by using heuristics it surmises from the grammar, such as “if the string is long, it is likely generated by the grammar” or “the string only contains terminal symbols present in the grammar, so it’s likely a positive sample”. Count strategies as heuristic if they appeal to the existence of certain production rules but do not rigorously determine that no such derivation exists.
- `rule-based`: The LLM attempts to solve the task by writing out the FULL DERIVATION of the sample from the grammar, or rigorously determining that no such derivation exists. Only count strategies as rule-based if the LLM doesn’t use any guesswork to reach its final conclusion.
- `code`: The LLM attempts to solve the task by writing out a program or algorithm which it claims will solve the task. This includes writing out a program in a programming language, or writing out pseudocode.

You can write as much as you want in your answer, but please end your response with the name of the classification you think is most appropriate.

Here is the LLM's completion:

```
"""


def render_judge_prompt(completion: str) -> str:
    """The strategy-classification prompt with ``completion`` dropped into
    the fenced block verbatim (backticks and all)."""
    return f"{_JUDGE_HEAD}{completion}\n```\n"


def _benchmark_to_dict(b: Benchmark) -> dict:
    return {
        "schema_version": b.schema_version,
        "gen_params": b.gen_params.as_dict(),
        "plan": b.plan.as_dict(),
        "stats": b.stats.as_dict(),
        "coverage": b.coverage,
        "grammar": render_text(b.grammar),
        "examples": [
            {"tokens": list(e.tokens), "label": e.label, "provenance": e.provenance}
            for e in b.examples
        ],
    }


def _benchmark_from_dict(doc: dict, *, verify_sample: int) -> Benchmark:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(f"schema_version {version!r} unsupported (want {SCHEMA_VERSION!r})")
    grammar = parse_text(doc["grammar"])
    examples = tuple(
        Example(tokens=tuple(e["tokens"]), label=e["label"], provenance=e["provenance"])
        for e in doc["examples"]
    )
    b = Benchmark(
        grammar=grammar,
        stats=GrammarStats(**{k: doc["stats"][k] for k in ("n_term", "n_nonterm", "n_lex", "n_nonlex")}),
        gen_params=GenParams(**doc["gen_params"]),
        plan=SamplingPlan(**doc["plan"]),
        examples=examples,
        coverage=doc["coverage"],
        schema_version=version,
    )
    if verify_sample and examples:
        rng = random.Random(0)
        picks = rng.sample(range(len(examples)), min(verify_sample, len(examples)))
        for i in picks:
            ex = examples[i]
            if cyk_recognize(grammar, ex.tokens) != (ex.label == POSITIVE):
                raise CorruptExample(
                    f"example {i} ({' '.join(ex.tokens)}) labelled {ex.label} "
                    "but the recognizer disagrees"
                )
    return b


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_benchmark(benchmark: Benchmark, path) -> None:
    _atomic_write(path, json.dumps(_benchmark_to_dict(benchmark), indent=2) + "\n")


def load_benchmark(path, *, verify_sample: int = 16) -> Benchmark:
    """Load one benchmark, re-verifying ``verify_sample`` randomly chosen
    example labels against the embedded grammar (0 disables the check)."""
    with open(path, encoding="utf-8") as f:
        return _benchmark_from_dict(json.load(f), verify_sample=verify_sample)


def save_benchmark_set(benchmarks, path) -> None:
    """Newline-delimited JSON, one benchmark per line."""
    lines = [
        json.dumps(_benchmark_to_dict(b), separators=(",", ":")) for b in benchmarks
    ]
    _atomic_write(path, "".join(line + "\n" for line in lines))


def load_benchmark_set(path, *, verify_sample: int = 16) -> list[Benchmark]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(_benchmark_from_dict(json.loads(line), verify_sample=verify_sample))
    return out


def export_finetune(
    benchmarks, train_fraction: float = 0.8, seed: int = 0
) -> tuple[list[FinetuneRecord], list[FinetuneRecord]]:
    """(train, validation) prompt/answer records, split at the grammar level
    so no grammar's examples straddle the boundary."""
    benchmarks = list(benchmarks)
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be strictly between 0 and 1")
    order = list(range(len(benchmarks)))
    random.Random(f"ft:{seed}").shuffle(order)
    n_train = round(train_fraction * len(benchmarks))

    def records(indices):
        recs = []
        for i in indices:
            b = benchmarks[i]
            for ex in b.examples:
                recs.append(
                    FinetuneRecord(
                        user_text=render_prompt(b.grammar, ex.tokens),
                        model_text="Yes" if ex.label == POSITIVE else "No",
                    )
                )
        return recs

    return records(order[:n_train]), records(order[n_train:])


def write_finetune_records(records, path) -> None:
    """Newline-delimited JSON: {"user": ..., "model": ...} per record."""
    lines = [
        json.dumps({"user": r.user_text, "model": r.model_text}, separators=(",", ":"))
        for r in records
    ]
    _atomic_write(path, "".join(line + "\n" for line in lines))
