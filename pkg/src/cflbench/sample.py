"""Verified example sampling: positives, unigram negatives, adversarial
negatives, coverage, and per-length subsampling.

The central invariant is label soundness: every emitted example has been
checked against the CYK recognizer at creation time.  Positives come from
repeated top-down leftmost expansion of the grammar with uniform rule choice
per left-hand symbol; negatives are rejection-sampled from a uniform unigram
model over the grammar's terminals (or, adversarially, from small edits to
known positives).
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from .grammar import START, Grammar
from .recognize import TokenString, cyk_recognize

logger = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"

PCFG_SAMPLE = "pcfg"
UNIGRAM_NEGATIVE = "unigram"
ADVERSARIAL_NEGATIVE = "adversarial"


class NoAdversarialFound(Exception):
    """No rejected string was found within the edit budget for a positive."""


@dataclass(frozen=True)
class Example:
    tokens: TokenString
    label: str
    provenance: str

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class SamplingPlan:
    """Per-grammar sampling budget.  Under the defaults the goal is
    2 example types x 50 lengths x 10 per cell = 1000 examples."""

    max_len: int = 50
    per_len_cap: int = 10
    goal_total: int = 1000
    retry_cap: int = 100
    seed: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "max_len": self.max_len,
            "per_len_cap": self.per_len_cap,
            "goal_total": self.goal_total,
            "retry_cap": self.retry_cap,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Coverage:
    """Example yield relative to the plan: ``total`` against the overall
    goal, ``positives`` against the positives-only ceiling (cap x lengths)."""

    total: float
    positives: float


def make_example(grammar: Grammar, tokens: TokenString, provenance: str) -> Example:
    """Build an example labelled by the recognizer itself."""
    tokens = tuple(tokens)
    label = POSITIVE if cyk_recognize(grammar, tokens) else NEGATIVE
    return Example(tokens=tokens, label=label, provenance=provenance)


def verify_examples(grammar: Grammar, examples) -> list[int]:
    """Independent post-pass: indices of examples whose label disagrees with
    the recognizer (empty list = all sound)."""
    bad = []
    for i, ex in enumerate(examples):
        accepted = cyk_recognize(grammar, ex.tokens)
        if accepted != (ex.label == POSITIVE):
            bad.append(i)
    return bad


def _derive(rules_by_lhs, rng: random.Random, max_len: int, budget: int):
    """One top-down leftmost expansion from the start symbol.  Returns
    (tokens or None, expansions used); None when the derivation exceeds the
    length bound or the expansion budget.

    Every pending symbol in CNF yields at least one token, so a derivation is
    abandoned as soon as emitted + pending exceeds ``max_len``.
    """
    stack = [START]
    out: list[str] = []
    expansions = 0
    while stack:
        if len(out) + len(stack) > max_len:
            return None, expansions
        sym = stack.pop()
        options = rules_by_lhs.get(sym)
        if options is None:  # terminal
            out.append(sym)
            continue
        expansions += 1
        if expansions > budget:
            return None, expansions
        rule = options[rng.randrange(len(options))]
        if rule.is_lexical:
            stack.append(rule.rhs[0])
        else:
            stack.append(rule.rhs[1])
            stack.append(rule.rhs[0])
    return (tuple(out) if out else None), expansions


def sample_positives(grammar: Grammar, plan: SamplingPlan) -> list[Example]:
    """Draw distinct accepted strings, at most ``per_len_cap`` per length up
    to ``max_len``, by repeated uniform-PCFG expansion.

    Each attempt gets an expansion budget of 4 x max_len.  The run stops at
    the first of: all cells full (lengths >= 2; length-1 strings cannot be
    derived in this rule shape), 2000 x goal_total attempts, 40000 x
    goal_total total expansions (bounds wall-clock time on grammars whose
    derivations usually overshoot), or 100 x per_len_cap x max_len attempts
    without a single new accepted string (the language is, in practice,
    exhausted).  Under-coverage is reported by :func:`coverage`, never
    raised.
    """
    rules_by_lhs = grammar.rules_by_lhs()
    rng = random.Random(f"pos:{plan.seed}")
    budget = 4 * plan.max_len
    max_attempts = 2000 * plan.goal_total
    max_expansions = 40_000 * plan.goal_total
    stale_cap = 100 * plan.per_len_cap * plan.max_len

    per_len: dict[int, int] = {}
    seen: set[TokenString] = set()
    out: list[Example] = []
    want = plan.per_len_cap * max(0, plan.max_len - 1)
    stale = 0
    spent = 0
    for _ in range(max_attempts):
        if len(out) >= want or stale >= stale_cap or spent >= max_expansions:
            break
        stale += 1
        s, used = _derive(rules_by_lhs, rng, plan.max_len, budget)
        spent += used
        if s is None or not 1 <= len(s) <= plan.max_len:
            continue
        if per_len.get(len(s), 0) >= plan.per_len_cap or s in seen:
            continue
        if not cyk_recognize(grammar, s):
            raise AssertionError(f"derived string rejected by recognizer: {s}")
        seen.add(s)
        per_len[len(s)] = per_len.get(len(s), 0) + 1
        out.append(Example(tokens=s, label=POSITIVE, provenance=PCFG_SAMPLE))
        stale = 0
    return out


def sample_negatives_unigram(grammar: Grammar, plan: SamplingPlan) -> list[Example]:
    """For each length, draw uniform i.i.d. token strings over the grammar's
    terminals and keep the distinct rejected ones, up to ``per_len_cap``.

    A length cell gives up after ``retry_cap`` consecutive draws that add
    nothing (the draw parsed, or duplicated an earlier string -- the latter
    matters for tiny alphabets whose rejected strings run out); the shortfall
    is logged and visible in coverage.
    """
    terms = grammar.sorted_terminals()
    if not terms:
        raise ValueError("grammar has no terminals to draw from")
    rng = random.Random(f"neg:{plan.seed}")
    out: list[Example] = []
    for length in range(1, plan.max_len + 1):
        cell: set[TokenString] = set()
        fruitless = 0
        while len(cell) < plan.per_len_cap and fruitless < plan.retry_cap:
            s = tuple(terms[rng.randrange(len(terms))] for _ in range(length))
            if s in cell or cyk_recognize(grammar, s):
                fruitless += 1
                continue
            fruitless = 0
            cell.add(s)
            out.append(Example(tokens=s, label=NEGATIVE, provenance=UNIGRAM_NEGATIVE))
        if len(cell) < plan.per_len_cap:
            logger.info(
                "unigram negatives: length %d cell stopped at %d/%d",
                length,
                len(cell),
                plan.per_len_cap,
            )
    return out


def _edit(tokens: TokenString, terms, rng: random.Random, max_len: int) -> TokenString | None:
    ops = ["substitute"]
    if len(tokens) > 1:
        ops.append("delete")
    if len(tokens) < max_len:
        ops.append("insert")
    op = ops[rng.randrange(len(ops))]
    pos = rng.randrange(len(tokens) + (1 if op == "insert" else 0))
    if op == "substitute":
        choices = [t for t in terms if t != tokens[pos]]
        if not choices:
            return None
        return tokens[:pos] + (choices[rng.randrange(len(choices))],) + tokens[pos + 1 :]
    if op == "delete":
        return tokens[:pos] + tokens[pos + 1 :]
    return tokens[:pos] + (terms[rng.randrange(len(terms))],) + tokens[pos:]


def adversarial_negative(
    grammar: Grammar, tokens: TokenString, plan: SamplingPlan, rng: random.Random
) -> TokenString:
    """One rejected string within edit distance 1 of ``tokens`` (escalating
    to distance 2 after ``retry_cap`` failures).  Raises
    :class:`NoAdversarialFound` once both budgets are exhausted."""
    terms = grammar.sorted_terminals()
    for distance in (1, 2):
        for _ in range(plan.retry_cap):
            cand: TokenString | None = tuple(tokens)
            for _ in range(distance):
                cand = _edit(cand, terms, rng, plan.max_len)
                if cand is None:
                    break
            if not cand or cand == tokens or not 1 <= len(cand) <= plan.max_len:
                continue
            if not cyk_recognize(grammar, cand):
                return cand
    raise NoAdversarialFound(f"no rejected string within 2 edits of {' '.join(tokens)}")


def sample_negatives_adversarial(grammar: Grammar, positives, plan: SamplingPlan) -> list[Example]:
    """One near-miss negative per source positive, deduplicated, with at most
    ``per_len_cap`` kept per length.  Positives whose edit neighbourhood
    refuses to produce a rejected string are logged and skipped."""
    positives = list(positives)
    if not positives:
        raise ValueError("need at least one positive to edit")
    if any(p.label != POSITIVE for p in positives):
        raise ValueError("adversarial sources must all be positives")
    rng = random.Random(f"adv:{plan.seed}")
    seen: set[TokenString] = set()
    per_len: dict[int, int] = {}
    out: list[Example] = []
    for src in positives:
        try:
            cand = adversarial_negative(grammar, src.tokens, plan, rng)
        except NoAdversarialFound:
            logger.info("no adversarial negative for %s", " ".join(src.tokens))
            continue
        if cand in seen or per_len.get(len(cand), 0) >= plan.per_len_cap:
            continue
        seen.add(cand)
        per_len[len(cand)] = per_len.get(len(cand), 0) + 1
        out.append(Example(tokens=cand, label=NEGATIVE, provenance=ADVERSARIAL_NEGATIVE))
    return out


def coverage(examples, plan: SamplingPlan) -> Coverage:
    """Yield relative to the plan's goals (both the combined goal and the
    positives-only ceiling of per_len_cap x max_len)."""
    examples = list(examples)
    n_pos = sum(1 for e in examples if e.label == POSITIVE)
    return Coverage(
        total=len(examples) / plan.goal_total,
        positives=n_pos / (plan.per_len_cap * plan.max_len),
    )


def subsample_indices_per_length(examples, cap: int, seed: int) -> list[int]:
    """Indices of a uniform subsample of at most ``cap`` examples per
    (length, label) cell, in the original order."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    cells: dict[tuple[int, str], list[int]] = {}
    for i, ex in enumerate(examples):
        cells.setdefault((ex.length, ex.label), []).append(i)
    rng = random.Random(f"sub:{seed}")
    keep: set[int] = set()
    for key in sorted(cells):
        idxs = cells[key]
        keep.update(idxs if len(idxs) <= cap else rng.sample(idxs, cap))
    return sorted(keep)


def subsample_per_length(examples, cap: int, seed: int) -> list["Example"]:
    examples = list(examples)
    return [examples[i] for i in subsample_indices_per_length(examples, cap, seed)]
