"""Stochastic grammar generation and decorrelated benchmark selection.

A grammar is drawn from four size parameters: lexical rules are a uniform
sample without replacement from nonterminal x terminal pairs, nonlexical
rules from (start + nonterminal) x nonterminal x nonterminal triples.  The
draw is then reduced, so the surviving counts are at most the requested ones.

``select_decorrelated`` picks the subset of a grammar pool whose four
post-reduction size statistics are least correlated with one another, which
keeps downstream per-parameter analyses from conflating the parameters.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .grammar import (
    START,
    Grammar,
    Rule,
    grammar_stats,
    lexical,
    nonlexical,
    nonterminal,
    reduce_grammar,
    terminal,
)


class InsufficientPool(Exception):
    """The pool holds fewer grammars than the requested selection size."""


@dataclass(frozen=True)
class GenParams:
    """Generation sizes (upper bounds on the reduced grammar) plus the seed.

    Zero values are legal and simply produce an empty language (no start
    rule can be drawn without nonlexical rules).
    """

    n_term: int
    n_nonterm: int
    n_lex: int
    n_nonlex: int
    seed: int = 0

    def check(self) -> None:
        for name in ("n_term", "n_nonterm", "n_lex", "n_nonlex"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        lex_space, nonlex_space = rule_space_sizes(self)
        if self.n_lex > lex_space:
            raise ValueError(f"n_lex={self.n_lex} exceeds the {lex_space} distinct lexical rules")
        if self.n_nonlex > nonlex_space:
            raise ValueError(
                f"n_nonlex={self.n_nonlex} exceeds the {nonlex_space} distinct nonlexical rules"
            )

    def as_dict(self) -> dict[str, int]:
        return {
            "n_term": self.n_term,
            "n_nonterm": self.n_nonterm,
            "n_lex": self.n_lex,
            "n_nonlex": self.n_nonlex,
            "seed": self.seed,
        }


def rule_space_sizes(params: GenParams) -> tuple[int, int]:
    """(lexical, nonlexical) rule-space cardinalities for the parameters."""
    n, t = params.n_nonterm, params.n_term
    return n * t, (n + 1) * n * n


def draw_rules(params: GenParams) -> list[Rule]:
    """Sample the raw (unreduced) rule list: the nonlexical block first,
    then the lexical block, each a uniform draw without replacement."""
    params.check()
    rng = random.Random(params.seed)
    n, t = params.n_nonterm, params.n_term
    lex_space, nonlex_space = rule_space_sizes(params)

    rules: list[Rule] = []
    for idx in rng.sample(range(nonlex_space), params.n_nonlex):
        lhs_i, rest = divmod(idx, n * n)
        b, c = divmod(rest, n)
        lhs = START if lhs_i == 0 else nonterminal(lhs_i)
        rules.append(nonlexical(lhs, nonterminal(b + 1), nonterminal(c + 1)))
    for idx in rng.sample(range(lex_space), params.n_lex):
        a, b = divmod(idx, t)
        rules.append(lexical(nonterminal(a + 1), terminal(b + 1)))
    return rules


def generate(params: GenParams) -> Grammar:
    """Draw a rule list and reduce it.  Deterministic given the seed;
    raises :class:`~cflbench.grammar.EmptyLanguage` when the draw leaves the
    start symbol without a productive rule (callers typically retry with the
    next seed)."""
    return reduce_grammar(Grammar.from_rules(draw_rules(params)))


@dataclass(frozen=True)
class NoveltyBound:
    """Collision-resistance floor for freshly drawn benchmarks: at least
    ``2**log2_grammar_count`` distinct reduced grammars exist at the given
    symbol counts, and ``2**log2_string_count`` strings at the given length."""

    log2_grammar_count: int
    log2_string_count: float

    @property
    def grammar_count_floor(self) -> int:
        return 2**self.log2_grammar_count


def novelty_lower_bound(n: int, t: int, length: int) -> NoveltyBound:
    """Bound for ``n`` nonterminals, ``t`` terminals, strings of ``length``:
    grammar exponent n^3 + n*t - 2n exactly; string exponent length*log2(t)."""
    if n < 1 or t < 1 or length < 0:
        raise ValueError("need n >= 1, t >= 1, length >= 0")
    return NoveltyBound(
        log2_grammar_count=n**3 + n * t - 2 * n,
        log2_string_count=length * math.log2(t),
    )


def novelty_base_grammar(n: int, t: int) -> Grammar:
    """The witness grammar behind the novelty bound: S -> NT_i NT_1 and
    NT_i -> 't1' for every i.  Already reduced, and it stays reduced under
    any extension because every nonterminal is pinned reachable and
    productive by its own pair of rules."""
    rules = [nonlexical(START, nonterminal(i), nonterminal(1)) for i in range(1, n + 1)]
    rules += [lexical(nonterminal(i), terminal(1)) for i in range(1, n + 1)]
    return Grammar.from_rules(rules)


def reduced_extension_count(n: int, t: int) -> int:
    """Exhaustively count extensions of the base witness grammar that pass
    reduction unchanged, over every subset of the remaining rule space.
    Only feasible for tiny ``n``/``t`` (at most ~20 remaining rules)."""
    base = novelty_base_grammar(n, t)
    base_set = set(base.rules)
    pool = [
        nonlexical(START if a == 0 else nonterminal(a), nonterminal(b), nonterminal(c))
        for a in range(0, n + 1)
        for b in range(1, n + 1)
        for c in range(1, n + 1)
    ]
    pool += [lexical(nonterminal(a), terminal(b)) for a in range(1, n + 1) for b in range(1, t + 1)]
    remaining = [r for r in pool if r not in base_set]
    if len(remaining) > 20:
        raise ValueError("extension space too large to enumerate")
    count = 0
    for mask in range(2 ** len(remaining)):
        extra = [r for i, r in enumerate(remaining) if mask >> i & 1]
        g = Grammar.from_rules(base.rules + tuple(extra))
        if reduce_grammar(g).rules == g.rules:
            count += 1
    return count


def correlation_objective(grammars) -> float:
    """Sum of absolute pairwise Pearson correlations over the four
    post-reduction size statistics.  Constant statistics contribute zero."""
    stats = [grammar_stats(g) for g in grammars]
    x = np.array([[s.n_term, s.n_nonterm, s.n_lex, s.n_nonlex] for s in stats], dtype=float)
    return _objective(x)


def _objective(x: np.ndarray) -> float:
    sd = x.std(axis=0)
    centered = x - x.mean(axis=0)
    total = 0.0
    for a in range(4):
        for b in range(a + 1, 4):
            if sd[a] == 0.0 or sd[b] == 0.0:
                continue
            total += abs(float(centered[:, a] @ centered[:, b]) / (len(x) * sd[a] * sd[b]))
    return total


def select_decorrelated(pool, k: int, *, restarts: int = 6, iterations: int = 4000):
    """Pick ``k`` grammars from ``pool`` approximately minimising
    :func:`correlation_objective`, by hill climbing with random single swaps
    from several starts (the first-k prefix is always one of them, so the
    result is never worse than taking the prefix).  Deterministic given the
    pool order."""
    pool = list(pool)
    if k < 3:
        raise ValueError("need k >= 3 to measure correlations")
    if len(pool) < k:
        raise InsufficientPool(f"pool of {len(pool)} cannot supply {k} grammars")
    if len(pool) == k:
        return pool

    stats = [grammar_stats(g) for g in pool]
    x = np.array([[s.n_term, s.n_nonterm, s.n_lex, s.n_nonlex] for s in stats], dtype=float)
    rng = random.Random(0)

    def climb(selected: list[int]) -> tuple[float, list[int]]:
        chosen = set(selected)
        obj = _objective(x[selected])
        for _ in range(iterations):
            out_pos = rng.randrange(k)
            cand = rng.randrange(len(pool))
            if cand in chosen:
                continue
            old = selected[out_pos]
            selected[out_pos] = cand
            trial = _objective(x[selected])
            if trial < obj - 1e-12:
                obj = trial
                chosen.discard(old)
                chosen.add(cand)
            else:
                selected[out_pos] = old
        return obj, selected

    starts = [list(range(k))]
    starts += [rng.sample(range(len(pool)), k) for _ in range(max(0, restarts - 1))]
    best_obj, best_sel = math.inf, list(range(k))
    for start in starts:
        obj, sel = climb(start)
        if obj < best_obj:
            best_obj, best_sel = obj, sel
    return [pool[i] for i in sorted(best_sel)]
