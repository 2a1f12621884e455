"""Shared fixtures and small grammar factories for the test suite."""

from __future__ import annotations

import itertools
import random

import pytest

from cflbench.dataset import Benchmark
from cflbench.gen import GenParams
from cflbench.grammar import (
    START,
    Grammar,
    Rule,
    grammar_stats,
    lexical,
    nonlexical,
    nonterminal,
    terminal,
)
from cflbench.sample import NEGATIVE, POSITIVE, Example, SamplingPlan, coverage


@pytest.fixture
def minimal_grammar() -> Grammar:
    return Grammar.from_rules([nonlexical("S", "NT1", "NT1"), lexical("NT1", "t1")])


@pytest.fixture
def fragment_grammar() -> Grammar:
    """Right-recursive fragment whose 5-token derivation the recognizer
    tests pin down exactly."""
    return Grammar.from_rules(
        [
            nonlexical("S", "NT5", "NT2"),
            nonlexical("NT5", "NT0", "NT5"),
            lexical("NT0", "t30"),
            lexical("NT0", "t24"),
            lexical("NT5", "t23"),
            lexical("NT2", "t4"),
        ]
    )


def chain_grammar() -> Grammar:
    """Language {t1^k : k >= 2}."""
    return Grammar.from_rules(
        [
            nonlexical("S", "NT1", "NT1"),
            nonlexical("S", "NT1", "NT2"),
            nonlexical("NT2", "NT1", "NT1"),
            nonlexical("NT2", "NT1", "NT2"),
            lexical("NT1", "t1"),
        ]
    )


def random_rule_soup(rng: random.Random, n_nt: int = 5, n_t: int = 3) -> Grammar:
    """A valid but usually unreduced grammar: random distinct rules over a
    small symbol space, with no reachability or productivity guarantees."""
    triples = [
        (a, b, c)
        for a in [START] + [nonterminal(i) for i in range(1, n_nt + 1)]
        for b in [nonterminal(i) for i in range(1, n_nt + 1)]
        for c in [nonterminal(i) for i in range(1, n_nt + 1)]
    ]
    pairs = [
        (nonterminal(a), terminal(b))
        for a in range(1, n_nt + 1)
        for b in range(1, n_t + 1)
    ]
    n_nonlex = rng.randint(1, min(18, len(triples)))
    n_lex = rng.randint(1, min(8, len(pairs)))
    rules = [nonlexical(*t) for t in rng.sample(triples, n_nonlex)]
    rules += [lexical(*p) for p in rng.sample(pairs, n_lex)]
    return Grammar.from_rules(rules)


def stat_grammar(n_term: int, n_nonterm: int, n_lex: int, n_nonlex: int) -> Grammar:
    """A valid grammar whose measured size statistics equal the arguments
    exactly (not necessarily reduced).  Needs n_term <= n_lex <= n_nonterm *
    n_term and ceil(n_nonterm / 2) <= n_nonlex."""
    nts = [nonterminal(i) for i in range(1, n_nonterm + 1)]
    rules: list[Rule] = []
    for i in range(0, n_nonterm, 2):
        pair = (nts[i], nts[i + 1] if i + 1 < n_nonterm else nts[0])
        rules.append(nonlexical(START, *pair))
    used = {(r.lhs, r.rhs) for r in rules}
    for lhs, b, c in itertools.product([START] + nts, nts, nts):
        if len(rules) >= n_nonlex:
            break
        if (lhs, (b, c)) not in used:
            rules.append(nonlexical(lhs, b, c))
            used.add((lhs, (b, c)))
    assert len(rules) == n_nonlex, "n_nonlex out of range for this builder"
    for i in range(n_lex):
        a, b = divmod(i, n_term)
        rules.append(lexical(nts[a], terminal(b + 1)))
    g = Grammar.from_rules(rules)
    s = grammar_stats(g)
    assert (s.n_term, s.n_nonterm, s.n_lex, s.n_nonlex) == (n_term, n_nonterm, n_lex, n_nonlex)
    return g


def paired_benchmark(max_len: int = 50) -> Benchmark:
    """A benchmark whose every length in [2, max_len] holds exactly one
    positive and one negative example, so constant-prediction baselines score
    a balanced accuracy of exactly one half.

    Positives are t1-chains; negatives swap the first token for a foreign
    ``t2`` (tokens outside the grammar's alphabet are always rejected).
    """
    g = chain_grammar()
    plan = SamplingPlan(max_len=max_len, per_len_cap=1, goal_total=2 * max_len)
    examples = []
    for length in range(2, max_len + 1):
        examples.append(Example(("t1",) * length, POSITIVE, "pcfg"))
        examples.append(Example(("t2",) + ("t1",) * (length - 1), NEGATIVE, "unigram"))
    return Benchmark(
        grammar=g,
        stats=grammar_stats(g),
        gen_params=GenParams(1, 2, 1, 4, seed=0),
        plan=plan,
        examples=tuple(examples),
        coverage=coverage(examples, plan).total,
    )
