"""CYK recognition, derivation witnesses, the enumeration oracle, and the
reasoning-budget envelope."""

import random

import pytest

from cflbench.gen import GenParams, generate
from cflbench.grammar import EmptyLanguage, Grammar, lexical, nonlexical, reduce_grammar
from cflbench.recognize import (
    LimitExceeded,
    cot_budget_bounds,
    cyk_chart,
    cyk_parse,
    cyk_recognize,
    enumerate_language,
)
from conftest import random_rule_soup


class TestRecognize:
    def test_minimal_accepts_pair(self, minimal_grammar):
        assert cyk_recognize(minimal_grammar, ("t1", "t1"))

    def test_minimal_rejects_single(self, minimal_grammar):
        assert not cyk_recognize(minimal_grammar, ("t1",))

    def test_fragment_accepts_recursive_string(self, fragment_grammar):
        s = tuple("t30 t24 t24 t23 t4".split())
        assert cyk_recognize(fragment_grammar, s)

    def test_foreign_token_rejected(self, minimal_grammar):
        assert not cyk_recognize(minimal_grammar, ("t1", "t999"))
        assert not cyk_recognize(minimal_grammar, ("x", "t1"))

    def test_empty_string_is_an_error(self, minimal_grammar):
        with pytest.raises(ValueError):
            cyk_recognize(minimal_grammar, ())

    def test_work_counter_matches_closed_form(self, fragment_grammar):
        n_lex, n_nonlex = 4, 2
        for length in (1, 3, 7, 12):
            s = ("t30",) * length
            chart = cyk_chart(fragment_grammar, s)
            expected = length * n_lex + sum(
                (length - span + 1) * (span - 1) * n_nonlex for span in range(2, length + 1)
            )
            assert chart.work == expected


def _tree_rules(node):
    """(lhs, rhs) pairs applied at every internal node of a derivation."""
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if n.children:
            out.append((n.symbol, tuple(c.symbol for c in n.children)))
            stack.extend(n.children)
    return out


class TestParse:
    def test_minimal_witness(self, minimal_grammar):
        tree = cyk_parse(minimal_grammar, ("t1", "t1"))
        assert tree.symbol == "S"
        assert [c.symbol for c in tree.children] == ["NT1", "NT1"]
        assert tree.frontier() == ("t1", "t1")

    def test_rejected_string_has_no_witness(self, minimal_grammar):
        assert cyk_parse(minimal_grammar, ("t1",)) is None

    def test_fragment_witness_root_rule(self, fragment_grammar):
        s = tuple("t30 t24 t24 t23 t4".split())
        tree = cyk_parse(fragment_grammar, s)
        assert tree.frontier() == s
        assert [c.symbol for c in tree.children] == ["NT5", "NT2"]

    def test_witness_is_rule_valid(self, fragment_grammar):
        s = tuple("t30 t24 t24 t23 t4".split())
        tree = cyk_parse(fragment_grammar, s)
        rule_set = {(r.lhs, r.rhs) for r in fragment_grammar.rules}
        for applied in _tree_rules(tree):
            assert applied in rule_set

    def test_witness_deterministic(self, fragment_grammar):
        s = tuple("t30 t24 t24 t23 t4".split())
        assert cyk_parse(fragment_grammar, s) == cyk_parse(fragment_grammar, s)

    def test_random_witnesses_sound(self):
        rng = random.Random(17)
        checked = 0
        while checked < 20:
            try:
                g = reduce_grammar(random_rule_soup(rng))
            except EmptyLanguage:
                continue
            for s in sorted(enumerate_language(g, 4)):
                tree = cyk_parse(g, s)
                assert tree is not None and tree.frontier() == s
                rule_set = {(r.lhs, r.rhs) for r in g.rules}
                assert all(a in rule_set for a in _tree_rules(tree))
                checked += 1


class TestEnumerate:
    def test_singleton_language(self, minimal_grammar):
        assert enumerate_language(minimal_grammar, 4) == {("t1", "t1")}

    def test_matches_hand_enumeration(self):
        g = Grammar.from_rules(
            [
                nonlexical("S", "NT1", "NT1"),
                nonlexical("S", "NT1", "NT2"),
                nonlexical("NT2", "NT1", "NT1"),
                lexical("NT1", "t1"),
            ]
        )
        assert enumerate_language(g, 4) == {("t1", "t1"), ("t1", "t1", "t1")}

    def test_guard_and_cap(self, minimal_grammar):
        with pytest.raises(ValueError):
            enumerate_language(minimal_grammar, 9)
        g = Grammar.from_rules(
            [
                nonlexical("S", "NT1", "NT1"),
                nonlexical("NT1", "NT1", "NT1"),
                lexical("NT1", "t1"),
                lexical("NT1", "t2"),
                lexical("NT1", "t3"),
            ]
        )
        with pytest.raises(LimitExceeded):
            enumerate_language(g, 8, cap=50)

    def test_agrees_with_recognizer_on_small_grammars(self):
        rng = random.Random(23)
        checked = 0
        while checked < 25:
            params = GenParams(
                n_term=rng.randint(1, 3),
                n_nonterm=rng.randint(1, 4),
                n_lex=rng.randint(1, 6),
                n_nonlex=rng.randint(1, 10),
                seed=rng.getrandbits(30),
            )
            try:
                params.check()
                g = generate(params)
            except (ValueError, EmptyLanguage):
                continue
            checked += 1
            language = enumerate_language(g, 4)
            terms = g.sorted_terminals()
            strings = [()]
            for _ in range(4):
                strings = [s + (t,) for s in strings for t in terms] + strings
            for s in {s for s in strings if s}:
                assert cyk_recognize(g, s) == (s in language)


class TestBudgetBounds:
    def test_length_one_collapses(self):
        b = cot_budget_bounds(10, 1)
        assert (b.lower, b.upper) == (10.0, 10.0)

    def test_zero_size(self):
        b = cot_budget_bounds(0, 17)
        assert (b.lower, b.upper) == (0.0, 0.0)

    def test_direct_formula(self):
        b = cot_budget_bounds(100, 50)
        assert b.lower == pytest.approx(100 * 50**1.7)
        assert b.upper == pytest.approx(100 * 50**6)
        assert b.lower <= b.upper

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            cot_budget_bounds(-1, 5)
        with pytest.raises(ValueError):
            cot_budget_bounds(5, 0)
