"""Decide membership with the CYK chart, extract a derivation tree, and
cross-check against brute-force language enumeration."""

from cflbench import (
    Grammar,
    cot_budget_bounds,
    cyk_chart,
    cyk_parse,
    cyk_recognize,
    enumerate_language,
    grammar_stats,
    lexical,
    nonlexical,
)

# A right-recursive grammar: NT5 spins out a prefix of NT0 tokens.
grammar = Grammar.from_rules(
    [
        nonlexical("S", "NT5", "NT2"),
        nonlexical("NT5", "NT0", "NT5"),
        lexical("NT0", "t30"),
        lexical("NT0", "t24"),
        lexical("NT5", "t23"),
        lexical("NT2", "t4"),
    ]
)

string = tuple("t30 t24 t24 t23 t4".split())
print("accepted:", cyk_recognize(grammar, string))

def show(node, depth=0):
    print("  " * depth + node.symbol)
    for child in node.children:
        show(child, depth + 1)

print("\none derivation (smallest split, earliest rule):")
show(cyk_parse(grammar, string))

# The chart records how much work recognition took; it scales with grammar
# size times the cube of the string length.
for n in (5, 10, 20):
    chart = cyk_chart(grammar, ("t30",) * n)
    print(f"length {n:>2}: {chart.work:>6} rule-split checks")

# Independent oracle: close the rule set bottom-up into explicit string sets
# and compare with the chart on every short string.
language = enumerate_language(grammar, 4)
print(f"\nstrings of length <= 4: {len(language)}")
terms = grammar.sorted_terminals()
checked = 0
stack = [()]
for _ in range(4):
    stack = [s + (t,) for s in stack for t in terms]
    for s in stack:
        assert cyk_recognize(grammar, s) == (s in language)
        checked += 1
print(f"chart agrees with enumeration on all {checked} strings")

# Membership is cheap for a classical algorithm but expensive for a
# transformer reasoning in tokens: the step budget envelope.
size = grammar_stats(grammar).size
for length in (5, 20, 50):
    bounds = cot_budget_bounds(size, length)
    print(f"length {length:>2}: reasoning steps between {bounds.lower:,.0f} and {bounds.upper:,.0f}")
