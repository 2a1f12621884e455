"""Build a small grammar by hand, validate it, trim the dead weight, and
round-trip the canonical text format."""

from cflbench import (
    Grammar,
    grammar_stats,
    lexical,
    nonlexical,
    parse_text,
    reduce_grammar,
    render_text,
    validate,
)

# A grammar in Chomsky normal form: binary rules over nonterminals plus
# single-terminal emissions.  NT3 can never be reached from S, and NT4 can
# never produce a string -- both get trimmed.
grammar = Grammar.from_rules(
    [
        nonlexical("S", "NT1", "NT2"),
        nonlexical("NT2", "NT1", "NT2"),
        nonlexical("NT2", "NT1", "NT1"),
        nonlexical("NT3", "NT1", "NT1"),  # unreachable
        nonlexical("NT2", "NT4", "NT1"),  # NT4 has no emission: unproductive
        lexical("NT1", "t1"),
        lexical("NT1", "t2"),
        lexical("NT3", "t3"),
    ]
)

print("violations:", validate(grammar) or "none")
print("\nfull grammar:")
print(render_text(grammar))

reduced = reduce_grammar(grammar)
print("after reduction (only rules that can join a complete derivation):")
print(render_text(reduced))

print("size statistics:", grammar_stats(reduced).as_dict())

# The text format round-trips exactly, preserving rule order.
assert parse_text(render_text(reduced)) == reduced
print("text round-trip: ok")
