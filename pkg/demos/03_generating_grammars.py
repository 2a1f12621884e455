"""Draw random reduced grammars from size parameters, see how reduction
shrinks them, bound the novelty of the space, and pick a decorrelated set."""

import random

from cflbench import (
    EmptyLanguage,
    GenParams,
    correlation_objective,
    generate,
    grammar_stats,
    novelty_lower_bound,
    select_decorrelated,
)

# Four parameters bound the grammar: terminals, nonterminals, lexical rules,
# nonlexical rules.  The draw is reduced, so measured statistics come out at
# or below the request.
params = GenParams(n_term=40, n_nonterm=30, n_lex=60, n_nonlex=80, seed=12)
grammar = generate(params)
print("requested:", {k: v for k, v in params.as_dict().items() if k != "seed"})
print("measured: ", grammar_stats(grammar).as_dict())

# The space of distinct grammars is astronomically large, so freshly drawn
# benchmarks are effectively guaranteed to be novel.
bound = novelty_lower_bound(n=30, t=40, length=50)
print(f"\nat 30 nonterminals / 40 terminals there are at least 2^{bound.log2_grammar_count} grammars")
print(f"and 2^{bound.log2_string_count:.0f} strings of length 50")

# Build a pool and keep the quarter whose four statistics are least
# correlated with one another, so per-parameter analyses stay clean.
rng = random.Random(0)
pool = []
while len(pool) < 80:
    n_term = rng.randint(5, 40)
    n_nonterm = rng.randint(5, 30)
    p = GenParams(
        n_term=n_term,
        n_nonterm=n_nonterm,
        n_lex=rng.randint(n_nonterm, min(60, n_term * n_nonterm)),
        n_nonlex=rng.randint(n_nonterm, 80),
        seed=rng.getrandbits(30),
    )
    try:
        pool.append(generate(p))
    except EmptyLanguage:
        continue

selected = select_decorrelated(pool, 20)
print(f"\ncorrelation objective, first 20 of pool: {correlation_objective(pool[:20]):.3f}")
print(f"correlation objective, selected 20:      {correlation_objective(selected):.3f}")
