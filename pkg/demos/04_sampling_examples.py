"""Sample verified positive and negative strings from a grammar, measure
coverage against the plan, and thin the set per length."""

from collections import Counter

from cflbench import (
    GenParams,
    SamplingPlan,
    coverage,
    generate,
    sample_negatives_adversarial,
    sample_negatives_unigram,
    sample_positives,
    subsample_per_length,
    verify_examples,
)

grammar = generate(GenParams(n_term=25, n_nonterm=20, n_lex=40, n_nonlex=50, seed=5))
plan = SamplingPlan(max_len=20, per_len_cap=5, goal_total=200, seed=5)

# Positives: repeated top-down expansion with uniform rule choice per
# left-hand symbol, deduplicated, capped per length, each one re-checked by
# the recognizer before it is kept.
positives = sample_positives(grammar, plan)
print(f"positives: {len(positives)}")
print("  by length:", dict(sorted(Counter(e.length for e in positives).items())))

# Negatives: uniform token soup over the grammar's own alphabet, keeping
# only strings the recognizer rejects.
negatives = sample_negatives_unigram(grammar, plan)
print(f"unigram negatives: {len(negatives)}")

# Adversarial negatives sit one or two token edits away from a positive, so
# shallow surface heuristics cannot separate them.
adversarial = sample_negatives_adversarial(grammar, positives, plan)
print(f"adversarial negatives: {len(adversarial)}")
for example in adversarial[:3]:
    print("   ", " ".join(example.tokens))

examples = positives + negatives
print("\nlabel soundness re-check:", "ok" if verify_examples(grammar, examples) == [] else "BROKEN")

cov = coverage(examples, plan)
print(f"coverage: {cov.total:.2f} of the total goal, {cov.positives:.2f} of the positive ceiling")

thinned = subsample_per_length(examples, cap=2, seed=0)
print(f"thinned to at most 2 per (length, label): {len(thinned)} examples")
