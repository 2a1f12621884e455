"""Core data model for context-free grammars in Chomsky normal form.

Symbols are plain strings: the start symbol ``S``, nonterminals ``NT<k>``,
and terminals ``t<k>``.  Rules come in exactly two shapes (no empty
productions):

* lexical      ``NT3 -> 't7'``   -- a nonterminal emits one terminal
* nonlexical   ``S -> NT1 NT2``  -- the start symbol or a nonterminal
  expands to two nonterminals

This module owns structural validation, reduction (dropping rules that are
unproductive or unreachable from the start symbol), size statistics computed
from the surviving rules, and the canonical one-rule-per-line text format.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

START = "S"

_NONTERM_RE = re.compile(r"NT(\d+)")
_TERM_RE = re.compile(r"t(\d+)")
_LINE_LEXICAL_RE = re.compile(r"(S|NT\d+) -> '(t\d+)'")
_LINE_NONLEXICAL_RE = re.compile(r"(S|NT\d+) -> (S|NT\d+|t\d+) (S|NT\d+|t\d+)")


class EmptyLanguage(Exception):
    """The grammar generates no string at all (no start rule survives)."""


class ParseError(ValueError):
    """A grammar text line could not be parsed."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def nonterminal(k: int) -> str:
    return f"NT{k}"


def terminal(k: int) -> str:
    return f"t{k}"


def is_nonterminal(symbol: str) -> bool:
    """True for ``NT<k>`` symbols; the start symbol does not count."""
    return _NONTERM_RE.fullmatch(symbol) is not None


def is_terminal(symbol: str) -> bool:
    return _TERM_RE.fullmatch(symbol) is not None


def symbol_index(symbol: str) -> int:
    m = _NONTERM_RE.fullmatch(symbol) or _TERM_RE.fullmatch(symbol)
    if m is None:
        raise ValueError(f"symbol {symbol!r} carries no index")
    return int(m.group(1))


@dataclass(frozen=True)
class Rule:
    """One production.  ``rhs`` has one element (lexical) or two (nonlexical)."""

    lhs: str
    rhs: tuple[str, ...]

    @property
    def is_lexical(self) -> bool:
        return len(self.rhs) == 1

    def render(self) -> str:
        if self.is_lexical:
            return f"{self.lhs} -> '{self.rhs[0]}'"
        return f"{self.lhs} -> {self.rhs[0]} {self.rhs[1]}"


def lexical(lhs: str, term: str) -> Rule:
    return Rule(lhs, (term,))


def nonlexical(lhs: str, left: str, right: str) -> Rule:
    return Rule(lhs, (left, right))


@dataclass(frozen=True)
class Grammar:
    """An ordered rule list plus the symbol inventory it draws from.

    Rule order is significant and preserved by every operation; it is the
    order rules appear in rendered text and prompts.
    """

    rules: tuple[Rule, ...]
    terminals: frozenset[str]
    nonterminals: frozenset[str]
    start: str = START

    @classmethod
    def from_rules(cls, rules) -> "Grammar":
        """Build a grammar whose symbol sets are derived from the rules."""
        rules = tuple(rules)
        terms = set()
        nonterms = set()
        for r in rules:
            for sym in (r.lhs, *r.rhs):
                if is_terminal(sym):
                    terms.add(sym)
                elif is_nonterminal(sym):
                    nonterms.add(sym)
        return cls(rules=rules, terminals=frozenset(terms), nonterminals=frozenset(nonterms))

    @property
    def grammar_id(self) -> str:
        """Short content hash of the canonical text form."""
        return hashlib.sha256(render_text(self).encode("utf-8")).hexdigest()[:12]

    def sorted_terminals(self) -> list[str]:
        return sorted(self.terminals, key=symbol_index)

    def rules_by_lhs(self) -> dict[str, list[Rule]]:
        out: dict[str, list[Rule]] = {}
        for r in self.rules:
            out.setdefault(r.lhs, []).append(r)
        return out


@dataclass(frozen=True)
class GrammarStats:
    """Rule and symbol counts, measured from the rule list itself."""

    n_term: int
    n_nonterm: int
    n_lex: int
    n_nonlex: int

    @property
    def size(self) -> int:
        return self.n_lex + self.n_nonlex

    def as_dict(self) -> dict[str, int]:
        return {
            "n_term": self.n_term,
            "n_nonterm": self.n_nonterm,
            "n_lex": self.n_lex,
            "n_nonlex": self.n_nonlex,
            "size": self.size,
        }


def validate(grammar: Grammar) -> list[str]:
    """Return a description of every structural violation (empty = valid)."""
    violations = []
    if grammar.start != START:
        violations.append(f"start symbol must be {START}, got {grammar.start!r}")

    seen = set()
    for r in grammar.rules:
        if len(r.rhs) not in (1, 2):
            violations.append(f"rule arity must be 1 or 2: {r.lhs} -> {r.rhs!r}")
            continue
        if r in seen:
            violations.append(f"duplicate rule {r.render()}")
        seen.add(r)
        if r.lhs != START and not is_nonterminal(r.lhs):
            violations.append(f"bad left-hand symbol in {r.render()}")
        if r.is_lexical:
            if r.lhs == START:
                violations.append(f"lexical rule with start LHS: {r.render()}")
            if not is_terminal(r.rhs[0]):
                violations.append(f"lexical rule must emit a terminal: {r.render()}")
        else:
            for sym in r.rhs:
                if sym == START:
                    violations.append(f"start symbol on RHS: {r.render()}")
                elif is_terminal(sym):
                    violations.append(f"terminal on nonlexical RHS: {r.render()}")
                elif not is_nonterminal(sym):
                    violations.append(f"bad RHS symbol {sym!r} in {r.render()}")

    emitted = {r.rhs[0] for r in grammar.rules if r.is_lexical}
    used_nonterms = set()
    for r in grammar.rules:
        if r.lhs != START:
            used_nonterms.add(r.lhs)
        if not r.is_lexical:
            used_nonterms.update(s for s in r.rhs if is_nonterminal(s))

    for t in sorted(grammar.terminals, key=_sort_key):
        if t not in emitted:
            violations.append(f"orphan terminal {t}")
    for t in sorted(emitted, key=_sort_key):
        if t not in grammar.terminals:
            violations.append(f"unlisted terminal {t}")
    for nt in sorted(grammar.nonterminals, key=_sort_key):
        if nt not in used_nonterms:
            violations.append(f"orphan nonterminal {nt}")
    for nt in sorted(used_nonterms, key=_sort_key):
        if nt not in grammar.nonterminals:
            violations.append(f"unlisted nonterminal {nt}")
    return violations


def _sort_key(symbol: str):
    try:
        return (0, symbol_index(symbol))
    except ValueError:
        return (1, symbol)


def reduce_grammar(grammar: Grammar) -> Grammar:
    """Drop rules that cannot take part in any complete derivation.

    Two fixpoints, in the standard order: first keep only rules whose
    right-hand symbols are productive (can derive some terminal string),
    then keep only rules whose left-hand symbol is reachable from the start
    symbol through the surviving nonlexical rules.  A lexical rule survives
    exactly when its LHS is reachable.  Raises :class:`EmptyLanguage` when
    no start rule survives.
    """
    productive = {r.lhs for r in grammar.rules if r.is_lexical}
    changed = True
    while changed:
        changed = False
        for r in grammar.rules:
            if r.is_lexical or r.lhs in productive or r.lhs == START:
                continue
            if r.rhs[0] in productive and r.rhs[1] in productive:
                productive.add(r.lhs)
                changed = True

    kept = [
        r
        for r in grammar.rules
        if r.is_lexical or (r.rhs[0] in productive and r.rhs[1] in productive)
    ]

    reachable = {START}
    changed = True
    while changed:
        changed = False
        for r in kept:
            if r.is_lexical or r.lhs not in reachable:
                continue
            for sym in r.rhs:
                if sym not in reachable:
                    reachable.add(sym)
                    changed = True

    kept = [r for r in kept if r.lhs in reachable]
    if not any(r.lhs == START for r in kept):
        raise EmptyLanguage("no productive rule for the start symbol survives reduction")
    return Grammar.from_rules(kept)


def grammar_stats(grammar: Grammar) -> GrammarStats:
    """Counts computed from the rule list (not from generation parameters)."""
    terms = set()
    nonterms = set()
    n_lex = 0
    n_nonlex = 0
    for r in grammar.rules:
        if r.is_lexical:
            n_lex += 1
            terms.add(r.rhs[0])
        else:
            n_nonlex += 1
            nonterms.update(r.rhs)
        if r.lhs != START:
            nonterms.add(r.lhs)
    return GrammarStats(len(terms), len(nonterms), n_lex, n_nonlex)


def render_text(grammar: Grammar) -> str:
    """Canonical text form: one newline-terminated rule per line, in order."""
    return "".join(r.render() + "\n" for r in grammar.rules)


def parse_text(text: str) -> Grammar:
    """Inverse of :func:`render_text`.  Raises :class:`ParseError` with the
    1-based line number of the first malformed line; blank lines are skipped.

    Parsing is purely syntactic -- structurally invalid but well-formed rules
    (e.g. a terminal on a nonlexical RHS) are accepted here and reported by
    :func:`validate`.
    """
    rules = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        m = _LINE_LEXICAL_RE.fullmatch(line)
        if m:
            rules.append(lexical(m.group(1), m.group(2)))
            continue
        m = _LINE_NONLEXICAL_RE.fullmatch(line)
        if m:
            rules.append(nonlexical(m.group(1), m.group(2), m.group(3)))
            continue
        raise ParseError(lineno, f"unparseable rule {line!r}")
    return Grammar.from_rules(rules)
