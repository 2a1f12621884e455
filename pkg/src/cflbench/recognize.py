"""Ground-truth membership decisions for CNF grammars.

The CYK chart is the single source of truth for example labels everywhere in
this package.  Cell sets are boolean vectors over the nonterminal inventory
(the start symbol occupies index 0) and every chart records the number of
rule-split checks it performed, which scales as grammar size times the cube
of the string length.

``enumerate_language`` is a deliberately independent oracle: it closes the
rule set bottom-up over explicit string sets and never consults the chart.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .grammar import START, Grammar, symbol_index

TokenString = tuple[str, ...]


class LimitExceeded(Exception):
    """Language enumeration grew past the configured cardinality cap."""


@dataclass(frozen=True)
class Node:
    """Derivation tree node.  Terminal leaves have no children; a lexical
    rule application has one child; a nonlexical application has two."""

    symbol: str
    children: tuple["Node", ...] = ()

    def frontier(self) -> TokenString:
        if not self.children:
            return (self.symbol,)
        out: list[str] = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.children:
                stack.extend(reversed(node.children))
            else:
                out.append(node.symbol)
        return tuple(out)


@dataclass(frozen=True)
class CotBudgetBounds:
    """Indicative envelope (constant factors 1) for the number of
    intermediate reasoning steps an autoregressive transformer needs to
    decide membership: at least size*length^1.7, at most size*length^6."""

    lower: float
    upper: float


class _Tables:
    """Per-grammar lookup structures shared by every chart over the grammar."""

    def __init__(self, grammar: Grammar):
        self.symbols: tuple[str, ...] = (START, *sorted(grammar.nonterminals, key=symbol_index))
        self.index = {s: i for i, s in enumerate(self.symbols)}
        m = len(self.symbols)

        self.lex_vec: dict[str, np.ndarray] = {}
        self.lex_by_lhs: dict[str, list[str]] = {}
        b_idx, c_idx, a_idx = [], [], []
        self.nonlex_by_lhs: dict[str, list[tuple[int, int, str, str]]] = {}
        n_lex = 0
        for r in grammar.rules:
            if r.is_lexical:
                n_lex += 1
                vec = self.lex_vec.get(r.rhs[0])
                if vec is None:
                    vec = self.lex_vec[r.rhs[0]] = np.zeros(m, dtype=bool)
                vec[self.index[r.lhs]] = True
                self.lex_by_lhs.setdefault(r.lhs, []).append(r.rhs[0])
            else:
                b, c = self.index[r.rhs[0]], self.index[r.rhs[1]]
                a_idx.append(self.index[r.lhs])
                b_idx.append(b)
                c_idx.append(c)
                self.nonlex_by_lhs.setdefault(r.lhs, []).append((b, c, r.rhs[0], r.rhs[1]))
        self.a_idx = np.asarray(a_idx, dtype=np.int64)
        self.b_idx = np.asarray(b_idx, dtype=np.int64)
        self.c_idx = np.asarray(c_idx, dtype=np.int64)
        self.n_lex = n_lex
        self.n_nonlex = len(a_idx)


_TABLE_CACHE: dict[int, tuple[weakref.ref, _Tables]] = {}


def _tables(grammar: Grammar) -> _Tables:
    entry = _TABLE_CACHE.get(id(grammar))
    if entry is not None and entry[0]() is grammar:
        return entry[1]
    tables = _Tables(grammar)
    key = id(grammar)
    _TABLE_CACHE[key] = (weakref.ref(grammar, lambda _, key=key: _TABLE_CACHE.pop(key, None)), tables)
    return tables


@dataclass
class CykChart:
    tokens: TokenString
    symbols: tuple[str, ...]
    table: np.ndarray  # bool, shape (n, n + 1, m); [i, j] covers tokens[i:j]
    work: int  # rule-split checks performed

    @property
    def accepted(self) -> bool:
        return bool(self.table[0, len(self.tokens), 0])


def cyk_chart(grammar: Grammar, tokens: TokenString) -> CykChart:
    """Fill the full recognition chart for ``tokens`` under ``grammar``.

    Tokens absent from the grammar's lexicon simply leave their cells empty,
    so foreign-token strings are rejected rather than erroring.
    """
    tokens = tuple(tokens)
    if not tokens:
        raise ValueError("token string must have length >= 1")
    t = _tables(grammar)
    n = len(tokens)
    m = len(t.symbols)
    table = np.zeros((n, n + 1, m), dtype=bool)
    work = n * t.n_lex
    for i, tok in enumerate(tokens):
        vec = t.lex_vec.get(tok)
        if vec is not None:
            table[i, i + 1] = vec

    if t.n_nonlex:
        for span in range(2, n + 1):
            for i in range(n - span + 1):
                j = i + span
                left = table[i, i + 1 : j]  # views: splits k = i+1 .. j-1
                right = table[i + 1 : j, j]
                hits = (left[:, t.b_idx] & right[:, t.c_idx]).any(axis=0)
                if hits.any():
                    table[i, j, t.a_idx[hits]] = True
                work += (span - 1) * t.n_nonlex
    return CykChart(tokens=tokens, symbols=t.symbols, table=table, work=work)


def cyk_recognize(grammar: Grammar, tokens: TokenString) -> bool:
    """True iff the start symbol derives ``tokens``."""
    return cyk_chart(grammar, tokens).accepted


def cyk_parse(grammar: Grammar, tokens: TokenString) -> Node | None:
    """Return one derivation tree witnessing acceptance, or None.

    Deterministic tie-breaking: the smallest split point wins, then the
    earliest applicable rule in grammar order.
    """
    chart = cyk_chart(grammar, tokens)
    if not chart.accepted:
        return None
    t = _tables(grammar)
    table = chart.table
    tokens = chart.tokens

    def build(i: int, j: int, sym: str) -> Node:
        if j - i == 1:
            for term in t.lex_by_lhs.get(sym, ()):
                if term == tokens[i]:
                    return Node(sym, (Node(term),))
            raise AssertionError(f"chart claims {sym} at [{i},{j}) without a lexical rule")
        for k in range(i + 1, j):
            for b, c, bsym, csym in t.nonlex_by_lhs.get(sym, ()):
                if table[i, k, b] and table[k, j, c]:
                    return Node(sym, (build(i, k, bsym), build(k, j, csym)))
        raise AssertionError(f"chart claims {sym} at [{i},{j}) without a split")

    return build(0, len(tokens), START)


def enumerate_language(grammar: Grammar, max_len: int, *, cap: int = 1_000_000) -> set[TokenString]:
    """All strings of length <= ``max_len`` the grammar derives, by brute
    force bottom-up closure of per-symbol string sets.

    Independent of the CYK chart on purpose: this is the oracle the chart is
    tested against.  ``max_len`` is capped at 8 to guard against blowup;
    :class:`LimitExceeded` fires if the closure exceeds ``cap`` strings.
    """
    if max_len > 8:
        raise ValueError("enumeration is guarded to max_len <= 8")
    strings: dict[str, set[TokenString]] = {}
    for r in grammar.rules:
        if r.is_lexical:
            strings.setdefault(r.lhs, set()).add((r.rhs[0],))
    nonlex = [r for r in grammar.rules if not r.is_lexical]
    changed = True
    while changed:
        changed = False
        for r in nonlex:
            lefts = strings.get(r.rhs[0])
            rights = strings.get(r.rhs[1])
            if not lefts or not rights:
                continue
            target = strings.setdefault(r.lhs, set())
            for a in list(lefts):
                room = max_len - len(a)
                if room < 1:
                    continue
                for b in list(rights):
                    if len(b) > room:
                        continue
                    s = a + b
                    if s not in target:
                        target.add(s)
                        changed = True
        if sum(len(v) for v in strings.values()) > cap:
            raise LimitExceeded(f"enumeration exceeded {cap} strings")
    return set(strings.get(grammar.start, ()))


def cot_budget_bounds(size: int, length: int) -> CotBudgetBounds:
    """Envelope for the reasoning-step budget at grammar size ``size`` and
    string length ``length``: lower size*length^1.7, upper size*length^6."""
    if size < 0:
        raise ValueError("grammar size must be >= 0")
    if length < 1:
        raise ValueError("string length must be >= 1")
    return CotBudgetBounds(lower=size * length**1.7, upper=size * length**6)
