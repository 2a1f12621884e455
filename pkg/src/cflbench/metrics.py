"""Every quantitative analysis computed from eval records and benchmark
metadata: class-balanced accuracy, macro F1, per-complexity curves,
prediction bias, cross-model rank agreement, parameter correlations,
test-time-compute curves with a cubic fit, strategy proportions, and the
regression-data CSV export.

Scoring conventions (documented, applied everywhere): an "unknown"
prediction counts as incorrect for accuracy, and as a third predicted label
for F1.  Balanced aggregates weight each (grammar, label, length) cell
equally; their standard error is taken over cells.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .harness import EvalRecord
from .sample import NEGATIVE, POSITIVE

CellKey = tuple[str, str, int]  # (grammar_id, label, length)


class EmptyInput(Exception):
    """No records to aggregate."""


class InsufficientUnits(Exception):
    """Fewer than three comparable units in the requested bin."""


class DegenerateVariance(Exception):
    """A correlate is constant, so the correlation is undefined."""


class InsufficientPoints(Exception):
    """Too few pre-peak lengths to fit the cubic."""


def is_correct(record: EvalRecord) -> bool:
    return record.prediction == record.label


def group_cells(records) -> dict[CellKey, list[EvalRecord]]:
    cells: dict[CellKey, list[EvalRecord]] = {}
    for r in records:
        cells.setdefault((r.grammar_id, r.label, r.length), []).append(r)
    return cells


def group_by_model(records) -> dict[str, list[EvalRecord]]:
    out: dict[str, list[EvalRecord]] = {}
    for r in records:
        out.setdefault(r.model, []).append(r)
    return out


def _mean_sem(values) -> tuple[float, float]:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyInput("no values to aggregate")
    sem = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), sem


def balanced_accuracy(records, benchmarks=None) -> tuple[float, float]:
    """Mean per-cell accuracy with equal cell weight, plus the standard error
    over cells.  Cells group records by (grammar, label, length); unknown
    predictions count as incorrect."""
    records = list(records)
    if not records:
        raise EmptyInput("no records")
    if benchmarks is not None:
        known = {b.grammar_id for b in benchmarks}
        missing = {r.grammar_id for r in records} - known
        if missing:
            raise KeyError(f"records reference unknown grammars: {sorted(missing)[:3]}")
    cells = group_cells(records)
    accs = [sum(map(is_correct, rs)) / len(rs) for rs in cells.values()]
    return _mean_sem(accs)


def _f1(records, cls: str) -> float:
    tp = sum(1 for r in records if r.label == cls and r.prediction == cls)
    fp = sum(1 for r in records if r.label != cls and r.prediction == cls)
    fn = sum(1 for r in records if r.label == cls and r.prediction != cls)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def macro_f1(records) -> tuple[float, float]:
    """Unweighted mean of the per-class F1 scores (positive and negative),
    with unknown predictions acting as a third, never-matching label.  The
    standard error is taken over per-grammar macro F1 values."""
    records = list(records)
    if not records:
        raise EmptyInput("no records")
    for cls in (POSITIVE, NEGATIVE):
        if not any(r.label == cls for r in records):
            warnings.warn(f"no true {cls} examples; that class scores F1 = 0", stacklevel=2)
    overall = (_f1(records, POSITIVE) + _f1(records, NEGATIVE)) / 2
    by_grammar: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_grammar.setdefault(r.grammar_id, []).append(r)
    per_grammar = [
        (_f1(rs, POSITIVE) + _f1(rs, NEGATIVE)) / 2 for rs in by_grammar.values()
    ]
    _, sem = _mean_sem(per_grammar)
    return overall, sem


@dataclass(frozen=True)
class BinAccuracy:
    lo: float  # bin covers (lo, hi]
    hi: float
    accuracy: float
    sem: float
    cells: int


def default_bins(dimension: str, values) -> list[float]:
    width = 100 if dimension == "n_nonlex" else 10
    top = max(values) if len(values) else width
    edges = [0.0]
    while edges[-1] < top:
        edges.append(edges[-1] + width)
    return edges


def accuracy_by(records, benchmarks, dimension: str, bin_edges=None) -> list[BinAccuracy]:
    """Cell-balanced accuracy per complexity bin.  ``dimension`` is
    "n_nonlex" (grammar size, default bin width 100) or "length" (default
    width 10); bins are right-closed intervals (lo, hi]."""
    records = list(records)
    if dimension not in ("n_nonlex", "length"):
        raise ValueError("dimension must be 'n_nonlex' or 'length'")
    if dimension == "n_nonlex":
        size_of = {b.grammar_id: b.stats.n_nonlex for b in benchmarks}
        value = lambda key: size_of[key[0]]
    else:
        value = lambda key: key[2]

    cells = group_cells(records)
    values = [value(k) for k in cells]
    if bin_edges is None:
        bin_edges = default_bins(dimension, values)
    edges = list(bin_edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly increasing")

    out = []
    for lo, hi in zip(edges, edges[1:]):
        accs = [
            sum(map(is_correct, rs)) / len(rs)
            for k, rs in cells.items()
            if lo < value(k) <= hi
        ]
        if accs:
            mean, sem = _mean_sem(accs)
            out.append(BinAccuracy(lo, hi, mean, sem, len(accs)))
        else:
            out.append(BinAccuracy(lo, hi, float("nan"), float("nan"), 0))
    return out


@dataclass(frozen=True)
class BiasPoint:
    length: int
    positive_rate: float | None  # among non-unknown predictions
    unknown_rate: float
    count: int


def prediction_bias(records) -> list[BiasPoint]:
    """P(predict positive) by length among decided predictions, with the
    unknown rate carried alongside rather than folded in."""
    by_len: dict[int, list[EvalRecord]] = {}
    for r in records:
        by_len.setdefault(r.length, []).append(r)
    out = []
    for length in sorted(by_len):
        rs = by_len[length]
        decided = [r for r in rs if r.prediction in (POSITIVE, NEGATIVE)]
        rate = (
            sum(1 for r in decided if r.prediction == POSITIVE) / len(decided)
            if decided
            else None
        )
        out.append(
            BiasPoint(
                length=length,
                positive_rate=rate,
                unknown_rate=1 - len(decided) / len(rs),
                count=len(rs),
            )
        )
    return out


def _unit_accuracy(records, unit: str, benchmarks, bin_range) -> dict:
    if unit == "grammar":
        size_of = {b.grammar_id: b.stats.n_nonlex for b in benchmarks}
        key_of = lambda r: r.grammar_id
        value_of = lambda r: size_of[r.grammar_id]
    elif unit == "example":
        key_of = lambda r: (r.grammar_id, r.example_id)
        value_of = lambda r: r.length
    else:
        raise ValueError("unit must be 'grammar' or 'example'")
    groups: dict = {}
    for r in records:
        if bin_range is not None and not bin_range[0] < value_of(r) <= bin_range[1]:
            continue
        groups.setdefault(key_of(r), []).append(r)
    return {k: sum(map(is_correct, rs)) / len(rs) for k, rs in groups.items()}


def spearman_rank_matrix(
    per_model_records, unit: str, bin_range, benchmarks
) -> tuple[list[str], np.ndarray]:
    """Pairwise Spearman rank correlation of per-unit mean accuracy between
    models, over units inside one complexity bin ((lo, hi] on nonlexical
    rules for grammars, on length for examples; None means no restriction).
    Ties get average ranks.  Raises InsufficientUnits below 3 shared units."""
    models = list(per_model_records)
    if len(models) < 2:
        raise ValueError("need at least two models to correlate")
    unit_acc = {
        m: _unit_accuracy(per_model_records[m], unit, benchmarks, bin_range) for m in models
    }
    matrix = np.eye(len(models))
    for i in range(len(models)):
        for j in range(i + 1, len(models)):
            shared = sorted(set(unit_acc[models[i]]) & set(unit_acc[models[j]]))
            if len(shared) < 3:
                raise InsufficientUnits(
                    f"{len(shared)} shared units between {models[i]} and {models[j]}"
                )
            a = [unit_acc[models[i]][u] for u in shared]
            b = [unit_acc[models[j]][u] for u in shared]
            if np.ptp(a) == 0 or np.ptp(b) == 0:
                rho = float("nan")  # ranks carry no information
            else:
                rho = sps.spearmanr(a, b).statistic
            matrix[i, j] = matrix[j, i] = rho
    return models, matrix


@dataclass(frozen=True)
class PearsonRow:
    model: str
    metric: str  # "accuracy" or "macro_f1"
    param: str  # n_term | n_nonterm | n_lex | n_nonlex
    r: float


_PARAMS = ("n_term", "n_nonterm", "n_lex", "n_nonlex")


def pearson_table(per_model_records, benchmarks) -> list[PearsonRow]:
    """Pearson r between per-grammar scores (cell-balanced accuracy and
    macro F1, grouped by grammar) and the log of each post-reduction size
    statistic.  Raises DegenerateVariance when a statistic is constant."""
    stats_of = {b.grammar_id: b.stats for b in benchmarks}
    rows = []
    for model, records in per_model_records.items():
        by_grammar: dict[str, list[EvalRecord]] = {}
        for r in records:
            by_grammar.setdefault(r.grammar_id, []).append(r)
        gids = sorted(by_grammar)
        acc = []
        f1 = []
        for gid in gids:
            rs = by_grammar[gid]
            cell_accs = [
                sum(map(is_correct, cell)) / len(cell) for cell in group_cells(rs).values()
            ]
            acc.append(float(np.mean(cell_accs)))
            f1.append((_f1(rs, POSITIVE) + _f1(rs, NEGATIVE)) / 2)
        for param in _PARAMS:
            vals = np.log([getattr(stats_of[gid], param) for gid in gids])
            if np.ptp(vals) == 0:
                raise DegenerateVariance(f"{param} is constant across grammars")
            for metric, series in (("accuracy", acc), ("macro_f1", f1)):
                if np.ptp(series) == 0:
                    r_val = float("nan")
                else:
                    r_val = float(sps.pearsonr(series, vals).statistic)
                rows.append(PearsonRow(model=model, metric=metric, param=param, r=r_val))
    return rows


@dataclass(frozen=True)
class TtcCurve:
    lengths: tuple[int, ...]
    values: tuple[float, ...]  # mean completion tokens / token limit, per length
    peak_length: int  # first length attaining the maximum
    cubic_coeff: float  # a in a * length^3 + b
    intercept: float  # b
    fit_lengths: tuple[int, ...]  # lengths the fit used (through the last max)


def ttc_curve(records, token_limit: int) -> TtcCurve:
    """Relative test-time-compute by length, with a least-squares fit of
    a*length^3 + b to the pre-peak points.

    The fit uses every length up to the last occurrence of the curve's
    maximum (so a flat curve is fit in full); the reported peak is the first
    occurrence.  Raises InsufficientPoints when fewer than two lengths are
    available to fit.
    """
    if token_limit <= 0:
        raise ValueError("token_limit must be positive")
    by_len: dict[int, list[int]] = {}
    for r in records:
        by_len.setdefault(r.length, []).append(r.completion_tokens)
    lengths = sorted(by_len)
    values = [float(np.mean(by_len[l])) / token_limit for l in lengths]
    if not lengths:
        raise EmptyInput("no records")
    top = max(values)
    peak = lengths[values.index(top)]
    last_peak = lengths[len(values) - 1 - values[::-1].index(top)]
    fit_lengths = [l for l in lengths if l <= last_peak]
    if len(fit_lengths) < 2:
        raise InsufficientPoints(f"only {len(fit_lengths)} pre-peak lengths")
    x = np.array(fit_lengths, dtype=float)
    y = np.array(values[: len(fit_lengths)])
    design = np.column_stack([x**3, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return TtcCurve(
        lengths=tuple(lengths),
        values=tuple(values),
        peak_length=peak,
        cubic_coeff=float(a),
        intercept=float(b),
        fit_lengths=tuple(fit_lengths),
    )


@dataclass(frozen=True)
class StrategyBin:
    lo: float
    hi: float
    fractions: dict  # category -> share, summing to 1 within the bin
    count: int


def strategy_proportions(labels, lengths, bin_width: int = 10) -> list[StrategyBin]:
    """Per-length-bin share of each strategy category (unknown included as
    its own share)."""
    labels = [l.category if hasattr(l, "category") else l for l in labels]
    lengths = list(lengths)
    if len(labels) != len(lengths):
        raise ValueError("labels and lengths must align")
    if not labels:
        return []
    edges = default_bins("length", lengths) if bin_width == 10 else None
    if edges is None:
        edges = [0.0]
        while edges[-1] < max(lengths):
            edges.append(edges[-1] + bin_width)
    out = []
    for lo, hi in zip(edges, edges[1:]):
        inside = [lab for lab, ln in zip(labels, lengths) if lo < ln <= hi]
        if not inside:
            continue
        fractions = {cat: inside.count(cat) / len(inside) for cat in sorted(set(inside))}
        out.append(StrategyBin(lo=lo, hi=hi, fractions=fractions, count=len(inside)))
    return out


def export_regression_csv(records, benchmarks, path) -> None:
    """Per-record regression inputs: model, correctness, and centered log10
    transforms of grammar size (nonlexical rules) and example length.  The
    centering constants are recorded in ``#`` header comments."""
    records = list(records)
    if not records:
        raise EmptyInput("no records")
    size_of = {b.grammar_id: b.stats.n_nonlex for b in benchmarks}
    log_size = np.log10([size_of[r.grammar_id] for r in records])
    log_len = np.log10([r.length for r in records])
    size_mean = float(log_size.mean())
    len_mean = float(log_len.mean())
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# centering: mean_log10_n_nonlex={size_mean!r} mean_log10_length={len_mean!r}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["model", "correct", "log10_n_nonlex_centered", "log10_length_centered"])
        for r, ls, ll in zip(records, log_size, log_len):
            writer.writerow(
                [r.model, int(is_correct(r)), repr(float(ls) - size_mean), repr(float(ll) - len_mean)]
            )


@dataclass(frozen=True)
class ModelSummary:
    model: str
    n_records: int
    balanced_accuracy: float
    balanced_accuracy_sem: float
    macro_f1: float
    macro_f1_sem: float
    unknown_rate: float


def summarize(records) -> list[ModelSummary]:
    """Headline aggregates per model."""
    out = []
    for model, recs in sorted(group_by_model(records).items()):
        acc, acc_sem = balanced_accuracy(recs)
        f1, f1_sem = macro_f1(recs)
        unknown = sum(1 for r in recs if r.prediction not in (POSITIVE, NEGATIVE))
        out.append(
            ModelSummary(
                model=model,
                n_records=len(recs),
                balanced_accuracy=acc,
                balanced_accuracy_sem=acc_sem,
                macro_f1=f1,
                macro_f1_sem=f1_sem,
                unknown_rate=unknown / len(recs),
            )
        )
    return out
