"""Metric correctness against hand-computed values and constructed fixtures."""

import math
import random

import numpy as np
import pytest

from cflbench.dataset import Benchmark
from cflbench.gen import GenParams
from cflbench.grammar import grammar_stats
from cflbench.harness import Baseline, EvalRecord, run_eval
from cflbench.metrics import (
    DegenerateVariance,
    EmptyInput,
    InsufficientPoints,
    InsufficientUnits,
    accuracy_by,
    balanced_accuracy,
    export_regression_csv,
    macro_f1,
    pearson_table,
    prediction_bias,
    spearman_rank_matrix,
    strategy_proportions,
    summarize,
    ttc_curve,
)
from cflbench.sample import NEGATIVE, POSITIVE, SamplingPlan
from conftest import paired_benchmark, stat_grammar


def rec(gid="g0", eid="0", label=POSITIVE, pred=POSITIVE, length=2, tokens=10, model="m"):
    return EvalRecord(
        grammar_id=gid,
        example_id=str(eid),
        model=model,
        label=label,
        length=length,
        prediction=pred,
        raw_completion="",
        completion_tokens=tokens,
    )


def planted_benchmark(n_nonlex: int, n_term: int = 2, n_nonterm: int = 4):
    """Real benchmark whose grammar measures the requested rule counts."""
    g = stat_grammar(n_term, n_nonterm, n_term + 2, n_nonlex)
    plan = SamplingPlan(max_len=4, per_len_cap=1, goal_total=8)
    return Benchmark(
        grammar=g,
        stats=grammar_stats(g),
        gen_params=GenParams(n_term, n_nonterm, n_term + 2, n_nonlex, seed=0),
        plan=plan,
        examples=(),
        coverage=0.0,
    )


class TestBalancedAccuracy:
    def test_oracle_is_exact(self, tmp_path):
        bench = paired_benchmark()
        records = run_eval([bench], Baseline("oracle"), tmp_path / "j.ndjson")
        assert balanced_accuracy(records, [bench]) == (1.0, 0.0)

    def test_always_yes_is_exactly_half_on_paired_cells(self, tmp_path):
        bench = paired_benchmark()
        records = run_eval([bench], Baseline("always-yes"), tmp_path / "j.ndjson")
        mean, _ = balanced_accuracy(records)
        assert mean == 0.5

    def test_hand_computed_sem(self):
        # four cells with accuracies 1, 1, 0, 0
        records = [
            rec(gid="a", label=POSITIVE, pred=POSITIVE, length=2),
            rec(gid="a", label=NEGATIVE, pred=NEGATIVE, length=2),
            rec(gid="b", label=POSITIVE, pred=NEGATIVE, length=2),
            rec(gid="b", label=NEGATIVE, pred=POSITIVE, length=2),
        ]
        mean, sem = balanced_accuracy(records)
        assert mean == 0.5
        assert sem == pytest.approx(math.sqrt(1 / 3) / 2, abs=1e-12)  # 0.28867...
        assert round(sem, 3) == 0.289

    def test_unknown_counts_as_incorrect(self):
        records = [rec(pred="unknown"), rec(eid="1", pred=POSITIVE)]
        mean, _ = balanced_accuracy(records)
        assert mean == 0.5

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            balanced_accuracy([])

    def test_unknown_grammar_reference(self):
        with pytest.raises(KeyError):
            balanced_accuracy([rec(gid="ghost")], [paired_benchmark(max_len=4)])


class TestMacroF1:
    def test_oracle_is_one(self, tmp_path):
        bench = paired_benchmark()
        records = run_eval([bench], Baseline("oracle"), tmp_path / "j.ndjson")
        assert macro_f1(records)[0] == 1.0

    def test_all_unknown_is_zero(self):
        records = [rec(eid=i, label=l, pred="unknown") for i, l in enumerate([POSITIVE, NEGATIVE] * 3)]
        assert macro_f1(records)[0] == 0.0

    def test_hand_confusion(self):
        # positive class: TP=2 FP=1 FN=1; negative class mirrors -> F1 = 2/3 each
        records = [
            rec(eid=0, label=POSITIVE, pred=POSITIVE),
            rec(eid=1, label=POSITIVE, pred=POSITIVE),
            rec(eid=2, label=POSITIVE, pred=NEGATIVE),
            rec(eid=3, label=NEGATIVE, pred=POSITIVE),
            rec(eid=4, label=NEGATIVE, pred=NEGATIVE),
            rec(eid=5, label=NEGATIVE, pred=NEGATIVE),
        ]
        assert macro_f1(records)[0] == pytest.approx(2 / 3, abs=1e-12)

    def test_missing_class_warns(self):
        with pytest.warns(UserWarning):
            mean, _ = macro_f1([rec(label=POSITIVE, pred=POSITIVE)])
        assert mean == 0.5  # positive F1 1, negative F1 0


class TestAccuracyBy:
    def test_oracle_hits_every_bin(self):
        records = [rec(eid=i, length=l, pred=POSITIVE) for i, l in enumerate([3, 13, 23])]
        curve = accuracy_by(records, [], "length")
        assert [b.accuracy for b in curve] == [1.0, 1.0, 1.0]
        assert [(b.lo, b.hi) for b in curve] == [(0, 10), (10, 20), (20, 30)]

    def test_correct_iff_short_fixture(self):
        records = []
        for i, length in enumerate(range(1, 31)):
            good = length <= 10
            records.append(
                rec(eid=i, length=length, label=POSITIVE, pred=POSITIVE if good else NEGATIVE)
            )
        curve = accuracy_by(records, [], "length")
        assert [b.accuracy for b in curve] == [1.0, 0.0, 0.0]

    def test_nonlex_bins_use_grammar_stats(self):
        benches = [planted_benchmark(3), planted_benchmark(12)]
        ids = [b.grammar_id for b in benches]
        records = [
            rec(gid=ids[0], pred=POSITIVE),
            rec(gid=ids[1], eid="1", pred=NEGATIVE),
        ]
        curve = accuracy_by(records, benches, "n_nonlex", bin_edges=[0, 10, 20])
        assert [b.accuracy for b in curve] == [1.0, 0.0]
        assert [b.cells for b in curve] == [1, 1]

    def test_monotone_edges_required(self):
        with pytest.raises(ValueError):
            accuracy_by([rec()], [], "length", bin_edges=[0, 10, 5])


class TestPredictionBias:
    def test_always_yes_curve(self, tmp_path):
        bench = paired_benchmark(max_len=20)
        records = run_eval([bench], Baseline("always-yes"), tmp_path / "j.ndjson")
        for point in prediction_bias(records):
            assert point.positive_rate == 1.0
            assert point.unknown_rate == 0.0

    def test_unknowns_excluded_from_rate(self):
        records = [
            rec(eid=0, pred=POSITIVE, length=5),
            rec(eid=1, pred=NEGATIVE, length=5),
            rec(eid=2, pred="unknown", length=5),
            rec(eid=3, pred="unknown", length=7),
        ]
        by_len = {p.length: p for p in prediction_bias(records)}
        assert by_len[5].positive_rate == 0.5
        assert by_len[5].unknown_rate == pytest.approx(1 / 3)
        assert by_len[7].positive_rate is None
        assert by_len[7].unknown_rate == 1.0


def _records_with_grammar_accuracies(model, accs):
    """10 records per grammar; grammar i has the given mean accuracy."""
    records = []
    for i, acc in enumerate(accs):
        correct = round(acc * 10)
        for j in range(10):
            good = j < correct
            records.append(
                rec(gid=f"g{i}", eid=j, model=model,
                    label=POSITIVE, pred=POSITIVE if good else NEGATIVE)
            )
    return records


class TestSpearman:
    def test_self_correlation(self):
        a = _records_with_grammar_accuracies("a", [0.2, 0.5, 0.8])
        models, m = spearman_rank_matrix({"a": a, "b": a}, "grammar", None, [])
        assert m[0, 1] == pytest.approx(1.0)

    def test_flipped_twin(self):
        a = _records_with_grammar_accuracies("a", [0.2, 0.5, 0.8])
        b = _records_with_grammar_accuracies("b", [0.8, 0.5, 0.2])
        _, m = spearman_rank_matrix({"a": a, "b": b}, "grammar", None, [])
        assert m[0, 1] == pytest.approx(-1.0)

    def test_hand_case(self):
        # ranks (1, 2, 3) against (3, 1, 2) -> rho = -0.5
        a = _records_with_grammar_accuracies("a", [0.2, 0.5, 0.8])
        b = _records_with_grammar_accuracies("b", [0.8, 0.2, 0.5])
        _, m = spearman_rank_matrix({"a": a, "b": b}, "grammar", None, [])
        assert m[0, 1] == pytest.approx(-0.5)

    def test_insufficient_units(self):
        a = _records_with_grammar_accuracies("a", [0.2, 0.5])
        with pytest.raises(InsufficientUnits):
            spearman_rank_matrix({"a": a, "b": a}, "grammar", None, [])

    def test_example_unit_with_length_bin(self):
        recs_a, recs_b = [], []
        for i, length in enumerate([2, 5, 8, 15]):
            recs_a.append(rec(eid=i, length=length, model="a", pred=POSITIVE))
            recs_b.append(rec(eid=i, length=length, model="b", pred=POSITIVE))
        models, m = spearman_rank_matrix(
            {"a": recs_a, "b": recs_b}, "example", (0, 10), []
        )
        assert m.shape == (2, 2)


class TestPearson:
    def test_affine_metric_is_perfectly_correlated(self):
        benches = [
            planted_benchmark(n, n_term=2 + i % 3, n_nonterm=4 + i % 3)
            for i, n in enumerate((3, 5, 9, 14, 20))
        ]
        records = []
        for b in benches:
            # per-grammar accuracy proportional to log(n_nonlex), via record mix
            acc = (math.log(b.stats.n_nonlex) - math.log(3)) / (math.log(20) - math.log(3))
            n_correct = round(acc * 20)
            for j in range(20):
                records.append(
                    rec(gid=b.grammar_id, eid=j, label=POSITIVE,
                        pred=POSITIVE if j < n_correct else NEGATIVE)
                )
        rows = pearson_table({"m": records}, benches)
        r_acc = next(r for r in rows if r.metric == "accuracy" and r.param == "n_nonlex")
        assert r_acc.r == pytest.approx(1.0, abs=5e-3)  # rounding to 20 records

    def test_hand_formula_agreement(self):
        benches = [
            planted_benchmark(n, n_term=2 + i % 3, n_nonterm=4 + i % 3)
            for i, n in enumerate((3, 4, 7, 11, 18))
        ]
        accs = [0.9, 0.7, 0.65, 0.4, 0.2]
        records = []
        for b, acc in zip(benches, accs):
            n_correct = round(acc * 20)
            for j in range(20):
                records.append(
                    rec(gid=b.grammar_id, eid=j, label=POSITIVE,
                        pred=POSITIVE if j < n_correct else NEGATIVE)
                )
        rows = pearson_table({"m": records}, benches)
        r_acc = next(r for r in rows if r.metric == "accuracy" and r.param == "n_nonlex")
        # textbook formula, computed independently
        xs = np.log([b.stats.n_nonlex for b in benches])
        ys = np.array([round(a * 20) / 20 for a in accs])
        expected = float(
            ((xs - xs.mean()) * (ys - ys.mean())).sum()
            / math.sqrt(((xs - xs.mean()) ** 2).sum() * ((ys - ys.mean()) ** 2).sum())
        )
        assert r_acc.r == pytest.approx(expected, abs=1e-12)

    def test_degenerate_variance(self):
        benches = [planted_benchmark(5), planted_benchmark(5)]
        # distinct grammars, same statistics
        benches[1] = planted_benchmark(5, n_term=3)
        records = [rec(gid=b.grammar_id) for b in benches]
        with pytest.raises(DegenerateVariance):
            pearson_table({"m": records}, benches)


class TestTtcCurve:
    def test_flat_curve(self):
        records = [rec(eid=i, length=l, tokens=64) for i, l in enumerate(range(1, 11))]
        curve = ttc_curve(records, token_limit=128)
        assert curve.peak_length == 1
        assert curve.fit_lengths == tuple(range(1, 11))
        assert curve.cubic_coeff == pytest.approx(0.0, abs=1e-12)
        assert curve.intercept == pytest.approx(0.5, abs=1e-12)

    def test_exact_cubic_recovery(self):
        c = 3
        records = [rec(eid=i, length=l, tokens=c * l**3) for i, l in enumerate(range(1, 31))]
        curve = ttc_curve(records, token_limit=4096)
        assert curve.cubic_coeff == pytest.approx(c / 4096, rel=1e-9)
        assert curve.intercept == pytest.approx(0.0, abs=1e-9)

    def test_peaked_fixture_fits_pre_peak_only(self):
        tokens_by_len = {l: 10 * l for l in range(1, 11)}
        tokens_by_len.update({l: 100 - 5 * (l - 10) for l in range(11, 21)})
        records = [rec(eid=i, length=l, tokens=t) for i, (l, t) in enumerate(tokens_by_len.items())]
        curve = ttc_curve(records, token_limit=100)
        assert curve.peak_length == 10
        assert curve.fit_lengths == tuple(range(1, 11))
        # the fit over lengths 1..10 only, verified against a direct solve
        x = np.array(curve.fit_lengths, dtype=float)
        y = np.array([tokens_by_len[l] / 100 for l in curve.fit_lengths])
        expected, *_ = np.linalg.lstsq(np.column_stack([x**3, np.ones_like(x)]), y, rcond=None)
        assert curve.cubic_coeff == pytest.approx(expected[0])
        assert curve.intercept == pytest.approx(expected[1])

    def test_insufficient_points(self):
        with pytest.raises(InsufficientPoints):
            ttc_curve([rec(length=5, tokens=10)], token_limit=100)


class TestStrategyProportions:
    def test_all_rule_based(self):
        bins = strategy_proportions(["rule-based"] * 30, list(range(1, 31)))
        assert all(b.fractions == {"rule-based": 1.0} for b in bins)

    def test_half_and_half(self):
        labels = ["rule-based", "heuristic"] * 10
        bins = strategy_proportions(labels, [5] * 20)
        assert bins[0].fractions == {"heuristic": 0.5, "rule-based": 0.5}

    def test_shift_is_visible_in_second_bin(self):
        lengths = list(range(1, 21))
        labels = ["rule-based" if l < 15 else "heuristic" for l in lengths]
        bins = strategy_proportions(labels, lengths)
        assert bins[0].fractions == {"rule-based": 1.0}
        assert bins[1].fractions == {"heuristic": 0.6, "rule-based": 0.4}

    def test_fractions_sum_to_one(self):
        rng = random.Random(0)
        cats = ["rule-based", "heuristic", "code", "unknown"]
        labels = [rng.choice(cats) for _ in range(200)]
        lengths = [rng.randint(1, 50) for _ in range(200)]
        for b in strategy_proportions(labels, lengths):
            assert sum(b.fractions.values()) == pytest.approx(1.0)


class TestRegressionExport:
    def test_centering_and_row_count(self, tmp_path):
        benches = [planted_benchmark(n) for n in (3, 7, 15)]
        records = []
        for i, b in enumerate(benches):
            for j, length in enumerate((2, 9, 30)):
                records.append(rec(gid=b.grammar_id, eid=j, length=length, model=f"m{i % 2}"))
        path = tmp_path / "reg.csv"
        export_regression_csv(records, benches, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# centering:")
        rows = [l.split(",") for l in lines[2:]]
        assert len(rows) == len(records)
        for col in (2, 3):
            assert abs(sum(float(r[col]) for r in rows)) < 1e-12

    def test_golden_two_record_fixture(self, tmp_path):
        from pathlib import Path

        benches = [planted_benchmark(4)]
        records = [
            rec(gid=benches[0].grammar_id, eid=0, length=2, pred=POSITIVE, model="m"),
            rec(gid=benches[0].grammar_id, eid=1, length=8, pred=NEGATIVE, model="m"),
        ]
        path = tmp_path / "reg.csv"
        export_regression_csv(records, benches, path)
        golden = Path(__file__).parent / "golden" / "regression_two_records.csv"
        assert path.read_text() == golden.read_text()


class TestAnchors:
    def test_fair_coin_within_three_sigma(self):
        rng = random.Random(123)
        records = []
        for g in range(50):
            for length in range(1, 21):
                for label in (POSITIVE, NEGATIVE):
                    for j in range(5):
                        pred = POSITIVE if rng.random() < 0.5 else NEGATIVE
                        records.append(
                            rec(gid=f"g{g}", eid=f"{length}-{label}-{j}",
                                label=label, pred=pred, length=length)
                        )
        assert len(records) == 10_000
        mean, _ = balanced_accuracy(records)
        n_cells = 50 * 20 * 2
        sigma = math.sqrt(0.25 / 5 / n_cells)  # cell variance 0.25/5, averaged
        assert abs(mean - 0.5) <= 3 * sigma

    def test_summarize_shape(self, tmp_path):
        bench = paired_benchmark(max_len=10)
        records = run_eval([bench], Baseline("oracle"), tmp_path / "j.ndjson")
        (summary,) = summarize(records)
        assert summary.model == "baseline:oracle"
        assert summary.balanced_accuracy == 1.0
        assert summary.unknown_rate == 0.0
