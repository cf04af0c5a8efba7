"""Synthetic transaction generator: exact means, determinism, guards."""

import math

import numpy as np
import pytest

from pricecast.errors import DomainError
from pricecast.ingest import aggregate_monthly, fill_gaps, parse_transactions
from pricecast.synth import (
    SyntheticSpec,
    cell_means,
    district_names,
    generate_rows,
    month_labels,
    write_transactions_csv,
)


class TestSpec:
    def test_defaults_are_study_sized(self):
        spec = SyntheticSpec()
        assert spec.months == 154
        assert spec.start == "2004-01"

    def test_bad_start_label(self):
        with pytest.raises(DomainError):
            SyntheticSpec(start="Jan 2004")

    def test_bad_counts(self):
        with pytest.raises(DomainError):
            SyntheticSpec(districts=0)
        with pytest.raises(DomainError):
            SyntheticSpec(period=0)

    def test_district_names_lowercase_and_stable(self):
        spec = SyntheticSpec(districts=3)
        names = district_names(spec)
        assert names == ["d00", "d01", "d02"]
        assert all(n == n.lower() for n in names)

    def test_month_labels_continue_calendar(self):
        spec = SyntheticSpec(districts=1, months=14, start="2004-11")
        labels = month_labels(spec)
        assert labels[0] == "2004-11"
        assert labels[2] == "2005-01"
        assert len(labels) == 14


class TestCellMeans:
    def test_additive_formula(self):
        spec = SyntheticSpec(districts=3, months=30, base_price=20000.0,
                             district_spread=0.1, trend=60.0, amplitude=800.0,
                             period=12, phase_step=0.25)
        means = cell_means(spec)
        for t in (0, 7, 29):
            for d in range(3):
                base = 20000.0 * (1 + 0.1 * d)
                expect = base + 60.0 * t + 800.0 * math.sin(
                    2 * math.pi * t / 12 + 0.25 * d)
                assert abs(means[t, d] - expect) < 1e-9

    def test_multiplicative_formula(self):
        spec = SyntheticSpec(districts=2, months=24, base_price=10000.0,
                             district_spread=0.2, trend=0.01, amplitude=0.05,
                             period=12, seasonal_mode="multiplicative")
        means = cell_means(spec)
        for t in (0, 5, 23):
            for d in range(2):
                base = 10000.0 * (1 + 0.2 * d)
                expect = base * (1.01 ** t) * (1 + 0.05 * math.sin(2 * math.pi * t / 12))
                assert abs(means[t, d] - expect) < 1e-6

    def test_nonpositive_means_rejected(self):
        with pytest.raises(DomainError):
            cell_means(SyntheticSpec(base_price=100.0, trend=0.0, amplitude=500.0))


class TestGeneration:
    def test_row_count_without_dropout(self):
        spec = SyntheticSpec(districts=2, months=10, txns_per_cell=4)
        rows = generate_rows(spec)
        assert len(rows) == 2 * 10 * 4

    def test_noiseless_prices_equal_cell_means(self):
        spec = SyntheticSpec(districts=2, months=8, noise=0.0)
        means = cell_means(spec)
        labels = month_labels(spec)
        names = district_names(spec)
        for date, district, price in generate_rows(spec):
            t = labels.index(date[:7])
            d = names.index(district)
            assert abs(price - means[t, d]) < 1e-12

    def test_deterministic_bytes(self, tmp_path):
        spec = SyntheticSpec(districts=2, months=12, noise=150.0,
                             missing_prob=0.2, seed=77)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_transactions_csv(spec, a)
        write_transactions_csv(spec, b)
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_noise(self, tmp_path):
        base = dict(districts=1, months=6, noise=100.0)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_transactions_csv(SyntheticSpec(seed=1, **base), a)
        write_transactions_csv(SyntheticSpec(seed=2, **base), b)
        assert a.read_bytes() != b.read_bytes()

    def test_missing_prob_drops_whole_cells(self):
        spec = SyntheticSpec(districts=4, months=50, txns_per_cell=3,
                             missing_prob=0.3, seed=5)
        rows = generate_rows(spec)
        seen = {}
        for date, district, _ in rows:
            seen[(date[:7], district)] = seen.get((date[:7], district), 0) + 1
        # cells either vanish entirely or keep all their transactions
        assert set(seen.values()) == {3}
        n_cells = 4 * 50
        dropped = n_cells - len(seen)
        # loose binomial band around p = 0.3
        assert 0.15 * n_cells < dropped < 0.45 * n_cells

    def test_noise_cannot_cross_zero(self):
        spec = SyntheticSpec(districts=1, months=5, base_price=50.0,
                             trend=0.0, amplitude=0.0, noise=500.0, seed=0)
        with pytest.raises(DomainError):
            generate_rows(spec)


class TestRoundTrip:
    def test_noiseless_ingest_recovers_means_exactly(self, tmp_path):
        spec = SyntheticSpec(districts=3, months=24, noise=0.0, seed=9)
        path = tmp_path / "txns.csv"
        write_transactions_csv(spec, path)
        records, rejected = parse_transactions(path)
        assert rejected == []
        matrix = fill_gaps(aggregate_monthly(
            records, (month_labels(spec)[0], month_labels(spec)[-1])))
        assert matrix.districts == district_names(spec)
        assert matrix.months == month_labels(spec)
        assert np.abs(matrix.values - cell_means(spec)).max() < 1e-9

    def test_gappy_roundtrip_keeps_observed_cells(self, tmp_path):
        spec = SyntheticSpec(districts=2, months=40, noise=0.0,
                             missing_prob=0.15, seed=3)
        path = tmp_path / "txns.csv"
        write_transactions_csv(spec, path)
        records, _ = parse_transactions(path)
        raw = aggregate_monthly(records, (month_labels(spec)[0], month_labels(spec)[-1]))
        means = cell_means(spec)
        observed = raw.coverage > 0
        assert np.abs(raw.values[observed] -
                      means[observed[:, :means.shape[1]]]).max() < 1e-9
