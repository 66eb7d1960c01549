import io
import math

import numpy as np
import pytest

from driftsel.binning import (
    BinnedSeries,
    bin_equal_count,
    default_bin_count,
    read_binned_series,
    series_from_trajectory,
    tokens_of,
    write_binned_series,
)
from driftsel.corpus import CountRecord, Source, Variant
from driftsel.errors import ParameterError, SeriesTooSmallError
from driftsel.wright_fisher import WfParams, simulate


def _rec(verb, variant, year, count, source=Source.EEBO):
    return CountRecord(verb, variant, year, count, source)


from helpers import brute_force_rebin, expected_boundaries, random_verb_records


class TestHandCases:
    def test_eight_tokens_two_years(self):
        records = [
            _rec("come", Variant.BE, 1700, 4),
            _rec("come", Variant.HAVE, 1800, 4, Source.COHA),
        ]
        series = bin_equal_count(records)
        assert list(series.times) == [1700.0, 1800.0]
        assert list(series.freq_have) == [0.0, 1.0]
        assert list(series.bin_sizes) == [4, 4]
        assert series.total_tokens == 8

    def test_all_have_tokens(self):
        records = [_rec("come", Variant.HAVE, 1500 + i, 3) for i in range(20)]
        series = bin_equal_count(records)
        assert np.all(series.freq_have == 1.0)

    def test_148_tokens_five_bins(self):
        # One token per year 1500..1647, variants alternating by year:
        # B = round(ln 148) = 5, sizes in {29, 30}, shares near one half.
        records = []
        for i, year in enumerate(range(1500, 1648)):
            variant = Variant.HAVE if i % 2 == 0 else Variant.BE
            records.append(_rec("walk", variant, year, 1))
        series = bin_equal_count(records)
        assert len(series) == 5
        assert set(series.bin_sizes.tolist()) <= {29, 30}
        assert np.all((series.freq_have >= 0.45) & (series.freq_have <= 0.55))

    def test_too_few_tokens(self):
        with pytest.raises(SeriesTooSmallError):
            bin_equal_count([_rec("come", Variant.BE, 1600, 3)])

    def test_single_year_degenerate(self, caplog):
        records = [_rec("come", Variant.BE, 1600, 5), _rec("come", Variant.HAVE, 1600, 5)]
        with caplog.at_level("WARNING"):
            series = bin_equal_count(records)
        assert len(series) == 1
        assert series.freq_have[0] == 0.5
        assert "single bin" in caplog.text

    def test_mixed_verbs_rejected(self):
        records = [_rec("come", Variant.BE, 1600, 5), _rec("go", Variant.BE, 1700, 5)]
        with pytest.raises(ParameterError):
            bin_equal_count(records)

    def test_n_bins_override(self):
        records = [_rec("come", Variant.BE, 1500 + i, 2) for i in range(50)]
        series = bin_equal_count(records, n_bins=10)
        assert len(series) == 10

    def test_tokens_per_bin_rule(self):
        # log-tokens: about ln(N) tokens per bin, so roughly N / ln(N) bins.
        records = [_rec("come", Variant.BE, 1500 + i, 1) for i in range(100)]
        series = bin_equal_count(records, rule="log-tokens")
        assert len(series) == default_bin_count(100, "log-tokens", math.e)
        assert len(series) > 15

    def test_bad_rule(self):
        records = [_rec("come", Variant.BE, 1500 + i, 2) for i in range(10)]
        with pytest.raises(ParameterError):
            bin_equal_count(records, rule="sqrt")


class TestProperties:
    def _random_records(self, rng, verb="v"):
        return random_verb_records(rng, verb)

    def test_recount_oracle_randomized(self):
        rng = np.random.default_rng(10)
        for _ in range(60):
            records = self._random_records(rng)
            series = bin_equal_count(records)
            oracle = brute_force_rebin(records, series.bin_sizes.tolist())
            for i, (median, share, size) in enumerate(oracle):
                assert series.times[i] == median
                assert series.freq_have[i] == share
                assert series.bin_sizes[i] == size

    def test_boundaries_snap_to_nearest_year_break(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            records = self._random_records(rng)
            n_tokens = sum(r.count for r in records)
            n_years = len({r.year for r in records})
            if n_years < 2:
                continue
            b = default_bin_count(n_tokens, "log-bins", math.e)
            series = bin_equal_count(records)
            actual = np.cumsum(series.bin_sizes)[:-1].tolist()
            assert actual == expected_boundaries(records, b)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            records = self._random_records(rng)
            series = bin_equal_count(records)
            for _ in range(3):
                shuffled = list(records)
                rng.shuffle(shuffled)
                other = bin_equal_count(shuffled)
                assert np.array_equal(series.times, other.times)
                assert np.array_equal(series.freq_have, other.freq_have)
                assert np.array_equal(series.bin_sizes, other.bin_sizes)

    def test_token_conservation(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            records = self._random_records(rng)
            series = bin_equal_count(records)
            have_total = sum(r.count for r in records if r.variant is Variant.HAVE)
            recovered = (series.freq_have * series.bin_sizes).sum()
            assert recovered == pytest.approx(have_total, abs=1e-9)

    def test_monotone_timestamps(self):
        rng = np.random.default_rng(14)
        for _ in range(25):
            series = bin_equal_count(self._random_records(rng))
            assert np.all(np.diff(series.times) >= 0)


class TestSeriesFromTrajectory:
    def test_samples_population_frequencies(self):
        traj = simulate(WfParams(population_size=200, initial_freq=0.5,
                                 generations=90, seed=2))
        series = series_from_trajectory(traj, 10)
        assert len(series) == 10
        epochs = np.rint(np.linspace(0, 90, 10)).astype(int)
        assert np.array_equal(series.times, epochs.astype(float))
        assert np.array_equal(series.freq_have, traj.freqs[epochs])
        assert np.all(series.bin_sizes == 200)

    def test_too_many_points(self):
        traj = simulate(WfParams(population_size=50, initial_freq=0.5,
                                 generations=4, seed=2))
        with pytest.raises(Exception):
            series_from_trajectory(traj, 10)


class TestSerialization:
    def test_round_trip(self):
        records = [_rec("come", Variant.BE, 1500 + i, 3) for i in range(30)]
        records += [_rec("come", Variant.HAVE, 1520 + i, 2) for i in range(30)]
        series = bin_equal_count(records)
        buf = io.StringIO()
        write_binned_series(series, buf)
        buf.seek(0)
        (loaded,) = read_binned_series(buf)
        assert loaded.verb == series.verb
        assert np.array_equal(loaded.times, series.times)
        assert np.array_equal(loaded.freq_have, series.freq_have)
        assert np.array_equal(loaded.bin_sizes, series.bin_sizes)
        assert loaded.total_tokens == series.total_tokens

    def test_header_and_row_shape(self):
        records = [
            _rec("come", Variant.BE, 1600, 4),
            _rec("come", Variant.HAVE, 1700, 4),
        ]
        buf = io.StringIO()
        write_binned_series(bin_equal_count(records), buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "verb\tbin_index\tmedian_year\tfreq_have\tbin_size"
        assert lines[1].split("\t")[0] == "come"
        assert lines[1].split("\t")[1] == "0"

    def test_invariant_validation(self):
        with pytest.raises(ParameterError):
            BinnedSeries("v", np.array([2.0, 1.0]), np.array([0.5, 0.5]),
                         np.array([2, 2]), 4)
        with pytest.raises(ParameterError):
            BinnedSeries("v", np.array([1.0, 2.0]), np.array([0.5, 1.5]),
                         np.array([2, 2]), 4)
        with pytest.raises(ParameterError):
            BinnedSeries("v", np.array([1.0, 2.0]), np.array([0.5, 0.5]),
                         np.array([2, 2]), 5)
