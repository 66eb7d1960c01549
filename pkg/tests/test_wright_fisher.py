import io
import math

import numpy as np
import pytest

from driftsel.errors import ParameterError
from driftsel.wright_fisher import (
    WfParams,
    estimate_fixation_prob,
    simulate,
    simulate_batch,
    substream,
    wf_step,
    write_trajectory,
)


class TestParams:
    def test_valid(self):
        p = WfParams(population_size=100, selection_coeff=0.1, initial_freq=0.5,
                     generations=10, seed=3)
        assert p.population_size == 100

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"population_size": 1},
            {"population_size": 100, "selection_coeff": -1.0},
            {"population_size": 100, "selection_coeff": float("nan")},
            {"population_size": 100, "initial_freq": -0.1},
            {"population_size": 100, "initial_freq": 1.5},
            {"population_size": 100, "generations": 0},
            {"population_size": 100, "seed": -1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            WfParams(**kwargs)


class TestStep:
    def test_absorbing_states(self):
        rng = substream(0)
        assert wf_step(0.0, 100, 0.3, rng) == 0.0
        assert wf_step(1.0, 100, -0.5, rng) == 1.0

    def test_invalid_parameters(self):
        rng = substream(0)
        with pytest.raises(ParameterError):
            wf_step(0.5, 1, 0.0, rng)
        with pytest.raises(ParameterError):
            wf_step(0.5, 100, -1.0, rng)
        with pytest.raises(ParameterError):
            wf_step(1.5, 100, 0.0, rng)

    def test_neutral_mean_matches_binomial(self):
        # Mean of 1e5 draws at x = 0.5, N = 100: per-draw sd is
        # sqrt(0.25 / 100) = 0.05, so a 3-sigma band around 0.5.
        rng = substream(1)
        n_draws = 100_000
        total = 0.0
        for _ in range(n_draws):
            total += wf_step(0.5, 100, 0.0, rng)
        mean = total / n_draws
        assert abs(mean - 0.5) <= 3 * 0.05 / math.sqrt(n_draws)

    def test_selection_mean_matches_expected_offspring_freq(self):
        # E[step] = x(1+s) / (1 + s x); 2e4 draws, 4-sigma band.
        x, n, s = 0.5, 100, 0.2
        expected = x * (1 + s) / (1 + s * x)
        rng = substream(7)
        draws = np.array([wf_step(x, n, s, rng) for _ in range(20_000)])
        sigma = math.sqrt(expected * (1 - expected) / n)
        assert abs(draws.mean() - expected) <= 4 * sigma / math.sqrt(len(draws))

    def test_returns_grid_values(self):
        rng = substream(5)
        for _ in range(100):
            x = wf_step(0.37, 50, 0.1, rng)
            assert x == round(x * 50) / 50


class TestSimulate:
    def test_all_ones_when_started_fixed(self):
        traj = simulate(WfParams(population_size=100, initial_freq=1.0,
                                 generations=50, seed=7))
        assert np.all(traj.freqs == 1.0)
        assert traj.absorbed_at == 0

    def test_deterministic(self):
        params = WfParams(population_size=100, initial_freq=0.5, generations=10, seed=42)
        first = simulate(params)
        second = simulate(params)
        assert np.array_equal(first.freqs, second.freqs)
        other = simulate(WfParams(population_size=100, initial_freq=0.5,
                                  generations=10, seed=43))
        assert not np.array_equal(first.freqs, other.freqs)

    def test_length_and_start(self):
        params = WfParams(population_size=60, initial_freq=0.25, generations=33, seed=1)
        traj = simulate(params)
        assert len(traj.freqs) == 34
        assert traj.freqs[0] == 0.25

    def test_frequencies_on_grid(self):
        params = WfParams(population_size=73, initial_freq=36 / 73, generations=200, seed=9)
        traj = simulate(params)
        counts = traj.freqs * 73
        assert np.allclose(counts, np.rint(counts), atol=1e-9)

    def test_absorption_tail_constant(self):
        # Small population absorbs fast; the tail must repeat the hit value.
        traj = simulate(WfParams(population_size=10, initial_freq=0.5,
                                 generations=300, seed=3))
        assert traj.absorbed_at is not None
        hit = traj.freqs[traj.absorbed_at]
        assert hit in (0.0, 1.0)
        assert np.all(traj.freqs[traj.absorbed_at:] == hit)
        assert np.all(~np.isin(traj.freqs[: traj.absorbed_at], (0.0, 1.0)))


class TestBatch:
    def test_bounded_support_and_grid(self):
        rng = substream(11)
        out = simulate_batch(np.full(200, 50), 0.05, 0.3, 40, rng)
        assert out.shape == (200, 41)
        assert np.all((out >= 0.0) & (out <= 1.0))
        counts = out * 50
        assert np.allclose(counts, np.rint(counts), atol=1e-9)

    def test_neutral_martingale(self):
        # Ensemble mean of the final frequency stays within
        # 4 * sqrt(x0 (1 - x0) / R) of x0.
        replicates = 10_000
        rng = substream(123)
        out = simulate_batch(np.full(replicates, 100), 0.0, 0.5, 100, rng)
        bound = 4 * math.sqrt(0.25 / replicates)
        assert abs(out[:, -1].mean() - 0.5) <= bound

    def test_invalid_parameters(self):
        rng = substream(0)
        with pytest.raises(ParameterError):
            simulate_batch([1], 0.0, 0.5, 10, rng)
        with pytest.raises(ParameterError):
            simulate_batch([10], -1.5, 0.5, 10, rng)
        with pytest.raises(ParameterError):
            simulate_batch([10], 0.0, 1.5, 10, rng)
        with pytest.raises(ParameterError):
            simulate_batch([10], 0.0, 0.5, 0, rng)


class TestFixation:
    def test_lost_at_zero_exactly(self):
        est = estimate_fixation_prob(
            WfParams(population_size=100, initial_freq=0.0, seed=1), replicates=50
        )
        assert est.probability == 0.0
        assert est.n_lost == 50

    def test_fixed_at_one_exactly(self):
        est = estimate_fixation_prob(
            WfParams(population_size=100, initial_freq=1.0, seed=1), replicates=50
        )
        assert est.probability == 1.0

    def test_neutral_matches_initial_frequency(self):
        # Martingale argument: neutral fixation probability equals x0.
        est = estimate_fixation_prob(
            WfParams(population_size=100, initial_freq=0.3, seed=21), replicates=10_000
        )
        assert est.n_unabsorbed == 0
        assert abs(est.probability - 0.3) <= 0.015

    def test_matches_diffusion_formula(self):
        # Independent oracle: u(x0) = (1 - exp(-2 N s x0)) / (1 - exp(-2 N s)).
        n, s, x0 = 1000, 0.01, 0.1
        expected = (1 - math.exp(-2 * n * s * x0)) / (1 - math.exp(-2 * n * s))
        est = estimate_fixation_prob(
            WfParams(population_size=n, selection_coeff=s, initial_freq=x0, seed=8),
            replicates=10_000,
        )
        assert abs(est.probability - expected) <= 0.02

    def test_cap_warning_and_exclusion(self):
        est = estimate_fixation_prob(
            WfParams(population_size=1000, initial_freq=0.5, seed=4),
            replicates=200,
            max_generations=2,
        )
        assert est.n_unabsorbed > 20  # nearly everything is still segregating
        assert est.cap_warning
        assert est.n_fixed + est.n_lost + est.n_unabsorbed == 200

    def test_replicates_validation(self):
        with pytest.raises(ParameterError):
            estimate_fixation_prob(WfParams(population_size=10), replicates=0)


class TestExport:
    def test_format(self):
        traj = simulate(WfParams(population_size=100, selection_coeff=0.0,
                                 initial_freq=0.5, generations=100, seed=1))
        buf = io.StringIO()
        write_trajectory(traj, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "# N=100 s=0.0 x0=0.5 seed=1"
        assert len(lines) == 102  # header plus T + 1 rows
        gen, freq = lines[1].split("\t")
        assert gen == "0" and float(freq) == 0.5

    def test_deterministic_bytes(self):
        params = WfParams(population_size=50, selection_coeff=0.02,
                          initial_freq=0.3, generations=20, seed=9)
        bufs = []
        for _ in range(2):
            buf = io.StringIO()
            write_trajectory(simulate(params), buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]
