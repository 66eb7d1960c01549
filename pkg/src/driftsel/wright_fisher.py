"""Wright-Fisher dynamics of two competing variants in a fixed-size population.

Each generation the population of size ``N`` is resampled: if the focal
variant has parental frequency ``x`` and relative fitness ``1 + s``, the next
count is Binomial(N, x * (1 + s) / (1 + s * x)).  ``s = 0`` is pure drift,
and frequencies 0 and 1 are absorbing.  This process is the null model
(drift) and the positive model (selection) for both the frequency increment
test and the neural classifier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

logger = logging.getLogger(__name__)

# Fixed tags for deriving independent substreams from one user seed.
_STREAM_TRAJECTORY = 0
_STREAM_FIXATION = 1


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent, reproducible random stream keyed by ``(seed, *path)``.

    Built on the counter-based Philox generator, so streams with distinct
    keys never overlap and results do not depend on call order elsewhere.
    """
    key = (int(seed),) + tuple(int(p) for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class WfParams:
    """Configuration of one Wright-Fisher run.

    Attributes
    ----------
    population_size : int
        Number of individuals N (>= 2).
    selection_coeff : float
        Fitness advantage s of the focal variant (> -1; 0 means drift).
    initial_freq : float
        Starting frequency of the focal variant, in [0, 1].
    generations : int
        Number of resampling steps T (>= 1).
    seed : int
        Non-negative seed for the random stream.
    """

    population_size: int
    selection_coeff: float = 0.0
    initial_freq: float = 0.5
    generations: int = 100
    seed: int = 0

    def __post_init__(self):
        if int(self.population_size) != self.population_size or self.population_size < 2:
            raise ParameterError(
                f"population_size must be an integer >= 2, got {self.population_size!r}"
            )
        if not np.isfinite(self.selection_coeff) or self.selection_coeff <= -1.0:
            raise ParameterError(
                f"selection_coeff must be a finite value > -1, got {self.selection_coeff!r}"
            )
        if not 0.0 <= self.initial_freq <= 1.0:
            raise ParameterError(f"initial_freq must be in [0, 1], got {self.initial_freq!r}")
        if int(self.generations) != self.generations or self.generations < 1:
            raise ParameterError(
                f"generations must be an integer >= 1, got {self.generations!r}"
            )
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class Trajectory:
    """A simulated frequency path.

    ``freqs`` has length ``generations + 1`` with ``freqs[0]`` equal to the
    initial frequency; every later entry is an exact multiple of ``1/N``.
    ``absorbed_at`` is the first generation at which the path hit 0 or 1,
    or ``None`` if it never absorbed.
    """

    params: WfParams
    freqs: np.ndarray
    absorbed_at: int | None


def wf_step(
    x: float, population_size: int, selection_coeff: float, rng: np.random.Generator
) -> float:
    """One resampling step: parental frequency ``x`` to offspring frequency.

    Returns ``k / N`` where ``k ~ Binomial(N, x(1+s) / (1 + s*x))``; 0 and 1
    are returned unchanged (absorbing states).
    """
    if int(population_size) != population_size or population_size < 2:
        raise ParameterError(
            f"population_size must be an integer >= 2, got {population_size!r}"
        )
    if not np.isfinite(selection_coeff) or selection_coeff <= -1.0:
        raise ParameterError(
            f"selection_coeff must be a finite value > -1, got {selection_coeff!r}"
        )
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"frequency must be in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return float(x)
    n = int(population_size)
    s = float(selection_coeff)
    p = x * (1.0 + s) / (1.0 + s * x)
    return float(rng.binomial(n, p)) / n


def simulate(params: WfParams) -> Trajectory:
    """Simulate one trajectory; identical params (incl. seed) give identical output."""
    rng = substream(params.seed, _STREAM_TRAJECTORY)
    n = int(params.population_size)
    s = float(params.selection_coeff)
    t_total = int(params.generations)

    freqs = np.empty(t_total + 1, dtype=float)
    x = float(params.initial_freq)
    freqs[0] = x
    absorbed_at = 0 if x in (0.0, 1.0) else None

    for t in range(1, t_total + 1):
        if absorbed_at is not None:
            freqs[t:] = x
            break
        p = x * (1.0 + s) / (1.0 + s * x)
        x = float(rng.binomial(n, p)) / n
        freqs[t] = x
        if x == 0.0 or x == 1.0:
            absorbed_at = t
            if t < t_total:
                freqs[t + 1 :] = x
            break

    return Trajectory(params=params, freqs=freqs, absorbed_at=absorbed_at)


def simulate_batch(
    population_sizes,
    selection_coeffs,
    initial_freqs,
    generations: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Simulate many trajectories at once, one row per replicate.

    Parameter arrays broadcast to a common length B; the result has shape
    ``(B, generations + 1)``.  All replicates advance in lockstep and draw
    from ``rng`` in fixed generation-major order, so the output depends only
    on the generator state and the inputs.
    """
    n = np.atleast_1d(np.asarray(population_sizes, dtype=np.int64))
    s = np.atleast_1d(np.asarray(selection_coeffs, dtype=float))
    x0 = np.atleast_1d(np.asarray(initial_freqs, dtype=float))
    if np.any(n < 2):
        raise ParameterError("population sizes must all be >= 2")
    if np.any(~np.isfinite(s)) or np.any(s <= -1.0):
        raise ParameterError("selection coefficients must all be finite and > -1")
    if np.any((x0 < 0.0) | (x0 > 1.0)):
        raise ParameterError("initial frequencies must all be in [0, 1]")
    if generations < 1:
        raise ParameterError(f"generations must be >= 1, got {generations!r}")

    n, s, x0 = np.broadcast_arrays(n, s, x0)
    b = n.shape[0]
    out = np.empty((b, generations + 1), dtype=float)
    x = x0.astype(float).copy()
    out[:, 0] = x
    for t in range(1, generations + 1):
        p = x * (1.0 + s) / (1.0 + s * x)
        # p is exactly 0 or 1 at the absorbing states, so absorbed rows stay put.
        k = rng.binomial(n, p)
        x = k / n
        out[:, t] = x
    return out


@dataclass(frozen=True)
class FixationEstimate:
    """Result of a fixation-probability ensemble.

    ``probability`` is the fraction of *absorbed* replicates that fixed at 1;
    replicates still segregating at the generation cap are excluded from the
    estimate and reported in ``n_unabsorbed``.  ``cap_warning`` is set when
    more than 10% of replicates hit the cap.
    """

    probability: float
    replicates: int
    n_fixed: int
    n_lost: int
    n_unabsorbed: int
    cap_warning: bool


def estimate_fixation_prob(
    params: WfParams, replicates: int, max_generations: int | None = None
) -> FixationEstimate:
    """Estimate the probability of absorption at frequency 1.

    Ignores ``params.generations``: every replicate runs until it absorbs or
    reaches ``max_generations`` (default ``200 * N``, several times the
    neutral absorption time scale).
    """
    if int(replicates) != replicates or replicates < 1:
        raise ParameterError(f"replicates must be an integer >= 1, got {replicates!r}")
    n = int(params.population_size)
    s = float(params.selection_coeff)
    cap = int(max_generations) if max_generations is not None else 200 * n
    if cap < 1:
        raise ParameterError(f"max_generations must be >= 1, got {max_generations!r}")

    rng = substream(params.seed, _STREAM_FIXATION)
    x = np.full(int(replicates), float(params.initial_freq))
    active = (x > 0.0) & (x < 1.0)
    for _ in range(cap):
        if not active.any():
            break
        xa = x[active]
        p = xa * (1.0 + s) / (1.0 + s * xa)
        x[active] = rng.binomial(n, p) / n
        active = (x > 0.0) & (x < 1.0)

    n_unabsorbed = int(active.sum())
    n_fixed = int((x == 1.0).sum())
    n_lost = int((x == 0.0).sum())
    absorbed = n_fixed + n_lost
    probability = n_fixed / absorbed if absorbed else float("nan")
    cap_warning = n_unabsorbed > 0.1 * replicates
    if n_unabsorbed:
        logger.warning(
            "%d of %d replicates unabsorbed after %d generations (excluded)",
            n_unabsorbed,
            replicates,
            cap,
        )
    return FixationEstimate(
        probability=probability,
        replicates=int(replicates),
        n_fixed=n_fixed,
        n_lost=n_lost,
        n_unabsorbed=n_unabsorbed,
        cap_warning=cap_warning,
    )


def write_trajectory(trajectory: Trajectory, file) -> None:
    """Write a trajectory as TSV: a ``#`` parameter header, then generation/frequency rows."""
    p = trajectory.params
    file.write(
        f"# N={p.population_size} s={float(p.selection_coeff)!r}"
        f" x0={float(p.initial_freq)!r} seed={p.seed}\n"
    )
    for t, freq in enumerate(trajectory.freqs):
        file.write(f"{t}\t{float(freq)!r}\n")
