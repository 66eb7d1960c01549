"""Equal-count binning of a verb's token stream into a short frequency series.

Tokens (one per counted occurrence, tagged with year and variant) are sorted
by year and split into contiguous bins of approximately equal size; each bin
reports the median year of its tokens and the share of the HAVE variant.
The number of bins defaults to the natural log of the total token count, so
bin size grows with the data and frequency estimates stay stable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import CountRecord, Variant
from .errors import DegenerateSeriesError, ParameterError, SeriesTooSmallError
from .wright_fisher import Trajectory

logger = logging.getLogger(__name__)

BINNED_HEADER = "verb\tbin_index\tmedian_year\tfreq_have\tbin_size"


@dataclass(frozen=True)
class BinnedSeries:
    """Time-ordered relative frequencies of the HAVE variant.

    ``times`` holds the median year of each bin's tokens (non-decreasing),
    ``freq_have`` the HAVE share per bin, ``bin_sizes`` the token count per
    bin; the sizes sum to ``total_tokens``.
    """

    verb: str
    times: np.ndarray
    freq_have: np.ndarray
    bin_sizes: np.ndarray
    total_tokens: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        freqs = np.asarray(self.freq_have, dtype=float)
        sizes = np.asarray(self.bin_sizes, dtype=np.int64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "freq_have", freqs)
        object.__setattr__(self, "bin_sizes", sizes)
        if not (len(times) == len(freqs) == len(sizes)) or len(times) == 0:
            raise ParameterError("times, freq_have and bin_sizes must have equal nonzero length")
        if np.any(np.diff(times) < 0):
            raise ParameterError("bin times must be non-decreasing")
        if np.any((freqs < 0.0) | (freqs > 1.0)):
            raise ParameterError("frequencies must lie in [0, 1]")
        if np.any(sizes < 1):
            raise ParameterError("bin sizes must be positive")
        if int(sizes.sum()) != int(self.total_tokens):
            raise ParameterError("bin sizes must sum to total_tokens")

    def __len__(self) -> int:
        return len(self.times)


def _aggregate_by_year(records: Sequence[CountRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse records to per-year (total, HAVE) counts, years ascending.

    Tokens sharing a year always land in the same bin, so the within-year
    token order (variant, then source) can never affect the output; the
    aggregation makes the binning independent of record order by construction.
    """
    totals: dict[int, int] = {}
    haves: dict[int, int] = {}
    for r in records:
        totals[r.year] = totals.get(r.year, 0) + r.count
        if r.variant is Variant.HAVE:
            haves[r.year] = haves.get(r.year, 0) + r.count
    years = np.array(sorted(y for y, c in totals.items() if c > 0), dtype=np.int64)
    total_arr = np.array([totals[y] for y in years], dtype=np.int64)
    have_arr = np.array([haves.get(int(y), 0) for y in years], dtype=np.int64)
    return years, total_arr, have_arr


def default_bin_count(n_tokens: int, rule: str, log_base: float) -> int:
    if rule == "log-bins":
        return max(2, int(math.floor(math.log(n_tokens, log_base) + 0.5)))
    if rule == "log-tokens":
        per_bin = max(1.0, math.log(n_tokens, log_base))
        return max(2, int(math.floor(n_tokens / per_bin + 0.5)))
    raise ParameterError(f"unknown binning rule {rule!r}")


def _median_year(years: np.ndarray, totals: np.ndarray, size: int) -> int:
    # Lower median: the year of the token at 0-based index (size - 1) // 2.
    target = (size - 1) // 2
    cum = np.cumsum(totals)
    idx = int(np.searchsorted(cum, target + 1))
    return int(years[idx])


def partition_year_counts(
    years: np.ndarray, totals: np.ndarray, haves: np.ndarray, n_bins: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equal-count partition of per-year (total, HAVE) counts into ``n_bins``.

    Ideal boundaries at multiples of ``N / n_bins`` snap to the nearest year
    break, so same-year tokens never split across bins; coinciding
    boundaries collapse, which can yield fewer bins.  Returns (median years,
    HAVE shares, bin sizes).
    """
    n_tokens = int(totals.sum())
    cum = np.cumsum(totals)
    breaks = cum[:-1].astype(float)
    boundaries = []
    for j in range(1, n_bins):
        ideal = n_tokens * j / n_bins
        pos = breaks[int(np.argmin(np.abs(breaks - ideal)))]
        boundaries.append(pos)
    cuts = sorted(set(boundaries))

    edges = [0.0] + cuts + [float(n_tokens)]
    starts = np.searchsorted(cum, np.asarray(edges[:-1]) + 1)
    stops = np.searchsorted(cum, np.asarray(edges[1:]), side="left") + 1

    times, freqs, sizes = [], [], []
    for lo, hi in zip(starts, stops):
        size = int(totals[lo:hi].sum())
        have = int(haves[lo:hi].sum())
        times.append(float(_median_year(years[lo:hi], totals[lo:hi], size)))
        freqs.append(have / size)
        sizes.append(size)
    return np.array(times), np.array(freqs), np.array(sizes, dtype=np.int64)


def bin_equal_count(
    records: Sequence[CountRecord],
    n_bins: int | None = None,
    rule: str = "log-bins",
    log_base: float = math.e,
) -> BinnedSeries:
    """Bin one verb's records into an equal-count frequency series.

    The token stream is partitioned into ``B`` contiguous groups whose ideal
    boundaries sit at multiples of ``N / B``; each boundary then snaps to the
    nearest year break so that tokens sharing a year stay in one bin.  ``B``
    is ``max(2, round(log(N)))`` under the default ``rule="log-bins"``;
    ``rule="log-tokens"`` instead targets ``log(N)`` tokens per bin.  An
    explicit ``n_bins`` overrides the rule.
    """
    records = list(records)
    if not records:
        raise SeriesTooSmallError("no records given")
    verbs = {r.verb for r in records}
    if len(verbs) != 1:
        raise ParameterError(f"records must belong to a single verb, got {sorted(verbs)}")
    verb = records[0].verb

    years, totals, haves = _aggregate_by_year(records)
    n_tokens = int(totals.sum())
    if n_tokens < 4:
        raise SeriesTooSmallError(
            f"{verb}: {n_tokens} token(s) is too few to bin (need at least 4)"
        )

    if len(years) == 1:
        logger.warning("%s: all %d tokens share year %d; returning a single bin",
                       verb, n_tokens, int(years[0]))
        return BinnedSeries(
            verb=verb,
            times=np.array([float(years[0])]),
            freq_have=np.array([haves[0] / totals[0]]),
            bin_sizes=np.array([n_tokens]),
            total_tokens=n_tokens,
        )

    if n_bins is not None:
        if int(n_bins) != n_bins or n_bins < 1:
            raise ParameterError(f"n_bins must be a positive integer, got {n_bins!r}")
        b = int(n_bins)
    else:
        b = default_bin_count(n_tokens, rule, log_base)

    times, freqs, sizes = partition_year_counts(years, totals, haves, b)
    return BinnedSeries(
        verb=verb,
        times=times,
        freq_have=freqs,
        bin_sizes=sizes,
        total_tokens=n_tokens,
    )


def series_from_trajectory(
    trajectory: Trajectory, n_points: int, verb: str = "sim"
) -> BinnedSeries:
    """Observe a simulated trajectory at ``n_points`` equispaced generations.

    Each observation counts the full population, so every bin has size N and
    the bin frequency is the exact population frequency at that generation.
    """
    if int(n_points) != n_points or n_points < 2:
        raise ParameterError(f"n_points must be an integer >= 2, got {n_points!r}")
    t_total = trajectory.params.generations
    if n_points > t_total + 1:
        raise DegenerateSeriesError(
            f"cannot take {n_points} distinct observations from {t_total + 1} generations"
        )
    epochs = np.unique(np.rint(np.linspace(0, t_total, int(n_points))).astype(int))
    n = trajectory.params.population_size
    return BinnedSeries(
        verb=verb,
        times=epochs.astype(float),
        freq_have=np.asarray(trajectory.freqs)[epochs],
        bin_sizes=np.full(len(epochs), n, dtype=np.int64),
        total_tokens=int(n * len(epochs)),
    )


def write_binned_series(series: BinnedSeries, file) -> None:
    """Write a series as TSV with one row per bin."""
    file.write(BINNED_HEADER + "\n")
    for i in range(len(series)):
        t = float(series.times[i])
        t_str = str(int(t)) if t.is_integer() else repr(t)
        file.write(
            f"{series.verb}\t{i}\t{t_str}\t{float(series.freq_have[i])!r}"
            f"\t{int(series.bin_sizes[i])}\n"
        )


def read_binned_series(file) -> list[BinnedSeries]:
    """Read one or more series from a binned TSV (grouped by verb, in file order)."""
    header = file.readline().rstrip("\n")
    if header != BINNED_HEADER:
        raise ParameterError(f"expected header {BINNED_HEADER!r}, got {header!r}")
    rows: dict[str, list[tuple[float, float, int]]] = {}
    order: list[str] = []
    for line in file:
        line = line.rstrip("\n")
        if not line:
            continue
        verb, _idx, t_s, f_s, n_s = line.split("\t")
        if verb not in rows:
            rows[verb] = []
            order.append(verb)
        rows[verb].append((float(t_s), float(f_s), int(n_s)))
    out = []
    for verb in order:
        times, freqs, sizes = zip(*rows[verb])
        out.append(
            BinnedSeries(
                verb=verb,
                times=np.array(times),
                freq_have=np.array(freqs),
                bin_sizes=np.array(sizes, dtype=np.int64),
                total_tokens=int(sum(sizes)),
            )
        )
    return out


def tokens_of(records: Iterable[CountRecord]) -> list[tuple[int, Variant]]:
    """Expand records into individual (year, variant) tokens in canonical order.

    Intended for verification: this is the token stream the binning
    conceptually partitions.
    """
    from .corpus import SOURCE_ORDER, VARIANT_ORDER  # local to avoid cycle noise

    expanded: list[tuple[int, int, int, Variant]] = []
    for r in records:
        expanded.extend((r.year, VARIANT_ORDER[r.variant], SOURCE_ORDER[r.source], r.variant)
                        for _ in range(r.count))
    expanded.sort(key=lambda t: t[:3])
    return [(year, variant) for year, _v, _s, variant in expanded]
