"""Loading, scaling, merging, and filtering of per-year variant counts.

Two kinds of input exist: count-based sources that report raw occurrence
counts per (verb, variant, year), and a ratio-only source that reports
relative frequencies per year.  The ratio source is aligned to the count
sources with a scaling constant estimated over their overlap period, turned
into pseudo-counts, and merged into a single stream covering disjoint year
ranges per source.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, ParameterError, RecordFormatError, ScalingError

logger = logging.getLogger(__name__)

COUNT_HEADER = "verb\tvariant\tyear\tcount\tsource"
REL_FREQ_HEADER = "verb\tvariant\tyear\trel_freq\tsource"


class Variant(str, Enum):
    """Auxiliary of the periphrasis."""

    BE = "BE"
    HAVE = "HAVE"


class Source(str, Enum):
    EEBO = "EEBO"
    COHA = "COHA"
    GBOOKS_SCALED = "GBOOKS_SCALED"


# Canonical orders used for sorting and tie-breaking.
VARIANT_ORDER = {Variant.BE: 0, Variant.HAVE: 1}
SOURCE_ORDER = {Source.EEBO: 0, Source.GBOOKS_SCALED: 1, Source.COHA: 2}

# Declared year range per source after merging; ranges are pairwise disjoint.
SOURCE_RANGES: dict[Source, tuple[int, int]] = {
    Source.EEBO: (1473, 1700),
    Source.GBOOKS_SCALED: (1701, 1810),
    Source.COHA: (1811, 2009),
}


@dataclass(frozen=True, slots=True)
class CountRecord:
    """One (verb, variant, year, count, source) observation."""

    verb: str
    variant: Variant
    year: int
    count: int
    source: Source

    def __post_init__(self):
        if self.count < 0:
            raise ParameterError(f"count must be >= 0, got {self.count!r}")


@dataclass(frozen=True, slots=True)
class RelFreqRecord:
    """One per-year relative frequency from the ratio-only source."""

    verb: str
    variant: Variant
    year: int
    rel_freq: float

    def __post_init__(self):
        if not (self.rel_freq >= 0.0):
            raise ParameterError(f"rel_freq must be >= 0, got {self.rel_freq!r}")


@dataclass(frozen=True)
class ScalingEstimate:
    """Cross-corpus scaling constant C = f_C / f_G.

    ``f_count_source`` and ``f_ratio_source`` are the mean per-year total
    frequencies of the tracked constructions in the count and ratio sources
    over the years used (the overlap years present in both inputs).
    ``volume_proxy`` is the mean yearly token total of the count source over
    those years; it converts relative frequencies back into pseudo-counts.
    """

    constant: float
    overlap_range: tuple[int, int]
    f_count_source: float
    f_ratio_source: float
    n_years_used: int
    volume_proxy: float


def _record_sort_key(r: CountRecord):
    return (r.verb, r.year, VARIANT_ORDER[r.variant], SOURCE_ORDER[r.source])


def load_counts(path, strict: bool = True) -> list[CountRecord]:
    """Load a count TSV; returns records sorted by (verb, year).

    Malformed rows (wrong column count, unknown variant or source, bad year
    or negative count) are collected with their line numbers.  In strict mode
    any malformed row raises :class:`RecordFormatError` listing the
    offenders; otherwise they are skipped with a logged warning.
    """
    records: list[CountRecord] = []
    diagnostics: list[tuple[int, str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != COUNT_HEADER:
            raise RecordFormatError(
                f"{path}: expected header {COUNT_HEADER!r}, got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                diagnostics.append((lineno, f"expected 5 columns, got {len(fields)}"))
                continue
            verb, variant_s, year_s, count_s, source_s = fields
            verb = verb.strip().lower()
            try:
                variant = Variant(variant_s)
            except ValueError:
                diagnostics.append((lineno, f"unknown variant {variant_s!r}"))
                continue
            try:
                source = Source(source_s)
            except ValueError:
                diagnostics.append((lineno, f"unknown source {source_s!r}"))
                continue
            try:
                year = int(year_s)
            except ValueError:
                diagnostics.append((lineno, f"malformed year {year_s!r}"))
                continue
            try:
                count = int(count_s)
            except ValueError:
                diagnostics.append((lineno, f"malformed count {count_s!r}"))
                continue
            if count < 0:
                diagnostics.append((lineno, f"negative count {count}"))
                continue
            if not verb:
                diagnostics.append((lineno, "empty verb"))
                continue
            records.append(CountRecord(verb, variant, year, count, source))

    if diagnostics:
        if strict:
            raise RecordFormatError(f"{path}: {len(diagnostics)} malformed row(s)", diagnostics)
        for lineno, message in diagnostics:
            logger.warning("%s: line %d skipped: %s", path, lineno, message)
    records.sort(key=_record_sort_key)
    return records


def write_counts(records: Iterable[CountRecord], file) -> None:
    """Write records in canonical order; loading the result round-trips."""
    file.write(COUNT_HEADER + "\n")
    for r in sorted(records, key=_record_sort_key):
        file.write(f"{r.verb}\t{r.variant.value}\t{r.year}\t{r.count}\t{r.source.value}\n")


def load_rel_freqs(path, strict: bool = True) -> list[RelFreqRecord]:
    """Load a relative-frequency TSV (the ratio-only source).

    The trailing source column is required but not retained: the ratio
    source is identified by the file itself.
    """
    records: list[RelFreqRecord] = []
    diagnostics: list[tuple[int, str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != REL_FREQ_HEADER:
            raise RecordFormatError(
                f"{path}: expected header {REL_FREQ_HEADER!r}, got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                diagnostics.append((lineno, f"expected 5 columns, got {len(fields)}"))
                continue
            verb, variant_s, year_s, rel_s, source_s = fields
            verb = verb.strip().lower()
            try:
                variant = Variant(variant_s)
            except ValueError:
                diagnostics.append((lineno, f"unknown variant {variant_s!r}"))
                continue
            try:
                year = int(year_s)
            except ValueError:
                diagnostics.append((lineno, f"malformed year {year_s!r}"))
                continue
            try:
                rel_freq = float(rel_s)
            except ValueError:
                diagnostics.append((lineno, f"malformed rel_freq {rel_s!r}"))
                continue
            if not (rel_freq >= 0.0) or not math.isfinite(rel_freq):
                diagnostics.append((lineno, f"rel_freq must be finite and >= 0, got {rel_freq}"))
                continue
            if not verb or not source_s.strip():
                diagnostics.append((lineno, "empty verb or source"))
                continue
            records.append(RelFreqRecord(verb, variant, year, rel_freq))

    if diagnostics:
        if strict:
            raise RecordFormatError(f"{path}: {len(diagnostics)} malformed row(s)", diagnostics)
        for lineno, message in diagnostics:
            logger.warning("%s: line %d skipped: %s", path, lineno, message)
    records.sort(key=lambda r: (r.verb, r.year, VARIANT_ORDER[r.variant]))
    return records


def load_lemma_list(path) -> set[str]:
    """Load a plain-text lemma list: one lowercase lemma per line, ``#`` comments allowed."""
    lemmas: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                lemmas.add(line.lower())
    return lemmas


def _yearly_count_totals(records: Iterable[CountRecord]) -> dict[int, int]:
    totals: dict[int, int] = {}
    for r in records:
        totals[r.year] = totals.get(r.year, 0) + r.count
    return totals


def estimate_scaling_constant(
    count_src: Sequence[CountRecord],
    ratio_src: Sequence[RelFreqRecord],
    overlap: tuple[int, int] = (1810, 2000),
    method: str = "pooled",
) -> ScalingEstimate:
    """Estimate the scaling constant aligning the ratio source to the count source.

    Per-year frequencies in the count source are counts divided by that
    year's total tokens of the tracked constructions; the ratio source's
    values are used as reported.  With ``method="pooled"`` (default) each
    year contributes its total frequency summed over all verbs and variants;
    ``method="per_verb"`` first averages per verb over years, then across
    verbs.  Only years present in both sources inside ``overlap`` are used.
    """
    lo, hi = int(overlap[0]), int(overlap[1])
    if lo > hi:
        raise ParameterError(f"overlap interval is empty: {overlap!r}")
    if method not in ("pooled", "per_verb"):
        raise ParameterError(f"unknown method {method!r}")

    counts_in = [r for r in count_src if lo <= r.year <= hi]
    ratios_in = [r for r in ratio_src if lo <= r.year <= hi]
    if not counts_in or not ratios_in:
        raise ScalingError(f"no records in the overlap period {lo}-{hi} for both sources")

    count_totals = _yearly_count_totals(counts_in)
    years = sorted(set(count_totals) & {r.year for r in ratios_in})
    if not years:
        raise ScalingError(f"count and ratio sources share no years within {lo}-{hi}")
    year_set = set(years)

    if method == "pooled":
        # Count-source total frequency is 1 by construction for every year
        # with data; computed literally so the formula holds regardless.
        f_c_by_year = {y: 0.0 for y in years}
        for r in counts_in:
            if r.year in year_set:
                f_c_by_year[r.year] += r.count / count_totals[r.year]
        f_g_by_year = {y: 0.0 for y in years}
        for r in ratios_in:
            if r.year in year_set:
                f_g_by_year[r.year] += r.rel_freq
        f_c = sum(f_c_by_year.values()) / len(years)
        f_g = sum(f_g_by_year.values()) / len(years)
    else:
        per_verb_c: dict[str, dict[int, float]] = {}
        for r in counts_in:
            if r.year in year_set:
                by_year = per_verb_c.setdefault(r.verb, {})
                by_year[r.year] = by_year.get(r.year, 0.0) + r.count / count_totals[r.year]
        per_verb_g: dict[str, dict[int, float]] = {}
        for r in ratios_in:
            if r.year in year_set:
                by_year = per_verb_g.setdefault(r.verb, {})
                by_year[r.year] = by_year.get(r.year, 0.0) + r.rel_freq
        verbs = sorted(set(per_verb_c) & set(per_verb_g))
        if not verbs:
            raise ScalingError("count and ratio sources share no verbs within the overlap")
        f_c = sum(
            sum(per_verb_c[v].values()) / len(per_verb_c[v]) for v in verbs
        ) / len(verbs)
        f_g = sum(
            sum(per_verb_g[v].values()) / len(per_verb_g[v]) for v in verbs
        ) / len(verbs)

    if f_g <= 0.0:
        raise ScalingError("ratio source has zero total frequency over the overlap")

    volume_proxy = sum(count_totals[y] for y in years) / len(years)
    return ScalingEstimate(
        constant=f_c / f_g,
        overlap_range=(lo, hi),
        f_count_source=f_c,
        f_ratio_source=f_g,
        n_years_used=len(years),
        volume_proxy=volume_proxy,
    )


def _round_half_away(x: float) -> int:
    # Built-in round() is half-to-even; counts are rounded half away from zero.
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def scale_to_counts(
    ratio_src: Sequence[RelFreqRecord],
    est: ScalingEstimate,
    keep_range: tuple[int, int] = SOURCE_RANGES[Source.GBOOKS_SCALED],
) -> list[CountRecord]:
    """Convert ratio-source rows inside ``keep_range`` into pseudo-counts.

    ``count = round(rel_freq * C * volume_proxy)`` with a constant per-year
    volume proxy, which keeps the reconstructed frequencies proportional to
    the reported ratios.
    """
    if not (est.constant > 0.0) or not math.isfinite(est.constant):
        raise ParameterError(f"scaling constant must be positive, got {est.constant!r}")
    if not (est.volume_proxy > 0.0):
        raise ParameterError(f"volume proxy must be positive, got {est.volume_proxy!r}")
    lo, hi = int(keep_range[0]), int(keep_range[1])
    out = []
    for r in ratio_src:
        if lo <= r.year <= hi:
            count = _round_half_away(r.rel_freq * est.constant * est.volume_proxy)
            out.append(CountRecord(r.verb, r.variant, r.year, count, Source.GBOOKS_SCALED))
    out.sort(key=_record_sort_key)
    return out


def merge_sources(
    eebo: Sequence[CountRecord],
    gbooks_scaled: Sequence[CountRecord],
    coha: Sequence[CountRecord],
) -> tuple[list[CountRecord], int]:
    """Concatenate the three sources, keeping each to its declared year range.

    Rows outside their source's range are dropped; the number of dropped
    rows is returned alongside the merged, (verb, year)-sorted records.
    """
    merged: list[CountRecord] = []
    dropped = 0
    for slot, records in (
        (Source.EEBO, eebo),
        (Source.GBOOKS_SCALED, gbooks_scaled),
        (Source.COHA, coha),
    ):
        lo, hi = SOURCE_RANGES[slot]
        for r in records:
            if lo <= r.year <= hi:
                merged.append(r)
            else:
                dropped += 1
    if dropped:
        logger.warning("merge_sources dropped %d out-of-range row(s)", dropped)
    merged.sort(key=_record_sort_key)
    return merged, dropped


def select_target_verbs(
    records_by_source: Mapping[Source, Sequence[CountRecord]],
    intransitive_list: set[str],
    min_count: int = 200,
    min_be_share: float = 0.5,
) -> list[str]:
    """Apply the verb-selection filters; returns verbs sorted alphabetically.

    A verb is kept when it (a) appears in ``intransitive_list``, (b) occurs
    strictly more than ``min_count`` times in each source separately, and
    (c) has a BE share of at least ``min_be_share`` among its EEBO tokens.
    """
    if not intransitive_list:
        raise ConfigError("intransitive verb list is empty")
    if int(min_count) != min_count or min_count < 1:
        raise ParameterError(f"min_count must be an integer >= 1, got {min_count!r}")
    if not 0.0 <= min_be_share <= 1.0:
        raise ParameterError(f"min_be_share must be in [0, 1], got {min_be_share!r}")

    totals: dict[Source, dict[str, int]] = {s: {} for s in Source}
    eebo_be: dict[str, int] = {}
    eebo_all: dict[str, int] = {}
    for source in Source:
        for r in records_by_source.get(source, ()):
            totals[source][r.verb] = totals[source].get(r.verb, 0) + r.count
            if source is Source.EEBO:
                eebo_all[r.verb] = eebo_all.get(r.verb, 0) + r.count
                if r.variant is Variant.BE:
                    eebo_be[r.verb] = eebo_be.get(r.verb, 0) + r.count

    selected = []
    for verb in sorted(intransitive_list):
        if not all(totals[source].get(verb, 0) > min_count for source in Source):
            continue
        total_eebo = eebo_all.get(verb, 0)
        if total_eebo == 0:
            continue
        be_share = eebo_be.get(verb, 0) / total_eebo
        if be_share >= min_be_share:
            selected.append(verb)
    return selected
