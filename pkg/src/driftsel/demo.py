"""Synthetic demonstration corpus.

Builds a tiny three-source corpus from Wright-Fisher simulations with known
ground truth: one verb evolves under selection, one under pure drift, one is
too rare to pass the count thresholds, and one is excluded from the
intransitive list.  Useful for exercising the full pipeline without any
licensed corpus exports; everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import Source, Variant
from .wright_fisher import WfParams, simulate, substream

FIRST_YEAR = 1473
LAST_YEAR = 2009
# One simulated generation spans a decade, so with s = 0.1 the selection
# verb's rise happens mid-corpus instead of finishing inside the oldest source.
YEARS_PER_GENERATION = 10

_STREAM_TOKENS = 71


@dataclass(frozen=True)
class DemoVerb:
    name: str
    selection_coeff: float
    initial_have_freq: float
    tokens_per_year: int
    intransitive: bool
    group: str


DEMO_VERBS = (
    # Strong selection toward HAVE: the classic replacement trajectory.
    DemoVerb("surge", 0.1, 0.1, 40, True, "A"),
    # Pure drift around its starting share.
    DemoVerb("linger", 0.0, 0.4, 40, True, "B"),
    # Too rare to pass the count thresholds.
    DemoVerb("flicker", 0.0, 0.5, 1, True, "B"),
    # Frequent but not listed as intransitive.
    DemoVerb("gleam", 0.05, 0.2, 40, False, "A"),
)


def _simulated_counts(seed: int) -> dict[str, dict[int, tuple[int, int]]]:
    """Per-verb, per-year (BE, HAVE) counts from seeded simulations."""
    token_rng = substream(seed, _STREAM_TOKENS)
    generations = (LAST_YEAR - FIRST_YEAR) // YEARS_PER_GENERATION + 1
    counts: dict[str, dict[int, tuple[int, int]]] = {}
    for index, verb in enumerate(DEMO_VERBS):
        params = WfParams(
            population_size=1000,
            selection_coeff=verb.selection_coeff,
            initial_freq=verb.initial_have_freq,
            generations=generations,
            seed=seed * 100 + index,
        )
        freqs = simulate(params).freqs
        by_year: dict[int, tuple[int, int]] = {}
        for year in range(FIRST_YEAR, LAST_YEAR + 1):
            have_share = freqs[(year - FIRST_YEAR) // YEARS_PER_GENERATION]
            have = int(token_rng.binomial(verb.tokens_per_year, have_share))
            by_year[year] = (verb.tokens_per_year - have, have)
        counts[verb.name] = by_year
    return counts


def write_demo_corpus(directory, seed: int = 1) -> dict[str, str]:
    """Write the demo corpus files into ``directory``; returns their paths.

    The ratio source reports the true per-year construction shares divided
    by 50, so the pipeline's scaling stage should recover a constant of 50.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    counts = _simulated_counts(seed)

    year_totals: dict[int, int] = {}
    for by_year in counts.values():
        for year, (be, have) in by_year.items():
            year_totals[year] = year_totals.get(year, 0) + be + have

    paths = {
        "eebo_path": str(directory / "eebo.tsv"),
        "gbooks_path": str(directory / "gbooks.tsv"),
        "coha_path": str(directory / "coha.tsv"),
        "intransitive_path": str(directory / "intransitives.txt"),
        "group_path": str(directory / "groups.tsv"),
    }

    def count_rows(year_lo, year_hi, source):
        for verb in sorted(counts):
            for year in range(year_lo, year_hi + 1):
                be, have = counts[verb][year]
                for variant, n in ((Variant.BE, be), (Variant.HAVE, have)):
                    if n > 0:
                        yield f"{verb}\t{variant.value}\t{year}\t{n}\t{source.value}\n"

    with open(paths["eebo_path"], "w", encoding="utf-8") as fh:
        fh.write("verb\tvariant\tyear\tcount\tsource\n")
        fh.writelines(count_rows(FIRST_YEAR, 1700, Source.EEBO))

    with open(paths["coha_path"], "w", encoding="utf-8") as fh:
        fh.write("verb\tvariant\tyear\tcount\tsource\n")
        fh.writelines(count_rows(1811, LAST_YEAR, Source.COHA))

    with open(paths["gbooks_path"], "w", encoding="utf-8") as fh:
        fh.write("verb\tvariant\tyear\trel_freq\tsource\n")
        for verb in sorted(counts):
            for year in range(1700, 2001):
                be, have = counts[verb][year]
                total = year_totals[year]
                for variant, n in ((Variant.BE, be), (Variant.HAVE, have)):
                    if n > 0:
                        rel = n / total / 50.0
                        fh.write(f"{verb}\t{variant.value}\t{year}\t{rel!r}\tGBOOKS\n")

    with open(paths["intransitive_path"], "w", encoding="utf-8") as fh:
        fh.write("# demo intransitive lemma list\n")
        for verb in DEMO_VERBS:
            if verb.intransitive:
                fh.write(verb.name + "\n")

    with open(paths["group_path"], "w", encoding="utf-8") as fh:
        for verb in DEMO_VERBS:
            fh.write(f"{verb.name}\t{verb.group}\n")

    return paths
