"""Command-line orchestration of the pipeline.

Subcommands: ``simulate``, ``ingest``, ``bin``, ``fit``, ``tsc-train``,
``classify``, and ``pipeline``.  The pipeline is driven by a flat
``key = value`` config file (``#`` comments allowed, ranges written as
``lo:hi``); command-line ``--set key=value`` flags override file values.
Exit codes: 0 success, 1 data or runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .binning import bin_equal_count, read_binned_series, write_binned_series
from .classifier import (
    NeuralTscClassifier,
    TrainingConfig,
    classify,
    generate_dataset,
)
from .corpus import (
    Source,
    SOURCE_RANGES,
    estimate_scaling_constant,
    load_counts,
    load_lemma_list,
    load_rel_freqs,
    merge_sources,
    scale_to_counts,
    select_target_verbs,
)
from .errors import ConfigError, DriftselError, ParameterError
from .increment_test import fit_test, write_fit_reports
from .wright_fisher import WfParams, simulate, write_trajectory

LOCK_NAME = ".driftsel.lock"
CLASSIFICATION_HEADER = "verb\tgroup\tprobability\tverdict"


# -- pipeline configuration -------------------------------------------------


def _parse_int_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def _parse_float_range(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition(":")
    return float(lo), float(hi)


def _parse_bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class PipelineConfig:
    eebo_path: str = ""
    gbooks_path: str = ""
    coha_path: str = ""
    intransitive_path: str = ""
    group_path: str = ""
    output_dir: str = ""
    model_path: str = ""
    eebo_range: tuple[int, int] = SOURCE_RANGES[Source.EEBO]
    gbooks_range: tuple[int, int] = SOURCE_RANGES[Source.GBOOKS_SCALED]
    coha_range: tuple[int, int] = SOURCE_RANGES[Source.COHA]
    scaling_overlap: tuple[int, int] = (1810, 2000)
    scaling_method: str = "pooled"
    min_count: int = 200
    min_be_share: float = 0.5
    n_bins: int = 0  # 0 means the log-count rule
    binning_rule: str = "log-bins"
    alpha: float = 0.05
    tsc_n_range: tuple[int, int] = (100, 5000)
    tsc_s_range: tuple[float, float] = (0.005, 0.2)
    tsc_t_range: tuple[int, int] = (50, 500)
    tsc_x0_range: tuple[float, float] = (0.1, 0.9)
    tsc_series_len: int = 25
    tsc_samples_per_class: int = 25000
    tsc_seed: int = 0
    tsc_binning_mirror: bool = False
    tsc_s_random_sign: bool = True
    tsc_epochs: int = 20
    tsc_batch_size: int = 256
    tsc_learning_rate: float = 1e-3


_CONFIG_PARSERS = {
    "eebo_path": str,
    "gbooks_path": str,
    "coha_path": str,
    "intransitive_path": str,
    "group_path": str,
    "output_dir": str,
    "model_path": str,
    "eebo_range": _parse_int_range,
    "gbooks_range": _parse_int_range,
    "coha_range": _parse_int_range,
    "scaling_overlap": _parse_int_range,
    "scaling_method": str,
    "min_count": int,
    "min_be_share": float,
    "n_bins": int,
    "binning_rule": str,
    "alpha": float,
    "tsc_n_range": _parse_int_range,
    "tsc_s_range": _parse_float_range,
    "tsc_t_range": _parse_int_range,
    "tsc_x0_range": _parse_float_range,
    "tsc_series_len": int,
    "tsc_samples_per_class": int,
    "tsc_seed": int,
    "tsc_binning_mirror": _parse_bool,
    "tsc_s_random_sign": _parse_bool,
    "tsc_epochs": int,
    "tsc_batch_size": int,
    "tsc_learning_rate": float,
}


def read_config_file(path) -> dict[str, str]:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def build_pipeline_config(raw: dict[str, str]) -> PipelineConfig:
    config = PipelineConfig()
    for key, text in raw.items():
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            setattr(config, key, parser(text))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    _validate_pipeline_config(config)
    return config


def _validate_pipeline_config(config: PipelineConfig) -> None:
    required = ("eebo_path", "gbooks_path", "coha_path", "intransitive_path", "output_dir")
    for name in required:
        if not getattr(config, name):
            raise ConfigError(f"config key {name!r} is required")
    paths = [config.eebo_path, config.gbooks_path, config.coha_path, config.intransitive_path]
    if len(set(paths)) != len(paths):
        raise ConfigError("input paths must be distinct")
    if config.min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {config.min_count}")
    if not 0.0 <= config.min_be_share <= 1.0:
        raise ConfigError(f"min_be_share must be in [0, 1], got {config.min_be_share}")
    if not 0.0 < config.alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {config.alpha}")
    if config.n_bins < 0:
        raise ConfigError(f"n_bins must be >= 0, got {config.n_bins}")
    for name in ("eebo_range", "gbooks_range", "coha_range", "scaling_overlap",
                 "tsc_n_range", "tsc_s_range", "tsc_t_range", "tsc_x0_range"):
        lo, hi = getattr(config, name)
        if lo > hi:
            raise ConfigError(f"{name} is empty: {lo}:{hi}")


def _config_as_dict(config: PipelineConfig) -> dict:
    out = {}
    for f in fields(config):
        value = getattr(config, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def training_config_from(config: PipelineConfig) -> TrainingConfig:
    return TrainingConfig(
        n_range=config.tsc_n_range,
        s_range=config.tsc_s_range,
        t_range=config.tsc_t_range,
        x0_range=config.tsc_x0_range,
        series_len=config.tsc_series_len,
        samples_per_class=config.tsc_samples_per_class,
        seed=config.tsc_seed,
        binning_mirror=config.tsc_binning_mirror,
        s_random_sign=config.tsc_s_random_sign,
    )


# -- small shared helpers ----------------------------------------------------


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_groups(path) -> dict[str, str]:
    groups: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            verb, _, group = line.partition("\t")
            groups[verb.strip().lower()] = group.strip() or "-"
    return groups


def _write_classifications(rows, groups: dict[str, str], file) -> None:
    file.write(CLASSIFICATION_HEADER + "\n")
    for c in rows:
        group = groups.get(c.verb, "-")
        file.write(f"{c.verb}\t{group}\t{c.probability!r}\t{c.verdict.value}\n")


def _binned_inputs(path: Path):
    """Yield series from a binned TSV file, or from every ``*.tsv`` in a directory."""
    if path.is_dir():
        series = []
        for child in sorted(path.glob("*.tsv")):
            with open(child, "r", encoding="utf-8") as fh:
                series.extend(read_binned_series(fh))
        return series
    with open(path, "r", encoding="utf-8") as fh:
        return read_binned_series(fh)


def _train_model(config: PipelineConfig) -> NeuralTscClassifier:
    training_config = training_config_from(config)
    dataset = generate_dataset(training_config)
    clf = NeuralTscClassifier(
        epochs=config.tsc_epochs,
        batch_size=config.tsc_batch_size,
        learning_rate=config.tsc_learning_rate,
        seed=config.tsc_seed,
    )
    clf.fit(dataset.X, dataset.y)
    clf.dataset_hash_ = training_config.sha256()
    clf.n_redraws_ = dataset.n_redraws
    return clf


# -- subcommands --------------------------------------------------------------


def cmd_simulate(args) -> int:
    params = WfParams(
        population_size=args.n,
        selection_coeff=args.s,
        initial_freq=args.x0,
        generations=args.t,
        seed=args.seed,
    )
    trajectory = simulate(params)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_trajectory(trajectory, fh)
    else:
        write_trajectory(trajectory, sys.stdout)
    return 0


def _ingest(config: PipelineConfig):
    """Load, scale, merge, and filter; returns everything later stages need."""
    eebo = [r for r in load_counts(config.eebo_path)
            if config.eebo_range[0] <= r.year <= config.eebo_range[1]]
    coha = [r for r in load_counts(config.coha_path)
            if config.coha_range[0] <= r.year <= config.coha_range[1]]
    ratio = load_rel_freqs(config.gbooks_path)
    lemmas = load_lemma_list(config.intransitive_path)

    estimate = estimate_scaling_constant(
        coha, ratio, overlap=config.scaling_overlap, method=config.scaling_method
    )
    gbooks_scaled = scale_to_counts(ratio, estimate, keep_range=config.gbooks_range)
    merged, dropped = merge_sources(eebo, gbooks_scaled, coha)
    verbs = select_target_verbs(
        {Source.EEBO: eebo, Source.GBOOKS_SCALED: gbooks_scaled, Source.COHA: coha},
        lemmas,
        min_count=config.min_count,
        min_be_share=config.min_be_share,
    )
    return merged, dropped, verbs, estimate


def cmd_ingest(args) -> int:
    config = _pipeline_config_from_args(args)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    merged, dropped, verbs, estimate = _ingest(config)

    from .corpus import write_counts

    with open(out_dir / "merged_counts.tsv", "w", encoding="utf-8") as fh:
        write_counts(merged, fh)
    with open(out_dir / "selected_verbs.txt", "w", encoding="utf-8") as fh:
        fh.writelines(f"{verb}\n" for verb in verbs)
    with open(out_dir / "scaling.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "constant": estimate.constant,
                "f_count_source": estimate.f_count_source,
                "f_ratio_source": estimate.f_ratio_source,
                "n_years_used": estimate.n_years_used,
                "overlap_range": list(estimate.overlap_range),
                "volume_proxy": estimate.volume_proxy,
                "dropped_rows": dropped,
            },
            fh,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"ingest: {len(merged)} merged rows, {len(verbs)} target verb(s), "
          f"{dropped} dropped row(s)")
    return 0


def cmd_bin(args) -> int:
    records = load_counts(args.counts)
    verbs = sorted({r.verb for r in records})
    if args.verbs:
        wanted = {v.strip().lower() for v in args.verbs.split(",") if v.strip()}
        missing = wanted - set(verbs)
        if missing:
            raise ParameterError(f"verbs not present in {args.counts}: {sorted(missing)}")
        verbs = sorted(wanted)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_bins = args.n_bins if args.n_bins else None
    for verb in verbs:
        series = bin_equal_count(
            [r for r in records if r.verb == verb], n_bins=n_bins, rule=args.rule
        )
        with open(out_dir / f"{verb}.tsv", "w", encoding="utf-8") as fh:
            write_binned_series(series, fh)
    print(f"bin: wrote {len(verbs)} series to {out_dir}")
    return 0


def cmd_fit(args) -> int:
    series = _binned_inputs(Path(args.binned))
    reports = [fit_test(s, alpha=args.alpha) for s in series]
    with open(args.out, "w", encoding="utf-8") as fh:
        write_fit_reports(reports, fh)
    print(f"fit: wrote {len(reports)} report row(s) to {args.out}")
    return 0


def cmd_tsc_train(args) -> int:
    raw = read_config_file(args.config) if args.config else {}
    raw.update(_parse_set_overrides(args.set or []))
    config = PipelineConfig()
    for key, text in raw.items():
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            setattr(config, key, parser(text))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    clf = _train_model(config)
    clf.save(args.out)
    metrics = {
        "validation_accuracy": clf.validation_accuracy_,
        "best_epoch": clf.best_epoch_,
        "epochs": int(config.tsc_epochs),
        "n_redraws": clf.n_redraws_,
        "dataset_sha256": clf.dataset_hash_,
    }
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            json.dump(metrics, fh, sort_keys=True)
            fh.write("\n")
    print(f"tsc-train: validation accuracy {clf.validation_accuracy_:.4f} "
          f"(best epoch {clf.best_epoch_}); model written to {args.out}")
    return 0


def cmd_classify(args) -> int:
    model = NeuralTscClassifier.load(args.model)
    series = _binned_inputs(Path(args.binned))
    groups = _load_groups(args.groups) if args.groups else {}
    rows = [classify(model, s) for s in series]
    with open(args.out, "w", encoding="utf-8") as fh:
        _write_classifications(rows, groups, fh)
    print(f"classify: wrote {len(rows)} row(s) to {args.out}")
    return 0


class _Stage:
    """Context that tags errors with the pipeline stage they came from."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, DriftselError):
            cls = type(exc) if isinstance(exc, (ConfigError, ParameterError)) else DriftselError
            raise cls(f"stage {self.name}: {exc}") from exc
        return False


def cmd_pipeline(args) -> int:
    with _Stage("config"):
        config = _pipeline_config_from_args(args)
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    lock_path = out_dir / LOCK_NAME
    try:
        lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DriftselError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock_path} if that run is gone)"
        ) from None
    try:
        os.write(lock_fd, str(os.getpid()).encode())
        os.close(lock_fd)
        return _run_pipeline(config, out_dir)
    finally:
        lock_path.unlink(missing_ok=True)


def _run_pipeline(config: PipelineConfig, out_dir: Path) -> int:
    with _Stage("ingest"):
        merged, dropped, verbs, estimate = _ingest(config)
        if not verbs:
            raise DriftselError("no target verbs survive the selection filters")
        groups = _load_groups(config.group_path) if config.group_path else {}

    with _Stage("bin"):
        binned_dir = out_dir / "binned"
        binned_dir.mkdir(exist_ok=True)
        n_bins = config.n_bins if config.n_bins else None
        by_verb = {}
        for verb in verbs:
            series = bin_equal_count(
                [r for r in merged if r.verb == verb],
                n_bins=n_bins,
                rule=config.binning_rule,
            )
            by_verb[verb] = series
            with open(binned_dir / f"{verb}.tsv", "w", encoding="utf-8") as fh:
                write_binned_series(series, fh)

    with _Stage("fit"):
        reports = [fit_test(by_verb[verb], alpha=config.alpha) for verb in verbs]
        with open(out_dir / "fit_report.tsv", "w", encoding="utf-8") as fh:
            write_fit_reports(reports, fh)

    with _Stage("tsc"):
        if config.model_path:
            model = NeuralTscClassifier.load(config.model_path)
            model_info = {"path": config.model_path, "sha256": _sha256_file(config.model_path)}
        else:
            model = _train_model(config)
            model_file = out_dir / "model.tsc"
            model.save(model_file)
            model_info = {
                "trained": True,
                "validation_accuracy": model.validation_accuracy_,
                "best_epoch": model.best_epoch_,
                "dataset_sha256": model.dataset_hash_,
            }
        rows = [classify(model, by_verb[verb]) for verb in verbs]
        with open(out_dir / "classification.tsv", "w", encoding="utf-8") as fh:
            _write_classifications(rows, groups, fh)

    with _Stage("manifest"):
        config_dict = _config_as_dict(config)
        inputs = {}
        for name in ("eebo_path", "gbooks_path", "coha_path", "intransitive_path",
                     "group_path", "model_path"):
            path = getattr(config, name)
            if path:
                inputs[name] = {"path": path, "sha256": _sha256_file(path)}
        manifest = {
            "config": config_dict,
            "config_sha256": hashlib.sha256(
                json.dumps(config_dict, sort_keys=True).encode()
            ).hexdigest(),
            "inputs": inputs,
            "model": model_info,
            "seeds": {"tsc_seed": config.tsc_seed},
            "dropped_rows": dropped,
            "scaling_constant": estimate.constant,
            "target_verbs": verbs,
            "version": __version__,
        }
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")

    print(f"pipeline: {len(verbs)} verb(s) processed; reports in {out_dir}")
    return 0


# -- argument parsing ----------------------------------------------------------


def _parse_set_overrides(pairs) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _pipeline_config_from_args(args) -> PipelineConfig:
    raw = read_config_file(args.config) if args.config else {}
    for name, key in (
        ("eebo", "eebo_path"),
        ("gbooks", "gbooks_path"),
        ("coha", "coha_path"),
        ("intransitives", "intransitive_path"),
        ("output_dir", "output_dir"),
        ("model", "model_path"),
    ):
        value = getattr(args, name, None)
        if value:
            raw[key] = value
    for name in ("min_count", "min_be_share", "alpha"):
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = str(value)
    raw.update(_parse_set_overrides(getattr(args, "set", None) or []))
    return build_pipeline_config(raw)


def _add_config_flags(sub) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--eebo", help="count TSV for the oldest corpus")
    sub.add_argument("--gbooks", help="relative-frequency TSV for the ratio-only corpus")
    sub.add_argument("--coha", help="count TSV for the modern corpus")
    sub.add_argument("--intransitives", help="intransitive lemma list, one per line")
    sub.add_argument("--output-dir", dest="output_dir", help="where reports are written")
    sub.add_argument("--model", help="path to a trained model file")
    sub.add_argument("--min-count", dest="min_count", type=int)
    sub.add_argument("--min-be-share", dest="min_be_share", type=float)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override any config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftsel",
        description="Detect drift versus selection in two-variant frequency time series.",
    )
    parser.add_argument("--version", action="version", version=f"driftsel {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="simulate one Wright-Fisher trajectory")
    sim.add_argument("--n", type=int, required=True, help="population size")
    sim.add_argument("--s", type=float, default=0.0, help="selection coefficient")
    sim.add_argument("--x0", type=float, default=0.5, help="initial frequency")
    sim.add_argument("--t", type=int, default=100, help="generations")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", help="output TSV (default stdout)")
    sim.set_defaults(func=cmd_simulate)

    ingest = commands.add_parser("ingest", help="load, scale, merge, and filter the sources")
    _add_config_flags(ingest)
    ingest.set_defaults(func=cmd_ingest)

    binning = commands.add_parser("bin", help="bin merged counts into frequency series")
    binning.add_argument("--counts", required=True, help="merged count TSV")
    binning.add_argument("--out-dir", dest="out_dir", required=True)
    binning.add_argument("--verbs", help="comma-separated subset (default: all)")
    binning.add_argument("--n-bins", dest="n_bins", type=int, default=0,
                         help="fixed bin count (default: log rule)")
    binning.add_argument("--rule", default="log-bins", choices=["log-bins", "log-tokens"])
    binning.set_defaults(func=cmd_bin)

    fit = commands.add_parser("fit", help="run the frequency increment test")
    fit.add_argument("--binned", required=True, help="binned TSV file or directory")
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    train = commands.add_parser("tsc-train", help="train the neural classifier on simulations")
    train.add_argument("--config", help="flat config file with tsc_* keys")
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--metrics", help="JSON metrics file to write")
    train.add_argument("--set", action="append", metavar="KEY=VALUE")
    train.set_defaults(func=cmd_tsc_train)

    cls = commands.add_parser("classify", help="classify binned series with a trained model")
    cls.add_argument("--model", required=True)
    cls.add_argument("--binned", required=True, help="binned TSV file or directory")
    cls.add_argument("--groups", help="optional verb-to-group TSV")
    cls.add_argument("--out", required=True)
    cls.set_defaults(func=cmd_classify)

    pipeline = commands.add_parser("pipeline", help="run the full pipeline from a config")
    _add_config_flags(pipeline)
    pipeline.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"driftsel: error: {exc}", file=sys.stderr)
        return 2
    except DriftselError as exc:
        print(f"driftsel: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"driftsel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
