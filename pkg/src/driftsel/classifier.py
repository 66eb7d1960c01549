"""Simulation-trained neural classification of drift versus selection.

Labeled training series come from the Wright-Fisher simulator: drift samples
use s = 0, selection samples draw |s| log-uniformly (random sign by
default); population size, horizon, and initial frequency vary per sample.
Each trajectory is resampled to a fixed length and fed to a small
fully-convolutional network (:class:`NeuralTscClassifier`, a scikit-learn
style estimator).  A fitted model maps a binned corpus series to a selection
probability; above 0.5 the series is deemed SELECTION, otherwise DRIFT.

Series values are frequencies already bounded in [0, 1] and are used raw
(no z-scoring), so a flat series at 0.5 stays distinguishable from a rising
one.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .autodiff import log_softmax, softmax_cross_entropy
from .binning import BinnedSeries, default_bin_count, partition_year_counts
from .errors import DegenerateSeriesError, ParameterError, TrainingError
from .network import DEFAULT_CHANNELS, DEFAULT_KERNELS, Adam, FcnNetwork
from .wright_fisher import Trajectory, simulate_batch, substream

MODEL_MAGIC = "driftsel-tsc-model v1"

_STREAM_DATASET = 21
_STREAM_SPLIT = 31
_STREAM_EPOCH = 32

_CHUNK = 4096


class TscLabel(str, Enum):
    DRIFT = "DRIFT"
    SELECTION = "SELECTION"


@dataclass(frozen=True)
class Classification:
    verb: str
    probability: float
    verdict: TscLabel


@dataclass(frozen=True)
class TrainingConfig:
    """Sampling ranges and sizes for the simulated training set.

    ``s_range`` bounds |s| for the selection class (drawn log-uniformly,
    sign randomized when ``s_random_sign``); drift samples always use s = 0.
    ``binning_mirror`` passes each simulated trajectory through the same
    equal-count binning as real corpus series before resampling.
    """

    n_range: tuple[int, int] = (100, 5000)
    s_range: tuple[float, float] = (0.005, 0.2)
    t_range: tuple[int, int] = (50, 500)
    x0_range: tuple[float, float] = (0.1, 0.9)
    series_len: int = 25
    samples_per_class: int = 25000
    seed: int = 0
    binning_mirror: bool = False
    s_random_sign: bool = True

    def __post_init__(self):
        for name in ("n_range", "s_range", "t_range", "x0_range"):
            lo, hi = getattr(self, name)
            if not (lo <= hi):
                raise ParameterError(f"{name} is empty: {getattr(self, name)!r}")
        if self.n_range[0] < 2:
            raise ParameterError(f"population sizes must be >= 2, got {self.n_range!r}")
        if self.s_range[0] <= 0.0:
            raise ParameterError(f"s_range must be positive (it bounds |s|), got {self.s_range!r}")
        if self.t_range[0] < 1:
            raise ParameterError(f"generations must be >= 1, got {self.t_range!r}")
        if not (0.0 <= self.x0_range[0] and self.x0_range[1] <= 1.0):
            raise ParameterError(f"x0_range must lie in [0, 1], got {self.x0_range!r}")
        if self.series_len < 4:
            raise ParameterError(f"series_len must be >= 4, got {self.series_len!r}")
        if self.samples_per_class < 1:
            raise ParameterError(
                f"samples_per_class must be >= 1, got {self.samples_per_class!r}"
            )
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {self.seed!r}")

    def sha256(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()
        ).hexdigest()


@dataclass(frozen=True)
class TrainingSet:
    """Balanced labeled series: y == 0 drift, y == 1 selection."""

    X: np.ndarray
    y: np.ndarray
    n_redraws: int


def resample_to_length(series, length: int) -> np.ndarray:
    """Linear resampling of a series to ``length`` equispaced points.

    Accepts a :class:`BinnedSeries`, a :class:`Trajectory`, a
    ``(times, values)`` pair, or a plain value sequence (implicitly
    equispaced).  The time axis is normalized to [0, 1] and the interpolated
    values are clamped to [0, 1].
    """
    if int(length) != length or length < 2:
        raise ParameterError(f"length must be an integer >= 2, got {length!r}")
    if isinstance(series, BinnedSeries):
        times, values = series.times, series.freq_have
    elif isinstance(series, Trajectory):
        values = np.asarray(series.freqs, dtype=float)
        times = np.arange(len(values), dtype=float)
    elif isinstance(series, tuple) and len(series) == 2:
        times = np.asarray(series[0], dtype=float)
        values = np.asarray(series[1], dtype=float)
    else:
        values = np.asarray(series, dtype=float)
        times = np.arange(len(values), dtype=float)
    if len(values) < 2 or len(times) != len(values):
        raise ParameterError("need at least two (time, value) points to resample")
    span = times[-1] - times[0]
    if span <= 0:
        raise DegenerateSeriesError("time axis has zero span")
    t_norm = (times - times[0]) / span
    grid = np.linspace(0.0, 1.0, int(length))
    return np.clip(np.interp(grid, t_norm, values), 0.0, 1.0)


def _mirror_binned(freqs: np.ndarray, population_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Bin a trajectory as if each generation contributed N corpus tokens."""
    t_plus_1 = len(freqs)
    years = np.arange(t_plus_1, dtype=np.int64)
    totals = np.full(t_plus_1, population_size, dtype=np.int64)
    haves = np.rint(freqs * population_size).astype(np.int64)
    b = default_bin_count(population_size * t_plus_1, "log-bins", math.e)
    times, shares, _sizes = partition_year_counts(years, totals, haves, b)
    return times, shares


def _sample_class(config: TrainingConfig, label: int, rng) -> tuple[np.ndarray, int]:
    """Draw ``samples_per_class`` series for one class; returns (X, n_redraws)."""
    need = config.samples_per_class
    out = np.empty((need, config.series_len))
    filled = 0
    redraws = 0
    while filled < need:
        m = min(_CHUNK, need - filled)
        n = rng.integers(config.n_range[0], config.n_range[1] + 1, size=m)
        t = rng.integers(config.t_range[0], config.t_range[1] + 1, size=m)
        x0 = rng.uniform(config.x0_range[0], config.x0_range[1], size=m)
        if label == 1:
            s = np.exp(
                rng.uniform(math.log(config.s_range[0]), math.log(config.s_range[1]), size=m)
            )
            if config.s_random_sign:
                s *= rng.integers(0, 2, size=m) * 2 - 1
        else:
            s = np.zeros(m)

        # Absorbed at generation 0: no class signal, redraw with fresh draws.
        degenerate = (x0 == 0.0) | (x0 == 1.0)
        redraws += int(degenerate.sum())
        if redraws > 100 * need + 100:
            raise TrainingError(
                "too many degenerate draws; x0_range pins the start at an absorbing state"
            )
        keep = ~degenerate
        if not keep.any():
            continue
        n, t, x0, s = n[keep], t[keep], x0[keep], s[keep]

        raw = simulate_batch(n, s, x0, int(t.max()), rng)
        for i in range(len(n)):
            freqs = raw[i, : t[i] + 1]
            if config.binning_mirror:
                times, shares = _mirror_binned(freqs, int(n[i]))
                out[filled] = resample_to_length((times, shares), config.series_len)
            else:
                out[filled] = resample_to_length(freqs, config.series_len)
            filled += 1
    return out, redraws


def generate_dataset(config: TrainingConfig) -> TrainingSet:
    """Build a balanced labeled training set, fully reproducible from the seed."""
    x_drift, redraws_0 = _sample_class(config, 0, substream(config.seed, _STREAM_DATASET, 0))
    x_sel, redraws_1 = _sample_class(config, 1, substream(config.seed, _STREAM_DATASET, 1))
    x = np.vstack([x_drift, x_sel])
    y = np.concatenate(
        [np.zeros(config.samples_per_class, dtype=np.int64),
         np.ones(config.samples_per_class, dtype=np.int64)]
    )
    return TrainingSet(X=x, y=y, n_redraws=redraws_0 + redraws_1)


class NeuralTscClassifier(BaseEstimator, ClassifierMixin):
    """Fully-convolutional binary time-series classifier.

    Trains by mini-batch gradient descent (Adam updates) on softmax
    cross-entropy, holding out a stratified validation fraction and keeping
    the weights from the best validation epoch.  Training is deterministic
    given ``seed``.

    Parameters follow scikit-learn conventions; input series are rows of a
    2-D array with values in [0, 1].
    """

    def __init__(
        self,
        epochs: int = 20,
        batch_size: int = 256,
        learning_rate: float = 1e-3,
        val_fraction: float = 0.2,
        channels: tuple[int, ...] = DEFAULT_CHANNELS,
        kernels: tuple[int, ...] = DEFAULT_KERNELS,
        seed: int = 0,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.val_fraction = val_fraction
        self.channels = channels
        self.kernels = kernels
        self.seed = seed

    def _validate_hyperparams(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ParameterError(f"epochs must be an integer >= 1, got {self.epochs!r}")
        if not (self.learning_rate > 0.0):
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ParameterError(f"batch_size must be an integer >= 1, got {self.batch_size!r}")
        if not (0.0 < self.val_fraction < 1.0):
            raise ParameterError(f"val_fraction must be in (0, 1), got {self.val_fraction!r}")

    def fit(self, X, y):
        self._validate_hyperparams()
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        classes = np.unique(y)
        if len(classes) != 2:
            raise ParameterError(f"expected exactly two classes, got {classes!r}")
        y01 = (y == classes[1]).astype(np.int64)

        # Stratified split: a fixed fraction of each class goes to validation.
        split_rng = substream(self.seed, _STREAM_SPLIT)
        val_idx = []
        train_idx = []
        for label in (0, 1):
            members = np.flatnonzero(y01 == label)
            perm = split_rng.permutation(members)
            n_val = max(1, int(round(self.val_fraction * len(members))))
            if n_val >= len(members):
                raise ParameterError(
                    f"class {classes[label]!r} has too few samples ({len(members)}) "
                    f"for val_fraction={self.val_fraction}"
                )
            val_idx.append(perm[:n_val])
            train_idx.append(perm[n_val:])
        val_idx = np.concatenate(val_idx)
        train_idx = np.concatenate(train_idx)

        x_train, y_train = X[train_idx], y01[train_idx]
        x_val, y_val = X[val_idx], y01[val_idx]

        network = FcnNetwork(
            channels=tuple(self.channels), kernels=tuple(self.kernels), seed=self.seed
        )
        optimizer = Adam(network.parameters(), learning_rate=self.learning_rate)

        best_state = network.state_dict()
        best_acc = -1.0
        best_epoch = -1
        history = []
        batch = int(self.batch_size)
        for epoch in range(int(self.epochs)):
            order = substream(self.seed, _STREAM_EPOCH, epoch).permutation(len(x_train))
            epoch_loss = 0.0
            n_batches = 0
            for start in range(0, len(order), batch):
                idx = order[start : start + batch]
                logits = network.forward(x_train[idx], training=True)
                loss = softmax_cross_entropy(logits, y_train[idx])
                if not np.isfinite(loss.data):
                    raise TrainingError(
                        f"loss diverged to {loss.data!r} at epoch {epoch}, "
                        f"batch {n_batches} (learning_rate={self.learning_rate})"
                    )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                epoch_loss += float(loss.data)
                n_batches += 1

            val_acc = self._accuracy(network, x_val, y_val)
            history.append(
                {"epoch": epoch, "train_loss": epoch_loss / max(1, n_batches),
                 "val_accuracy": val_acc}
            )
            if val_acc > best_acc:
                best_acc = val_acc
                best_epoch = epoch
                best_state = network.state_dict()

        network.load_state_dict(best_state)
        self.network_ = network
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self.best_epoch_ = best_epoch
        self.validation_accuracy_ = best_acc
        self.history_ = history
        return self

    @staticmethod
    def _accuracy(network: FcnNetwork, x: np.ndarray, y: np.ndarray) -> float:
        correct = 0
        for start in range(0, len(x), 1024):
            logits = network.forward(x[start : start + 1024], training=False).data
            correct += int((logits.argmax(axis=1) == y[start : start + 1024]).sum())
        return correct / len(x)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(
                f"expected series of length {self.n_features_in_}, got {X.shape[1]}"
            )
        probs = np.empty((len(X), 2))
        for start in range(0, len(X), 1024):
            logits = self.network_.forward(X[start : start + 1024], training=False).data
            probs[start : start + len(logits)] = np.exp(log_softmax(logits))
        return probs

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        """Write a self-describing text container with a versioned magic header."""
        check_is_fitted(self, "network_")
        weights = {
            name: {
                "shape": list(arr.shape),
                "dtype": "float64",
                "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode(),
            }
            for name, arr in self.network_.state_dict().items()
        }
        doc = {
            "architecture": {
                "in_channels": 1,
                "n_classes": 2,
                "channels": list(self.channels),
                "kernels": list(self.kernels),
            },
            "normalization": {
                "kind": "identity",
                "clip": [0.0, 1.0],
                "series_len": int(self.n_features_in_),
            },
            "weights": weights,
            "training": {
                "epochs": int(self.epochs),
                "batch_size": int(self.batch_size),
                "learning_rate": float(self.learning_rate),
                "val_fraction": float(self.val_fraction),
                "seed": int(self.seed),
                "best_epoch": int(self.best_epoch_),
                "validation_accuracy": float(self.validation_accuracy_),
                "dataset_sha256": getattr(self, "dataset_hash_", None),
                "n_redraws": getattr(self, "n_redraws_", None),
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(MODEL_MAGIC + "\n")
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "NeuralTscClassifier":
        with open(path, "r", encoding="utf-8") as fh:
            magic = fh.readline().rstrip("\n")
            if magic != MODEL_MAGIC:
                raise ParameterError(
                    f"{path}: not a model file (expected header {MODEL_MAGIC!r})"
                )
            doc = json.load(fh)
        arch = doc["architecture"]
        training = doc["training"]
        clf = cls(
            epochs=training["epochs"],
            batch_size=training["batch_size"],
            learning_rate=training["learning_rate"],
            val_fraction=training["val_fraction"],
            channels=tuple(arch["channels"]),
            kernels=tuple(arch["kernels"]),
            seed=training["seed"],
        )
        network = FcnNetwork(
            in_channels=arch["in_channels"],
            n_classes=arch["n_classes"],
            channels=tuple(arch["channels"]),
            kernels=tuple(arch["kernels"]),
            seed=training["seed"],
        )
        state = {}
        for name, spec in doc["weights"].items():
            arr = np.frombuffer(base64.b64decode(spec["data"]), dtype="<f8")
            state[name] = arr.reshape(spec["shape"]).astype(np.float64)
        network.load_state_dict(state)
        clf.network_ = network
        clf.classes_ = np.array([0, 1])
        clf.n_features_in_ = int(doc["normalization"]["series_len"])
        clf.best_epoch_ = int(training["best_epoch"])
        clf.validation_accuracy_ = float(training["validation_accuracy"])
        clf.history_ = []
        if training.get("dataset_sha256") is not None:
            clf.dataset_hash_ = training["dataset_sha256"]
        return clf


def train_classifier(
    config: TrainingConfig,
    epochs: int = 20,
    batch_size: int = 256,
    learning_rate: float = 1e-3,
) -> NeuralTscClassifier:
    """Generate the simulated dataset and fit the classifier on it."""
    dataset = generate_dataset(config)
    clf = NeuralTscClassifier(
        epochs=epochs, batch_size=batch_size, learning_rate=learning_rate, seed=config.seed
    )
    clf.fit(dataset.X, dataset.y)
    clf.dataset_hash_ = config.sha256()
    clf.n_redraws_ = dataset.n_redraws
    return clf


def classify(model: NeuralTscClassifier, series: BinnedSeries) -> Classification:
    """Classify one binned series; SELECTION iff the probability exceeds 0.5."""
    values = resample_to_length(series, model.n_features_in_)
    selection_col = int(np.flatnonzero(model.classes_ == 1)[0])
    probability = float(model.predict_proba(values[None, :])[0, selection_col])
    verdict = TscLabel.SELECTION if probability > 0.5 else TscLabel.DRIFT
    return Classification(verb=series.verb, probability=probability, verdict=verdict)
