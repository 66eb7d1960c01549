import pytest

from driftsel.classifier import NeuralTscClassifier, TrainingConfig, generate_dataset
from driftsel.demo import write_demo_corpus


@pytest.fixture(scope="session")
def demo_corpus(tmp_path_factory):
    """Paths of the deterministic synthetic demonstration corpus."""
    directory = tmp_path_factory.mktemp("demo_corpus")
    return write_demo_corpus(directory, seed=1)


@pytest.fixture(scope="session")
def small_model():
    """A modest but usable classifier shared across tests (~25 s to train)."""
    config = TrainingConfig(samples_per_class=3000, seed=7)
    dataset = generate_dataset(config)
    clf = NeuralTscClassifier(epochs=10, batch_size=256, learning_rate=1e-3, seed=7)
    clf.fit(dataset.X, dataset.y)
    clf.dataset_hash_ = config.sha256()
    clf.n_redraws_ = dataset.n_redraws
    return clf


@pytest.fixture(scope="session")
def small_model_path(small_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "small.tsc"
    small_model.save(path)
    return str(path)
