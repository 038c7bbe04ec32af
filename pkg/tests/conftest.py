import numpy as np
import pytest

from tagaug.fixtures import make_toy_tag
from tagaug.graph import make_longtail_split, write_dataset


@pytest.fixture(scope="session")
def toy_graph():
    return make_toy_tag(seed=11)


@pytest.fixture(scope="session")
def toy_split(toy_graph):
    return make_longtail_split(
        toy_graph, head_count=20, imbalance_ratio=0.1, tail_class_count=2, seed=7
    )


@pytest.fixture()
def toy_dataset_dir(tmp_path, toy_graph):
    path = tmp_path / "data"
    write_dataset(toy_graph, path, tail_class_count=2)
    return path


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
