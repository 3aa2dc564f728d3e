import numpy as np
import pytest

from labelcollage import ToySpec, UNLABELED, InstanceMap, LabelMap, ingest
from labelcollage import toygen

# Small library for fast unit tests.
SMALL_SPEC = ToySpec(scenes=12, categories=12, size=96, seed=7)
# Acceptance-scale library (criteria pin these numbers).
ACCEPT_SPEC = ToySpec(scenes=50, categories=12, size=256, seed=7)
# Clique-structured library for the pruning-rate and performance criteria.
CLIQUE_SPEC = ToySpec(scenes=1000, categories=61, size=256, seed=11, cliques=20)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("small_data")
    toygen.generate(SMALL_SPEC, root)
    return root


@pytest.fixture(scope="session")
def small_lib(small_dataset):
    return ingest(small_dataset)


@pytest.fixture(scope="session")
def accept_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept_data")
    toygen.generate(ACCEPT_SPEC, root)
    return root


@pytest.fixture(scope="session")
def accept_lib(accept_dataset):
    return ingest(accept_dataset)


@pytest.fixture(scope="session")
def clique_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("clique_data")
    toygen.generate(CLIQUE_SPEC, root)
    return root


@pytest.fixture(scope="session")
def clique_lib(clique_dataset):
    return ingest(clique_dataset)


def make_label_map(rows, num_categories=16):
    return LabelMap(np.array(rows, dtype=np.uint16), num_categories)


def make_instance_map(rows):
    return InstanceMap(np.array(rows, dtype=np.uint16))


def blank_maps(h, w, num_categories=16):
    """Fully unlabeled query pair."""
    return (
        LabelMap(np.full((h, w), UNLABELED, dtype=np.uint16), num_categories),
        InstanceMap(np.zeros((h, w), dtype=np.uint16)),
    )
