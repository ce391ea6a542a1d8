import pytest

from synthdata import clustered_corpus


@pytest.fixture(scope="session")
def clustered(tmp_path_factory):
    """Session-wide clustered corpus: (corpus path, dataset-id -> cluster map)."""
    root = tmp_path_factory.mktemp("clustered")
    return clustered_corpus(root, per_cluster=10, n_rows=120, seed=0)
