import sys
from pathlib import Path

import pytest

# Make sibling test helpers (oracles.py) importable regardless of rootdir.
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    """A small generated dataset shared by CLI and acceptance tests."""
    from metaner.synthetic import write_synthetic_dataset

    root = tmp_path_factory.mktemp("synth")
    return write_synthetic_dataset(root, train=20, dev=8, test=8, seed=0)
