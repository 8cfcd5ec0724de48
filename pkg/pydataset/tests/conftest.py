import shutil
from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def mixed_root():
    return GOLDEN / "mixed27"


@pytest.fixture
def zero_root():
    return GOLDEN / "zero1"


@pytest.fixture
def editable_dataset(tmp_path, mixed_root):
    """A throwaway copy of the golden dataset for tamper tests."""
    target = tmp_path / "ds"
    shutil.copytree(mixed_root, target)
    return target
