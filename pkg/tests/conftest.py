import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patchview.dataset import load_dataset
from patchview.toydata import make_box, make_sedan, make_toy_dataset, box_patch_spec
from patchview.warp import default_patch_spec


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy_vehicle")
    make_toy_dataset(root)
    return root


@pytest.fixture(scope="session")
def toy_data(toy_root):
    return load_dataset(toy_root)


@pytest.fixture(scope="session")
def car_spec():
    return default_patch_spec("car")


@pytest.fixture(scope="session")
def sedan():
    return make_sedan()


@pytest.fixture(scope="session")
def box():
    return make_box()


@pytest.fixture(scope="session")
def box_spec():
    return box_patch_spec()
