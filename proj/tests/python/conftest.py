import os
import pathlib

import pytest

os.environ.pop("MCOPT_CONFIG", None)

SOURCE_DIR = pathlib.Path(os.environ.get("MCOPT_SOURCE_DIR", pathlib.Path(__file__).parents[2]))


@pytest.fixture(scope="session")
def source_dir():
    return SOURCE_DIR


@pytest.fixture(scope="session")
def db(source_dir):
    import mcopt

    return mcopt.Database.load(str(source_dir / "data" / "mepdb.json"))
