import os

import pytest

from procf_predictor.service import train

HERE = os.path.dirname(os.path.abspath(__file__))
REPO_ROOT = os.path.dirname(os.path.dirname(HERE))
FIXTURES = os.path.join(REPO_ROOT, "tests", "fixtures")
LOG = os.path.join(FIXTURES, "log.csv")
SCHEMA = os.path.join(FIXTURES, "schema.json")
ORACLE = os.path.join(FIXTURES, "oracle.json")


@pytest.fixture(scope="session")
def model_path(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("model") / "rf.joblib")
    train(LOG, SCHEMA, path, seed=5)
    return path
