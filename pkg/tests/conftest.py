import sys

import numpy as np
import pytest

from procf.encoding import FeatureCodec, encode
from procf.event_log import LogSchema, parse_log, take_prefix


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance criterion."""
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        sys.stderr.write(f"\nACCEPTANCE {name}: {status}\n")
        sys.stderr.flush()

TINY_SCHEMA_DOC = {
    "activities": ["A", "B", "C", "End_ok", "End_bad"],
    "event_attrs": {"amount": {"type": "numeric"}},
    "case_attrs": {"tier": {"type": "categorical"}},
    "outcome": {"End_ok": "ok", "End_bad": "bad"},
}

TINY_LOG_CSV = """case_id,activity,timestamp,ev_amount,case_tier
c1,A,2024-01-01T08:00:00,5,gold
c1,B,2024-01-01T08:05:00,9,gold
c1,C,2024-01-01T08:07:00,2,gold
c1,End_ok,2024-01-01T08:10:00,1,gold
c2,A,2024-01-01T09:00:00,2,silver
c2,C,2024-01-01T09:04:00,7,silver
c2,B,2024-01-01T09:06:00,4,silver
c2,End_bad,2024-01-01T09:10:00,3,silver
c3,A,2024-01-02T10:00:00,6,gold
c3,B,2024-01-02T10:02:00,8,gold
c3,End_ok,2024-01-02T10:09:00,2,gold
"""


@pytest.fixture(scope="session")
def tiny_schema():
    return LogSchema.from_json(TINY_SCHEMA_DOC)


@pytest.fixture(scope="session")
def tiny_log(tiny_schema):
    return parse_log(TINY_LOG_CSV, tiny_schema)


@pytest.fixture(scope="session")
def tiny_codec(tiny_log):
    return FeatureCodec.from_log(tiny_log)


@pytest.fixture()
def tiny_x(tiny_log):
    return encode(take_prefix(tiny_log.traces[0], 2), tiny_log.schema)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
