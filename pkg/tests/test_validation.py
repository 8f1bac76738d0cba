import json

import numpy as np
import pytest

from homog.validation import SEEDED, SUITES, SuiteResult, run_suites

CHEAP = ["truncation-profile", "legendre", "gradients", "fenchel", "convexity", "level-identity", "calabi-limit"]


@pytest.mark.parametrize("name", CHEAP)
def test_cheap_suite_passes(name):
    (res,) = run_suites([name])
    assert res.name == name
    assert res.passed, res.details
    json.dumps(res.to_json())


def test_seeded_suites_are_reproducible():
    a = run_suites(["fenchel", "legendre"], seed=7)
    b = run_suites(["fenchel", "legendre"], seed=7)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]


def test_seeded_names_are_known():
    assert SEEDED <= set(SUITES)


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suites(["nosuch"])


def test_suite_result_json_coerces_numpy():
    res = SuiteResult("x", np.bool_(True), {"gap": np.float64(0.5), 1: [np.int64(2)]})
    assert res.to_json() == {"name": "x", "passed": True, "details": {"gap": 0.5, "1": [2]}}
