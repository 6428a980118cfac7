import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

PROBE = Path(__file__).with_name("backend_probe.py")


def run_probe(flag):
    env = dict(os.environ, FLAB_NUMBA=flag)
    out = subprocess.run([sys.executable, str(PROBE)], capture_output=True, text=True, env=env, check=True)
    return json.loads(out.stdout)


@pytest.fixture(scope="module")
def both():
    return run_probe("0"), run_probe("1")


def test_backends_selected(both):
    numpy_run, numba_run = both
    assert numpy_run["numba"] is False and numba_run["numba"] is True


def test_phases_bitwise_identical(both):
    # same double-double operations element by element
    assert both[0]["frac"] == both[1]["frac"]


def test_counts_identical(both):
    assert both[0]["bins"] == both[1]["bins"]


@pytest.mark.parametrize("key", ["mean", "corr", "four"])
def test_sums_agree_to_rounding(both, key):
    # compensated sums differ only in the order of the compensation terms
    a, b = np.array(both[0][key]), np.array(both[1][key])
    assert np.abs(a - b).max() <= 1e-15
