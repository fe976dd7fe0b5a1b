"""Bit-identity of the compiled extension and the pure-numpy lane."""

import numpy as np
import pytest

from stickymc import _ref
from stickymc.backend import HAVE_EXT
from stickymc.rng import child_keys, derive_stream

if HAVE_EXT:
    from stickymc import _ext

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")


@needs_ext
def test_evolve_kernel_bit_identical():
    for kind, param in ((0, 0.0), (1, 0.21132486540518708), (1, 0.05)):
        for n in (1, 17, 256):
            key = derive_stream(123, [kind, n]).key
            a = _ref.evolve_kernel(key, n, kind, param)
            b = _ext.evolve_kernel(key, n, kind, param)
            assert np.array_equal(a, b)
            assert a.dtype == b.dtype == np.float64


@needs_ext
def test_two_point_batch_bit_identical():
    s = derive_stream(7, [])
    ids = np.arange(16, dtype=np.uint64)
    kw = child_keys(s.child(1), ids)
    ks = child_keys(s.child(2), ids)
    kg = child_keys(s.child(3), ids)
    idx = np.array([0, 100, 250, 500], dtype=np.int64)
    ref = _ref.two_point_batch(kw, ks, kg, 500, 2e-3, 2.0, idx)
    ext = _ext.two_point_batch(kw, ks, kg, 500, 2e-3, 2.0, idx)
    for a, b in zip(ref, ext):
        assert np.array_equal(np.asarray(a), np.asarray(b))


def test_python_lane_selectable():
    import os
    import subprocess
    import sys

    # fresh interpreter with the env var set must report the python lane
    env = dict(os.environ, STICKYMC_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "import stickymc; print(stickymc.BACKEND_NAME)"],
        capture_output=True, text=True, env=env,
    )
    assert out.stdout.strip() == "python"
