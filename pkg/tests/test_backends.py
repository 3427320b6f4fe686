import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microlab import _kernels_py as py
from microlab import kernels

try:
    from microlab import _kernels as cy
except ImportError:  # extension not built
    cy = None

needs_cy = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def _bench_inputs(n, seed):
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "benchmarks"))
    try:
        from bench_kernels import _inputs
    finally:
        sys.path.pop(0)
    return _inputs(n, seed)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def test_backend_flag():
    forced = os.environ.get("MICROLAB_PURE_PYTHON") == "1"
    assert kernels.BACKEND == ("cython" if cy is not None and not forced else "python")


def test_pure_python_env_forces_fallback():
    code = "from microlab import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "MICROLAB_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_cy
@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3000), st.integers(0, 2**31))
def test_backends_bit_identical(n, seed):
    for name, args in _bench_inputs(n, seed).items():
        assert _same(getattr(py, name)(*args), getattr(cy, name)(*args)), name


def test_markov_signs_reference():
    u = np.array([0.1, 0.9, 0.5, 0.7])
    # keep the previous sign with probability (1 + rho) / 2
    out = py.markov_signs(u, 0.2, 1)
    exp, prev = [], 1
    for x in u:
        prev = prev if x < 0.6 else -prev
        exp.append(prev)
    np.testing.assert_array_equal(out, exp)


def test_benchmark_runs():
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "benchmarks"))
    try:
        from bench_kernels import main
    finally:
        sys.path.pop(0)
    rows = main(["--n", "2000", "--repeat", "1"])
    assert {r["kernel"] for r in rows} == set(kernels.__all__) - {"BACKEND"}
    if cy is not None:
        assert all(r["equal"] for r in rows)
