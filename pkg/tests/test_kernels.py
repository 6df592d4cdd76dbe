import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from projlstd import kernels
from projlstd.kernels import _reference

fast = pytest.importorskip("projlstd.kernels._fast")


def _inputs(seed, S=9, D=7, d=3, n=400):
    rng = np.random.default_rng(seed)
    P = rng.random((S, S))
    cdf = np.ascontiguousarray(np.cumsum(P / P.sum(axis=1, keepdims=True), axis=1))
    u = rng.random(n - 1)
    Phi = rng.uniform(-1, 1, (S, D))
    H = rng.normal(size=(d, D)) / np.sqrt(d)
    return cdf, u, Phi, H, rng.normal(size=S)


class TestBackendEquivalence:
    @pytest.mark.parametrize("seed", range(5))
    def test_sample_path_identical(self, seed):
        cdf, u, *_ = _inputs(seed)
        assert_array_equal(fast.sample_path(cdf, u, 2), _reference.sample_path(cdf, u, 2))

    def test_sample_path_clamps_round_off(self):
        cdf = np.array([[0.5, 1.0 - 1e-16], [0.3, 1.0 - 1e-16]])
        u = np.array([1.0 - 1e-17, 0.999999999999999999])
        assert_array_equal(fast.sample_path(cdf, u, 0), _reference.sample_path(cdf, u, 0))
        assert fast.sample_path(cdf, u, 0).max() <= 1

    @pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
    def test_accumulate_projected(self, lam):
        cdf, u, Phi, H, r = _inputs(1)
        states = _reference.sample_path(cdf, u, 0)
        A1, b1 = fast.lstd_accumulate(Phi, H, states, r[states], 0.9, lam)
        A2, b2 = _reference.lstd_accumulate(Phi, H, states, r[states], 0.9, lam)
        np.testing.assert_allclose(A1, A2, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(b1, b2, rtol=1e-13, atol=1e-15)

    def test_accumulate_identity_is_bitwise(self):
        cdf, u, Phi, _, r = _inputs(2)
        states = _reference.sample_path(cdf, u, 0)
        A1, b1 = fast.lstd_accumulate(Phi, None, states, r[states], 0.9, 0.7)
        A2, b2 = _reference.lstd_accumulate(Phi, None, states, r[states], 0.9, 0.7)
        assert_array_equal(A1, A2)
        assert_array_equal(b1, b2)

    def test_dimension_check(self):
        _, _, Phi, _, r = _inputs(3)
        states = np.array([0, 1, 2], dtype=np.int64)
        with pytest.raises(ValueError):
            fast.lstd_accumulate(Phi, np.ones((2, 3)), states, r[states], 0.9, 0.5)


class TestSelection:
    def test_compiled_selected_by_default(self):
        assert kernels.BACKEND == "compiled"

    def test_pure_python_override(self):
        env = dict(os.environ, PROJLSTD_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", "import projlstd; print(projlstd.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"
