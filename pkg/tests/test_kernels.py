"""Compiled and pure-numpy kernel backends must agree bit-for-bit."""

import numpy as np
import pytest

from odocount import kernels

pytestmark = pytest.mark.skipif(
    len(kernels.available_backends()) < 2,
    reason="compiled extension not built; nothing to compare",
)


def both(fn_name, *args):
    prev = kernels.get_backend()
    out = {}
    try:
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            out[backend] = getattr(kernels, fn_name)(*args)
    finally:
        kernels.set_backend(prev)
    return out


class TestMedianSubtract:
    @pytest.mark.parametrize("radius", [0, 1, 3, 17, 200])
    def test_backends_agree(self, radius):
        rng = np.random.default_rng(radius)
        mags = rng.random((120, 9))
        results = both("median_subtract", mags, radius, True)
        assert np.array_equal(results["compiled"], results["python"])

    def test_unclamped_agrees(self):
        rng = np.random.default_rng(7)
        mags = rng.random((60, 4))
        results = both("median_subtract", mags, 5, False)
        assert np.array_equal(results["compiled"], results["python"])

    def test_ties_and_duplicates(self):
        rng = np.random.default_rng(8)
        mags = rng.integers(0, 4, size=(80, 3)).astype(np.float64)
        results = both("median_subtract", mags, 6, True)
        assert np.array_equal(results["compiled"], results["python"])

    def test_single_frame(self):
        results = both("median_subtract", np.array([[2.0, 3.0]]), 10, True)
        assert np.array_equal(results["compiled"], np.zeros((1, 2)))
        assert np.array_equal(results["python"], np.zeros((1, 2)))


class TestViterbiKernel:
    def test_backends_agree(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            S = int(rng.integers(1, 8))
            T = int(rng.integers(1, 40))
            li = np.log(rng.dirichlet(np.ones(S)))
            lt = np.log(rng.dirichlet(np.ones(S), size=S))
            ll = rng.standard_normal((T, S))
            results = both("viterbi", li, lt, ll)
            pa, la = results["compiled"]
            pb, lb = results["python"]
            assert np.array_equal(pa, pb)
            assert la == pytest.approx(lb, abs=1e-12)

    def test_both_raise_on_dead_frame(self):
        li = np.zeros(2)
        lt = np.zeros((2, 2))
        ll = np.array([[0.0, 0.0], [-np.inf, -np.inf], [0.0, 0.0]])
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            with pytest.raises(ValueError, match="frame 1"):
                kernels.viterbi(li, lt, ll)
        kernels.set_backend("compiled")


class TestForestPredictKernel:
    def test_backends_agree(self):
        from odocount.detectors import train_forest

        rng = np.random.default_rng(10)
        X = rng.random((200, 6)).astype(np.float32)
        y = (rng.random(200) > 0.6).astype(float)
        model = train_forest(X, y, n_trees=12, seed=3)
        Q = rng.random((500, 6)).astype(np.float32)
        results = both("forest_predict", Q, model.feature, model.threshold,
                       model.left, model.right, model.value, model.tree_offsets)
        assert np.array_equal(results["compiled"], results["python"])


def test_set_backend_validates():
    with pytest.raises(ValueError, match="unknown backend"):
        kernels.set_backend("fortran")
    assert kernels.get_backend() in kernels.available_backends()
