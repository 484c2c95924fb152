import numpy as np
import pytest
from numpy.testing import assert_allclose

from vrcubic.finite_sum import (
    FiniteSumProblem,
    OracleCounter,
    batch_gradient,
    batch_hessian,
    batch_hvp,
    batch_value,
    full_index,
    sample_multiset,
)


def quadratic_problem(coeffs):
    """f_i(x) = 0.5 * a_i * ||x||^2 on d=3; every derivative is hand-checkable."""
    a = np.asarray(coeffs, dtype=float)
    d = 3
    return FiniteSumProblem(
        n=len(a),
        dim=d,
        component_value=lambda i, x: 0.5 * a[i] * float(x @ x),
        component_grad=lambda i, x: a[i] * x,
        component_hess=lambda i, x: a[i] * np.eye(d),
        component_hvp=lambda i, x, v: a[i] * v,
        lipschitz_grad=float(np.max(np.abs(a))),
        lipschitz_hess=1.0,
    )


class TestSampling:
    def test_full_batch_when_B_equals_n(self):
        rng = np.random.default_rng(0)
        idx = sample_multiset(rng, 5, 5)
        assert_allclose(idx, np.arange(5))

    def test_full_batch_when_B_exceeds_n(self):
        rng = np.random.default_rng(0)
        idx = sample_multiset(rng, 5, 7)
        assert_allclose(idx, np.arange(5))

    def test_full_batch_consumes_no_randomness(self):
        rng1 = np.random.default_rng(3)
        rng2 = np.random.default_rng(3)
        sample_multiset(rng1, 5, 9)
        assert rng1.integers(0, 1 << 30) == rng2.integers(0, 1 << 30)

    def test_subsample_range_and_determinism(self):
        idx1 = sample_multiset(np.random.default_rng(42), 100, 10)
        idx2 = sample_multiset(np.random.default_rng(42), 100, 10)
        assert idx1.shape == (10,)
        assert idx1.min() >= 0 and idx1.max() < 100
        assert_allclose(idx1, idx2)

    def test_sorted_for_deterministic_reduction(self):
        idx = sample_multiset(np.random.default_rng(7), 1000, 50)
        assert np.all(np.diff(idx) >= 0)

    def test_replacement_sampling_repeats_indices(self):
        # with B close to n, collisions are essentially certain
        idx = sample_multiset(np.random.default_rng(1), 20, 19)
        assert len(np.unique(idx)) < 19

    @pytest.mark.parametrize("n,B", [(0, 3), (5, 0), (5, -1)])
    def test_degenerate_sizes_rejected(self, n, B):
        with pytest.raises(ValueError):
            sample_multiset(np.random.default_rng(0), n, B)


class TestBatchOracles:
    def test_singleton_gradient(self):
        p = quadratic_problem([2.0, 5.0])
        x = np.array([1.0, -1.0, 2.0])
        c = OracleCounter()
        g = batch_gradient(p, x, np.array([1]), c)
        assert_allclose(g, 5.0 * x)
        assert c.grad_calls == 1

    def test_pair_average_gradient(self):
        # hand-computed: mean of a_1*x and a_2*x is ((a_1+a_2)/2) x
        p = quadratic_problem([2.0, 5.0])
        x = np.array([1.0, -1.0, 2.0])
        g = batch_gradient(p, x, np.array([0, 1]), OracleCounter())
        assert_allclose(g, 3.5 * x)

    def test_full_gradient_is_component_mean(self):
        p = quadratic_problem([1.0, 2.0, 3.0, 10.0])
        x = np.array([0.5, 0.25, -1.0])
        g = batch_gradient(p, x, full_index(p), OracleCounter())
        assert_allclose(g, 4.0 * x)

    def test_multiset_weighting(self):
        # index 0 twice, index 1 once: mean uses multiplicity
        p = quadratic_problem([2.0, 8.0])
        x = np.ones(3)
        g = batch_gradient(p, x, np.array([0, 0, 1]), OracleCounter())
        assert_allclose(g, 4.0 * x)

    def test_batch_hessian_average(self):
        p = quadratic_problem([2.0, 6.0])
        H = batch_hessian(p, np.zeros(3), np.array([0, 1]), OracleCounter())
        assert_allclose(H, 4.0 * np.eye(3))

    def test_batch_value_average(self):
        p = quadratic_problem([2.0, 6.0])
        x = np.array([1.0, 0.0, 0.0])
        f = batch_value(p, x, np.array([0, 1]), OracleCounter())
        assert_allclose(f, 2.0)

    def test_hvp_zero_vector(self):
        p = quadratic_problem([3.0, 4.0])
        hv = batch_hvp(p, np.ones(3), full_index(p), np.zeros(3), OracleCounter())
        assert_allclose(hv, np.zeros(3))

    def test_hvp_identity_hessian(self):
        p = quadratic_problem([1.0, 1.0])
        v = np.array([0.3, -2.0, 1.0])
        hv = batch_hvp(p, np.zeros(3), full_index(p), v, OracleCounter())
        assert_allclose(hv, v)

    def test_hvp_matches_hessian_product(self):
        p = quadratic_problem([2.0, 5.0, 1.0])
        rng = np.random.default_rng(0)
        x, v = rng.standard_normal(3), rng.standard_normal(3)
        idx = np.array([0, 2])
        c = OracleCounter()
        hv = batch_hvp(p, x, idx, v, c)
        H = batch_hessian(p, x, idx, c)
        assert_allclose(hv, H @ v, rtol=1e-12, atol=1e-12)

    def test_out_of_range_index_rejected(self):
        p = quadratic_problem([1.0, 2.0])
        with pytest.raises(IndexError):
            batch_gradient(p, np.zeros(3), np.array([2]), OracleCounter())

    def test_empty_batch_rejected(self):
        p = quadratic_problem([1.0, 2.0])
        with pytest.raises(ValueError):
            batch_gradient(p, np.zeros(3), np.array([], dtype=int), OracleCounter())

    def test_missing_hessian_oracle_reported(self):
        p = FiniteSumProblem(
            n=1,
            dim=2,
            component_value=lambda i, x: float(x @ x),
            component_grad=lambda i, x: 2.0 * x,
            lipschitz_grad=2.0,
            lipschitz_hess=1.0,
        )
        with pytest.raises(ValueError, match="Hessian"):
            batch_hessian(p, np.zeros(2), full_index(p), OracleCounter())


class TestLinearity:
    def test_disjoint_union_average(self):
        p = quadratic_problem([1.0, 2.0, 3.0, 4.0, 5.0])
        x = np.array([1.0, 2.0, 3.0])
        i1 = np.array([0, 1])
        i2 = np.array([2, 3, 4])
        g1 = batch_gradient(p, x, i1, OracleCounter())
        g2 = batch_gradient(p, x, i2, OracleCounter())
        g = batch_gradient(p, x, np.concatenate([i1, i2]), OracleCounter())
        assert_allclose(g, (2 * g1 + 3 * g2) / 5, rtol=1e-12)


class TestCounters:
    def test_counts_accumulate_per_component(self):
        p = quadratic_problem([1.0, 2.0, 3.0])
        c = OracleCounter()
        x = np.zeros(3)
        batch_gradient(p, x, np.array([0, 1]), c)
        batch_gradient(p, x, np.array([2]), c)
        batch_hessian(p, x, full_index(p), c)
        batch_hvp(p, x, np.array([0]), np.ones(3), c)
        batch_value(p, x, np.array([0, 0]), c)
        assert c.grad_calls == 3
        assert c.hess_calls == 3
        assert c.hvp_calls == 1
        assert c.value_calls == 2

    def test_full_set_charges_n(self):
        p = quadratic_problem([1.0] * 7)
        c = OracleCounter()
        idx = sample_multiset(np.random.default_rng(0), 7, 100)
        batch_gradient(p, np.zeros(3), idx, c)
        assert c.grad_calls == 7

    def test_snapshot_is_independent_copy(self):
        c = OracleCounter(grad_calls=4, hvp_calls=2)
        snap = c.snapshot()
        c.grad_calls += 10
        assert snap.grad_calls == 4
        assert snap.hvp_calls == 2
        assert snap.value_calls == 0


class TestValidation:
    def test_bad_problem_sizes(self):
        with pytest.raises(ValueError):
            FiniteSumProblem(
                n=0,
                dim=2,
                component_value=lambda i, x: 0.0,
                component_grad=lambda i, x: np.zeros(2),
                lipschitz_grad=1.0,
                lipschitz_hess=1.0,
            )

    def test_nonpositive_lipschitz_rejected(self):
        with pytest.raises(ValueError):
            FiniteSumProblem(
                n=1,
                dim=2,
                component_value=lambda i, x: 0.0,
                component_grad=lambda i, x: np.zeros(2),
                lipschitz_grad=1.0,
                lipschitz_hess=0.0,
            )
