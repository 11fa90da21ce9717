import types

import numpy as np
import pytest

from invreg import (
    ParameterError,
    PenaltyConfig,
    Projection,
    SpectralSynthetic,
    Tikhonov,
    build_regularizer,
    contrast,
    cosine_basis,
    default_weights,
    discretize_operator,
    estimate_noise_variance,
    kraft_sum,
    midpoint_grid,
    penalty,
    projection_family,
    select,
    select_by_threshold,
    tikhonov_family,
)


class TestPenalty:
    def test_direct_arithmetic(self):
        stub = types.SimpleNamespace(trace_stat=2.0, radius_stat=1.0)
        cfg = PenaltyConfig(sigma2=1.0, r=3.0)
        assert penalty(stub, cfg) == pytest.approx(9.0)

    def test_linear_in_one_plus_weight(self):
        stub = types.SimpleNamespace(trace_stat=2.0, radius_stat=1.0)
        base = penalty(stub, PenaltyConfig(sigma2=1.0, r=3.0))
        with_weight = penalty(stub, PenaltyConfig(sigma2=1.0, r=3.0,
                                                  weights=np.array([1.0])), 0)
        assert with_weight == pytest.approx(2 * base)

    def test_identity_operator_value(self, identity_op_d4_n16):
        reg = build_regularizer(Tikhonov(1.0), identity_op_d4_n16)
        cfg = PenaltyConfig(sigma2=1.0, r=2.5)
        assert penalty(reg, cfg) == pytest.approx(0.1953125)

    def test_homogeneity_in_sigma2(self, identity_op_d4_n16):
        reg = build_regularizer(Tikhonov(1.0), identity_op_d4_n16)
        one = penalty(reg, PenaltyConfig(sigma2=1.0, r=2.5))
        three = penalty(reg, PenaltyConfig(sigma2=3.0, r=2.5))
        assert three == pytest.approx(3 * one)

    def test_r_must_exceed_two(self):
        with pytest.raises(ParameterError):
            PenaltyConfig(sigma2=1.0, r=2.0)


class TestContrast:
    def test_noiseless_projection_on_support(self, op_p1_d4_n16):
        x0 = np.array([2.0, -1.0, 0.0, 0.0])
        y = op_p1_d4_n16.forward(x0)
        reg = build_regularizer(Projection([1, 2, 3, 4]), op_p1_d4_n16)
        assert contrast(reg, op_p1_d4_n16, y) == pytest.approx(0.0, abs=1e-20)

    def test_zero_data(self, op_p1_d4_n16):
        reg = build_regularizer(Tikhonov(0.5), op_p1_d4_n16)
        assert contrast(reg, op_p1_d4_n16, np.zeros(16)) == 0.0

    def test_dense_composition_oracle(self, op_p1_d4_n16, rng):
        # ||A (y - T xhat)||^2 with every factor evaluated densely
        op = op_p1_d4_n16
        y = rng.standard_normal(16)
        reg = build_regularizer(Tikhonov(0.5), op)
        A = op.x_vectors @ np.diag(1.0 / op.singular_values) @ op.singular_design / op.n
        xhat = reg.matrix @ y
        oracle = float(np.sum((A @ (y - op.sample_matrix @ xhat)) ** 2))
        assert contrast(reg, op, y) == pytest.approx(oracle, abs=1e-12)


class TestSelect:
    def test_single_candidate(self, op_p1_d4_n16, rng):
        fam = tikhonov_family(op_p1_d4_n16, alpha_max=1.0, count=1)
        res = select(fam, PenaltyConfig(sigma2=1.0), op_p1_d4_n16,
                     rng.standard_normal(16))
        assert res.chosen == 0
        assert len(res.per_candidate) == 1

    def test_argmin_invariant_under_constant_penalty_shift(self, op_p1_d4_n16, rng):
        fam = tikhonov_family(op_p1_d4_n16)
        res = select(fam, PenaltyConfig(sigma2=1.0), op_p1_d4_n16,
                     rng.standard_normal(16))
        objs = np.array([r.objective for r in res.per_candidate])
        assert int(np.argmin(objs + 17.3)) == res.chosen

    def test_noiseless_nested_projection_picks_the_support(self, op_p1_d4_n16):
        x0 = np.array([3.0, 2.0, 0.0, 0.0])
        y = op_p1_d4_n16.forward(x0)
        fam = projection_family(op_p1_d4_n16)
        cfg = PenaltyConfig(sigma2=1.0, r=2.5)
        res = select(fam, cfg, op_p1_d4_n16, y)
        # exhaustive oracle over the same family
        objs = [contrast(reg, op_p1_d4_n16, y) + penalty(reg, cfg)
                for reg in fam]
        assert res.chosen == int(np.argmin(objs)) == 1   # model {1, 2}

    def test_objective_decomposition_and_argmin(self, op_p1_d4_n16, rng):
        fam = tikhonov_family(op_p1_d4_n16)
        cfg = PenaltyConfig(sigma2=0.5)
        for _ in range(20):
            res = select(fam, cfg, op_p1_d4_n16, rng.standard_normal(16))
            chosen = res.chosen_row()
            for row in res.per_candidate:
                assert row.objective == row.contrast + row.penalty
                assert chosen.objective <= row.objective

    def test_tie_breaks_toward_smoother(self, identity_op_d4_n16):
        # zero data: every projection prefix has zero contrast difference
        # only through the penalty, which increases; but with zero weights and
        # a constant-filter operator the first candidate must win ties
        fam = projection_family(identity_op_d4_n16, dims=[1, 2])
        res = select(fam, PenaltyConfig(sigma2=1.0), identity_op_d4_n16,
                     np.zeros(16))
        assert res.chosen == 0


class TestKraftSum:
    def test_exponential_kill_and_monotonicity(self, op_p1_d4_n16):
        fam = tikhonov_family(op_p1_d4_n16)
        values = []
        for L in (0.0, 1.0, 10.0, 100.0, 1e4):
            cfg = PenaltyConfig(sigma2=1.0, weights=np.full(len(fam), L))
            values.append(kraft_sum(fam, cfg))
        assert np.all(np.diff(values) < 0)
        assert values[-1] < 1e-12

    def test_single_candidate_direct_arithmetic(self, identity_op_d4_n16):
        # full-model projection on the identity operator: Tr/rho^2 = 4,
        # n rho^2 = 1, so the L=0 term is 2 (sqrt(4) + 1) = 6
        fam = projection_family(identity_op_d4_n16, dims=[4])
        assert kraft_sum(fam, PenaltyConfig(sigma2=1.0)) == pytest.approx(6.0)

    def test_decreasing_in_kraft_constant(self, op_p1_d4_n16):
        fam = tikhonov_family(op_p1_d4_n16)
        w = np.full(len(fam), 1.0)
        vals = [kraft_sum(fam, PenaltyConfig(sigma2=1.0, weights=w, kraft_d=dd))
                for dd in (0.5, 1.0, 2.0, 4.0)]
        assert np.all(np.diff(vals) < 0)

    def test_strictly_decreasing_in_each_weight(self, op_p1_d4_n16):
        fam = tikhonov_family(op_p1_d4_n16)
        base_w = np.full(len(fam), 1.0)
        base = kraft_sum(fam, PenaltyConfig(sigma2=1.0, weights=base_w))
        for k in range(len(fam)):
            bumped = base_w.copy()
            bumped[k] += 0.5
            assert kraft_sum(fam, PenaltyConfig(sigma2=1.0, weights=bumped)) < base

    def test_default_family_with_default_weights_meets_target(self, op_p1_d4_n16):
        fam = tikhonov_family(op_p1_d4_n16)
        cfg = PenaltyConfig(sigma2=1.0)
        w = default_weights(fam, cfg, target=1.0)
        assert kraft_sum(fam, PenaltyConfig(sigma2=1.0, weights=w)) <= 1.0


class TestDefaultWeights:
    def test_zero_when_target_already_met(self, identity_op_d4_n16):
        fam = tikhonov_family(identity_op_d4_n16, alpha_max=2.0, count=1)
        w = default_weights(fam, PenaltyConfig(sigma2=1.0), target=1.0)
        assert np.all(w == 0.0)

    def test_larger_family_never_needs_less(self):
        op = discretize_operator(SpectralSynthetic(p=1.0), cosine_basis(),
                                 midpoint_grid(32), 8)
        cfg = PenaltyConfig(sigma2=1.0)
        small = default_weights(tikhonov_family(op, count=4), cfg)
        large = default_weights(tikhonov_family(op, count=7), cfg)
        assert large[0] >= small[0]

    def test_bisection_post_check_eight_candidates(self):
        op = discretize_operator(SpectralSynthetic(p=1.0), cosine_basis(),
                                 midpoint_grid(256), 16)
        fam = tikhonov_family(op, count=8)
        assert len(fam) == 8
        cfg = PenaltyConfig(sigma2=1.0)
        w = default_weights(fam, cfg, target=1.0)
        total = kraft_sum(fam, PenaltyConfig(sigma2=1.0, weights=w))
        assert 0.99 <= total <= 1.0

    def test_unreachable_target_warns_and_caps(self, op_p1_d4_n16):
        fam = tikhonov_family(op_p1_d4_n16)
        with pytest.warns(RuntimeWarning):
            w = default_weights(fam, PenaltyConfig(sigma2=1.0), target=1e-6,
                                cap=0.5)
        assert np.all(w == 0.5)


class TestSelectByThreshold:
    def test_zero_data_minimal_model(self, op_p1_d4_n16):
        res = select_by_threshold(op_p1_d4_n16, np.zeros(16),
                                  PenaltyConfig(sigma2=1.0))
        assert res.chosen == 0

    def test_single_dominant_coefficient(self, op_p1_d4_n16):
        x0 = np.array([50.0, 0.0, 0.0, 0.0])
        y = op_p1_d4_n16.forward(x0)
        res = select_by_threshold(op_p1_d4_n16, y, PenaltyConfig(sigma2=1.0))
        assert res.chosen == 0
        assert np.allclose(res.estimate, x0, atol=1e-10)

    def test_matches_exhaustive_prefix_search(self, rng):
        op = discretize_operator(SpectralSynthetic(p=1.0), cosine_basis(),
                                 midpoint_grid(64), 10)
        fam = projection_family(op)
        cfg = PenaltyConfig(sigma2=0.04, weights=np.full(10, 0.7))
        for _ in range(100):
            x0 = rng.standard_normal(10) * rng.uniform(0, 2)
            y = op.forward(x0) + rng.normal(0, 0.2, 64)
            a = select(fam, cfg, op, y)
            b = select_by_threshold(op, y, cfg)
            assert a.chosen == b.chosen
            assert np.allclose(a.estimate, b.estimate, atol=1e-12)
            for ra, rb in zip(a.per_candidate, b.per_candidate):
                assert ra.objective == pytest.approx(rb.objective, abs=1e-12)

    def test_off_prefix_coordinates_exactly_zero(self, op_p1_d4_n16, rng):
        y = rng.standard_normal(16)
        res = select_by_threshold(op_p1_d4_n16, y, PenaltyConfig(sigma2=5.0))
        assert np.all(res.estimate[res.chosen + 1:] == 0.0)


class TestNoiseVarianceEstimate:
    def test_recovers_scale_on_pure_noise(self, rng):
        op = discretize_operator(SpectralSynthetic(p=1.0), cosine_basis(),
                                 midpoint_grid(400), 5)
        eps = rng.normal(0.0, 0.7, 400)
        est = estimate_noise_variance(op, eps)
        assert est == pytest.approx(0.49, rel=0.2)
