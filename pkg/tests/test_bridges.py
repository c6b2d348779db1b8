"""Conditional local-time laws against quadrature oracles and invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from exact_diffusion.bridges import (
    BridgeQuery,
    EndpointPair,
    UVRegion,
    bridge_gaussian_params,
    compute_case_weights,
    interpolate_skeleton,
    nu1_density,
    prob_local_time_constant,
    sample_B_conditional_zero_increment,
    sample_bridge_point,
    sample_L_given_endpoints,
    sample_xi1,
    sample_xi2,
    sample_xi3,
    xi1_density,
    xi2_density,
    xi3_density,
)
from exact_diffusion.drift import SkeletonPoint
from exact_diffusion.errors import DomainError
from exact_diffusion.rng import RngStream

from conftest import fresh_stream

ONE_MINUS_EXP_M2 = 0.8646647167633873


class TestProbLocalTimeConstant:
    def test_same_sign_value(self):
        e = EndpointPair(0.0, 1.0, 1.0, 1.0, 0.0)
        assert prob_local_time_constant(e) == pytest.approx(ONE_MINUS_EXP_M2, abs=1e-12)

    def test_sign_change_forces_increase(self):
        assert prob_local_time_constant(EndpointPair(0.0, 2.0, 1.0, -0.5, 0.0)) == 0.0
        assert prob_local_time_constant(EndpointPair(0.0, 2.0, 0.0, 0.5, 0.0)) == 0.0

    def test_short_interval_limit(self):
        e = EndpointPair(0.0, 1e-12, 1.0, 1.0, 0.0)
        assert prob_local_time_constant(e) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_times(self):
        with pytest.raises(DomainError):
            EndpointPair(1.0, 1.0, 0.5, 0.5, 0.0)

    @given(
        st.floats(-4, 4),
        st.floats(-4, 4),
        st.floats(0.01, 10),
        st.floats(0, 3),
    )
    def test_range_over_random_inputs(self, b1, b2, dt, l1):
        p = prob_local_time_constant(EndpointPair(0.0, dt, b1, b2, l1))
        assert 0.0 <= p <= 1.0
        if b1 * b2 <= 0.0:
            assert p == 0.0


class TestSampleLGivenEndpoints:
    def test_atom_frequency_one_million(self):
        rng = fresh_stream("l-atom-freq")
        e = EndpointPair(0.0, 1.0, 1.0, 1.0, 0.0)
        n = 1_000_000
        hits = sum(sample_L_given_endpoints(e, rng) == 0.0 for _ in range(n))
        se = math.sqrt(ONE_MINUS_EXP_M2 * (1.0 - ONE_MINUS_EXP_M2) / n)
        assert abs(hits / n - ONE_MINUS_EXP_M2) < 3.0 * se

    def test_zero_endpoints_give_rayleigh(self):
        rng = fresh_stream("l-rayleigh")
        e = EndpointPair(0.0, 1.0, 0.0, 0.0, 0.0)
        n = 200_000
        draws = np.array([sample_L_given_endpoints(e, rng) for _ in range(n)])
        assert np.all(draws > 0.0)
        target = math.sqrt(math.pi / 2.0)
        std = math.sqrt((4.0 - math.pi) / 2.0)
        assert abs(draws.mean() - target) < 3.0 * std / math.sqrt(n)

    def test_monotone_in_l1(self):
        rng = fresh_stream("l-monotone")
        for _ in range(5000):
            b1 = rng.standard_normal()
            b2 = rng.standard_normal()
            l1 = abs(rng.standard_normal())
            e = EndpointPair(0.0, 0.5, b1, b2, l1)
            assert sample_L_given_endpoints(e, rng) >= l1

    def test_continuous_part_matches_quadrature(self):
        from exact_diffusion.distributions import LocalTimeDensityQuery, joint_density_f
        from exact_diffusion.validation import ks_one_sample, quadrature_cdf

        rng = fresh_stream("l-cont")
        e = EndpointPair(0.0, 0.8, -0.7, 1.1, 0.3)  # sign change: purely continuous
        n = 100_000
        draws = np.array([sample_L_given_endpoints(e, rng) for _ in range(n)])
        oracle = quadrature_cdf(
            lambda l2: joint_density_f(LocalTimeDensityQuery(e.b1, 0.8, e.b2, l2 - e.l1)),
            e.l1 + 1e-12,
            e.l1 + 12.0,
            tol=1e-8,
        )
        stat, _ = ks_one_sample(draws, oracle)
        assert stat < 0.0061


class TestZeroIncrementBridge:
    def test_symmetric_proposal_params(self):
        q = BridgeQuery(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.0)
        mu, sigma2 = bridge_gaussian_params(q)
        assert mu == pytest.approx(1.0)
        assert sigma2 == pytest.approx(0.5)

    def test_output_sign(self):
        rng = fresh_stream("nu1-sign")
        q_pos = BridgeQuery(0.0, 0.6, 1.2, 0.4, 0.9, 0.2, 0.2)
        assert all(sample_B_conditional_zero_increment(q_pos, rng) > 0 for _ in range(3000))
        q_neg = BridgeQuery(0.0, 0.6, 1.2, -0.4, -0.9, 0.2, 0.2)
        assert all(sample_B_conditional_zero_increment(q_neg, rng) < 0 for _ in range(3000))

    def test_law_matches_quadrature(self):
        from exact_diffusion.validation import ks_one_sample, quadrature_cdf

        rng = fresh_stream("nu1-law")
        q = BridgeQuery(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.0)
        n = 100_000
        draws = np.array([sample_B_conditional_zero_increment(q, rng) for _ in range(n)])
        oracle = quadrature_cdf(lambda b: nu1_density(b, q), 1e-12, 10.0, tol=1e-8)
        stat, _ = ks_one_sample(draws, oracle)
        assert stat < 0.0061

    def test_nu1_density_normalised(self):
        q = BridgeQuery(0.0, 0.7, 1.8, 0.9, 1.4, 0.5, 0.5)
        total, _ = integrate.quad(lambda b: nu1_density(b, q), 0.0, 12.0, limit=300)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_rejects_mixed_signs(self):
        with pytest.raises(DomainError):
            BridgeQuery(0.0, 0.5, 1.0, 1.0, -1.0, 0.2, 0.2)


class TestCaseWeights:
    def test_zero_b1_kills_p1(self):
        q = BridgeQuery(0.0, 0.4, 1.0, 0.0, 1.0, 0.0, 0.9)
        cw = compute_case_weights(q)
        assert cw.p1 == 0.0
        assert cw.p3 > 0.0

    def test_zero_b3_kills_p3(self):
        q = BridgeQuery(0.0, 0.4, 1.0, 1.0, 0.0, 0.0, 0.9)
        assert compute_case_weights(q).p3 == 0.0

    def test_sigma2_formula(self):
        q = BridgeQuery(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.5)
        cw = compute_case_weights(q)
        assert cw.sigma2 == pytest.approx(0.5)
        assert cw.k1 == pytest.approx(1.5)
        assert cw.k2 == pytest.approx(1.5)

    def test_against_quadrature(self):
        for q in [
            BridgeQuery(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.5),
            BridgeQuery(0.0, 0.3, 1.0, -1.2, 0.4, 0.2, 1.3),
            BridgeQuery(0.5, 2.5, 3.0, 0.6, -0.8, 0.1, 0.35),
            BridgeQuery(0.0, 0.05, 0.45, 2.0, 1.5, 0.0, 0.8),
            BridgeQuery(0.0, 1.5, 2.0, -0.4, -2.1, 0.7, 1.0),
        ]:
            cw = compute_case_weights(q)
            hi = abs(q.b1) + abs(q.b3) + (q.l3 - q.l1) + 10.0 * math.sqrt(q.s3 - q.s1)
            p1q, _ = integrate.quad(lambda b: xi1_density(b, q), -hi, hi, limit=400)
            p3q, _ = integrate.quad(lambda b: xi3_density(b, q), -hi, hi, limit=400)
            assert cw.p1 == pytest.approx(p1q, abs=1e-6)
            assert cw.p3 == pytest.approx(p3q, abs=1e-6)

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(0.01, 10),
        st.floats(0.01, 10),
        st.floats(-3, 3),
        st.floats(-3, 3),
        st.floats(0, 2),
        st.floats(0.01, 3),
    )
    def test_simplex_property(self, d1, d2, b1, b3, l1, dl):
        q = BridgeQuery(0.0, d1, d1 + d2, b1, b3, l1, l1 + dl)
        cw = compute_case_weights(q)
        for p in (cw.p1, cw.p2, cw.p3):
            assert 0.0 <= p <= 1.0
        assert cw.p1 + cw.p2 + cw.p3 == pytest.approx(1.0, abs=1e-10)


class TestXiDensities:
    Q = BridgeQuery(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.5)

    def test_sign_gates(self):
        assert xi1_density(-0.5, self.Q) == 0.0
        assert xi1_density(0.0, self.Q) == 0.0
        assert xi3_density(-0.5, self.Q) == 0.0

    def test_vanishes_at_origin(self):
        assert xi1_density(1e-12, self.Q) == pytest.approx(0.0, abs=1e-11)

    def test_xi2_outside_band_zero(self):
        assert xi2_density(0.3, self.Q.l1, self.Q) == 0.0
        assert xi2_density(0.3, self.Q.l3, self.Q) == 0.0
        assert xi2_density(0.3, 0.25, self.Q) > 0.0


class TestXiSamplers:
    def test_xi1_sign_and_law(self):
        from exact_diffusion.validation import ks_one_sample, quadrature_cdf

        rng = fresh_stream("xi1-law")
        q = BridgeQuery(0.0, 1.0, 2.0, -1.0, -1.0, 0.0, 0.5)
        n = 100_000
        draws = np.array([sample_xi1(q, rng) for _ in range(n)])
        assert np.all(draws < 0.0)
        oracle = quadrature_cdf(lambda b: xi1_density(-b, q), 1e-12, 11.0, tol=1e-8)
        stat, _ = ks_one_sample(-draws, oracle)
        assert stat < 0.0061

    def test_xi3_law(self):
        from exact_diffusion.validation import ks_one_sample, quadrature_cdf

        rng = fresh_stream("xi3-law")
        q = BridgeQuery(0.0, 0.3, 1.0, -1.2, 0.4, 0.2, 1.3)
        n = 100_000
        draws = np.array([sample_xi3(q, rng) for _ in range(n)])
        assert np.all(draws > 0.0)
        oracle = quadrature_cdf(lambda b: xi3_density(b, q), 1e-12, 9.0, tol=1e-8)
        stat, _ = ks_one_sample(draws, oracle)
        assert stat < 0.0061

    def test_xi2_support_and_sign_balance(self):
        rng = fresh_stream("xi2-support")
        q = BridgeQuery(0.0, 1.0, 2.0, 0.3, -0.3, 0.0, 1.0)
        n = 1_000_000
        positive = 0
        for _ in range(n):
            b2, l2 = sample_xi2(q, rng)
            assert q.l1 < l2 < q.l3
            positive += b2 > 0.0
        assert abs(positive / n - 0.5) < 3.0 * 0.5 / math.sqrt(n)

    def test_xi2_fallback_matches_direct(self):
        # force the fallback by shrinking the switch threshold
        import exact_diffusion.bridges as bridges_module

        q = BridgeQuery(0.0, 1.0, 2.0, 0.7, -0.5, 0.1, 1.4)
        n = 40_000
        rng = fresh_stream("xi2-direct")
        direct = np.array([sample_xi2(q, rng)[1] for _ in range(n)])
        old = bridges_module._XI2_FALLBACK_AFTER
        bridges_module._XI2_FALLBACK_AFTER = 0
        try:
            rng2 = fresh_stream("xi2-fallback")
            fallback = np.array([sample_xi2(q, rng2)[1] for _ in range(n)])
        finally:
            bridges_module._XI2_FALLBACK_AFTER = old
        stat, p = stats.ks_2samp(direct, fallback, method="asymp")
        assert p > 1e-3

    def test_xi2_extreme_query_terminates(self):
        # plain proposals would essentially never land in the region here
        rng = fresh_stream("xi2-extreme")
        q = BridgeQuery(0.0, 0.02, 0.04, 3.0, -2.5, 0.0, 0.4)
        b2, l2 = sample_xi2(q, rng)
        assert q.l1 < l2 < q.l3


class TestUVRegion:
    def test_membership_equals_pullback_one_million(self):
        gen = np.random.default_rng(7)
        total = 0
        for _ in range(20):
            q = BridgeQuery(
                0.0,
                float(gen.uniform(0.05, 2.0)),
                float(gen.uniform(2.1, 4.0)),
                float(gen.uniform(-3, 3)),
                float(gen.uniform(-3, 3)),
                float(gen.uniform(0, 2)),
                float(gen.uniform(2.05, 4.0)),
            )
            region = UVRegion.from_query(q)
            u = gen.uniform(0.0, 8.0, 50_000)
            v = gen.uniform(0.0, 8.0, 50_000)
            # independent pullback reimplementation
            l2 = 0.5 * (u - v + q.l3 + q.l1 - abs(q.b1) + abs(q.b3))
            ab2 = 0.5 * (u + v - (q.l3 - q.l1) - abs(q.b1) - abs(q.b3))
            direct = (l2 >= q.l1) & (l2 <= q.l3) & (ab2 >= 0.0)
            member = np.array([region.contains(float(a), float(b)) for a, b in zip(u, v)])
            assert np.array_equal(member, direct)
            total += len(u)
        assert total == 1_000_000

    def test_pullback_roundtrip(self):
        q = BridgeQuery(0.0, 1.0, 2.0, 0.7, -0.5, 0.1, 1.4)
        region = UVRegion.from_query(q)
        l2, ab2 = 0.6, 0.9
        u = l2 - q.l1 + ab2 + abs(q.b1)
        v = q.l3 - l2 + abs(q.b3) + ab2
        back_l2, back_ab2 = region.pullback(u, v)
        assert back_l2 == pytest.approx(l2, abs=1e-12)
        assert back_ab2 == pytest.approx(ab2, abs=1e-12)
        assert region.contains(u, v)


class TestSampleBridgePoint:
    def test_constant_local_time_short_circuits(self):
        rng = fresh_stream("bp-const")
        q = BridgeQuery(0.0, 0.5, 1.0, 0.8, 1.2, 0.7, 0.7)
        for _ in range(200):
            b2, l2 = sample_bridge_point(q, rng)
            assert l2 == 0.7
            assert b2 > 0.0

    def test_local_time_stays_in_band(self):
        rng = fresh_stream("bp-band")
        q = BridgeQuery(0.0, 1.0, 2.0, 0.4, -0.9, 0.0, 0.8)
        for _ in range(5000):
            _, l2 = sample_bridge_point(q, rng)
            assert q.l1 <= l2 <= q.l3

    def test_case_frequencies(self):
        rng = fresh_stream("bp-cases")
        q = BridgeQuery(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.5)
        cw = compute_case_weights(q)
        n = 100_000
        counts = {"p1": 0, "p2": 0, "p3": 0}
        for _ in range(n):
            _, l2 = sample_bridge_point(q, rng)
            if l2 == q.l1:
                counts["p1"] += 1
            elif l2 == q.l3:
                counts["p3"] += 1
            else:
                counts["p2"] += 1
        for key, p in (("p1", cw.p1), ("p2", cw.p2), ("p3", cw.p3)):
            se = math.sqrt(p * (1.0 - p) / n)
            assert abs(counts[key] / n - p) < 3.5 * se


class TestInterpolateSkeleton:
    def test_existing_time_unchanged(self):
        rng = fresh_stream("interp-existing")
        pts = [SkeletonPoint(0.0, 0.0, 0.0), SkeletonPoint(1.0, 0.5, 0.3)]
        out = interpolate_skeleton(pts, [1.0, 0.0], rng)
        assert out == pts

    def test_inserts_and_stays_monotone(self):
        rng = fresh_stream("interp-mono")
        pts = [SkeletonPoint(0.0, 0.3, 0.0), SkeletonPoint(2.0, -0.8, 1.1)]
        out = interpolate_skeleton(pts, list(np.linspace(0.1, 1.9, 37)), rng)
        assert len(out) == 39
        for a, b in zip(out, out[1:]):
            assert b.t > a.t
            assert b.l >= a.l

    def test_out_of_range_rejected(self):
        rng = fresh_stream("interp-range")
        pts = [SkeletonPoint(0.0, 0.3, 0.0), SkeletonPoint(1.0, 0.8, 0.0)]
        with pytest.raises(DomainError):
            interpolate_skeleton(pts, [1.5], rng)

    def test_midpoint_marginal_matches_quadrature(self):
        from exact_diffusion.validation import bridge_value_marginal_cdf, ks_one_sample

        rng = fresh_stream("interp-marginal")
        start = SkeletonPoint(0.0, 0.4, 0.0)
        end = SkeletonPoint(2.0, -0.9, 0.8)
        n = 100_000
        draws = np.empty(n)
        for i in range(n):
            out = interpolate_skeleton([start, end], [1.0], rng)
            draws[i] = out[1].x
        q = BridgeQuery(0.0, 1.0, 2.0, start.x, end.x, start.l, end.l)
        spread = 8.0
        oracle = bridge_value_marginal_cdf(q, -spread, spread)
        stat, _ = ks_one_sample(draws, oracle)
        assert stat < 0.0061
