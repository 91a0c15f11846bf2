import json
import math

import numpy as np
import pytest

from aosr.dataio import Dataset
from aosr.errors import InvalidArgument
from aosr.net import MlpModel, mlp_init
from aosr.reweight import IadParams, WeightParams
from aosr.risk import (
    RiskReport,
    auxiliary_risk,
    compute_risk_report,
    delta,
    empirical_risk_s,
    empirical_risk_s_unknown,
    empirical_risk_t_unknown,
    proxy_auxiliary_risk,
    proxy_unknown_risk,
    training_objective,
)
from aosr.rng import Rng


def constant_net(logits):
    """1-input net whose output logits are fixed."""
    logits = np.asarray(logits, dtype=np.float64)
    k = logits.shape[0]
    return MlpModel(
        (1, 1, k),
        (np.zeros((1, 1)), np.zeros((1, k))),
        (np.zeros(1), logits.copy()),
    )


def uniform_net(k):
    return constant_net(np.zeros(k))


def small_dataset(n=6, c=2, seed=0, dim=1):
    rng = Rng(seed)
    return Dataset(rng.standard_normal((n, dim)), rng.integers(0, c, n), c)


class TestRiskS:
    def test_uniform_model_gives_log_k(self):
        s = small_dataset(c=2)
        assert empirical_risk_s(uniform_net(3), s) == pytest.approx(math.log(3))

    def test_perfect_one_hot_truth(self):
        # all labels 0 and the model puts ~all mass on class 0
        s = Dataset(np.zeros((4, 1)), np.zeros(4, np.int64), 1)
        h = constant_net([200.0, 0.0, 0.0])
        assert empirical_risk_s(h, s) == pytest.approx(0.0, abs=1e-12)

    def test_permutation_invariant(self):
        s = small_dataset(n=20)
        perm = Rng(1).permutation(20)
        s2 = Dataset(s.features[perm], s.labels[perm], s.num_known_classes)
        h = mlp_init([1, 8, 3], Rng(2))
        assert empirical_risk_s(h, s) == pytest.approx(empirical_risk_s(h, s2), rel=1e-12)

    def test_rejects_unknown_labels(self):
        s = Dataset(np.zeros((2, 1)), np.array([0, 2]), 2)
        with pytest.raises(InvalidArgument):
            empirical_risk_s(uniform_net(3), s)


class TestRiskSUnknown:
    def test_always_unknown_model(self):
        s = small_dataset(c=2)
        h = constant_net([0.0, 0.0, 200.0])
        assert empirical_risk_s_unknown(h, s) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_model(self):
        s = small_dataset(c=2)
        assert empirical_risk_s_unknown(uniform_net(3), s) == pytest.approx(math.log(3))

    def test_independent_of_labels(self):
        s = small_dataset(n=10, c=2, seed=3)
        flipped = Dataset(s.features, 1 - s.labels, 2)
        h = mlp_init([1, 8, 3], Rng(4))
        assert empirical_risk_s_unknown(h, s) == empirical_risk_s_unknown(h, flipped)

    def test_needs_open_width(self):
        s = small_dataset(c=2)
        with pytest.raises(InvalidArgument):
            empirical_risk_s_unknown(uniform_net(2), s)


class TestRiskTUnknown:
    def test_zero_when_high_weights_and_perfect_rejection(self):
        t = np.zeros((5, 1))
        h = constant_net([0.0, 0.0, 200.0])
        value = empirical_risk_t_unknown(h, t, np.full(5, 1.0), 0.1, 0.05)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_single_zero_weight_sample(self):
        h = uniform_net(3)
        value = empirical_risk_t_unknown(h, np.zeros((1, 1)), np.zeros(1), 0.1, 0.05)
        assert value == pytest.approx(0.05 * math.log(3))

    def test_linear_in_beta_at_zero_weight(self):
        h = uniform_net(3)
        one = empirical_risk_t_unknown(h, np.zeros((1, 1)), np.zeros(1), 0.1, 0.05)
        two = empirical_risk_t_unknown(h, np.zeros((1, 1)), np.zeros(1), 0.1, 0.10)
        assert two == pytest.approx(2 * one)

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgument):
            empirical_risk_t_unknown(uniform_net(3), np.zeros((2, 1)), np.zeros(3), 0.1, 0.05)


class TestDeltaAndAuxiliary:
    def test_clamped_at_zero(self):
        s = small_dataset(c=2)
        # unknown-confident model: T term ~0, S unknown term large
        h = constant_net([0.0, 0.0, 200.0])
        t = np.zeros((4, 1))
        d = delta(h, s, t, np.full(4, 1.0), 0.1, 0.05)
        assert d == 0.0
        assert auxiliary_risk(h, s, t, np.full(4, 1.0), 0.1, 0.05) == pytest.approx(
            empirical_risk_s(h, s)
        )

    def test_difference_value(self):
        s = small_dataset(c=2)
        h = uniform_net(3)
        t = np.zeros((3, 1))
        weights = np.full(3, 5.0)  # above 2*tau, so L is the identity
        r_t = empirical_risk_t_unknown(h, t, weights, 0.1, 0.05)
        r_s_u = empirical_risk_s_unknown(h, s)
        assert delta(h, s, t, weights, 0.1, 0.05) == pytest.approx(
            max(r_t - r_s_u, 0.0)
        )

    def test_auxiliary_at_least_risk_s(self):
        rng = Rng(5)
        s = small_dataset(n=30, c=2, seed=6)
        h = mlp_init([1, 8, 3], Rng(7))
        t = rng.standard_normal((40, 1))
        w = rng.uniform(0, 2, 40)
        assert auxiliary_risk(h, s, t, w, 0.1, 0.05) >= empirical_risk_s(h, s)


class TestProxyRisks:
    def test_zero_above_2tau(self):
        h = mlp_init([1, 6, 3], Rng(8))
        t = Rng(9).standard_normal((10, 1))
        assert proxy_unknown_risk(h, t, np.full(10, 0.9), 0.1, 0.05) == 0.0

    def test_low_weight_sample_value(self):
        h = uniform_net(3)
        value = proxy_unknown_risk(h, np.zeros((1, 1)), np.array([0.02]), 0.1, 0.05)
        assert value == pytest.approx(0.07 * math.log(3))

    def test_more_unknown_mass_lowers_value(self):
        t = np.zeros((1, 1))
        w = np.array([0.02])
        lo = proxy_unknown_risk(constant_net(np.log([0.25, 0.25, 0.5])), t, w, 0.1, 0.05)
        hi = proxy_unknown_risk(constant_net(np.log([0.05, 0.05, 0.9])), t, w, 0.1, 0.05)
        assert hi < lo

    def test_proxy_auxiliary_matches_hand_coefficient(self):
        s = small_dataset(c=2)
        h = uniform_net(3)
        t = Rng(10).standard_normal((6, 1))
        w = np.full(6, 0.02)
        params = WeightParams(tau=0.1, beta=0.05, t=0.1, u_zero_mass=0.5)
        value = proxy_auxiliary_risk(h, s, t, w, params)
        # alpha*gamma_prime/(1-alpha) collapses to beta * u0 * gamma_prime = beta
        coeff = 0.05 * 0.5 * 2.0
        expected = empirical_risk_s(h, s) + coeff * proxy_unknown_risk(h, t, w, 0.1, 0.05)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_proxy_auxiliary_requires_positive_zero_mass(self):
        s = small_dataset(c=2)
        params = WeightParams(tau=0.1, beta=0.05, t=0.1, u_zero_mass=0.0)
        with pytest.raises(InvalidArgument):
            proxy_auxiliary_risk(uniform_net(3), s, np.zeros((1, 1)), np.zeros(1), params)

    def test_objective_with_zero_mu(self):
        s = small_dataset(c=2)
        h = uniform_net(3)
        t = np.zeros((4, 1))
        assert training_objective(h, s, t, np.zeros(4), 0.1, 0.05, 0.0) == pytest.approx(
            empirical_risk_s(h, s)
        )

    def test_objective_agrees_with_proxy_auxiliary_at_analytic_mu(self):
        s = small_dataset(n=15, c=2, seed=11)
        h = mlp_init([1, 8, 3], Rng(12))
        t = Rng(13).standard_normal((20, 1))
        w = Rng(14).uniform(0, 0.5, 20)
        params = WeightParams(tau=0.1, beta=0.05, t=0.1, u_zero_mass=0.4)
        iad = params.iad()
        mu = iad.alpha * iad.gamma_prime / (1 - iad.alpha)
        assert training_objective(h, s, t, w, 0.1, 0.05, mu) == pytest.approx(
            proxy_auxiliary_risk(h, s, t, w, params), abs=1e-12
        )


class TestPermutationInvariance:
    def test_weighted_t_risks_invariant_under_joint_permutation(self):
        h = mlp_init([1, 8, 3], Rng(30))
        t = Rng(31).standard_normal((25, 1))
        w = Rng(32).uniform(0, 1, 25)
        perm = Rng(33).permutation(25)
        for fn in (empirical_risk_t_unknown, proxy_unknown_risk):
            assert fn(h, t, w, 0.1, 0.05) == pytest.approx(
                fn(h, t[perm], w[perm], 0.1, 0.05), rel=1e-12
            )


class TestTransformLimit:
    def test_l_tau_equals_l0_for_weights_off_the_ramp(self):
        # weights are either exactly 0 or above 2*tau
        s = small_dataset(n=10, c=2, seed=15)
        h = mlp_init([1, 8, 3], Rng(16))
        t = Rng(17).standard_normal((12, 1))
        w = np.where(Rng(18).uniform(size=12) < 0.5, 0.0, 1.0)
        tau, beta = 0.3, 0.05
        with_l = empirical_risk_t_unknown(h, t, w, tau, beta)
        # manual L0 version
        from aosr.net import PROB_CLAMP, forward

        probs = forward(h, t)
        losses = -np.log(np.maximum(probs[:, 2], PROB_CLAMP))
        l0_w = np.where(w <= 0, w + beta, w)
        assert with_l == pytest.approx(float(np.mean(l0_w * losses)), rel=1e-15)


class TestRiskReport:
    def test_identities_enforced(self):
        with pytest.raises(InvalidArgument):
            RiskReport(
                r_s=1.0, r_s_unknown=1.0, r_t_unknown=2.0, delta=0.5,
                auxiliary_risk=1.5, proxy_unknown=0.1, proxy_auxiliary=1.0,
                objective=1.0,
            )

    def test_round_trip_and_consistency(self):
        s = small_dataset(n=12, c=2, seed=19)
        h = mlp_init([1, 8, 3], Rng(20))
        t = Rng(21).standard_normal((15, 1))
        w = Rng(22).uniform(0, 1, 15)
        params = WeightParams(tau=0.2, beta=0.05, t=0.1, u_zero_mass=0.3)
        report = compute_risk_report(h, s, t, w, params, mu=2.0)
        assert report.delta == max(report.r_t_unknown - report.r_s_unknown, 0.0)
        assert report.auxiliary_risk == report.r_s + report.delta
        loaded = RiskReport.from_json(report.to_json())
        assert loaded == report
        payload = json.loads(report.to_json())
        assert all(isinstance(v, float) for v in payload.values())

    def test_report_with_zero_u_mass_uses_beta_extension(self):
        s = small_dataset(n=5, c=2, seed=23)
        h = uniform_net(3)
        t = Rng(24).standard_normal((5, 1))
        w = np.full(5, 0.01)
        params = WeightParams(tau=0.2, beta=0.05, t=0.1, u_zero_mass=0.0)
        report = compute_risk_report(h, s, t, w, params, mu=0.0)
        assert report.proxy_auxiliary == pytest.approx(
            report.r_s + 0.05 * report.proxy_unknown
        )
