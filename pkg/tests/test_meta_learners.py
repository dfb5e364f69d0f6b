from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvcate.base_learners import GradientBoostedSpec, LinearBasisSpec, MultinomialLogisticSpec
from mvcate.core import ObservationalSample, TreatmentLevels, clip_probabilities
from mvcate.dgp import DgpConfig, generate
from mvcate.meta_learners import (
    SCENARIOS,
    EmptyStratumError,
    NuisanceSet,
    Scenario,
    estimate_nuisances,
    exact_nuisances,
    fit_all,
    fit_pseudo_learner,
    naive_x_learner,
    pseudo_outcome_dr,
    pseudo_outcome_learner,
    pseudo_outcome_m,
    pseudo_outcome_x,
    t_learner,
    uniform_gps,
)


class FixedOutcome:
    """Outcome model returning a fixed value per level, whatever x is."""

    strategy = "T"

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def predict(self, k, X):
        return np.full(len(np.asarray(X)), self.values[k])


def _fixed_gps(row):
    row = np.asarray(row, dtype=float)
    return lambda X: np.tile(row, (len(X), 1))


def _rows(T, Y, K=2):
    n = len(T)
    return ObservationalSample(np.zeros((n, 1)), T, Y, TreatmentLevels.grid(K))


class TestPseudoOutcomeExamples:
    def test_m(self):
        nuis = NuisanceSet(TreatmentLevels.grid(2), gps=_fixed_gps([0.25, 0.5, 0.25]))
        z = pseudo_outcome_m(_rows([1, 0, 2], [2.0, 1.0, 5.0]), nuis, 1)
        np.testing.assert_allclose(z, [4.0, -4.0, 0.0], rtol=1e-15)

    def test_dr(self):
        nuis = NuisanceSet(TreatmentLevels.grid(2), FixedOutcome([0.5, 1.5, 3.0]), _fixed_gps([0.25, 0.5, 0.25]))
        z = pseudo_outcome_dr(_rows([1, 0, 2, 1], [2.0, 0.5, 7.0, 1.5]), nuis, 1)
        # residual-free rows (and other levels) reduce to mu_k - mu_0
        np.testing.assert_allclose(z, [2.0, 1.0, 1.0, 1.0], rtol=1e-15)

    def test_x(self):
        nuis = NuisanceSet(TreatmentLevels.grid(2), FixedOutcome([0.5, 1.5, 3.0]))
        z = pseudo_outcome_x(_rows([1, 0, 2], [2.0, 1.0, 4.0]), nuis, 1)
        np.testing.assert_allclose(z, [2.0 - 0.5, 1.5 - 1.0, (1.5 - 4.0) + (3.0 - 0.5)], rtol=1e-15)

    @given(st.integers(1, 5), st.integers(0, 10_000))
    def test_finite_after_clipping(self, K, seed):
        rng = np.random.default_rng(seed)
        n = 30
        gps = rng.dirichlet(np.full(K + 1, 0.05), size=n)  # many near-zero entries
        sample = ObservationalSample(rng.normal(size=(n, 1)), rng.integers(0, K + 1, size=n),
                                     rng.normal(size=n) * 1e3, TreatmentLevels.grid(K))
        nuis = NuisanceSet(sample.levels, FixedOutcome(rng.normal(size=K + 1)), lambda X: gps)
        for build in (pseudo_outcome_m, pseudo_outcome_dr, pseudo_outcome_x):
            for k in range(1, K + 1):
                assert np.all(np.isfinite(build(sample, nuis, k)))


class TestConsistencyOracle:
    @pytest.mark.parametrize("model", ["linear", "hazard"])
    @pytest.mark.parametrize("design", ["rct", "preferential"])
    @pytest.mark.parametrize("build", [pseudo_outcome_m, pseudo_outcome_dr, pseudo_outcome_x])
    def test_exact_nuisances(self, model, design, build):
        K = 4
        cfg = DgpConfig(model=model, design=design, K=K, n=40, sigma=0.0, seed=1)
        sample, truth = generate(cfg)
        nuis = exact_nuisances(truth)
        for x in sample.covariates[:10]:
            x = x.reshape(1, -1)
            R = nuis.propensity(x)[0]
            Xs = np.tile(x, (K + 1, 1))
            Y = np.array([truth.mu(l, x)[0] for l in range(K + 1)])
            rows = ObservationalSample(Xs, np.arange(K + 1), Y, truth.levels)
            for k in range(1, K + 1):
                value = float(np.dot(R, build(rows, nuis, k)))
                assert abs(value - truth.tau(k, x)[0]) < 1e-10

    def _dr_gap(self, truth, nuis, x, k):
        K = truth.levels.K
        R = nuis.propensity(x)[0]
        Xs = np.tile(x, (K + 1, 1))
        Y = np.array([truth.mu(l, x)[0] for l in range(K + 1)])
        rows = ObservationalSample(Xs, np.arange(K + 1), Y, truth.levels)
        return float(np.dot(R, pseudo_outcome_dr(rows, nuis, k))) - truth.tau(k, x)[0]

    @given(st.integers(0, 10_000))
    def test_dr_exact_gps_any_mu(self, seed):
        rng = np.random.default_rng(seed)
        _, truth = generate(DgpConfig(design="preferential", K=3, n=8, seed=seed))
        wrong = FixedOutcome(rng.normal(size=4) * 5)
        nuis = NuisanceSet(truth.levels, wrong, truth.gps)
        for x in rng.uniform(size=(5, 1)):
            for k in (1, 2, 3):
                assert abs(self._dr_gap(truth, nuis, x.reshape(1, 1), k)) < 1e-10

    @given(st.integers(0, 10_000))
    def test_dr_exact_mu_any_gps(self, seed):
        rng = np.random.default_rng(seed)
        _, truth = generate(DgpConfig(model="hazard", design="preferential", K=3, n=8, seed=seed))
        row = clip_probabilities(rng.dirichlet(np.ones(4)), 1e-3)
        nuis = NuisanceSet(truth.levels, exact_nuisances(truth).outcome, _fixed_gps(row))
        for x in rng.normal(size=(5, 5)):
            for k in (1, 2, 3):
                assert abs(self._dr_gap(truth, nuis, x.reshape(1, -1), k)) < 1e-10

    def test_x_fails_with_misspecified_mu(self):
        # exact propensities, constant (wrong) outcome models
        _, truth = generate(DgpConfig(design="preferential", K=2, n=6))
        nuis = NuisanceSet(truth.levels, FixedOutcome([0.0, 0.0, 0.0]), truth.gps)
        x = np.array([[0.9]])
        R = nuis.propensity(x)[0]
        Y = np.array([truth.mu(l, x)[0] for l in range(3)])
        rows = ObservationalSample(np.tile(x, (3, 1)), np.arange(3), Y, truth.levels)
        gap = abs(float(np.dot(R, pseudo_outcome_x(rows, nuis, 1))) - truth.tau(1, x)[0])
        assert gap >= 0.1


@pytest.fixture(scope="module")
def noiseless_linear():
    return generate(DgpConfig(design="preferential", K=4, n=200, sigma=0.0, seed=2))


@pytest.fixture(scope="module")
def noisy_linear():
    return generate(DgpConfig(design="preferential", K=4, n=300, sigma=0.3, seed=4))


class TestNuisances:
    def test_t_strategy_recovers_surface(self, noiseless_linear):
        sample, _ = noiseless_linear
        nuis = estimate_nuisances(sample, "T", None, LinearBasisSpec(), fit_m=False)
        for k, t in enumerate(sample.levels.values):
            np.testing.assert_allclose(nuis.outcome.models[k].coef, [0.0, 1.0 + t], atol=1e-8)

    def test_s_strategy_constant(self):
        sample, _ = generate(DgpConfig(n=100, K=3, seed=1))
        const = ObservationalSample(sample.covariates, sample.treatment_idx, np.full(100, 3.25), sample.levels)
        nuis = estimate_nuisances(const, "S", None, GradientBoostedSpec(n_rounds=5), fit_m=False)
        for k in range(4):
            np.testing.assert_allclose(nuis.mu(k, sample.covariates), 3.25, atol=1e-9)

    def test_regt_uniform_equals_t(self, noisy_linear):
        sample, _ = noisy_linear
        t = estimate_nuisances(sample, "T", None, LinearBasisSpec(), fit_m=False)
        regt = estimate_nuisances(sample, "RegT", uniform_gps(sample.K), LinearBasisSpec(), fit_m=False)
        for k in range(sample.K + 1):
            np.testing.assert_allclose(regt.outcome.models[k].coef, t.outcome.models[k].coef, rtol=1e-12, atol=1e-12)

    def test_empty_stratum(self):
        sample = ObservationalSample(np.arange(4.0).reshape(-1, 1), [0, 0, 2, 2], np.ones(4), TreatmentLevels.grid(2))
        with pytest.raises(EmptyStratumError) as info:
            estimate_nuisances(sample, "T", None, LinearBasisSpec(), fit_m=False)
        assert info.value.level == 1

    def test_estimated_gps_is_fitted(self, noisy_linear):
        sample, _ = noisy_linear
        nuis = estimate_nuisances(sample, "T", MultinomialLogisticSpec(), LinearBasisSpec())
        P = nuis.propensity(sample.covariates)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        assert nuis.observed_mean(sample.covariates).shape == (sample.n,)


class TestLearners:
    def test_t_learner_exact(self, noiseless_linear):
        sample, truth = noiseless_linear
        est = t_learner(exact_nuisances(truth))
        np.testing.assert_allclose(est.predict(sample.covariates), truth.tau_matrix(sample.covariates), rtol=1e-15)

    def test_t_learner_example(self):
        _, truth = generate(DgpConfig(K=9, n=20))
        assert t_learner(exact_nuisances(truth)).predict_k(5, [[0.8]])[0] == pytest.approx(0.8 * 5 / 9, abs=1e-15)
        _, truth2 = generate(DgpConfig(K=2, n=20))
        assert t_learner(exact_nuisances(truth2)).predict_k(1, [[0.8]])[0] == pytest.approx(0.4, abs=1e-15)

    def test_t_learner_equal_surfaces(self):
        nuis = NuisanceSet(TreatmentLevels.grid(3), FixedOutcome([2.0, 2.0, 2.0, 2.0]))
        np.testing.assert_array_equal(t_learner(nuis).predict(np.zeros((3, 1))), 0.0)

    @pytest.mark.parametrize("c", [0.0, -1.75])
    def test_pseudo_learner_constant(self, noisy_linear, c):
        sample, _ = noisy_linear
        model = fit_pseudo_learner(sample, np.full(sample.n, c), GradientBoostedSpec(n_rounds=3))
        np.testing.assert_allclose(model.predict(sample.covariates), c, atol=1e-9)

    def test_pseudo_learner_rejects_nan(self, noisy_linear):
        sample, _ = noisy_linear
        with pytest.raises(ValueError):
            fit_pseudo_learner(sample, np.full(sample.n, np.nan), LinearBasisSpec())

    def test_dr_noiseless_exact_recovers(self, noiseless_linear):
        sample, truth = noiseless_linear
        est = pseudo_outcome_learner(sample, exact_nuisances(truth), "DR", LinearBasisSpec())
        np.testing.assert_allclose(est.predict(sample.covariates), truth.tau_matrix(sample.covariates), atol=1e-6)

    def test_naive_x_equals_t(self, noisy_linear):
        sample, truth = noisy_linear
        nuis = estimate_nuisances(sample, "T", truth.gps, LinearBasisSpec(), fit_m=False)
        nvx = naive_x_learner(sample, nuis, LinearBasisSpec())
        t = t_learner(nuis)
        grid = np.linspace(-1, 2, 301).reshape(-1, 1)
        assert np.abs(nvx.predict(grid) - t.predict(grid)).max() < 1e-8
        for k in range(1, sample.K + 1):
            np.testing.assert_allclose(nvx.per_k[k].coef, t.per_k[k].coef, atol=1e-8)

    def test_naive_x_weight_collapse(self, noisy_linear):
        sample, _ = noisy_linear
        K = sample.K
        row = np.r_[0.0, np.full(K, 1.0 / K)]
        nuis = estimate_nuisances(sample, "T", _fixed_gps(row), GradientBoostedSpec(n_rounds=5), fit_m=False)
        entry = naive_x_learner(sample, nuis, GradientBoostedSpec(n_rounds=5)).per_k[2]
        X = sample.covariates[:20]
        np.testing.assert_array_equal(entry.predict(X), entry.tau_treated.predict(X))

    def test_naive_x_empty_stratum(self):
        sample = ObservationalSample(np.arange(4.0).reshape(-1, 1), [1, 1, 2, 2], np.ones(4), TreatmentLevels.grid(2))
        nuis = NuisanceSet(sample.levels, FixedOutcome([0, 0, 0]), uniform_gps(2))
        with pytest.raises(EmptyStratumError):
            naive_x_learner(sample, nuis, LinearBasisSpec())


class TestFitAll:
    def test_empty_list(self, noisy_linear):
        sample, truth = noisy_linear
        assert fit_all(sample, "exact", LinearBasisSpec(), truth=truth, learners=[]) == {}

    def test_exact_learners(self, noisy_linear):
        sample, truth = noisy_linear
        fits = fit_all(sample, "exact", LinearBasisSpec(), truth=truth)
        assert set(fits) == {"M", "DR", "X", "RLin"}
        assert all(not est.flags for est in fits.values())
        assert fits["RLin"].diagnostics["identifiable"]

    def test_estimated_learners(self, noisy_linear):
        sample, truth = noisy_linear
        fits = fit_all(sample, "estimated", LinearBasisSpec(), truth=truth, gps_spec=MultinomialLogisticSpec())
        assert set(fits) == {"T", "RegT", "S", "NvX", "M", "DR-T", "DR-S", "X-T", "X-S", "RLin"}
        for est in fits.values():
            assert est.predict(sample.covariates).shape == (sample.n, sample.K)
            assert "wall_ms" in est.diagnostics

    def test_gps_misspecified_flags(self, noisy_linear):
        sample, truth = noisy_linear
        fits = fit_all(sample, "gps-misspecified", LinearBasisSpec(), truth=truth)
        assert set(fits) == {"M", "DR", "X", "RLin"}
        flagged = {t for t, est in fits.items() if "gps-misspecified" in est.flags}
        assert flagged == {"M", "DR", "RLin"}

    def test_mu_misspecified_flags(self, noisy_linear):
        sample, truth = noisy_linear
        fits = fit_all(sample, "mu-misspecified", LinearBasisSpec(), truth=truth, learners=["T", "M", "X-T"])
        assert fits["T"].flags == {"mu-misspecified"}
        assert fits["M"].flags == frozenset()
        # intercept-only outcome models give constant plug-in effects
        pred = fits["T"].predict(sample.covariates)
        assert np.abs(pred - pred[0]).max() < 1e-10

    def test_needs_truth(self, noisy_linear):
        sample, _ = noisy_linear
        with pytest.raises(ValueError, match="ground truth"):
            fit_all(sample, "exact", LinearBasisSpec())

    def test_needs_gps_spec(self, noisy_linear):
        sample, _ = noisy_linear
        with pytest.raises(ValueError, match="gps_spec"):
            fit_all(sample, "estimated", LinearBasisSpec(), learners=["M"])
        assert set(fit_all(sample, "estimated", LinearBasisSpec(), learners=["T", "S"])) == {"T", "S"}

    def test_unknown_scenario(self, noisy_linear):
        with pytest.raises(ValueError):
            fit_all(noisy_linear[0], "bogus", LinearBasisSpec())

    def test_custom_scenario(self, noisy_linear):
        sample, truth = noisy_linear
        sc = Scenario("mixed", gps="exact", mu="estimated", m="misspecified")
        fits = fit_all(sample, sc, LinearBasisSpec(), truth=truth, learners=["DR-T", "RLin"])
        assert set(fits) == {"DR-T", "RLin"}
        assert SCENARIOS["exact"].learners() == ("M", "DR", "X", "RLin")

    def test_deterministic(self, noisy_linear):
        sample, truth = noisy_linear
        a = fit_all(sample, "estimated", GradientBoostedSpec(n_rounds=5), gps_spec=MultinomialLogisticSpec(), seed=3)
        b = fit_all(sample, "estimated", GradientBoostedSpec(n_rounds=5), gps_spec=MultinomialLogisticSpec(), seed=3)
        for t in a:
            assert np.array_equal(a[t].predict(sample.covariates), b[t].predict(sample.covariates))
