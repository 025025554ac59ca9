import io
import math

import pytest

from qfields.params import FieldParams, classify
from qfields.simulate import Ensemble, SamplerConfig, make_sampler, sample_ensemble
from qfields.verify import (build_report, empirical_corr, load_report,
                            martingale_residuals, n_failures, report_json,
                            standard_suite, symmetry_checks, weak_form_residuals)

GAUSS_POINT = FieldParams(0.5, 0.16, 0.32, 0.6, 0.0)


@pytest.fixture(scope="module")
def gauss_ensemble():
    c = classify(GAUSS_POINT)
    s = make_sampler(c, SamplerConfig(rho=0.5))
    return sample_ensemble(s, 100, 2000, 42)


@pytest.fixture(scope="module")
def two_point_ensemble():
    rho = 0.5
    A = rho * rho / (1.0 + rho ** 4)
    p = FieldParams(rho, A, 0.0, 1.0 - 2.0 * A, 0.0)
    s = make_sampler(classify(p), SamplerConfig(rho=rho))
    return sample_ensemble(s, 100, 2000, 43)


class TestEmpiricalCorr:
    def test_all_lags_pass(self, gauss_ensemble):
        entries = empirical_corr(gauss_ensemble, 0.5, k_max=5)
        assert len(entries) == 5
        assert all(e.passed for e in entries)
        assert [e.test_id for e in entries] == [f"corr_k{k}" for k in range(1, 6)]

    def test_lag_zero_not_gated(self, gauss_ensemble):
        ids = [e.test_id for e in empirical_corr(gauss_ensemble, 0.5)]
        assert "corr_k0" not in ids

    def test_k_max_precondition(self, gauss_ensemble):
        with pytest.raises(ValueError):
            empirical_corr(gauss_ensemble, 0.5, k_max=gauss_ensemble.n_steps // 10)

    def test_wrong_rho_fails(self, gauss_ensemble):
        entries = empirical_corr(gauss_ensemble, 0.8, k_max=2)
        assert not entries[0].passed


class TestWeakForm:
    def test_gaussian_point_passes(self, gauss_ensemble):
        entries = weak_form_residuals(gauss_ensemble, GAUSS_POINT, degree=4)
        assert len(entries) == 30  # 15 monomials x 2 identities
        assert all(e.passed for e in entries)

    def test_corrupted_a_fails_on_quadratic(self, gauss_ensemble):
        corrupted = FieldParams(0.5, 0.2, 0.32, 0.6, 0.0)
        entries = weak_form_residuals(gauss_ensemble, corrupted, degree=4)
        by_id = {e.test_id: e for e in entries}
        assert not by_id["weak_quad_x2y0"].passed

    def test_degree_cap(self, gauss_ensemble):
        with pytest.raises(ValueError):
            weak_form_residuals(gauss_ensemble, GAUSS_POINT, degree=5)

    def test_scaled_pointwise_identity_degenerate_pass(self):
        # A=1/2, B=D=C=0: the quadratic identity holds pointwise, so the
        # residual entries are exactly zero with zero standard error
        from qfields.measure import RadialLaw
        p = FieldParams(0.5, 0.5, 0.0, 0.0, 0.0)
        radial = RadialLaw(values=(math.sqrt(2.0), 0.0), probs=(0.5, 0.5))
        s = make_sampler(classify(p), SamplerConfig(rho=0.5, radial=radial))
        e = sample_ensemble(s, 50, 400, 7)
        entries = weak_form_residuals(e, p, degree=2)
        quad = [x for x in entries if x.test_id.startswith("weak_quad")]
        assert all(x.estimate == 0.0 and x.stderr == 0.0 and x.passed for x in quad)


class TestMartingale:
    def test_gaussian_point_passes(self, gauss_ensemble):
        entries = martingale_residuals(gauss_ensemble, 0.5, 1.0, n_max=4, m_max=4)
        assert len(entries) == 20
        assert all(e.passed for e in entries)

    def test_wrong_rho_fails_n2_m2(self, gauss_ensemble):
        entries = martingale_residuals(gauss_ensemble, 0.55, 1.0, n_max=2, m_max=2)
        by_id = {e.test_id: e for e in entries}
        assert not by_id["mart_n2_m2"].passed

    def test_two_point_degenerate_rows_pass_exactly(self, two_point_ensemble):
        entries = martingale_residuals(two_point_ensemble, 0.5, -1.0, n_max=4, m_max=4)
        for e in entries:
            n = int(e.test_id.split("_")[1][1:])
            m = int(e.test_id.split("_")[2][1:])
            if n >= 2 or m >= 2:
                assert e.estimate == 0.0 and e.stderr == 0.0
            assert e.passed

    def test_degree_cap(self, gauss_ensemble):
        with pytest.raises(ValueError):
            martingale_residuals(gauss_ensemble, 0.5, 1.0, n_max=9)


class TestSymmetry:
    def test_passes(self, gauss_ensemble):
        entries = symmetry_checks(gauss_ensemble)
        assert [e.test_id for e in entries] == ["sym_mean", "sym_third"]
        assert all(e.passed for e in entries)

    def test_shifted_ensemble_fails_mean(self, gauss_ensemble):
        shifted = Ensemble(master_seed=gauss_ensemble.master_seed,
                           values=gauss_ensemble.values + 0.1)
        entries = symmetry_checks(shifted)
        assert not entries[0].passed

    def test_two_point_third_equals_first(self, two_point_ensemble):
        entries = symmetry_checks(two_point_ensemble)
        assert entries[0].estimate == pytest.approx(entries[1].estimate, abs=1e-15)


class TestStandardSuite:
    def test_gaussian_composition(self, gauss_ensemble):
        entries = standard_suite(gauss_ensemble, GAUSS_POINT, classify(GAUSS_POINT))
        assert len(entries) == 5 + 30 + 2 + 20
        assert all(e.passed for e in entries)

    def test_scaled_only_linear_martingale_rows(self):
        from qfields.measure import RadialLaw
        p = FieldParams(0.5, 0.5, 0.0, 0.0, 0.0)
        radial = RadialLaw(values=(math.sqrt(2.0), 0.0), probs=(0.5, 0.5))
        c = classify(p)
        s = make_sampler(c, SamplerConfig(rho=0.5, radial=radial))
        e = sample_ensemble(s, 60, 500, 3)
        entries = standard_suite(e, p, c)
        mart_ids = [x.test_id for x in entries if x.test_id.startswith("mart")]
        assert mart_ids == [f"mart_n1_m{m}" for m in range(5)]
        assert all(x.passed for x in entries)


class TestReport:
    def test_schema_and_counts(self, gauss_ensemble):
        entries = standard_suite(gauss_ensemble, GAUSS_POINT, classify(GAUSS_POINT))
        meta = {"seed": 42, "n_chains": gauss_ensemble.n_chains,
                "n_steps": gauss_ensemble.n_steps, "params": {"rho": 0.5}}
        rep = build_report(entries, meta)
        assert set(rep) == {"meta", "tests", "summary"}
        assert set(rep["tests"][0]) == {"id", "statistic", "estimate", "stderr", "k", "pass"}
        assert rep["summary"]["n_fail"] == 0
        assert n_failures(rep) == 0

    def test_corrupted_report_lists_ids(self, gauss_ensemble):
        corrupted = FieldParams(0.5, 0.2, 0.32, 0.6, 0.0)
        entries = weak_form_residuals(gauss_ensemble, corrupted)
        rep = build_report(entries, {})
        assert rep["summary"]["n_fail"] >= 1
        assert "weak_quad_x2y0" in rep["summary"]["failed_ids"]

    def test_empty_entries_valid(self):
        rep = build_report([], {"seed": 1})
        assert rep["tests"] == []
        assert rep["summary"]["n_fail"] == 0

    def test_json_round_trip(self, gauss_ensemble):
        entries = symmetry_checks(gauss_ensemble)
        rep = build_report(entries, {"seed": 7})
        text = report_json(rep)
        assert load_report(text) == rep
        assert load_report(io.StringIO(text)) == rep

    def test_json_deterministic(self, gauss_ensemble):
        entries = symmetry_checks(gauss_ensemble)
        a = report_json(build_report(entries, {"seed": 7}))
        b = report_json(build_report(symmetry_checks(gauss_ensemble), {"seed": 7}))
        assert a == b


class TestGateCalibration:
    def test_familywise_false_failure_rate(self):
        # 100 independent seeds of the Gaussian case, 30 weak-form tests each:
        # families with any false failure at 4 sigma should stay below 5%
        c = classify(GAUSS_POINT)
        s = make_sampler(c, SamplerConfig(rho=0.5))
        bad = 0
        for seed in range(100):
            e = sample_ensemble(s, 40, 400, seed)
            entries = weak_form_residuals(e, GAUSS_POINT, degree=4)
            if any(not x.passed for x in entries):
                bad += 1
        assert bad <= 5
