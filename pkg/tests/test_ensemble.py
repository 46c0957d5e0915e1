import math

import numpy as np
import pandas as pd
import pytest

from nngp.exceptions import ConfigError, DimensionMismatchError
from nngp.kernel import GaussianIID, gram
from nngp.simulation import WidthConvergenceReport, ensemble_stats, width_convergence_report

PROBES = np.array([[1.0, 0.0], [0.3, -0.8], [-1.2, 0.5]])


@pytest.fixture
def identity_spec(spec_factory):
    return spec_factory("identity", depth=1, d_in=2, pi=GaussianIID(var_w=1.0, var_b=0.5), output={"var_w": 1.5})


def summary_report(rows, n_ensembles=1000):
    summary = pd.DataFrame(rows)
    return WidthConvergenceReport(list(summary["width"]), n_ensembles, np.zeros(1), np.zeros((1, 1)), [],
                                  pd.DataFrame(), summary)


def summary_row(width, **overrides):
    row = {"width": width, "max_abs_dev": 0.01, "max_abs_z": 1.0, "max_cov_stderr": 0.002, "max_abs_mean_z": 1.0,
           "max_abs_skew": 0.0, "max_abs_kurtosis": 0.05, "cross_output_corr": 0.0}
    row.update(overrides)
    return row


def test_identity_ensemble_matches_the_kernel(identity_spec):
    report = width_convergence_report(identity_spec, [4, 64], PROBES, n_ensembles=1000, seed=1)
    verdict = report.evaluate()
    assert verdict.passed, verdict.checks
    _, K = gram(identity_spec, PROBES)
    np.testing.assert_array_equal(report.kernel, K)
    assert len(report.table) == 2 * 6
    assert list(report.summary["width"]) == [4, 64]


def test_statistics_do_not_depend_on_worker_count(identity_spec):
    a = ensemble_stats(identity_spec, [8], 2, PROBES, 200, seed=5, n_jobs=1)
    b = ensemble_stats(identity_spec, [8], 2, PROBES, 200, seed=5, n_jobs=2)
    np.testing.assert_array_equal(a.emp_cov, b.emp_cov)
    np.testing.assert_array_equal(a.emp_mean, b.emp_mean)
    assert a.cross_output_corr == b.cross_output_corr


def test_reports_are_reproducible(identity_spec):
    a = width_convergence_report(identity_spec, [4, 8], PROBES[:2], n_ensembles=100, seed=9)
    b = width_convergence_report(identity_spec, [4, 8], PROBES[:2], n_ensembles=100, seed=9)
    pd.testing.assert_frame_equal(a.table, b.table)
    pd.testing.assert_frame_equal(a.summary, b.summary)


def test_ensemble_moments_are_consistent(identity_spec):
    st = ensemble_stats(identity_spec, [16], 1, PROBES, 300, seed=2)
    assert st.emp_cov.shape == (3, 3)
    np.testing.assert_array_equal(st.emp_cov, st.emp_cov.T)
    assert np.all(st.cov_stderr >= 0)
    assert math.isnan(st.cross_output_corr)


def test_single_width_leaves_a_notice(identity_spec):
    report = width_convergence_report(identity_spec, [16], PROBES[:1], n_ensembles=200, seed=0)
    verdict = report.evaluate()
    assert any("single width" in n for n in verdict.notices)


def test_input_checks(identity_spec):
    with pytest.raises(ConfigError):
        width_convergence_report(identity_spec, [8, 4], PROBES, n_ensembles=10, seed=0)
    with pytest.raises(ConfigError):
        width_convergence_report(identity_spec, [], PROBES, n_ensembles=10, seed=0)
    with pytest.raises(ConfigError):
        ensemble_stats(identity_spec, [4], 1, PROBES, 1, seed=0)
    with pytest.raises(DimensionMismatchError):
        ensemble_stats(identity_spec, [4], 1, np.ones((2, 3)), 10, seed=0)


def test_verdict_fails_on_a_large_z_score():
    verdict = summary_report([summary_row(16), summary_row(256, max_abs_z=9.0)]).evaluate()
    assert not verdict.passed
    assert verdict.label == "FAIL"


def test_verdict_ordering_tolerates_noise_level_inversions():
    # Limit is 0.001 + 5 * 0.002.
    quiet = summary_report([summary_row(16, max_abs_dev=0.001), summary_row(256, max_abs_dev=0.01)]).evaluate()
    assert quiet.passed
    assert any(c.startswith("extreme-width ordering") and c.endswith("ok") for c in quiet.checks)
    assert not any("ordering" in n for n in quiet.notices)

    inverted = summary_report([summary_row(16, max_abs_dev=0.001), summary_row(256, max_abs_dev=0.02)]).evaluate()
    assert not inverted.passed
    assert any(c.startswith("extreme-width ordering") and c.endswith("FAIL") for c in inverted.checks)


def test_verdict_ordering_is_checked_when_the_small_width_is_within_the_band():
    rows = [summary_row(16, max_abs_z=2.0, max_abs_dev=0.004), summary_row(256, max_abs_dev=0.03, max_cov_stderr=0.004)]
    verdict = summary_report(rows).evaluate()
    assert not verdict.passed


def test_verdict_checks_kurtosis_trend_and_correlation():
    verdict = summary_report([summary_row(16), summary_row(256, max_abs_kurtosis=0.5)]).evaluate()
    assert not verdict.passed
    verdict = summary_report([summary_row(16), summary_row(256, cross_output_corr=0.5)]).evaluate()
    assert not verdict.passed


def test_undefined_checks_become_notices():
    verdict = summary_report([summary_row(16), summary_row(256, cross_output_corr=math.nan)]).evaluate()
    assert verdict.passed
    assert any("cross-output" in n for n in verdict.notices)


@pytest.mark.slow
def test_relu_network_converges_to_its_kernel(spec_factory):
    spec = spec_factory("relu", depth=1, d_in=2, pi=GaussianIID(var_w=1.0, var_b=0.3), output={"var_w": 2.0})
    report = width_convergence_report(spec, [16, 256, 4096], PROBES, n_ensembles=4000, seed=2024, n_jobs=2)
    verdict = report.evaluate()
    assert verdict.passed, verdict.checks
