"""Acceptance gate: every criterion at its stated tolerance, one
pass/fail line printed per criterion (run pytest -s to see them live)."""

import pytest

from svflow.verification import DEFAULT_SEED, RUNTIME_BUDGETS, run_all


@pytest.fixture(scope="module")
def suite():
    results, bundle = run_all(seed=DEFAULT_SEED)
    return {r.key: r for r in results}, bundle


def _check(suite, key):
    results, _ = suite
    r = results[key]
    print(f"{r.status} {r.key}: {r.detail}")
    budget = RUNTIME_BUDGETS.get(key)
    if budget is not None:
        assert r.runtime_s < budget, f"{key} took {r.runtime_s:.1f}s (budget {budget}s)"
    assert r.passed, f"{key} failed: {r.detail}"


def test_c01_flow_factorization(suite):
    _check(suite, "c01_flow_factorization")


def test_c02_key_lemma(suite):
    _check(suite, "c02_key_lemma")


def test_c03_virasoro_bracket(suite):
    _check(suite, "c03_virasoro_bracket")


def test_c04_primary_transform(suite):
    _check(suite, "c04_primary_transform")


def test_c05_scale_form(suite):
    _check(suite, "c05_scale_form")


def test_c06_nr_limit(suite):
    _check(suite, "c06_nr_limit")


def test_c07_barut_identity(suite):
    _check(suite, "c07_barut_identity")


def test_c08_curvature(suite):
    _check(suite, "c08_curvature")


def test_c09_frame(suite):
    _check(suite, "c09_frame")


def test_c10_correlator(suite):
    _check(suite, "c10_correlator")


def test_c11_determinism(suite):
    _check(suite, "c11_determinism")


def test_reports_cover_every_criterion(suite):
    results, bundle = suite
    for key in results:
        assert f"{key}.csv" in bundle
    assert "summary.csv" in bundle
    summary = bundle["summary.csv"].decode()
    for key in results:
        assert key in summary
