import math

import numpy as np
import pytest

from svflow.fieldcalc import DomainError, Point, scalar_field, vector_field
from svflow.flowexp import (
    BlowupError,
    SeriesOrderError,
    StepLimitError,
    Tolerance,
    accumulate_phase,
    apply_exponential,
    displacement_series,
    flow_jacobian,
    flow_with_phase,
    integrate_flow,
    pushforward_residual,
    series_oracle,
    series_terms,
)

T1 = ("t",)
TR = ("t", "r")
TIGHT = Tolerance(absolute=1e-12, relative=1e-12)


def fit_slope(rhos, diffs, floor=0.0):
    rhos = np.asarray(rhos)
    diffs = np.asarray(diffs)
    mask = diffs > floor
    assert mask.sum() >= 3, "not enough points above the noise floor"
    return np.polyfit(np.log10(rhos[mask]), np.log10(diffs[mask]), 1)[0]


# ------------------------------------------------------------ integrate_flow


def test_translation_flow():
    B = vector_field(["1"], T1)
    res = integrate_flow(B, Point(T1, (1.0,)), 0.5)
    assert res.endpoint.coords[0] == pytest.approx(1.5, abs=1e-12)
    assert res.phase == 0.0


def test_exponential_flow_closed_form():
    # dt/drho = t  =>  t' = t e^rho; oracle: 2e
    B = vector_field(["t"], T1)
    res = integrate_flow(B, Point(T1, (2.0,)), 1.0, TIGHT)
    assert res.endpoint.coords[0] == pytest.approx(2.0 * math.e, rel=1e-11)
    assert res.estimated_error <= TIGHT.absolute + TIGHT.relative * 2.0 * math.e


def test_blowup_detected():
    # dt/drho = t^2 from t=1 diverges at rho=1 (solution 1/(1-rho))
    B = vector_field(["t^2"], T1)
    with pytest.raises(BlowupError):
        integrate_flow(B, Point(T1, (1.0,)), 2.0)


def test_step_limit_error():
    B = vector_field(["t"], T1)
    tol = Tolerance(absolute=1e-16, relative=1e-16, max_steps=32)
    with pytest.raises(StepLimitError):
        integrate_flow(B, Point(T1, (1.0,)), 1.0, tol)


def test_samples_bracket_the_flow():
    B = vector_field(["t"], T1)
    x = Point(T1, (1.0,))
    res = integrate_flow(B, x, 0.7)
    s0, p0 = res.samples[0]
    s1, p1 = res.samples[-1]
    assert s0 == 0.0 and p0 == x
    assert s1 == pytest.approx(0.7, rel=1e-15)
    assert p1 == res.endpoint


def test_chart_mismatch_rejected():
    B = vector_field(["t"], T1)
    with pytest.raises(ValueError):
        integrate_flow(B, Point(TR, (1.0, 2.0)), 0.1)


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerance(absolute=-1e-10)
    with pytest.raises(ValueError):
        Tolerance(max_steps=0)


# ------------------------------------------------------------ flow_jacobian


def test_jacobian_translation_is_identity():
    B = vector_field(["1", "1"], TR)
    J = flow_jacobian(B, Point(TR, (0.3, -0.2)), 2.0)
    assert np.allclose(J, np.eye(2), atol=1e-12)


def test_jacobian_exponential_flow():
    B = vector_field(["t"], T1)
    J = flow_jacobian(B, Point(T1, (1.7,)), 1.0, TIGHT)
    assert J.shape == (1, 1)
    assert J[0, 0] == pytest.approx(math.e, rel=1e-11)


def test_jacobian_at_zero_rho():
    B = vector_field(["t*r", "r^2 - t"], TR)
    J = flow_jacobian(B, Point(TR, (0.4, 0.8)), 0.0)
    assert np.array_equal(J, np.eye(2))


# ------------------------------------------------------------ phase


def test_phase_zero_charge():
    B = vector_field(["t"], T1)
    C = scalar_field("0", T1)
    assert accumulate_phase(B, C, Point(T1, (1.0,)), 1.0) == 0.0


def test_phase_constant_along_translation():
    B = vector_field(["1"], T1)
    C = scalar_field("3.25", T1)
    T = accumulate_phase(B, C, Point(T1, (0.2,)), 0.8)
    assert T == pytest.approx(3.25 * 0.8, rel=1e-12)


def test_phase_closed_form_path_integral():
    # B = t d/dt, C = 1/t, from t=1: T = int_0^1 e^{-s} ds = 1 - 1/e
    B = vector_field(["t"], T1)
    C = scalar_field("1/t", T1)
    T = accumulate_phase(B, C, Point(T1, (1.0,)), 1.0, TIGHT)
    assert T == pytest.approx(1.0 - 1.0 / math.e, rel=1e-11)


# ------------------------------------------------------------ apply_exponential


def test_apply_exponential_identity_at_zero_rho():
    B = vector_field(["t + r", "r"], TR)
    C = scalar_field("t*r", TR)
    psi = scalar_field("sin(t) + r^2", TR)
    x = Point(TR, (0.3, 0.9))
    assert apply_exponential(B, C, psi, x, 0.0) == psi.eval_at(x)


def test_apply_exponential_translation_constant_charge():
    c0 = 1.3
    B = vector_field(["1"], T1)
    C = scalar_field(f"{c0}", T1)
    psi = scalar_field("t^2", T1)
    out = apply_exponential(B, C, psi, Point(T1, (1.0,)), 0.5, TIGHT)
    assert out == pytest.approx(math.exp(0.5 * c0) * 2.25, rel=1e-11)


def test_apply_exponential_agrees_with_series_at_small_rho():
    B = vector_field(["0.5*t + 0.2*r", "0.3*r"], TR)
    C = scalar_field("0.4*t", TR)
    psi = scalar_field("t^2 + r*t", TR)
    x = Point(TR, (0.8, 0.6))
    rho = 0.01
    a = apply_exponential(B, C, psi, x, rho, TIGHT)
    b = series_oracle(B, C, psi, x, rho, order=8)
    assert a == pytest.approx(b, abs=1e-12)


# ------------------------------------------------------------ series oracle


def test_series_order_zero_and_one_by_construction():
    B = vector_field(["t*r", "r"], TR)
    C = scalar_field("t + r", TR)
    psi = scalar_field("t^3 - r", TR)
    x = Point(TR, (1.1, 0.7))
    rho = 0.37
    vals = series_terms(B, C, psi, x, 1)
    assert series_oracle(B, C, psi, x, rho, 0) == vals[0]
    assert series_oracle(B, C, psi, x, rho, 1) == pytest.approx(
        vals[0] + rho * vals[1], rel=1e-15
    )
    # first application, assembled by hand: B.d psi + C psi at x
    t, r = x.coords
    manual = (t * r) * (3 * t**2) + r * (-1.0) + (t + r) * (t**3 - r)
    assert vals[1] == pytest.approx(manual, rel=1e-14)


def test_series_closed_form_exponential():
    # B = t d/dt, psi = t at t=1: partial sums of e^rho
    B = vector_field(["t"], T1)
    psi = scalar_field("t", T1)
    x = Point(T1, (1.0,))
    rho = 0.7
    for order in (0, 2, 5, 8):
        expected = sum(rho**n / math.factorial(n) for n in range(order + 1))
        got = series_oracle(B, None, psi, x, rho, order)
        assert got == pytest.approx(expected, rel=1e-14)


def test_series_order_cap():
    B = vector_field(["t"], T1)
    psi = scalar_field("t", T1)
    with pytest.raises(SeriesOrderError):
        series_oracle(B, None, psi, Point(T1, (1.0,)), 0.1, 9)
    # and the cap is configurable
    series_oracle(B, None, psi, Point(T1, (1.0,)), 0.1, 9, max_order=12)


# ------------------------------------------------------------ displacement


def test_displacement_translation_exact():
    B = vector_field(["1"], T1)
    for order in (1, 3, 6):
        A = displacement_series(B, Point(T1, (0.4,)), 0.9, order)
        assert A == (0.9,)


def test_displacement_closed_form_series():
    B = vector_field(["t"], T1)
    rho = 0.45
    for order in (1, 4, 7):
        A = displacement_series(B, Point(T1, (1.0,)), rho, order, max_order=8)
        expected = sum(rho**n / math.factorial(n) for n in range(1, order + 1))
        assert A[0] == pytest.approx(expected, rel=1e-14)


def test_displacement_convergence_order():
    B = vector_field(["0.6*t + 0.3*t^2"], T1)
    x = Point(T1, (0.9,))
    order = 3
    rhos = np.geomspace(1e-3, 1e-1, 7)
    diffs = []
    for rho in rhos:
        end = integrate_flow(B, x, float(rho), TIGHT).endpoint.coords[0]
        A = displacement_series(B, x, float(rho), order)
        diffs.append(abs(A[0] - (end - x.coords[0])))
    slope = fit_slope(rhos, diffs, floor=1e-15)
    assert slope == pytest.approx(order + 1, abs=0.25)


# ------------------------------------------------------------ pushforward


def test_pushforward_constant_field_zero():
    B = vector_field(["1", "1"], TR)
    assert pushforward_residual(B, Point(TR, (0.1, 0.2)), 1.3) == 0.0


def test_pushforward_linear_field_small():
    B = vector_field(["t", "r"], TR)
    res = pushforward_residual(B, Point(TR, (0.83, -0.41)), 0.7)
    assert res <= 1e-8


def test_pushforward_zero_rho_exact():
    B = vector_field(["t^2*r", "sin(t)"], TR)
    assert pushforward_residual(B, Point(TR, (0.4, 0.9)), 0.0) == 0.0


def test_pushforward_polynomial_suite():
    fields = [
        vector_field(["r", "-t"], TR),          # rotation
        vector_field(["0.5*t + 0.1*r", "0.3*r"], TR),
        vector_field(["0.2*t^2 + 0.1", "0.4*t*r"], TR),
        vector_field(["u*v", "0.3*w", "0.2*u"], ("u", "v", "w")),
    ]
    rng = np.random.default_rng(5)
    for B in fields:
        x = Point(B.chart, tuple(rng.uniform(0.2, 0.8, len(B.chart))))
        res = pushforward_residual(B, x, 0.5)
        assert res <= 10 * (1e-10 + 1e-9)


# ------------------------------------------------------------ invariants


def test_semigroup_property():
    B = vector_field(["0.4*t + 0.2*r^2", "0.3*r - 0.1*t"], TR)
    x = Point(TR, (0.5, 0.4))
    r1, r2 = 0.3, 0.45
    direct = integrate_flow(B, x, r1 + r2, TIGHT).endpoint
    mid = integrate_flow(B, x, r1, TIGHT).endpoint
    two_leg = integrate_flow(B, mid, r2, TIGHT).endpoint
    assert np.allclose(direct.coords, two_leg.coords, atol=5e-11)


def test_phase_additivity():
    B = vector_field(["0.4*t + 0.2*r^2", "0.3*r - 0.1*t"], TR)
    C = scalar_field("0.5*t*r + 0.2", TR)
    x = Point(TR, (0.5, 0.4))
    r1, r2 = 0.3, 0.45
    whole = flow_with_phase(B, C, x, r1 + r2, TIGHT)
    leg1 = flow_with_phase(B, C, x, r1, TIGHT)
    leg2 = flow_with_phase(B, C, leg1.endpoint, r2, TIGHT)
    assert whole.phase == pytest.approx(leg1.phase + leg2.phase, abs=5e-11)


def test_endpoint_bitwise_independent_of_charge():
    B = vector_field(["0.4*t + 0.2*r^2", "0.3*r - 0.1*t"], TR)
    C = scalar_field("17.5*t*r - 3", TR)
    x = Point(TR, (0.5, 0.4))
    bare = flow_with_phase(B, None, x, 0.8, n_steps=64)
    charged = flow_with_phase(B, C, x, 0.8, n_steps=64)
    assert bare.endpoint.coords == charged.endpoint.coords  # bitwise
    assert charged.phase != 0.0


def test_proposition_convergence_order():
    # |apply_exponential - series(order k)| ~ rho^{k+1}
    B = vector_field(["0.7*t + 0.3*r", "0.4*r"], TR)
    C = scalar_field("0.5*t", TR)
    psi = scalar_field("t^2*r + r", TR)
    x = Point(TR, (0.9, 0.8))
    order = 2
    rhos = np.geomspace(1e-3, 1e-1, 9)
    diffs = []
    for rho in rhos:
        a = apply_exponential(B, C, psi, x, float(rho), TIGHT)
        b = series_oracle(B, C, psi, x, float(rho), order)
        diffs.append(abs(a - b))
    slope = fit_slope(rhos, diffs, floor=1e-14)
    assert slope == pytest.approx(order + 1, abs=0.1)


def test_domain_error_propagates_from_field():
    B = vector_field(["log(t)"], T1)
    with pytest.raises(DomainError):
        integrate_flow(B, Point(T1, (0.5,)), 2.0)  # flow reaches t <= 0? no: log(t)<0 pulls t down


def test_series_expression_size_limit():
    from svflow.flowexp import ExpressionSizeError

    B = vector_field(["0.5*t + 0.2*r", "0.3*r"], TR)
    C = scalar_field("0.4*t", TR)
    psi = scalar_field("exp(-r^2/(1 + t^2))", TR)
    with pytest.raises(ExpressionSizeError):
        series_oracle(B, C, psi, Point(TR, (0.5, 0.5)), 0.1, 8, max_nodes=2000)
