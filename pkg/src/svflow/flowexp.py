"""Flows of vector fields and the factorized operator exponential.

The central statement being verified: applying exp(rho (B + C)) to a
smooth test function psi equals exp(T(x, rho)) * psi(x'(x, rho)), where
x' is the flow of B alone and T is the integral of C along that flow.
This module computes the flow, its Jacobian (variational system), the
phase T, the factorized exponential, and two independent series oracles,
plus the pushforward residual of the flow's defining lemma.

Integration is classic fixed-step RK4 with a step-doubling Richardson
error estimate: deterministic and reproducible.  The phase and Jacobian
ride along as extra state variables of the same integrator, so flow and
quadrature share identical nodes.  The x-update never reads the extra
state, which keeps the flow endpoint bitwise independent of C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fieldcalc as fc
from .fieldcalc import (
    DomainError,
    Expression,
    Point,
    ScalarField,
    VectorField,
    compile_expression,
    evaluate,
)

DEFAULT_BLOWUP_BOUND = 1e12
DEFAULT_MAX_ORDER = 8
DEFAULT_MAX_NODES = 2_000_000


class FlowError(Exception):
    pass


class StepLimitError(FlowError):
    """Step doubling hit the max-steps cap before reaching the tolerance."""


class BlowupError(FlowError):
    """A coordinate left the configured bound (or overflowed) during the flow."""


class SeriesOrderError(FlowError):
    """Requested expansion order above the configured maximum."""


class ExpressionSizeError(FlowError):
    """Symbolic expansion exceeded the node budget."""


@dataclass(frozen=True)
class Tolerance:
    absolute: float = 1e-10
    relative: float = 1e-9
    max_steps: int = 10**6

    def __post_init__(self):
        if self.absolute <= 0 or self.relative <= 0 or self.max_steps <= 0:
            raise ValueError("tolerance fields must be positive")


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True)
class FlowResult:
    endpoint: Point
    phase: float
    samples: tuple[tuple[float, Point], ...]
    steps: int
    estimated_error: float

    def sample_points(self) -> list[Point]:
        return [p for _, p in self.samples]


def _require_same_chart(*objs):
    charts = {o.chart for o in objs if o is not None}
    if len(charts) > 1:
        raise ValueError(f"chart mismatch: {sorted(charts)}")


def _compile_components(exprs, chart):
    fns = [compile_expression(e) for e in exprs]
    names = list(chart)

    def at(y: np.ndarray) -> list[float]:
        env = dict(zip(names, y))
        return [f(env) for f in fns]

    return at


# --------------------------------------------------------------------------
# Core integrator


def _rk4_run(deriv, y0, rho, n, blowup_bound, n_coords, record=False):
    """n fixed RK4 steps from 0 to rho; optional subsampled trajectory."""
    h = rho / n
    y = np.array(y0, dtype=float)
    stride = max(1, n // 1024)
    samples = [(0.0, y.copy())] if record else None
    for k in range(n):
        try:
            k1 = np.asarray(deriv(y))
            k2 = np.asarray(deriv(y + (0.5 * h) * k1))
            k3 = np.asarray(deriv(y + (0.5 * h) * k2))
            k4 = np.asarray(deriv(y + h * k3))
        except DomainError as err:
            if err.kind == "overflow":
                raise BlowupError(f"field evaluation overflowed: {err}") from err
            raise
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y[:n_coords])) or np.max(
            np.abs(y[:n_coords])
        ) > blowup_bound:
            raise BlowupError(
                f"coordinate magnitude exceeded {blowup_bound:g} at step {k + 1}/{n}"
            )
        if record and ((k + 1) % stride == 0 or k + 1 == n):
            samples.append(((k + 1) * h, y.copy()))
    return y, samples


def _integrate(deriv, y0, rho, tol, blowup_bound, n_coords, n_steps=None,
               record=False):
    """Step-doubling driver.  Returns (state, samples, steps, est_error)."""
    y0 = np.array(y0, dtype=float)
    if rho == 0.0:
        return y0, [(0.0, y0.copy())], 0, 0.0
    if n_steps is not None:
        if n_steps < 2 or n_steps % 2 != 0:
            raise ValueError("n_steps must be a positive even integer")
        coarse, _ = _rk4_run(deriv, y0, rho, n_steps // 2, blowup_bound, n_coords)
        fine, samples = _rk4_run(
            deriv, y0, rho, n_steps, blowup_bound, n_coords, record
        )
        est = float(np.max(np.abs(fine - coarse))) / 15.0
        return fine, samples, n_steps, est
    n = 8
    y_coarse, _ = _rk4_run(deriv, y0, rho, n, blowup_bound, n_coords)
    while True:
        if 2 * n > tol.max_steps:
            raise StepLimitError(
                f"error estimate above tolerance at {n} steps (max {tol.max_steps})"
            )
        y_fine, samples = _rk4_run(
            deriv, y0, rho, 2 * n, blowup_bound, n_coords, record
        )
        err = np.abs(y_fine - y_coarse) / 15.0
        scale = tol.absolute + tol.relative * np.abs(y_fine)
        if np.all(err <= scale):
            return y_fine, samples, 2 * n, float(np.max(err))
        n *= 2
        y_coarse = y_fine


def _field_deriv(B: VectorField, C: ScalarField | None = None,
                 with_jacobian=False):
    """Derivative of the stacked state [x, T?, J?] for the augmented system."""
    d = B.dimension
    b_at = _compile_components(B.components, B.chart)
    c_at = None
    if C is not None:
        c_at = compile_expression(C.expression)
    jac_at = None
    if with_jacobian:
        grads = [
            fc.differentiate(comp, name)
            for comp in B.components
            for name in B.chart
        ]
        jac_rows = _compile_components(grads, B.chart)
    names = list(B.chart)

    def deriv(y: np.ndarray) -> np.ndarray:
        x = y[:d]
        out = list(b_at(x))
        if c_at is not None:
            env = dict(zip(names, x))
            out.append(c_at(env))
        if with_jacobian:
            A = np.array(jac_rows(x)).reshape(d, d)
            J = y[len(out):].reshape(d, d)
            out.extend((A @ J).ravel())
        return np.array(out)

    return deriv


# --------------------------------------------------------------------------
# Public operations


def integrate_flow(
    B: VectorField,
    x: Point,
    rho: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
    n_steps: int | None = None,
) -> FlowResult:
    """Solve dx'/drho = B(x') from x over [0, rho].

    The endpoint meets the step-doubling error estimate against tol, the
    recorded samples run from (0, x) to (rho, endpoint), and the phase
    field is zero because no scalar charge is involved here.
    """
    _require_same_chart(B)
    if x.chart != B.chart:
        raise ValueError(f"point chart {x.chart} does not match field {B.chart}")
    if not math.isfinite(rho):
        raise ValueError("rho must be finite")
    deriv = _field_deriv(B)
    y, samples, steps, est = _integrate(
        deriv, np.array(x.coords), rho, tol, blowup_bound, B.dimension,
        n_steps=n_steps, record=True,
    )
    pts = tuple((s, Point(B.chart, tuple(v))) for s, v in samples)
    return FlowResult(
        endpoint=Point(B.chart, tuple(y)),
        phase=0.0,
        samples=pts,
        steps=steps,
        estimated_error=est,
    )


def flow_jacobian(
    B: VectorField,
    x: Point,
    rho: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> np.ndarray:
    """J^nu_mu = d x'^nu / d x^mu by integrating the variational system
    dJ/drho = (dB/dx)(x') J alongside the flow, J(0) = identity."""
    if x.chart != B.chart:
        raise ValueError(f"point chart {x.chart} does not match field {B.chart}")
    d = B.dimension
    deriv = _field_deriv(B, with_jacobian=True)
    y0 = np.concatenate([np.array(x.coords), np.eye(d).ravel()])
    y, _, _, _ = _integrate(deriv, y0, rho, tol, blowup_bound, d)
    return y[d:].reshape(d, d)


def accumulate_phase(
    B: VectorField,
    C: ScalarField,
    x: Point,
    rho: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> float:
    """T(x, rho) = integral of C along the flow of B, advanced as an extra
    state variable of the same RK4 run."""
    _require_same_chart(B, C)
    if x.chart != B.chart:
        raise ValueError(f"point chart {x.chart} does not match field {B.chart}")
    deriv = _field_deriv(B, C)
    y0 = np.concatenate([np.array(x.coords), [0.0]])
    y, _, _, _ = _integrate(deriv, y0, rho, tol, blowup_bound, B.dimension)
    return float(y[-1])


def flow_with_phase(
    B: VectorField,
    C: ScalarField | None,
    x: Point,
    rho: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
    n_steps: int | None = None,
) -> FlowResult:
    """One augmented run returning both the endpoint and the phase."""
    _require_same_chart(B, C)
    if x.chart != B.chart:
        raise ValueError(f"point chart {x.chart} does not match field {B.chart}")
    d = B.dimension
    deriv = _field_deriv(B, C)
    y0 = np.array(list(x.coords) + ([0.0] if C is not None else []))
    y, samples, steps, est = _integrate(
        deriv, y0, rho, tol, blowup_bound, d, n_steps=n_steps, record=True
    )
    pts = tuple((s, Point(B.chart, tuple(v[:d]))) for s, v in samples)
    return FlowResult(
        endpoint=Point(B.chart, tuple(y[:d])),
        phase=float(y[d]) if C is not None else 0.0,
        samples=pts,
        steps=steps,
        estimated_error=est,
    )


def apply_exponential(
    B: VectorField,
    C: ScalarField | None,
    psi: ScalarField,
    x: Point,
    rho: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> float:
    """exp(T(x, rho)) * psi(x'(x, rho)): the factorized exponential."""
    _require_same_chart(B, C, psi)
    res = flow_with_phase(B, C, x, rho, tol, blowup_bound=blowup_bound)
    return math.exp(res.phase) * psi.eval_at(res.endpoint)


def apply_operator(B: VectorField, C: ScalarField | None,
                   u: Expression) -> Expression:
    """(B.d + C) u, exactly."""
    total: Expression | None = None
    for name, comp in zip(B.chart, B.components):
        term = fc.mul(comp, fc.differentiate(u, name))
        total = term if total is None else fc.add(total, term)
    if C is not None:
        total = fc.add(total, fc.mul(C.expression, u))
    return total


def series_terms(
    B: VectorField,
    C: ScalarField | None,
    psi: ScalarField,
    x: Point,
    order: int,
    *,
    max_order: int = DEFAULT_MAX_ORDER,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> list[float]:
    """Values ((B.d + C)^n psi)(x) for n = 0..order, by repeated exact
    symbolic application."""
    _require_same_chart(B, C, psi)
    if order < 0:
        raise ValueError("order must be non-negative")
    if order > max_order:
        raise SeriesOrderError(f"order {order} above configured maximum {max_order}")
    env = x.env()
    u = psi.expression
    values = [evaluate(u, env)]
    for _ in range(order):
        u = apply_operator(B, C, u)
        if fc.node_count(u) > max_nodes:
            raise ExpressionSizeError(
                f"series expansion exceeded {max_nodes} nodes"
            )
        values.append(evaluate(u, env))
    return values


def series_oracle(
    B: VectorField,
    C: ScalarField | None,
    psi: ScalarField,
    x: Point,
    rho: float,
    order: int,
    *,
    max_order: int = DEFAULT_MAX_ORDER,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> float:
    """Truncated sum over rho^n / n! ((B.d + C)^n psi)(x)."""
    values = series_terms(
        B, C, psi, x, order, max_order=max_order, max_nodes=max_nodes
    )
    total = 0.0
    for n, v in enumerate(values):
        total += rho**n / math.factorial(n) * v
    return total


def displacement_series(
    B: VectorField,
    x: Point,
    rho: float,
    order: int,
    *,
    max_order: int = DEFAULT_MAX_ORDER,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> tuple[float, ...]:
    """Truncated displacement A^mu(x) = sum_{n>=1} rho^n/n! ((B.d)^{n-1} B^mu)(x).

    Approximates (flow endpoint - x) to order rho^{order+1}.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if order > max_order:
        raise SeriesOrderError(f"order {order} above configured maximum {max_order}")
    env = x.env()
    offsets = []
    for comp in B.components:
        u = comp
        total = rho * evaluate(u, env)
        for n in range(2, order + 1):
            u = apply_operator(B, None, u)
            if fc.node_count(u) > max_nodes:
                raise ExpressionSizeError(
                    f"displacement expansion exceeded {max_nodes} nodes"
                )
            total += rho**n / math.factorial(n) * evaluate(u, env)
        offsets.append(total)
    return tuple(offsets)


def pushforward_residual(
    B: VectorField,
    x: Point,
    rho: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> float:
    """max over nu of |B^nu(x') - sum_mu B^mu(x) dx'^nu/dx^mu|.

    Zero (to integrator accuracy) exactly when the flow pushes B forward
    onto itself, which is the lemma underlying the factorization.
    """
    if x.chart != B.chart:
        raise ValueError(f"point chart {x.chart} does not match field {B.chart}")
    d = B.dimension
    deriv = _field_deriv(B, with_jacobian=True)
    y0 = np.concatenate([np.array(x.coords), np.eye(d).ravel()])
    y, _, _, _ = _integrate(deriv, y0, rho, tol, blowup_bound, d)
    endpoint = Point(B.chart, tuple(y[:d]))
    J = y[d:].reshape(d, d)
    b_origin = np.array(B.eval_at(x))
    b_end = np.array(B.eval_at(endpoint))
    return float(np.max(np.abs(b_end - J @ b_origin)))
