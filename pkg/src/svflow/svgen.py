"""Time-reparametrization generators on the (t, r) half-plane.

A Laurent polynomial eps(t) = sum_n eps_n t^{n+1} defines the first-order
operator

    -X_eps = eps(t) d_t + (N/2) eps'(t) (r d_r + chi) + (m r^{2/N} / 4) eps''(t)

whose vector-field part moves (t, r) and whose multiplicative part feeds
the phase of the factorized exponential.  The family satisfies the
classical Virasoro bracket [X_eps, X_eta] = X_{eps' eta - eps eta'}, with
monomials eps = t^{m+1} reproducing [X_m, X_n] = (m - n) X_{m+n}.

The finite transformation law: exp(-X_eps) psi (t, r) equals

    (eps(t')/eps(t))^{N chi / 2}
    * exp( (m/4) (r'^{2/N} eps'(t')/eps(t') - r^{2/N} eps'(t)/eps(t)) )
    * psi(t', r')

where t' reparametrizes time through  rho = int_t^{t'} dtau / eps(tau)
and r' = r (eps(t')/eps(t))^{N/2}.  This module computes t' by flowing
eps d_t (verifying the integral residual by independent quadrature),
evaluates the law, and cross-checks it against the flow machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import fieldcalc as fc
from . import flowexp
from .fieldcalc import (
    Const,
    DomainError,
    Expression,
    Point,
    ScalarField,
    Var,
    VectorField,
)
from .flowexp import DEFAULT_TOLERANCE, Tolerance
from .quadrature import QuadratureError, adaptive_simpson

CHART = ("t", "r")


class EpsilonRootError(Exception):
    """eps vanishes at the start point or on the reparametrization path."""


class NegativeScaleRatioError(Exception):
    """eps(t')/eps(t) <= 0: the transformation law has no real branch."""


class ReparametrizationError(Exception):
    """The integral residual of the t' equation exceeded its tolerance."""


class CorrelatorSingularityError(Exception):
    """Both terms of the correlator denominator vanish."""


@dataclass(frozen=True)
class EpsilonFn:
    """eps(t) = sum_n eps_n t^{n+1} with finitely many nonzero terms.

    Terms with n <= -2 make eps singular at t = 0; evaluation there
    raises DomainError.
    """

    terms: tuple[tuple[int, float], ...]

    def __post_init__(self):
        cleaned = tuple(
            sorted((int(n), float(c)) for n, c in dict(self.terms).items() if c != 0.0)
        )
        if not cleaned:
            raise ValueError("eps needs at least one nonzero coefficient")
        object.__setattr__(self, "terms", cleaned)

    @classmethod
    def from_coefficients(cls, coeffs: dict[int, float]) -> "EpsilonFn":
        return cls(tuple(coeffs.items()))

    @classmethod
    def monomial(cls, n: int, coefficient: float = 1.0) -> "EpsilonFn":
        return cls(((n, coefficient),))

    @classmethod
    def from_formula(cls, text: str) -> "EpsilonFn":
        """Parse a Laurent-polynomial formula in t, e.g.
        '1 + 0.1*t + 0.05*t^2' or 't^-2 - 3/t'.  Coefficients are
        extracted structurally and exactly; non-polynomial formulas are
        rejected."""
        expr = fc.simplify(fc.parse_expression(text, ("t",)))
        powers = _laurent_coefficients(expr)
        coeffs = {k - 1: c for k, c in powers.items() if c != 0.0}
        if not coeffs:
            raise ValueError(f"{text!r} is the zero function")
        return cls.from_coefficients(coeffs)

    def _power_value(self, t: float, k: int) -> float:
        if k == 0:
            return 1.0
        if t == 0.0 and k < 0:
            raise DomainError("eps term with negative power evaluated at t = 0")
        return float(t) ** k

    def value(self, t: float) -> float:
        return sum(c * self._power_value(t, n + 1) for n, c in self.terms)

    def deriv(self, t: float) -> float:
        return sum(
            c * (n + 1) * self._power_value(t, n) for n, c in self.terms if n + 1 != 0
        )

    def deriv2(self, t: float) -> float:
        return sum(
            c * (n + 1) * n * self._power_value(t, n - 1)
            for n, c in self.terms
            if n + 1 != 0 and n != 0
        )

    def _monomial_expr(self, var: str, coeff: float, k: int) -> Expression:
        if coeff == 0.0:
            return fc.ZERO
        if k == 0:
            return Const(coeff)
        base = fc.pow_(Var(var), Const(float(k)))
        return fc.mul(Const(coeff), base)

    def expression(self, var: str = "t", order: int = 0) -> Expression:
        """Symbolic eps (order 0), eps' (1) or eps'' (2)."""
        total: Expression = fc.ZERO
        for n, c in self.terms:
            if order == 0:
                term = self._monomial_expr(var, c, n + 1)
            elif order == 1:
                term = self._monomial_expr(var, c * (n + 1), n)
            elif order == 2:
                term = self._monomial_expr(var, c * (n + 1) * n, n - 1)
            else:
                raise ValueError("order must be 0, 1 or 2")
            total = fc.add(total, term)
        return total


def _laurent_coefficients(e: fc.Expression) -> dict[int, float]:
    """Map power -> coefficient for an expression that is a Laurent
    polynomial in t; raises ValueError otherwise."""
    if isinstance(e, Const):
        return {0: e.value}
    if isinstance(e, Var):
        return {1: 1.0}
    if isinstance(e, fc.Neg):
        return {k: -c for k, c in _laurent_coefficients(e.arg).items()}
    if isinstance(e, (fc.Add, fc.Sub)):
        left = _laurent_coefficients(e.left)
        right = _laurent_coefficients(e.right)
        sign = 1.0 if isinstance(e, fc.Add) else -1.0
        for k, c in right.items():
            left[k] = left.get(k, 0.0) + sign * c
        return left
    if isinstance(e, fc.Mul):
        left = _laurent_coefficients(e.left)
        right = _laurent_coefficients(e.right)
        out: dict[int, float] = {}
        for k1, c1 in left.items():
            for k2, c2 in right.items():
                out[k1 + k2] = out.get(k1 + k2, 0.0) + c1 * c2
        return out
    if isinstance(e, fc.Div):
        num = _laurent_coefficients(e.left)
        den = _laurent_coefficients(e.right)
        live = {k: c for k, c in den.items() if c != 0.0}
        if len(live) != 1:
            raise ValueError("division only by a constant or a monomial in t")
        (k0, c0), = live.items()
        return {k - k0: c / c0 for k, c in num.items()}
    if isinstance(e, fc.Pow):
        if not isinstance(e.right, Const) or e.right.value != int(e.right.value):
            raise ValueError("powers must have integer constant exponents")
        n = int(e.right.value)
        base = _laurent_coefficients(e.left)
        live = {k: c for k, c in base.items() if c != 0.0}
        if n < 0:
            if len(live) != 1:
                raise ValueError("negative powers only of a single monomial")
            (k0, c0), = live.items()
            return {k0 * n: c0**n}
        out = {0: 1.0}
        for _ in range(n):
            nxt: dict[int, float] = {}
            for k1, c1 in out.items():
                for k2, c2 in live.items():
                    nxt[k1 + k2] = nxt.get(k1 + k2, 0.0) + c1 * c2
            out = nxt
        return out
    raise ValueError(f"not a Laurent polynomial in t: {fc.to_string(e)}")


def bracket_eps(eps: EpsilonFn, eta: EpsilonFn) -> dict[int, float]:
    """Coefficients of eps' eta - eps eta' in the same Laurent basis:
    the k-th coefficient is sum over m+n=k of (m - n) eps_m eta_n."""
    out: dict[int, float] = {}
    for m, a in eps.terms:
        for n, b in eta.terms:
            k = m + n
            out[k] = out.get(k, 0.0) + (m - n) * a * b
    return {k: v for k, v in out.items() if v != 0.0}


@dataclass(frozen=True)
class SVParams:
    """Physical parameters of the generator family.

    m is the mass coupling, chi the scaling dimension, N the anisotropy
    (N = 2/theta; N = 1 is the diffusive case).  Non-integer 2/N
    restricts evaluation to r > 0.
    """

    m: float
    chi: float
    N: float = 1.0

    def __post_init__(self):
        if self.N == 0:
            raise ValueError("N must be nonzero")

    @property
    def theta(self) -> float:
        return 2.0 / self.N

    @property
    def r_exponent(self) -> float:
        return 2.0 / self.N


@dataclass(frozen=True)
class PrimaryTransform:
    t_prime: float
    r_prime: float
    prefactor: float


def build_generator(eps: EpsilonFn, p: SVParams) -> tuple[VectorField, ScalarField]:
    """(B, C) on the (t, r) chart with -X_eps = B + C as a first-order
    operator: B = eps d_t + (N/2) eps' r d_r and
    C = (N/2) eps' chi + (m r^{2/N}/4) eps''."""
    e0 = eps.expression("t", 0)
    e1 = eps.expression("t", 1)
    e2 = eps.expression("t", 2)
    half_n = Const(p.N / 2.0)
    b_t = e0
    b_r = fc.mul(fc.mul(half_n, e1), Var("r"))
    c_chi = fc.mul(fc.mul(half_n, Const(p.chi)), e1)
    r_pow = fc.pow_(Var("r"), Const(p.r_exponent))
    c_mass = fc.mul(fc.mul(Const(p.m / 4.0), r_pow), e2)
    return (
        VectorField(CHART, (b_t, b_r)),
        ScalarField(CHART, fc.add(c_chi, c_mass)),
    )


def apply_generator(eps: EpsilonFn, p: SVParams, u: Expression) -> Expression:
    """X_eps applied to a scalar expression over (t, r), exactly."""
    B, C = build_generator(eps, p)
    return fc.neg(flowexp.apply_operator(B, C, u))


def _apply_bracket_target(
    coeffs: dict[int, float], p: SVParams, u: Expression
) -> Expression:
    if not coeffs:
        return fc.ZERO
    lam = EpsilonFn.from_coefficients(coeffs)
    return apply_generator(lam, p, u)


def bracket_residual(
    eps: EpsilonFn,
    eta: EpsilonFn,
    p: SVParams,
    test: ScalarField,
    points: list[Point],
    *,
    max_nodes: int = flowexp.DEFAULT_MAX_NODES,
) -> float:
    """max over points of |([X_eps, X_eta] - X_{eps' eta - eps eta'}) psi|,
    all operator applications exact-symbolic."""
    if test.chart != CHART:
        raise ValueError(f"test function must live on chart {CHART}")
    u = test.expression
    lhs = fc.sub(
        apply_generator(eps, p, apply_generator(eta, p, u)),
        apply_generator(eta, p, apply_generator(eps, p, u)),
    )
    target = _apply_bracket_target(bracket_eps(eps, eta), p, u)
    residual = fc.sub(lhs, target)
    if fc.node_count(residual) > max_nodes:
        raise flowexp.ExpressionSizeError("bracket expression exceeded node budget")
    run = fc.compile_expression(residual)
    return max(abs(run(pt.env())) for pt in points)


def monomial_bracket(m_idx: int, n_idx: int) -> tuple[float, int]:
    """[X_m, X_n] = (m - n) X_{m+n} for the monomial basis eps = t^{m+1}."""
    return (float(m_idx - n_idx), m_idx + n_idx)


def solve_tprime(
    eps: EpsilonFn,
    t: float,
    rho: float = 1.0,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> float:
    """t' with int_t^{t'} dtau/eps(tau) = rho.

    Computed by integrating dt'/ds = eps(t') from s = 0 to rho; the
    defining integral is then re-evaluated by independent adaptive
    quadrature and must agree with rho.
    """
    e_start = eps.value(t)
    if e_start == 0.0:
        raise EpsilonRootError(f"eps vanishes at the start point t = {t}")
    B = VectorField(("t",), (eps.expression("t", 0),))
    res = flowexp.integrate_flow(B, Point(("t",), (t,)), rho, tol)
    t_prime = res.endpoint.coords[0]

    sign = math.copysign(1.0, e_start)

    def integrand(tau: float) -> float:
        v = eps.value(tau)
        if v == 0.0 or math.copysign(1.0, v) != sign:
            raise EpsilonRootError(f"eps root encountered on path at t = {tau}")
        return 1.0 / v

    try:
        q = adaptive_simpson(
            integrand, t, t_prime, atol=tol.absolute / 10, rtol=tol.relative / 10
        )
    except QuadratureError as err:
        raise EpsilonRootError(f"quadrature failed near an eps root: {err}") from err
    budget = 100.0 * (tol.absolute + tol.relative * max(1.0, abs(rho)))
    if abs(q - rho) > budget:
        raise ReparametrizationError(
            f"integral residual {abs(q - rho):.3e} above budget {budget:.3e}"
        )
    return float(t_prime)


def _checked_exp(arg: float) -> float:
    if abs(arg) > 700.0:
        raise DomainError(f"exp({arg}) overflows", kind="overflow")
    return math.exp(arg)


def _r_power(r: float, expo: float) -> float:
    return fc._eval_pow(r, expo)


def primary_transform(
    eps: EpsilonFn,
    p: SVParams,
    t: float,
    r: float,
    rho: float = 1.0,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> PrimaryTransform:
    """Finite transformation of a primary field: t', r' and the scalar
    prefactor multiplying psi(t', r')."""
    t_prime = solve_tprime(eps, t, rho, tol)
    ratio = eps.value(t_prime) / eps.value(t)
    if ratio <= 0.0:
        raise NegativeScaleRatioError(
            f"eps(t')/eps(t) = {ratio:.3e} is not positive"
        )
    n_half = p.N / 2.0
    r_prime = r * ratio**n_half
    k = p.r_exponent
    weight = ratio ** (p.N * p.chi / 2.0)
    arg = (p.m / 4.0) * (
        _r_power(r_prime, k) * eps.deriv(t_prime) / eps.value(t_prime)
        - _r_power(r, k) * eps.deriv(t) / eps.value(t)
    )
    return PrimaryTransform(
        t_prime=t_prime, r_prime=r_prime, prefactor=weight * _checked_exp(arg)
    )


def primary_vs_flow_residual(
    eps: EpsilonFn,
    p: SVParams,
    psi: ScalarField,
    t: float,
    r: float,
    rho: float = 1.0,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> float:
    """|exp(rho (B + C)) psi  -  prefactor * psi(t', r')|: the flow route
    and the closed-form transformation law must agree."""
    B, C = build_generator(eps, p)
    lhs = flowexp.apply_exponential(B, C, psi, Point(CHART, (t, r)), rho, tol)
    tr = primary_transform(eps, p, t, r, rho, tol)
    rhs = tr.prefactor * psi.eval_at(Point(CHART, (tr.t_prime, tr.r_prime)))
    return abs(lhs - rhs)


def weight_form_residual(
    eps: EpsilonFn,
    p: SVParams,
    t: float,
    r: float,
    rho: float = 1.0,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> float:
    """Check the time-dependent-scale form of the transformation law.

    With sigma = log eps, the law says the combination
    phi * (dt)^{N chi/2} * exp((m r^{2/N}/4) sigma'(t)) is invariant.
    Returns |dt'/dt - eps(t')/eps(t)| plus the invariance defect, with
    dt'/dt computed independently through the variational equation.
    """
    tr = primary_transform(eps, p, t, r, rho, tol)
    if eps.value(t) <= 0.0 or eps.value(tr.t_prime) <= 0.0:
        raise DomainError("sigma = log(eps) needs eps > 0 at t and t'")
    B1 = VectorField(("t",), (eps.expression("t", 0),))
    jac = flowexp.flow_jacobian(B1, Point(("t",), (t,)), rho, tol)[0, 0]
    ratio = eps.value(tr.t_prime) / eps.value(t)
    res1 = abs(jac - ratio)

    k = p.r_exponent
    sdot_t = eps.deriv(t) / eps.value(t)
    sdot_tp = eps.deriv(tr.t_prime) / eps.value(tr.t_prime)
    lhs = tr.prefactor * _checked_exp((p.m / 4.0) * _r_power(r, k) * sdot_t)
    rhs = jac ** (p.N * p.chi / 2.0) * _checked_exp(
        (p.m / 4.0) * _r_power(tr.r_prime, k) * sdot_tp
    )
    return res1 + abs(lhs - rhs)


def map_halfspace(
    t: float, r: float, T: float, T_prime: float
) -> tuple[float, float]:
    """Exponential map from the flat (t, r) plane to the half-space
    0 < t' < infinity."""
    if T <= 0.0 or T_prime <= 0.0:
        raise ValueError("T and T' must be positive")
    t_prime = T_prime * math.exp(t / T)
    r_prime = r * math.sqrt(T_prime / T) * math.exp(t / (2.0 * T))
    return (t_prime, r_prime)


def invert_halfspace(
    t_prime: float, r_prime: float, T: float, T_prime: float
) -> tuple[float, float]:
    """Algebraic inverse of map_halfspace."""
    if t_prime <= 0.0:
        raise ValueError("t' must be positive")
    t = T * math.log(t_prime / T_prime)
    r = r_prime * math.sqrt(T / t_prime)
    return (t, r)


def halfspace_correlator(
    t_prime: float,
    r_prime: float,
    p: SVParams,
    T: float,
    T_prime: float,
    d: int,
) -> float:
    """Two-point function predicted on the half-space image.

    The power-law factor is the flat massless propagator of dimension
    (d-2)/2 composed with the inverse map; the remaining factor carries
    the scaling weight and the mass-dependent exponential.
    """
    if T <= 0.0 or T_prime <= 0.0:
        raise ValueError("T and T' must be positive")
    if t_prime <= 0.0:
        raise ValueError("t' must lie in (0, infinity)")
    base = (T / t_prime) * r_prime**2 + T**2 * math.log(t_prime / T_prime) ** 2
    if base == 0.0:
        raise CorrelatorSingularityError(
            "r' = 0 and t' = T' make both denominator terms vanish"
        )
    power = base ** (-(d - 2) / 2.0)
    weight = (T / t_prime) ** (p.chi / 2.0)
    return power * weight * _checked_exp(-p.m * r_prime**2 / (4.0 * t_prime))
