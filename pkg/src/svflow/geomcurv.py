"""Curvature of a metric, directly and through block-diagonal decomposition.

The direct pipeline is the oracle: Christoffel symbols from the metric
with exact symbolic derivatives, the Riemann tensor from Gamma and
d-Gamma, Ricci by contraction of the first and third slots, scalar by
metric contraction.  The sign convention is pinned by R(unit 2-sphere)
= +2 and used consistently everywhere.

For a metric G = g (+) h that is block diagonal in coordinates
(x^mu, y^m), the decomposition formulas express curvature components
through the blocks and their cross-derivatives; each formula here is
evaluated verbatim and compared against the direct pipeline, with
residuals reported per formula and per point rather than silently
corrected.  Within-block curvature quantities treat the other block's
coordinates as frozen parameters.

All heavy lifting is symbolic differentiation plus pointwise numpy
assembly; expressions never need to be inverted or contracted
symbolically beyond the metric inverse that feeds Gamma.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from . import fieldcalc as fc
from .fieldcalc import Const, Expression, Point, parse_expression

DEGENERACY_EPS = 1e-12
_HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


class DegenerateMetricError(Exception):
    """|det G| fell below the degeneracy threshold at an evaluation point."""


class MetricFileError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# --------------------------------------------------------------------------
# Metric and split types


@dataclass(frozen=True)
class MetricField:
    """Symmetric matrix of expressions over coordinates, with optional
    frozen parameter variables (used when a block treats the other
    block's coordinates as parameters)."""

    coords: tuple[str, ...]
    components: tuple[tuple[Expression, ...], ...]
    param_vars: tuple[str, ...] = ()

    def __post_init__(self):
        D = len(self.coords)
        comps = tuple(tuple(row) for row in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != D or any(len(row) != D for row in comps):
            raise ValueError(f"components must form a {D}x{D} matrix")
        for i in range(D):
            for j in range(i + 1, D):
                if fc.to_string(comps[i][j]) != fc.to_string(comps[j][i]):
                    raise ValueError(
                        f"metric not structurally symmetric at ({i},{j})"
                    )
        allowed = set(self.coords) | set(self.param_vars)
        for row in comps:
            for e in row:
                extra = fc.variables_of(e) - allowed
                if extra:
                    raise ValueError(
                        f"metric entry uses variables {sorted(extra)} "
                        f"outside {sorted(allowed)}"
                    )

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @property
    def full_chart(self) -> tuple[str, ...]:
        return self.coords + self.param_vars

    @classmethod
    def from_entries(
        cls,
        coords: Iterable[str],
        entries: Mapping[tuple[int, int], Expression | str | float],
        param_vars: Iterable[str] = (),
    ) -> "MetricField":
        """Build from upper-triangle entries; the rest mirror or default
        to zero."""
        coords = tuple(coords)
        param_vars = tuple(param_vars)
        D = len(coords)
        grid: list[list[Expression]] = [[fc.ZERO] * D for _ in range(D)]
        chart = coords + param_vars
        for (i, j), raw in entries.items():
            if not (0 <= i < D and 0 <= j < D):
                raise ValueError(f"entry index ({i},{j}) outside 0..{D - 1}")
            if isinstance(raw, str):
                e = parse_expression(raw, chart)
            elif isinstance(raw, Expression):
                e = raw
            else:
                e = Const(float(raw))
            grid[i][j] = e
            grid[j][i] = e
        return cls(coords, tuple(tuple(row) for row in grid), param_vars)

    def is_diagonal(self) -> bool:
        D = self.dimension
        return all(
            fc.is_const(self.components[i][j], 0.0)
            for i in range(D)
            for j in range(D)
            if i != j
        )


@dataclass(frozen=True)
class BlockSplit:
    """Disjoint index partition of a metric into an x-block and a y-block."""

    first: tuple[int, ...]
    second: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "first", tuple(self.first))
        object.__setattr__(self, "second", tuple(self.second))
        joint = sorted(self.first + self.second)
        if len(set(joint)) != len(joint):
            raise ValueError("split blocks overlap")
        if joint != list(range(len(joint))):
            raise ValueError("split must cover indices 0..D-1 exactly")
        if not self.first or not self.second:
            raise ValueError("both blocks must be non-empty")

    def validate_against(self, G: MetricField, sample_envs=None):
        """Off-block components must vanish: structurally, or numerically
        at the provided sample points."""
        for i in self.first:
            for j in self.second:
                e = G.components[i][j]
                if fc.is_const(e, 0.0):
                    continue
                if sample_envs is None:
                    raise ValueError(
                        f"off-block component ({i},{j}) is not structurally zero"
                    )
                run = fc.compile_expression(e)
                for env in sample_envs:
                    if abs(run(env)) > DEGENERACY_EPS:
                        raise ValueError(
                            f"off-block component ({i},{j}) is nonzero at {env}"
                        )


def restrict(G: MetricField, indices: tuple[int, ...]) -> MetricField:
    """Sub-metric on the chosen indices; the remaining coordinates become
    frozen parameters."""
    sel = tuple(indices)
    others = tuple(c for k, c in enumerate(G.coords) if k not in sel)
    comps = tuple(tuple(G.components[i][j] for j in sel) for i in sel)
    return MetricField(
        coords=tuple(G.coords[i] for i in sel),
        components=comps,
        param_vars=others + G.param_vars,
    )


# --------------------------------------------------------------------------
# Symbolic inverse (feeds Gamma; never differentiated afterwards by name,
# the derivative route goes through d-Gamma)


def _sym_det(m: list[list[Expression]]) -> Expression:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return fc.sub(fc.mul(m[0][0], m[1][1]), fc.mul(m[0][1], m[1][0]))
    total: Expression = fc.ZERO
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = fc.mul(m[0][j], _sym_det(minor))
        total = fc.add(total, term) if j % 2 == 0 else fc.sub(total, term)
    return total


def symbolic_inverse(G: MetricField) -> list[list[Expression]]:
    D = G.dimension
    m = [list(row) for row in G.components]
    if G.is_diagonal():
        return [
            [fc.div(fc.ONE, m[i][i]) if i == j else fc.ZERO for j in range(D)]
            for i in range(D)
        ]
    det = _sym_det(m)
    inv = [[fc.ZERO] * D for _ in range(D)]
    for i in range(D):
        for j in range(D):
            minor = [
                [m[r][c] for c in range(D) if c != j]
                for r in range(D)
                if r != i
            ]
            cof = _sym_det(minor)
            if (i + j) % 2 == 1:
                cof = fc.neg(cof)
            inv[j][i] = fc.div(cof, det)
    return inv


# --------------------------------------------------------------------------
# Direct pipeline


def _compile_grid(grid) -> Callable[[Mapping[str, float]], np.ndarray]:
    shape = []
    probe = grid
    while isinstance(probe, (list, tuple)):
        shape.append(len(probe))
        probe = probe[0]
    flat: list[Expression] = []

    def collect(node):
        if isinstance(node, (list, tuple)):
            for sub in node:
                collect(sub)
        else:
            flat.append(node)

    collect(grid)
    fns = [fc.compile_expression(e) for e in flat]
    shape = tuple(shape)

    def at(env) -> np.ndarray:
        return np.array([f(env) for f in fns]).reshape(shape)

    return at


@dataclass(frozen=True)
class CurvatureValues:
    """Point evaluation of the whole curvature stack."""

    metric: np.ndarray
    christoffel: np.ndarray       # Gamma[m, n, p] = Gamma^m_np
    riemann: np.ndarray           # all-lower R[m, n, p, q]
    ricci: np.ndarray
    scalar: float


class CurvatureBundle:
    """Symbolic Gamma and d-Gamma for one metric, evaluated on demand.

    Derivatives are taken with respect to the metric's own coordinates
    only; parameter variables stay frozen, which is exactly the
    "(y) as parameters" reading of within-block curvature.
    """

    def __init__(self, G: MetricField):
        self.metric = G
        D = G.dimension
        inv = symbolic_inverse(G)
        gamma = [[[fc.ZERO] * D for _ in range(D)] for _ in range(D)]
        dg = [
            [
                [fc.differentiate(G.components[q][p], G.coords[n]) for p in range(D)]
                for q in range(D)
            ]
            for n in range(D)
        ]  # dg[n][q][p] = d_n g_qp
        for m in range(D):
            for n in range(D):
                for p in range(D):
                    total: Expression = fc.ZERO
                    for q in range(D):
                        bracket = fc.sub(
                            fc.add(dg[n][q][p], dg[p][q][n]), dg[q][n][p]
                        )
                        total = fc.add(total, fc.mul(inv[m][q], bracket))
                    gamma[m][n][p] = fc.mul(Const(0.5), total)
        dgamma = [
            [
                [
                    [fc.differentiate(gamma[m][n][c], G.coords[d]) for d in range(D)]
                    for c in range(D)
                ]
                for n in range(D)
            ]
            for m in range(D)
        ]  # dgamma[m][n][c][d] = d_d Gamma^m_nc
        self.christoffel = gamma
        self.dchristoffel = dgamma
        self._g_at = _compile_grid([list(r) for r in G.components])
        self._gamma_at = _compile_grid(gamma)
        self._dgamma_at = _compile_grid(dgamma)

    def at(self, env: Mapping[str, float] | Point) -> CurvatureValues:
        if isinstance(env, Point):
            env = env.env()
        g = self._g_at(env)
        det = np.linalg.det(g)
        if abs(det) <= DEGENERACY_EPS:
            raise DegenerateMetricError(f"|det G| = {abs(det):.3e} at {env}")
        ginv = np.linalg.inv(g)
        gam = self._gamma_at(env)
        dgam = self._dgamma_at(env)  # axes (m, n, c, d) = d_d Gamma^m_nc
        # R^m_npq = d_p Gamma^m_nq - d_q Gamma^m_np + Gamma^m_pl Gamma^l_nq
        #           - Gamma^m_ql Gamma^l_np
        up = (
            dgam.transpose(0, 1, 3, 2)
            - dgam
            + np.einsum("mpl,lnq->mnpq", gam, gam)
            - np.einsum("mql,lnp->mnpq", gam, gam)
        )
        low = np.einsum("ml,lnpq->mnpq", g, up)
        ricci = np.einsum("mnmq->nq", up)
        scalar = float(np.einsum("nq,nq->", ginv, ricci))
        return CurvatureValues(
            metric=g, christoffel=gam, riemann=low, ricci=ricci, scalar=scalar
        )


def curvature_direct(G: MetricField) -> CurvatureBundle:
    """The independent oracle: full curvature stack straight from G."""
    return CurvatureBundle(G)


# --------------------------------------------------------------------------
# Block-decomposition formulas, each evaluated verbatim at a point


def _derivative_grid(entries, wrt_names):
    """d[k][i][j] = d_{wrt[k]} entries[i][j]."""
    return [
        [[fc.differentiate(e, name) for e in row] for row in entries]
        for name in wrt_names
    ]


def _second_derivative_grid(entries, first_names, second_names):
    """dd[a][b][i][j] = d_a d_b entries[i][j]."""
    return [
        [
            [[fc.differentiate(fc.differentiate(e, nb), na) for e in row]
             for row in entries]
            for nb in second_names
        ]
        for na in first_names
    ]


class _BlockPieces:
    """Shared compiled ingredients for the decomposition formulas."""

    def __init__(self, G: MetricField, split: BlockSplit):
        split.validate_against(G)
        self.G = G
        self.split = split
        self.g_sub = restrict(G, split.first)
        self.h_sub = restrict(G, split.second)
        self.g_bundle = CurvatureBundle(self.g_sub)
        self.h_bundle = CurvatureBundle(self.h_sub)
        x_names = self.g_sub.coords
        y_names = self.h_sub.coords
        g_rows = [list(r) for r in self.g_sub.components]
        h_rows = [list(r) for r in self.h_sub.components]
        self._g_at = _compile_grid(g_rows)
        self._h_at = _compile_grid(h_rows)
        # first derivatives across the split
        self._dg_dy = _compile_grid(_derivative_grid(g_rows, y_names))
        self._dh_dx = _compile_grid(_derivative_grid(h_rows, x_names))
        # second derivatives across the split
        self._ddg_dyy = _compile_grid(
            _second_derivative_grid(g_rows, y_names, y_names)
        )
        self._ddh_dxx = _compile_grid(
            _second_derivative_grid(h_rows, x_names, x_names)
        )

    def values(self, env):
        g = self._g_at(env)
        h = self._h_at(env)
        for name, mat in (("g", g), ("h", h)):
            if abs(np.linalg.det(mat)) <= DEGENERACY_EPS:
                raise DegenerateMetricError(f"{name}-block degenerate at {env}")
        return {
            "g": g,
            "h": h,
            "ginv": np.linalg.inv(g),
            "hinv": np.linalg.inv(h),
            "dg_dy": self._dg_dy(env),      # (q, p, p): d_a g_mn
            "dh_dx": self._dh_dx(env),      # (p, q, q): d_mu h_ab
            "ddg_dyy": self._ddg_dyy(env),  # (q, q, p, p)
            "ddh_dxx": self._ddh_dxx(env),  # (p, p, q, q)
        }


def riemann_block(G: MetricField, s: BlockSplit) -> Callable[[Mapping | Point], np.ndarray]:
    """All-first-block Riemann components R_{l m s n} =
    r_{l m s n}(x, (y)) + (1/4) h^{ab} (d_a g_{ms} d_b g_{nl}
    - d_a g_{mn} d_b g_{ls}).  Returns an evaluator over points."""
    pieces = _BlockPieces(G, s)

    def at(env) -> np.ndarray:
        if isinstance(env, Point):
            env = env.env()
        v = pieces.values(env)
        r = pieces.g_bundle.at(env).riemann
        dg = v["dg_dy"]
        hinv = v["hinv"]
        t1 = np.einsum("ab,ams,bnl->lmsn", hinv, dg, dg)
        t2 = np.einsum("ab,amn,bls->lmsn", hinv, dg, dg)
        return r + 0.25 * (t1 - t2)

    return at


def mixed_block(G: MetricField, s: BlockSplit) -> Callable[[Mapping | Point], np.ndarray]:
    """Mixed components R_{l m, s n} (first pair in the x-block, second in
    the y-block):

        (1/4) g^{ab} (d_s g_{a m} d_n g_{b l} - d_n g_{a m} d_s g_{b l})
      + (1/4) h^{ab} (d_m h_{a s} d_l h_{b n} - d_m h_{a n} d_l h_{b s})
    """
    pieces = _BlockPieces(G, s)

    def at(env) -> np.ndarray:
        if isinstance(env, Point):
            env = env.env()
        v = pieces.values(env)
        dg, dh = v["dg_dy"], v["dh_dx"]
        ginv, hinv = v["ginv"], v["hinv"]
        t1 = np.einsum("xy,sxm,nyl->lmsn", ginv, dg, dg) - np.einsum(
            "xy,nxm,syl->lmsn", ginv, dg, dg
        )
        t2 = np.einsum("ab,mas,lbn->lmsn", hinv, dh, dh) - np.einsum(
            "ab,man,lbs->lmsn", hinv, dh, dh
        )
        return 0.25 * (t1 + t2)

    return at


def ricci_block(G: MetricField, s: BlockSplit) -> Callable[[Mapping | Point], np.ndarray]:
    """First-block Ricci components assembled from the blocks:

        r_mn(g(x, (y)))
      - (1/2) h^{ls} (d_l d_s g_mn - Gamma^a_ls(h) d_a g_mn)
      + (1/2) g^{ab} (dg_ma . dg_nb)
      - (1/4) (dg_mn . dlog g)
      + (1/4) h^{ls} h^{ab} d_m h_{as} d_n h_{bl}
      - (1/2) h^{ls} (d_m d_n h_{ls} - Gamma^a_mn(g) d_a h_{ls})

    with df.dj = h^{ab} d_a f d_b j and d_a log g = g^{mn} d_a g_{mn}.
    """
    pieces = _BlockPieces(G, s)

    def at(env) -> np.ndarray:
        if isinstance(env, Point):
            env = env.env()
        v = pieces.values(env)
        gv = pieces.g_bundle.at(env)
        hv = pieces.h_bundle.at(env)
        ginv, hinv = v["ginv"], v["hinv"]
        dg, dh = v["dg_dy"], v["dh_dx"]
        ddg, ddh = v["ddg_dyy"], v["ddh_dxx"]

        term1 = gv.ricci
        term2 = -0.5 * (
            np.einsum("ls,lsmn->mn", hinv, ddg)
            - np.einsum("ls,als,amn->mn", hinv, hv.christoffel, dg)
        )
        term3 = 0.5 * np.einsum("xy,ab,amx,bny->mn", ginv, hinv, dg, dg)
        dlogg = np.einsum("xy,axy->a", ginv, dg)
        term4 = -0.25 * np.einsum("ab,amn,b->mn", hinv, dg, dlogg)
        term5 = 0.25 * np.einsum("ls,ab,mas,nbl->mn", hinv, hinv, dh, dh)
        term6 = -0.5 * (
            np.einsum("ls,mnls->mn", hinv, ddh)
            - np.einsum("ls,xmn,xls->mn", hinv, gv.christoffel, dh)
        )
        return term1 + term2 + term3 + term4 + term5 + term6

    return at


def scalar_block(G: MetricField, s: BlockSplit) -> Callable[[Mapping | Point], float]:
    """Scalar curvature assembled from the blocks:

        r(g) + r(h)
      - (1/4) ((dlog g . dlog g) + (dlog h under g))
      + d_a log g  h^{mn} Gamma^a_mn(h)
      + d_x log h  g^{mn} Gamma^x_mn(g)
      - g^{mn} h^{ab} (d_a d_b g_mn + d_m d_n h_ab)
      + (3/4) g^{mn} h^{ab} (g^{xy} d_a g_mx d_b g_ny + h^{pq} d_m h_ap d_n h_bq)

    The final term contracts its x-block derivative indices with the
    outer g^{mn} (the only binding that leaves no free index).
    """
    pieces = _BlockPieces(G, s)

    def at(env) -> float:
        if isinstance(env, Point):
            env = env.env()
        v = pieces.values(env)
        gv = pieces.g_bundle.at(env)
        hv = pieces.h_bundle.at(env)
        ginv, hinv = v["ginv"], v["hinv"]
        dg, dh = v["dg_dy"], v["dh_dx"]
        ddg, ddh = v["ddg_dyy"], v["ddh_dxx"]

        dlogg = np.einsum("xy,axy->a", ginv, dg)      # indexed by y-block
        dlogh = np.einsum("ab,mab->m", hinv, dh)      # indexed by x-block

        total = gv.scalar + hv.scalar
        total += -0.25 * (
            float(np.einsum("ab,a,b->", hinv, dlogg, dlogg))
            + float(np.einsum("mn,m,n->", ginv, dlogh, dlogh))
        )
        total += float(np.einsum("a,mn,amn->", dlogg, hinv, hv.christoffel))
        total += float(np.einsum("m,xy,mxy->", dlogh, ginv, gv.christoffel))
        total += -float(
            np.einsum("mn,ab,abmn->", ginv, hinv, ddg)
            + np.einsum("mn,ab,mnab->", ginv, hinv, ddh)
        )
        total += 0.75 * (
            float(np.einsum("mn,ab,xy,amx,bny->", ginv, hinv, ginv, dg, dg))
            + float(np.einsum("mn,ab,pq,map,nbq->", ginv, hinv, hinv, dh, dh))
        )
        return float(total)

    return at


# --------------------------------------------------------------------------
# Adjudication against the direct oracle

FORMULA_NAMES = ("riemann_block", "mixed_block", "ricci_block", "scalar_block")


@dataclass
class BlockComparisonReport:
    max_residuals: dict[str, float]
    rows: list[tuple[str, int, float]] = field(default_factory=list)


def block_vs_direct_residual(
    G: MetricField, s: BlockSplit, points: list[Mapping[str, float] | Point]
) -> BlockComparisonReport:
    """For each decomposition formula, the max absolute difference with
    the direct pipeline over the points, plus per-point rows for CSV."""
    direct = curvature_direct(G)
    fns = {
        "riemann_block": riemann_block(G, s),
        "mixed_block": mixed_block(G, s),
        "ricci_block": ricci_block(G, s),
        "scalar_block": scalar_block(G, s),
    }
    fi = np.array(s.first)
    si = np.array(s.second)
    report = BlockComparisonReport(max_residuals={k: 0.0 for k in FORMULA_NAMES})
    for idx, env in enumerate(points):
        if isinstance(env, Point):
            env = env.env()
        dv = direct.at(env)
        res = {
            "riemann_block": float(
                np.max(np.abs(fns["riemann_block"](env) - dv.riemann[np.ix_(fi, fi, fi, fi)]))
            ),
            "mixed_block": float(
                np.max(np.abs(fns["mixed_block"](env) - dv.riemann[np.ix_(fi, fi, si, si)]))
            ),
            "ricci_block": float(
                np.max(np.abs(fns["ricci_block"](env) - dv.ricci[np.ix_(fi, fi)]))
            ),
            "scalar_block": abs(fns["scalar_block"](env) - dv.scalar),
        }
        for name, value in res.items():
            report.rows.append((name, idx, value))
            report.max_residuals[name] = max(report.max_residuals[name], value)
    return report


# --------------------------------------------------------------------------
# Quasi-random sampling and the versioned metric suite


def _halton(index: int, base: int) -> float:
    f, r = 1.0, 0.0
    while index > 0:
        f /= base
        r += f * (index % base)
        index //= base
    return r


def halton_envs(
    coords: tuple[str, ...],
    ranges: Mapping[str, tuple[float, float]],
    n: int,
    skip: int = 20,
) -> list[dict[str, float]]:
    """Deterministic quasi-random sample boxes; no seed, no state."""
    envs = []
    for i in range(n):
        env = {}
        for k, name in enumerate(coords):
            lo, hi = ranges[name]
            env[name] = lo + (hi - lo) * _halton(i + 1 + skip, _HALTON_PRIMES[k])
        envs.append(env)
    return envs


@dataclass(frozen=True)
class SuiteMetric:
    name: str
    metric: MetricField
    split: BlockSplit
    ranges: dict[str, tuple[float, float]]

    def sample_envs(self, n: int = 20) -> list[dict[str, float]]:
        return halton_envs(self.metric.coords, self.ranges, n)


def _suite() -> dict[str, SuiteMetric]:
    suite = {}

    flat = MetricField.from_entries(
        ("x1", "x2", "x3"), {(0, 0): 1.0, (1, 1): 1.0, (2, 2): 1.0}
    )
    suite["flat3"] = SuiteMetric(
        "flat3", flat, BlockSplit((0, 1), (2,)),
        {"x1": (0.1, 1.0), "x2": (0.1, 1.0), "x3": (0.1, 1.0)},
    )

    sphere = MetricField.from_entries(
        ("theta", "phi"), {(0, 0): 1.0, (1, 1): "sin(theta)^2"}
    )
    suite["sphere_unit"] = SuiteMetric(
        "sphere_unit", sphere, BlockSplit((0,), (1,)),
        {"theta": (0.5, 2.6), "phi": (0.1, 6.0)},
    )

    a = 1.3
    sphere_a = MetricField.from_entries(
        ("theta", "phi"), {(0, 0): a * a, (1, 1): f"{a * a}*sin(theta)^2"}
    )
    suite["sphere_radius"] = SuiteMetric(
        "sphere_radius", sphere_a, BlockSplit((0,), (1,)),
        {"theta": (0.5, 2.6), "phi": (0.1, 6.0)},
    )

    b = 0.7
    prod = MetricField.from_entries(
        ("t1", "p1", "t2", "p2"),
        {
            (0, 0): a * a,
            (1, 1): f"{a * a}*sin(t1)^2",
            (2, 2): b * b,
            (3, 3): f"{b * b}*sin(t2)^2",
        },
    )
    suite["spheres_product"] = SuiteMetric(
        "spheres_product", prod, BlockSplit((0, 1), (2, 3)),
        {"t1": (0.5, 2.6), "p1": (0.1, 6.0), "t2": (0.5, 2.6), "p2": (0.1, 6.0)},
    )

    warped = MetricField.from_entries(
        ("x1", "x2", "y"),
        {(0, 0): "exp(2*y)", (1, 1): "exp(2*y)", (2, 2): 1.0},
    )
    suite["warped_exp"] = SuiteMetric(
        "warped_exp", warped, BlockSplit((0, 1), (2,)),
        {"x1": (0.2, 1.0), "x2": (0.2, 1.0), "y": (-0.5, 0.5)},
    )

    offdiag = MetricField.from_entries(
        ("x1", "x2", "y"),
        {
            (0, 0): "1 + 0.1*y^2",
            (0, 1): "0.2*x1*y",
            (1, 1): "1 + 0.1*x1^2",
            (2, 2): "1 + 0.3*x1^2 + 0.1*x2^2",
        },
    )
    suite["offdiag_block"] = SuiteMetric(
        "offdiag_block", offdiag, BlockSplit((0, 1), (2,)),
        {"x1": (0.3, 0.9), "x2": (0.3, 0.9), "y": (0.3, 0.9)},
    )

    # both blocks 2-d, off-diagonal within each, cross-dependent: the only
    # configuration in which every term of the mixed/Ricci/scalar
    # decompositions is nonzero
    cross = MetricField.from_entries(
        ("x1", "x2", "y1", "y2"),
        {
            (0, 0): "1 + 0.2*y1",
            (0, 1): "0.1*y2",
            (1, 1): "1 + 0.1*x1^2",
            (2, 2): "1 + 0.1*x1",
            (2, 3): "0.05*x2",
            (3, 3): "1 + 0.1*y1^2",
        },
    )
    suite["cross_4d"] = SuiteMetric(
        "cross_4d", cross, BlockSplit((0, 1), (2, 3)),
        {"x1": (0.2, 0.8), "x2": (0.2, 0.8), "y1": (0.2, 0.8), "y2": (0.2, 0.8)},
    )

    return suite


METRIC_SUITE: dict[str, SuiteMetric] = _suite()


# --------------------------------------------------------------------------
# Metric input files


def parse_metric_text(text: str) -> tuple[MetricField, BlockSplit | None]:
    """Structured text: `dim = D`, `coords = a, b, ...`, optional
    `split = a b | c`, then `g[i,j] = formula` lines (upper triangle)."""
    dim = None
    coords: tuple[str, ...] | None = None
    split_spec: tuple[list[str], list[str]] | None = None
    entries: dict[tuple[int, int], str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MetricFileError("expected 'key = value'", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "dim":
            try:
                dim = int(value)
            except ValueError:
                raise MetricFileError(f"bad dimension {value!r}", lineno) from None
        elif key == "coords":
            coords = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key == "split":
            halves = value.split("|")
            if len(halves) != 2:
                raise MetricFileError("split needs exactly one '|'", lineno)
            split_spec = ([w for w in halves[0].split()], [w for w in halves[1].split()])
        elif key.startswith("g[") and key.endswith("]"):
            body = key[2:-1]
            try:
                i, j = (int(p) for p in body.split(","))
            except ValueError:
                raise MetricFileError(f"bad component index {key!r}", lineno) from None
            entries[(min(i, j), max(i, j))] = value
        else:
            raise MetricFileError(f"unknown key {key!r}", lineno)
    if dim is None or coords is None:
        raise MetricFileError("file must define dim and coords", 0)
    if len(coords) != dim:
        raise MetricFileError(
            f"coords lists {len(coords)} names for dim = {dim}", 0
        )
    try:
        G = MetricField.from_entries(coords, entries)
    except (ValueError, fc.ParseError) as err:
        raise MetricFileError(str(err), 0) from err
    split = None
    if split_spec is not None:
        try:
            first = tuple(coords.index(nm) for nm in split_spec[0])
            second = tuple(coords.index(nm) for nm in split_spec[1])
        except ValueError as err:
            raise MetricFileError(f"split names unknown: {err}", 0) from err
        split = BlockSplit(first, second)
    return G, split


def load_metric_file(path) -> tuple[MetricField, BlockSplit | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_metric_text(fh.read())
