"""Command-line driver: each verification suite and computation as a
subcommand, with optional INI config files and CSV reports.

Exit status 0 means every asserted invariant of the subcommand held at
its tolerance, 1 names the failing invariant, 2 is a usage or config
error.  Reports carry no timestamps and all randomness flows through the
--seed flag, so identical invocations produce byte-identical CSVs.

Config files use one [run] section of key = value pairs mirroring the
long flags (command selects the subcommand); explicit command-line flags
override file values.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import accframe, flowexp, geomcurv, nrlimit, svgen, verification
from .fieldcalc import (
    ExpressionError,
    ParseError,
    Point,
    ScalarField,
    parse_expression,
    scalar_field,
    vector_field,
)
from .flowexp import Tolerance

SUBCOMMANDS = (
    "flow",
    "virasoro",
    "primary",
    "nrlimit",
    "curvature",
    "frame",
    "correlator",
    "verify-all",
)


class ConfigError(Exception):
    pass


class VerificationFailure(Exception):
    """Raised with the name of the invariant that missed its tolerance."""


@dataclass
class RunConfig:
    command: str | None = None
    values: dict[str, str] = field(default_factory=dict)


def load_config(path: str | Path) -> RunConfig:
    """Parse a [run] section of key = value pairs; validates eagerly so a
    bad file fails before any computation starts."""
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}") from err
    if not read:
        raise ConfigError(f"config file {path} not found")
    if "run" not in parser:
        raise ConfigError("config file needs a [run] section")
    cfg = RunConfig(values=dict(parser["run"]))
    cfg.command = cfg.values.pop("command", None)
    if cfg.command is not None and cfg.command not in SUBCOMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r} in config")
    _validate_values(cfg.values)
    return cfg


_POSITIVE_FLOAT_KEYS = {"abs_tol", "rel_tol", "m", "c", "h", "t_big", "tp_big"}
_FLOAT_KEYS = {"chi", "n_aniso", "rho", "t", "r"} | _POSITIVE_FLOAT_KEYS
_INT_KEYS = {"seed", "d", "max_index", "points", "max_iter", "order", "max_steps"}


def _validate_values(values: dict[str, str]):
    for key, raw in values.items():
        if key in _FLOAT_KEYS:
            try:
                v = float(raw)
            except ValueError:
                raise ConfigError(f"field {key!r}: not a number: {raw!r}") from None
            if key in _POSITIVE_FLOAT_KEYS and v <= 0:
                raise ConfigError(f"field {key!r}: must be positive, got {raw}")
        elif key in _INT_KEYS:
            try:
                int(raw)
            except ValueError:
                raise ConfigError(f"field {key!r}: not an integer: {raw!r}") from None


def _merge(args: argparse.Namespace, cfg: RunConfig, key: str, default, convert):
    flag = getattr(args, key, None)
    if flag is not None:
        # argparse may have converted already; strings still need parsing
        if isinstance(flag, str):
            try:
                return convert(flag)
            except (ValueError, ExpressionError) as err:
                raise ConfigError(f"flag {key!r}: {err}") from err
        return flag
    raw = cfg.values.get(key)
    if raw is not None:
        try:
            return convert(raw)
        except (ValueError, ExpressionError) as err:
            raise ConfigError(f"field {key!r}: {err}") from err
    return default


def _floats_csv(raw: str) -> list[float]:
    return [float(p) for p in str(raw).split(",") if p.strip()]


def _write_csv(path: Path, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([verification.fmt_csv_value(v) for v in row])
    path.write_bytes(buf.getvalue().encode("utf-8"))


def _tolerance(args, cfg) -> Tolerance:
    absolute = _merge(args, cfg, "abs_tol", 1e-10, float)
    relative = _merge(args, cfg, "rel_tol", 1e-9, float)
    max_steps = _merge(args, cfg, "max_steps", 10**6, int)
    if absolute <= 0 or relative <= 0:
        raise ConfigError("tolerances must be positive")
    return Tolerance(absolute=absolute, relative=relative, max_steps=max_steps)


# --------------------------------------------------------------------------
# Subcommand bodies.  Each returns (columns, rows, summary_lines) and
# raises VerificationFailure when an asserted invariant misses.


def _run_flow(args, cfg, out_dir: Path, seed: int):
    comps = _merge(args, cfg, "field", None, str)
    if comps is None:
        raise ConfigError("flow needs --field (semicolon-separated components)")
    names = _merge(args, cfg, "vars", None, str)
    if names is None:
        raise ConfigError("flow needs --vars (comma-separated names)")
    chart = tuple(v.strip() for v in names.split(","))
    B = vector_field([s.strip() for s in comps.split(";")], chart)
    coords = _merge(args, cfg, "point", None, _floats_csv)
    if coords is None:
        raise ConfigError("flow needs --point")
    x = Point(chart, tuple(coords))
    rho = _merge(args, cfg, "rho", 0.5, float)
    tol = _tolerance(args, cfg)
    order = _merge(args, cfg, "order", 6, int)
    charge = _merge(args, cfg, "charge", None, str)
    psi_text = _merge(args, cfg, "psi", None, str)

    res = flowexp.integrate_flow(B, x, rho, tol)
    J = flowexp.flow_jacobian(B, x, rho, tol)
    push = flowexp.pushforward_residual(B, x, rho, tol)
    rows = [("endpoint", i, v) for i, v in enumerate(res.endpoint.coords)]
    rows += [
        ("jacobian", i * len(chart) + j, float(J[i, j]))
        for i in range(len(chart))
        for j in range(len(chart))
    ]
    rows.append(("pushforward_residual", "", push))
    summary = [
        f"endpoint: {res.endpoint.coords} in {res.steps} steps "
        f"(estimated error {res.estimated_error:.2e})",
        f"pushforward residual: {push:.3e}",
    ]
    if charge is not None and psi_text is not None:
        C = ScalarField(chart, parse_expression(charge, chart))
        psi = ScalarField(chart, parse_expression(psi_text, chart))
        applied = flowexp.apply_exponential(B, C, psi, x, rho, tol)
        series = flowexp.series_oracle(B, C, psi, x, rho, order)
        rows.append(("apply_exponential", "", applied))
        rows.append((f"series_order_{order}", "", series))
        rows.append(("difference", "", abs(applied - series)))
        summary.append(
            f"exp route {applied!r} vs series(order {order}) {series!r}: "
            f"difference {abs(applied - series):.3e}"
        )
    _write_csv(out_dir / "flow.csv", ("quantity", "index", "value"), rows)
    bound = 10 * (tol.absolute + tol.relative)
    if push > bound:
        raise VerificationFailure(
            f"pushforward residual {push:.3e} above {bound:.1e}"
        )
    return summary


def _run_virasoro(args, cfg, out_dir: Path, seed: int):
    max_index = _merge(args, cfg, "max_index", 3, int)
    n_points = _merge(args, cfg, "points", 10, int)
    p = svgen.SVParams(
        m=_merge(args, cfg, "m", 1.3, float),
        chi=_merge(args, cfg, "chi", 0.7, float),
        N=_merge(args, cfg, "n_aniso", 1.0, float),
    )
    rng = np.random.default_rng(seed)
    points = [
        Point(svgen.CHART, (float(rng.uniform(0.6, 1.6)), float(rng.uniform(0.5, 1.5))))
        for _ in range(n_points)
    ]
    tests = [scalar_field(s, svgen.CHART) for s in verification.VIRASORO_TEST_FUNCTIONS]
    rows = []
    worst = 0.0
    for m_idx in range(-max_index, max_index + 1):
        for n_idx in range(-max_index, max_index + 1):
            res = max(
                svgen.bracket_residual(
                    svgen.EpsilonFn.monomial(m_idx),
                    svgen.EpsilonFn.monomial(n_idx),
                    p, psi, points,
                )
                for psi in tests
            )
            coeff, idx = svgen.monomial_bracket(m_idx, n_idx)
            rows.append((m_idx, n_idx, res, coeff, idx, seed))
            worst = max(worst, res)
    _write_csv(
        out_dir / "virasoro.csv",
        ("m", "n", "max_residual", "bracket_coefficient", "bracket_index", "seed"),
        rows,
    )
    summary = [
        f"bracket residuals for |m|,|n| <= {max_index} over {n_points} points: "
        f"worst {worst:.3e}"
    ]
    if worst > 1e-8:
        raise VerificationFailure(f"bracket residual {worst:.3e} above 1e-8")
    return summary


def _run_primary(args, cfg, out_dir: Path, seed: int):
    eps_text = _merge(args, cfg, "eps", "t", str)
    try:
        eps = svgen.EpsilonFn.from_formula(eps_text)
    except ValueError as err:
        raise ConfigError(f"field 'eps': {err}") from err
    p = svgen.SVParams(
        m=_merge(args, cfg, "m", 1.3, float),
        chi=_merge(args, cfg, "chi", 0.7, float),
        N=_merge(args, cfg, "n_aniso", 1.0, float),
    )
    coords = _merge(args, cfg, "point", [0.5, 1.2], _floats_csv)
    if len(coords) != 2:
        raise ConfigError("primary --point needs exactly t,r")
    t, r = coords
    rho = _merge(args, cfg, "rho", 1.0, float)
    psi = scalar_field("exp(-r^2 / (1 + t^2))", svgen.CHART)
    tr = svgen.primary_transform(eps, p, t, r, rho)
    flow_res = svgen.primary_vs_flow_residual(eps, p, psi, t, r, rho)
    form_res = svgen.weight_form_residual(eps, p, t, r, rho)
    rows = [
        ("t_prime", tr.t_prime),
        ("r_prime", tr.r_prime),
        ("prefactor", tr.prefactor),
        ("flow_comparison_residual", flow_res),
        ("weight_form_residual", form_res),
    ]
    _write_csv(out_dir / "primary.csv", ("quantity", "value"), rows)
    summary = [
        f"eps = {eps_text!r}, (t, r) = ({t}, {r}), rho = {rho}",
        f"t' = {tr.t_prime!r}, r' = {tr.r_prime!r}, prefactor = {tr.prefactor!r}",
        f"flow-comparison residual {flow_res:.3e}, weight-form residual {form_res:.3e}",
    ]
    if flow_res > 1e-7:
        raise VerificationFailure(f"primary/flow residual {flow_res:.3e} above 1e-7")
    if form_res > 1e-8:
        raise VerificationFailure(f"weight-form residual {form_res:.3e} above 1e-8")
    return summary


def _run_nrlimit(args, cfg, out_dir: Path, seed: int):
    p = nrlimit.RelParams(
        m=_merge(args, cfg, "m", 1.0, float),
        c=_merge(args, cfg, "c", 2.0, float),
        h=_merge(args, cfg, "h", 1.0, float),
    )
    point = tuple(_merge(args, cfg, "point", [0.5, 0.25, 0.8], _floats_csv))
    if len(point) != 3:
        raise ConfigError("nrlimit --point needs t,x0,x")
    psi_text = _merge(args, cfg, "psi", None, str)
    is_heat_default = psi_text is None
    psi = (
        nrlimit.heat_kernel(p)
        if is_heat_default
        else scalar_field(psi_text, nrlimit.PSI_CHART)
    )
    c_values = _merge(args, cfg, "c_values", [10.0, 100.0, 1000.0], _floats_csv)

    contraction = nrlimit.contraction_residual(psi, p, *point)
    kg = nrlimit.kg_diffusion_residual(psi, p, point)
    slope = nrlimit.diffusion_defect_scaling(
        psi, p, c_values, (point[0], 0.0, point[2])
    )
    rows = [
        ("contraction_residual", contraction),
        ("kg_identity_residual", kg.identity_residual),
        ("diffusion_term", kg.diffusion_term),
        ("relativistic_term", kg.relativistic_term),
        ("defect_slope", slope),
    ]
    _write_csv(out_dir / "nrlimit.csv", ("quantity", "value"), rows)
    summary = [
        f"contraction residual {contraction:.3e}, KG identity residual "
        f"{kg.identity_residual:.3e}",
        f"defect split: diffusion {kg.diffusion_term:.3e}, relativistic "
        f"{kg.relativistic_term:.3e}; slope vs c: {slope:.4f}",
    ]
    if contraction > 1e-10:
        raise VerificationFailure(f"contraction residual {contraction:.3e} above 1e-10")
    if kg.identity_residual > 1e-10:
        raise VerificationFailure(
            f"KG identity residual {kg.identity_residual:.3e} above 1e-10"
        )
    if is_heat_default and abs(slope + 2.0) > 0.05:
        raise VerificationFailure(f"defect slope {slope:.4f} outside -2 +- 0.05")
    return summary


def _run_curvature(args, cfg, out_dir: Path, seed: int):
    metric_path = _merge(args, cfg, "metric", None, str)
    n_points = _merge(args, cfg, "points", 20, int)
    rows = []
    summary = []
    failures = []
    if metric_path is not None:
        G, split = geomcurv.load_metric_file(metric_path)
        if split is None:
            raise ConfigError("metric file needs a split line for block checks")
        ranges = {c: (0.3, 0.9) for c in G.coords}
        envs = geomcurv.halton_envs(G.coords, ranges, n_points)
        rep = geomcurv.block_vs_direct_residual(G, split, envs)
        for formula, idx, val in rep.rows:
            rows.append(("file_metric", formula, idx, val))
        summary.append(
            "file metric residuals: "
            + ", ".join(f"{k}={v:.2e}" for k, v in rep.max_residuals.items())
        )
        if rep.max_residuals["riemann_block"] > 1e-7:
            failures.append(
                f"block Riemann residual {rep.max_residuals['riemann_block']:.2e} above 1e-7"
            )
    else:
        result = verification.criterion_curvature(seed)
        rows = result.rows
        summary.append(result.detail)
        if not result.passed:
            failures.append("curvature criterion failed")
    _write_csv(
        out_dir / "curvature.csv", ("metric", "quantity", "point", "value"), rows
    )
    if failures:
        raise VerificationFailure("; ".join(failures))
    return summary


def _run_frame(args, cfg, out_dir: Path, seed: int):
    f_text = _merge(args, cfg, "f", "0.25*t^2", str)
    c = _merge(args, cfg, "c", 1.0, float)
    grid_vals = _merge(args, cfg, "grid", [0.0, 0.5, -0.3, 0.35, 41, 41], _floats_csv)
    if len(grid_vals) != 6:
        raise ConfigError("frame --grid needs tmin,tmax,xmin,xmax,nt,nx")
    grid = accframe.GridSpec(
        grid_vals[0], grid_vals[1], grid_vals[2], grid_vals[3],
        int(grid_vals[4]), int(grid_vals[5]),
    )
    absolute = _merge(args, cfg, "abs_tol", 1e-8, float)
    relative = _merge(args, cfg, "rel_tol", 1e-8, float)
    max_steps = _merge(args, cfg, "max_steps", 10**6, int)
    tol = Tolerance(absolute=absolute, relative=relative, max_steps=max_steps)
    max_iter = _merge(args, cfg, "max_iter", 100, int)
    traj = accframe.Trajectory.from_formula(f_text, c=c)
    fm = accframe.solve_frame_map(traj, grid, tol, max_iter)
    out_path = out_dir / "frame.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fm.write_csv(fh)
    bx, bt = fm.boundary_residuals()
    summary = [
        f"f = {f_text!r}, grid {grid.nt}x{grid.nx}: "
        f"{'converged' if fm.converged else 'NOT converged'} after "
        f"{fm.iterations} iteration(s), residual {fm.residual:.3e}",
        f"boundary residuals: |x'(t,f(t))| <= {bx:.2e}, "
        f"|t'(t,f(t)) - tau| <= {bt:.2e}",
    ]
    if not fm.converged:
        raise VerificationFailure(
            f"frame iteration did not converge (residual {fm.residual:.3e})"
        )
    return summary


def _run_correlator(args, cfg, out_dir: Path, seed: int):
    result = verification.criterion_correlator(seed)
    _write_csv(out_dir / "correlator.csv", result.columns, result.rows)
    if not result.passed:
        raise VerificationFailure(result.detail)
    return [result.detail]


def _run_verify_all(args, cfg, out_dir: Path, seed: int):
    results, bundle = verification.run_all(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, payload in bundle.items():
        (out_dir / name).write_bytes(payload)
    lines = []
    for r in results:
        lines.append(f"{r.status} {r.key} ({r.runtime_s:.2f}s): {r.detail}")
    failing = [r.key for r in results if not r.passed]
    over_budget = [
        r.key
        for r in results
        if r.key in verification.RUNTIME_BUDGETS
        and r.runtime_s >= verification.RUNTIME_BUDGETS[r.key]
    ]
    lines.append(f"reports written to {out_dir}")
    if failing or over_budget:
        parts = []
        if failing:
            parts.append("failing criteria: " + ", ".join(failing))
        if over_budget:
            parts.append("over runtime budget: " + ", ".join(over_budget))
        raise VerificationFailure("; ".join(parts) + "\n" + "\n".join(lines))
    return lines


_RUNNERS = {
    "flow": _run_flow,
    "virasoro": _run_virasoro,
    "primary": _run_primary,
    "nrlimit": _run_nrlimit,
    "curvature": _run_curvature,
    "frame": _run_frame,
    "correlator": _run_correlator,
    "verify-all": _run_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svflow",
        description="flows, generator algebra, limits, curvature, frames: "
        "compute and verify",
    )
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="INI file with a [run] section")
        p.add_argument("--output", help="directory for CSV reports")
        p.add_argument("--seed", type=int, help="seed for random test points")
        p.add_argument("--abs-tol", dest="abs_tol", type=float)
        p.add_argument("--rel-tol", dest="rel_tol", type=float)
        p.add_argument("--max-steps", dest="max_steps", type=int)

    p = sub.add_parser("flow", help="integrate a flow and check the pushforward")
    p.add_argument("--field", help="semicolon-separated component formulas")
    p.add_argument("--vars", help="comma-separated coordinate names")
    p.add_argument("--point", help="comma-separated start coordinates")
    p.add_argument("--rho", type=float)
    p.add_argument("--charge", help="scalar charge formula (enables phase checks)")
    p.add_argument("--psi", help="test function formula")
    p.add_argument("--order", type=int, help="series oracle order")
    common(p)

    p = sub.add_parser("virasoro", help="bracket residual table")
    p.add_argument("--max-index", dest="max_index", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--m", type=float)
    p.add_argument("--chi", type=float)
    p.add_argument("--N", dest="n_aniso", type=float)
    common(p)

    p = sub.add_parser("primary", help="finite transformation law")
    p.add_argument("--eps", help="eps(t) formula (Laurent polynomial)")
    p.add_argument("--chi", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--N", dest="n_aniso", type=float)
    p.add_argument("--point", help="t,r")
    p.add_argument("--rho", type=float)
    common(p)

    p = sub.add_parser("nrlimit", help="contraction and KG/diffusion identities")
    p.add_argument("--psi", help="psi(t, x) formula; default heat kernel")
    p.add_argument("--m", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--point", help="t,x0,x")
    p.add_argument("--c-values", dest="c_values", help="comma-separated c grid")
    common(p)

    p = sub.add_parser("curvature", help="curvature gates and block-formula report")
    p.add_argument("--metric", help="metric definition file")
    p.add_argument("--points", type=int)
    common(p)

    p = sub.add_parser("frame", help="solve accelerated-frame coordinates")
    p.add_argument("--f", help="worldline formula f(t)")
    p.add_argument("--c", type=float)
    p.add_argument("--grid", help="tmin,tmax,xmin,xmax,nt,nx")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    common(p)

    p = sub.add_parser("correlator", help="half-space correlator checks")
    common(p)

    p = sub.add_parser("verify-all", help="run every acceptance criterion")
    common(p)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig()
        if getattr(args, "config", None):
            cfg = load_config(args.config)
        command = args.command or cfg.command
        if command is None:
            parser.print_usage(sys.stderr)
            print("svflow: error: no subcommand given", file=sys.stderr)
            return 2
        out_dir = Path(_merge(args, cfg, "output", "reports", str))
        seed = _merge(args, cfg, "seed", verification.DEFAULT_SEED, int)
        summary = _RUNNERS[command](args, cfg, out_dir, seed)
    except ConfigError as err:
        print(f"svflow: config error: {err}", file=sys.stderr)
        return 2
    except ParseError as err:
        print(f"svflow: formula error: {err}", file=sys.stderr)
        return 2
    except VerificationFailure as err:
        print(f"svflow: verification FAILED: {err}", file=sys.stderr)
        return 1
    except (
        ExpressionError,
        flowexp.FlowError,
        svgen.EpsilonRootError,
        svgen.NegativeScaleRatioError,
        svgen.ReparametrizationError,
        svgen.CorrelatorSingularityError,
        nrlimit.PhaseOverflowError,
        nrlimit.DegenerateFitError,
        nrlimit.RootOnPathError,
        geomcurv.DegenerateMetricError,
        geomcurv.MetricFileError,
        accframe.SuperluminalError,
        accframe.WorldlineOutsideGridError,
        accframe.FrameInversionError,
        ValueError,
    ) as err:
        print(f"svflow: error: {err}", file=sys.stderr)
        return 1
    for line in summary:
        print(line)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
