"""Command-line interface: structured JSON/CSV reports for every subsystem.

Exit codes: 0 success, 2 usage/validation failure, 3 a mathematical
identity violated its tolerance.  Output bytes are deterministic for a
fixed argument list and seed (no timestamps), so reports can be diffed
in CI.
"""

from __future__ import annotations

import argparse
import random
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import laplacian as lap
from . import decimation as dec
from . import eigenfunction as eig
from . import julia as jul
from . import spectral as spec
from .serialize import make_report, render_csv, render_json


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation: parameter, subcommand, bounds, output routing."""

    command: str
    p_text: str
    p: Fraction
    exact: bool
    fmt: str
    output: str | None
    seed: int
    argv: tuple


def _positive_fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"cannot parse p = {text!r}") from exc
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"p must lie in (0,1), got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pq-spectra",
        description="Spectral decimation and Julia-set spectra for the "
                    "self-similar pq Laplacian on the half-line.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--p", required=True, type=_positive_fraction,
                        metavar="P", help="weight in (0,1); fraction strings "
                        "like 1/3 are exact")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--output", "-o", default=None,
                        help="write the report here instead of stdout")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for randomized sweeps")
        sp.add_argument("--exact", action="store_true",
                        help="exact rational arithmetic where supported")

    sp = sub.add_parser("matrix", help="truncated operator rows")
    common(sp)
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--boundary", choices=(lap.REFLECTING, lap.DIRICHLET),
                    default=lap.REFLECTING)
    sp.add_argument("--symmetrized", action="store_true")

    sp = sub.add_parser("measure", help="symmetrizing measure pi(0..N)")
    common(sp)
    sp.add_argument("--sites", type=int, default=27)

    sp = sub.add_parser("decimation-check",
                        help="Schur-complement identity residuals")
    common(sp)
    sp.add_argument("--level", type=int, default=2)
    sp.add_argument("--z", type=float, default=None,
                    help="single spectral parameter; omit to sample")
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--tol", type=float, default=1e-10)

    sp = sub.add_parser("julia", help="interval cover of the Julia set")
    common(sp)
    sp.add_argument("--level", type=int, default=4)

    sp = sub.add_parser("orbit", help="backward orbit of a seed point")
    common(sp)
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--seed-point", type=float, default=0.0)

    sp = sub.add_parser("spectrum", help="eigenvalues of a truncation")
    common(sp)
    sp.add_argument("--level", type=int, default=3)
    sp.add_argument("--boundary", choices=(lap.REFLECTING, lap.DIRICHLET),
                    default=lap.REFLECTING)

    sp = sub.add_parser("eigenfunction", help="formal eigenfunction trace")
    common(sp)
    sp.add_argument("--z", type=str, default="1/2",
                    help="spectral parameter (fraction string allowed)")
    sp.add_argument("--sites", type=int, default=243)

    sp = sub.add_parser("dimension", help="spectral dimension three ways")
    common(sp)
    sp.add_argument("--max-level", type=int, default=6)

    sp = sub.add_parser("gaps", help="spectral gaps from the cover")
    common(sp)
    sp.add_argument("--level", type=int, default=4)

    sp = sub.add_parser("verify-all", help="run every identity check")
    common(sp)
    sp.add_argument("--samples", type=int, default=8)
    sp.add_argument("--max-level", type=int, default=4)
    sp.add_argument("--tol", type=float, default=1e-10)

    return parser


def _config(ns) -> RunConfig:
    return RunConfig(command=ns.command, p_text=str(ns.p), p=ns.p,
                     exact=bool(ns.exact), fmt=ns.format, output=ns.output,
                     seed=int(ns.seed), argv=())


def _params(cfg: RunConfig) -> lap.PqParams:
    return lap.PqParams(cfg.p if cfg.exact else float(cfg.p))


def _param_block(cfg: RunConfig) -> dict:
    return {"p": cfg.p_text, "p_float": float(cfg.p), "exact": cfg.exact,
            "seed": cfg.seed}


def _maybe_float(v):
    if v is None:
        return None
    return v if isinstance(v, Fraction) else float(v)


# --- subcommand handlers: each returns (data, columns, rows, failed) ---


def _cmd_matrix(cfg, ns):
    params = _params(cfg)
    op = lap.build_truncation(params, ns.level, ns.boundary)
    if ns.symmetrized:
        pi = lap.invariant_measure(params, op.size - 1)
        op = lap.symmetrize(op, pi)
    sub = [None] + [_maybe_float(v) for v in op.sub[1:]]
    sup = [_maybe_float(v) for v in op.sup[:-1]] + [None]
    diag = [_maybe_float(v) for v in op.diag]
    data = {"level": ns.level, "boundary": op.boundary_right,
            "size": op.size, "symmetrized": bool(ns.symmetrized),
            "diag": diag, "sub": sub, "sup": sup}
    rows = [[x, sub[x], diag[x], sup[x]] for x in range(op.size)]
    return data, ["site", "sub", "diag", "sup"], rows, False


def _cmd_measure(cfg, ns):
    if ns.sites < 1:
        raise ValueError("--sites must be at least 1")
    params = _params(cfg)
    pi = lap.invariant_measure(params, ns.sites)
    floats = pi.as_floats()
    fwd = np.array([-float(lap.row_coefficients(params, x)[2])
                    for x in range(ns.sites)])
    back = np.array([-float(lap.row_coefficients(params, x + 1)[0])
                     for x in range(ns.sites)])
    balance = float(np.max(np.abs(floats[:-1] * fwd - floats[1:] * back)))
    limit = ns.sites // 3
    triple = float(np.max(np.abs(floats[1:limit + 1] - floats[3:3 * limit + 1:3]))) \
        if limit >= 1 else 0.0
    values = list(pi.values) if cfg.exact else [float(v) for v in pi.values]
    data = {"sites": ns.sites, "values": values,
            "detailed_balance_max_residual": balance,
            "triple_identity_max_residual": triple}
    rows = [[x, values[x]] for x in range(len(values))]
    return data, ["site", "pi"], rows, False


def _sample_z(params, rng, samples):
    hi, lo = (float(v) for v in params.exceptional)
    out = []
    while len(out) < samples:
        z = rng.uniform(0.0, 2.0)
        if min(abs(z - hi), abs(z - lo)) > 1e-3:
            out.append(z)
    return out


def _cmd_decimation_check(cfg, ns):
    if ns.level < 1:
        raise ValueError("--level must be at least 1")
    params = _params(cfg).as_float()
    rng = random.Random(cfg.seed)
    zs = [ns.z] if ns.z is not None else _sample_z(params, rng, ns.samples)
    checks = []
    worst = 0.0
    for z in zs:
        rep = dec.verify_decimation_identity(params, ns.level, z)
        worst = max(worst, rep.interior_max)
        checks.append({"z": rep.z, "interior_residual": rep.interior_max,
                       "boundary_residual": rep.boundary_max,
                       "r_of_z": rep.r_of_z, "weight": rep.weight})
    passed = worst < ns.tol
    data = {"level": ns.level, "tolerance": ns.tol, "checks": checks,
            "max_interior_residual": worst, "passed": passed}
    rows = [[c["z"], ns.level, c["interior_residual"], c["boundary_residual"]]
            for c in checks]
    cols = ["z", "level", "interior_residual", "boundary_residual"]
    return data, cols, rows, not passed


def _cmd_julia(cfg, ns):
    params = _params(cfg).as_float()
    cover = jul.julia_cover(dec.decimation_map(params), ns.level)
    data = {"level": cover.level, "count": len(cover.intervals),
            "total_length": cover.total_length,
            "intervals": [[float(a), float(b)] for a, b in cover.intervals],
            "gaps": [[float(a), float(b)] for a, b in cover.gaps]}
    rows = [[float(a), float(b)] for a, b in cover.intervals]
    return data, ["left", "right"], rows, False


def _cmd_orbit(cfg, ns):
    params = _params(cfg).as_float()
    cubic = dec.decimation_map(params)
    orbit = jul.backward_orbit(cubic, ns.seed_point, ns.depth)
    forward = np.array([float(cubic.iterate(z, ns.depth))
                        for z in orbit.points])
    resid = float(np.max(np.abs(forward - orbit.seed))) if len(forward) else 0.0
    data = {"seed": orbit.seed, "depth": orbit.level,
            "count": int(orbit.points.size),
            "points": [float(z) for z in orbit.points],
            "max_forward_residual": resid}
    rows = [[float(z)] for z in orbit.points]
    return data, ["point"], rows, False


def _cmd_spectrum(cfg, ns):
    params = _params(cfg).as_float()
    if ns.boundary == lap.REFLECTING:
        approx = spec.spectrum_approximation(params, ns.level)
        eigs = approx.eigenvalues
        extras = {"hausdorff_to_cover": approx.hausdorff_to_cover,
                  "hausdorff_to_orbit": approx.hausdorff_to_orbit}
    else:
        op = lap.build_truncation(params, ns.level, lap.DIRICHLET)
        pi = lap.invariant_measure(params, op.size - 1)
        eigs = spec.tridiag_eigenvalues(lap.symmetrize(op, pi))
        extras = {}
    data = {"level": ns.level, "boundary": ns.boundary,
            "count": int(len(eigs)),
            "eigenvalues": [float(v) for v in eigs], **extras}
    rows = [[i, float(v)] for i, v in enumerate(eigs)]
    return data, ["index", "eigenvalue"], rows, False


def _cmd_eigenfunction(cfg, ns):
    try:
        z_frac = Fraction(ns.z)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse z = {ns.z!r}") from exc
    params = _params(cfg)
    z = z_frac if cfg.exact else float(z_frac)
    trace = eig.extend_formal_eigenfunction(params, z, ns.sites)
    cubic = dec.decimation_map(params if trace.exact else params.as_float())
    power = eig.trace_at_powers_of_three(trace, cubic)
    pi = lap.invariant_measure(params.as_float(), ns.sites)
    float_trace = trace if not trace.exact else \
        eig.extend_formal_eigenfunction(params.as_float(), float(z), ns.sites)
    report = eig.norm_divergence_report(float_trace, pi)
    values = list(trace.values) if trace.exact else \
        [float(v) for v in trace.values]
    power_rows = [{"n": n, "site": 3 ** n,
                   "value": trace.power_trace[n] if trace.exact
                   else float(trace.power_trace[n]),
                   "expected": power.expected[n] if trace.exact
                   else float(power.expected[n]),
                   "residual": float(power.residuals[n]),
                   "flagged": bool(power.flagged[n])}
                  for n in range(len(trace.power_trace))]
    data = {"z": str(z_frac), "z_float": float(z_frac), "sites": ns.sites,
            "values": values,
            "power_trace": power_rows,
            "l2_final": float(float_trace.l2_partials[-1]),
            "l2pi_final": float(float_trace.l2pi_partials[-1]),
            "divergence": {
                "pi_at_powers": [float(v) for v in report.pi_at_powers],
                "pi_constant": report.pi_constant,
                "min_abs_f_at_powers": report.min_abs_f,
                "non_cauchy_l2": report.non_cauchy_l2,
                "non_cauchy_l2pi": report.non_cauchy_l2pi}}
    l2f = [float(v) for v in float_trace.l2_partials]
    l2pf = [float(v) for v in float_trace.l2pi_partials]
    rows = [[x, float(float_trace.values[x]), l2f[x], l2pf[x]]
            for x in range(ns.sites + 1)]
    return data, ["site", "value", "l2_partial", "l2pi_partial"], rows, False


def _cmd_dimension(cfg, ns):
    params = _params(cfg).as_float()
    report = spec.spectral_dimension(params, ns.max_level)
    lam_rows = []
    for i, (lvl, lam) in enumerate(zip(report.fit_levels,
                                       report.lambda1_values)):
        ratio = (report.lambda1_values[i] / report.lambda1_values[i + 1]
                 if i + 1 < len(report.lambda1_values) else None)
        lam_rows.append({"level": lvl, "lambda1": lam, "ratio_to_next": ratio})
    data = {"max_level": ns.max_level,
            "ds_formula": report.ds_formula,
            "ds_volume_balance": report.ds_volume_balance,
            "ds_empirical": report.ds_empirical,
            "formula_vs_balance": report.formula_vs_balance,
            "empirical_vs_formula": report.empirical_vs_formula,
            "derivative_at_zero": 1.0 + 2.0 / float(params.pq),
            "lambda1": lam_rows}
    rows = [[report.ds_formula, report.ds_volume_balance,
             report.ds_empirical, report.formula_vs_balance]]
    cols = ["ds_formula", "ds_volume_balance", "ds_empirical",
            "formula_vs_balance"]
    return data, cols, rows, False


def _cmd_gaps(cfg, ns):
    params = _params(cfg).as_float()
    gaps = spec.gap_report(params, ns.level)
    data = {"level": ns.level, "count": len(gaps),
            "gaps": [{"left": g.left, "right": g.right, "length": g.length}
                     for g in gaps]}
    rows = [[g.left, g.right, g.length] for g in gaps]
    return data, ["left", "right", "length"], rows, False


def _containment_defect(eigs: np.ndarray, intervals: np.ndarray) -> float:
    worst = 0.0
    for z in eigs:
        inside = np.min(np.maximum(intervals[:, 0] - z, z - intervals[:, 1]))
        worst = max(worst, float(max(inside, 0.0)))
    return worst


def _cmd_verify_all(cfg, ns):
    params = _params(cfg).as_float()
    rng = random.Random(cfg.seed)
    cubic = dec.decimation_map(params)
    checks = []

    worst = 0.0
    for level in (1, 2, 3):
        for z in _sample_z(params, rng, ns.samples):
            worst = max(worst,
                        dec.verify_decimation_identity(params, level, z)
                        .interior_max)
    checks.append({"name": "decimation_identity", "observed": worst,
                   "tolerance": ns.tol, "passed": worst < ns.tol})

    defect = 0.0
    closure = 0.0
    for level in range(1, ns.max_level + 1):
        approx = spec.spectrum_approximation(params, level)
        cover = jul.julia_cover(cubic, level)
        defect = max(defect,
                     _containment_defect(approx.eigenvalues, cover.intervals))
        closure = max(closure,
                      spec.decimation_closure_check(params, level).max_distance)
    checks.append({"name": "spectral_containment", "observed": defect,
                   "tolerance": 1e-8, "passed": defect < 1e-8})
    checks.append({"name": "spectral_closure", "observed": closure,
                   "tolerance": 1e-8, "passed": closure < 1e-8})

    dim = spec.spectral_dimension(params, 2)
    checks.append({"name": "dimension_consistency",
                   "observed": dim.formula_vs_balance,
                   "tolerance": 1e-12,
                   "passed": dim.formula_vs_balance < 1e-12})

    extent = 3 ** 5
    pi = lap.invariant_measure(params, extent)
    floats = pi.as_floats()
    fwd = np.array([-float(lap.row_coefficients(params, x)[2])
                    for x in range(extent)])
    back = np.array([-float(lap.row_coefficients(params, x + 1)[0])
                     for x in range(extent)])
    balance = float(np.max(np.abs(floats[:-1] * fwd - floats[1:] * back)))
    exact_pi = lap.invariant_measure(lap.PqParams(cfg.p), extent)
    triple_ok = all(exact_pi.values[x] == exact_pi.values[3 * x]
                    for x in range(1, extent // 3 + 1))
    measure_ok = balance < 1e-12 and triple_ok
    checks.append({"name": "measure_identity", "observed": balance,
                   "tolerance": 1e-12, "passed": measure_ok,
                   "triple_identity_exact": triple_ok})

    all_passed = all(c["passed"] for c in checks)
    data = {"max_level": ns.max_level, "samples": ns.samples,
            "checks": checks, "all_passed": all_passed}
    rows = [[c["name"], c["passed"], c["observed"], c["tolerance"]]
            for c in checks]
    return data, ["check", "passed", "observed", "tolerance"], rows, not all_passed


_HANDLERS = {
    "matrix": _cmd_matrix,
    "measure": _cmd_measure,
    "decimation-check": _cmd_decimation_check,
    "julia": _cmd_julia,
    "orbit": _cmd_orbit,
    "spectrum": _cmd_spectrum,
    "eigenfunction": _cmd_eigenfunction,
    "dimension": _cmd_dimension,
    "gaps": _cmd_gaps,
    "verify-all": _cmd_verify_all,
}


def run(argv=None) -> int:
    """Execute one subcommand; returns the process exit code."""
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = _config(ns)
    try:
        data, columns, rows, failed = _HANDLERS[cfg.command](cfg, ns)
    except (ValueError, NotImplementedError) as exc:
        print(f"pq-spectra: error: {exc}", file=sys.stderr)
        return 2
    if cfg.fmt == "json":
        text = render_json(make_report(cfg.command, _param_block(cfg), data))
    else:
        text = render_csv(columns, rows,
                          "pq-spectra " + " ".join(argv))
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 3 if failed else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
