# app/experiment_runner.py
"""
Command-line surface: `curve`, `transverse`, `spectrum1d`, `solve2d`,
`asymptotics` and `threshold`. Each command prints its result, writes a CSV
or JSON file under the output directory and a manifest beside it.

Exit status: 0 success, 1 usage error, 2 parameter/geometry/regime error,
3 numerical failure.
"""

import json
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence

import click
import pandas as pd

from app import output_manager
from app.bracketing_asymptotics import (
    asymptotics_study,
    ess_threshold_bound,
    halfwidth_schedule,
)
from app.config import SPECTRAL_OUTPUT_DIR, STRIP_NS, STRIP_NU, TAU_GRID
from app.curve_geometry import (
    CurvatureProfile,
    PlanarCurve,
    circle_curve,
    curve_bounds,
    curve_from_curvature,
    injectivity_halfwidth,
    line_curve,
    profile_from_config,
    smoothness_proxy,
)
from app.data_types import EndCondition, FormSide, TransverseProblem
from app.errors import GeometryError, NumericalError, ParameterError, SpectralError
from app.schrodinger_1d import (
    build_bracket_operator,
    build_comparison_operator,
    default_truncation,
    grid_count,
    lowest_eigenvalues_1d,
)
from app.strip_solver_2d import (
    assemble_form,
    build_strip_grid,
    convergence_study,
    dump_matrix,
    lowest_eigenvalues_2d,
)
from app.transverse_spectrum import (
    in_transverse_regime,
    lemma_trans_envelope,
    solve_transverse,
    transverse_fd_oracle,
)

logger = logging.getLogger("experiment_runner")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARAMETER = 2
EXIT_NUMERICAL = 3

OPERATORS = ("S", "Uplus", "Uminus")
ASYMPTOTICS_COLUMNS = ("beta", "a", "j", "lower", "upper", "prediction", "lambda_minus", "lambda_plus",
                       "lambda_minus_err", "lambda_plus_err", "sandwiched", "residual", "ratio_to_beta_lnbeta")


# -----------------------------------------------------------------------------
# Helpers
# -----------------------------------------------------------------------------
def load_profile(path: str) -> CurvatureProfile:
    try:
        with open(path, "r", encoding="utf-8") as f:
            config = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ParameterError(f"Cannot read curve config {path}: {e}") from e
    if not isinstance(config, dict):
        raise ParameterError("Curve config must be a JSON object", {"path": path})
    return profile_from_config(config)


def planar_curve(profile: CurvatureProfile) -> PlanarCurve:
    if profile.family == "line":
        return line_curve(profile.window)
    if profile.family == "constant" and profile.c > 0:
        return circle_curve(1.0 / profile.c, profile.window)
    return curve_from_curvature(profile)


def _output_path(out: Optional[str], name: str) -> str:
    return out if out else os.path.join(SPECTRAL_OUTPUT_DIR, name)


def _emit_table(ctx: click.Context, out: str, frame: pd.DataFrame,
                profile: Optional[CurvatureProfile], resolved: Dict[str, Any]) -> None:
    click.echo(frame.to_string(index=False))
    _finish(ctx, out, profile, resolved, output_manager.write_frame(out, frame))


def _emit_json(ctx: click.Context, out: str, payload: Dict[str, Any],
               profile: Optional[CurvatureProfile], resolved: Dict[str, Any]) -> None:
    click.echo(output_manager.dumps(payload))
    _finish(ctx, out, profile, resolved, output_manager.write_json(out, payload))


def _finish(ctx: click.Context, out: str, profile: Optional[CurvatureProfile],
            resolved: Dict[str, Any], ok: bool) -> None:
    params = {k: v for k, v in ctx.params.items() if k != "out"}
    params.update(resolved)
    manifest = output_manager.build_manifest(ctx.info_name, params, profile.to_config() if profile else None)
    if ok and output_manager.write_manifest(out, manifest):
        logger.info("Wrote %s and %s", out, output_manager.manifest_path(out))
    else:
        logger.warning("Output for %s was not fully written", ctx.info_name)


def _parse_betas(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise click.BadParameter(f"not a comma-separated list of numbers: {text}") from e


curve_option = click.option("--curve", "curve_path", required=True, type=click.Path(dir_okay=False),
                            help="JSON curve config, e.g. {\"family\": \"gaussian_bump\", \"c\": 1.0}.")
out_option = click.option("--out", default=None, help="Output file (default under SPECTRAL_OUTPUT_DIR).")


# -----------------------------------------------------------------------------
# Commands
# -----------------------------------------------------------------------------
@click.group()
def cli():
    """Strong-coupling spectra of δ′ interactions on planar curves."""


@cli.command()
@curve_option
@out_option
@click.pass_context
def curve(ctx, curve_path, out):
    """Curvature bounds, injectivity half-width and smoothness of a curve."""
    profile = load_profile(curve_path)
    bounds = curve_bounds(profile)
    gamma = planar_curve(profile)
    d = injectivity_halfwidth(gamma)
    h, h2 = smoothness_proxy(gamma)
    payload = {
        "family": profile.family,
        "gamma_plus": bounds.gamma_plus,
        "dgamma_plus": bounds.dgamma_plus,
        "d2gamma_plus": bounds.d2gamma_plus,
        "halfwidth": d,
        "decay_radius": profile.decay_radius(),
        "fourth_difference": [h, h2],
    }
    _emit_json(ctx, _output_path(out, "curve.json"), payload, profile, {})


@cli.command()
@click.option("--a", "a", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--gamma-plus", type=float, default=0.0, show_default=True)
@click.option("--gamma-s", type=float, default=0.0, show_default=True)
@click.option("--bc", type=click.Choice([e.value for e in EndCondition]), default="dirichlet", show_default=True)
@click.option("--oracle", type=int, default=None, help="Also run the finite-element oracle with N elements per side.")
@click.option("--override", is_flag=True, help="Allow a/beta <= 2.")
@out_option
@click.pass_context
def transverse(ctx, a, beta, gamma_plus, gamma_s, bc, oracle, override, out):
    """Negative eigenvalue of the transverse δ′ operator."""
    problem = TransverseProblem(a=a, beta=beta, gamma_s=gamma_s, gamma_plus=gamma_plus, end=EndCondition(bc))
    t = solve_transverse(problem, override=override)
    lower = upper = None
    if in_transverse_regime(a, beta, gamma_plus):
        lower, upper = lemma_trans_envelope(a, beta)
    payload: Dict[str, Any] = {
        "t": t.value,
        "kappa": t.kappa,
        "offset": t.offset,
        "method": t.method,
        "residual": t.residual,
        "envelope_lower": lower,
        "envelope_upper": upper,
    }
    if oracle:
        fd = transverse_fd_oracle(problem, oracle)
        payload["oracle"] = {"t": fd.value, "negative_count": fd.negative_count, "residual": fd.residual}
    _emit_json(ctx, _output_path(out, "transverse.json"), payload, None, {})


@cli.command()
@click.option("--operator", "operator", type=click.Choice(OPERATORS), default="S", show_default=True)
@curve_option
@click.option("--a", "a", type=float, default=None, help="Half-width for Uplus/Uminus.")
@click.option("--k", "k", type=int, default=1, show_default=True)
@click.option("--L", "L", type=float, default=None)
@click.option("--n", "n", type=int, default=None)
@out_option
@click.pass_context
def spectrum1d(ctx, operator, curve_path, a, k, L, n, out):
    """Eigenvalues of S or U± below their essential thresholds."""
    profile = load_profile(curve_path)
    if L is None:
        L, n_default = default_truncation(profile)
        n = n or n_default
    elif n is None:
        n = grid_count(L)
    if operator == "S":
        spec = build_comparison_operator(profile, L, n)
    else:
        if a is None:
            raise click.UsageError("--a is required for Uplus/Uminus")
        sign = "plus" if operator == "Uplus" else "minus"
        spec = build_bracket_operator(sign, profile, curve_bounds(profile), a, L, n)
    result = lowest_eigenvalues_1d(spec, k)
    m = len(result.values)
    frame = pd.DataFrame({
        "j": range(1, m + 1),
        "mu": result.values,
        "err_disc": result.err_disc,
        "err_trunc": result.err_trunc,
        "order": result.orders,
        "multiplicity": result.multiplicities,
    })
    resolved = {"L": L, "n": n, "L_final": result.L, "threshold": result.threshold, "found": m}
    _emit_table(ctx, _output_path(out, f"spectrum1d_{operator}.csv"), frame, profile, resolved)


@cli.command()
@curve_option
@click.option("--beta", type=float, required=True)
@click.option("--a", "a", type=float, default=None, help="Default: the half-width schedule a(beta).")
@click.option("--L", "L", type=float, default=None)
@click.option("--ns", type=int, default=STRIP_NS, show_default=True)
@click.option("--nu", type=int, default=STRIP_NU, show_default=True)
@click.option("--which", type=click.Choice([e.value for e in FormSide]), default="plus", show_default=True)
@click.option("--grading", type=float, default=0.0, show_default=True,
              help="Log ratio of outer to inner u-spacing; 0 keeps the u-grid uniform.")
@click.option("--k", "k", type=int, default=1, show_default=True)
@click.option("--levels", type=int, default=1, show_default=True, help="Refinement levels; >= 3 runs a convergence study.")
@click.option("--dump", "dump", default=None, help="Write the assembled matrices as row col value text.")
@out_option
@click.pass_context
def solve2d(ctx, curve_path, beta, a, L, ns, nu, which, grading, k, levels, dump, out):
    """Lowest eigenvalues of the strip form q⁺ or q⁻."""
    profile = load_profile(curve_path)
    bounds = curve_bounds(profile)
    a = halfwidth_schedule(beta) if a is None else a
    L = default_truncation(profile)[0] if L is None else L
    side = FormSide(which)
    op = assemble_form(profile, a, beta, L, build_strip_grid(L, ns, a, nu, side, grading), side, bounds=bounds)
    if dump:
        dump_matrix(op, dump)
    vals, residuals = lowest_eigenvalues_2d(op, k)
    orders = [math.nan] * k
    extrapolated = [math.nan] * k
    errors = [math.nan] * k
    if levels >= 3:
        report = convergence_study(profile, a, beta, L, ns, nu, side, levels=levels, k=k, bounds=bounds,
                                   grading=grading)
        orders, extrapolated, errors = list(report.orders), list(report.extrapolated), list(report.errors)
    frame = pd.DataFrame({
        "j": range(1, k + 1),
        "lambda": vals,
        "residual": residuals,
        "order_estimate": orders,
        "extrapolated": extrapolated,
        "err_disc": errors,
    })
    _emit_table(ctx, _output_path(out, f"solve2d_{which}.csv"), frame, profile, {"a": a, "L": L})


@cli.command()
@curve_option
@click.option("--betas", default="0.06,0.04,0.02", show_default=True)
@click.option("--k", "k", type=int, default=1, show_default=True)
@click.option("--direct", is_flag=True, help="Also solve q± on the strip.")
@click.option("--ns", type=int, default=STRIP_NS, show_default=True)
@click.option("--nu", type=int, default=STRIP_NU, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--override", is_flag=True, help="Run outside the regime with informational checks.")
@out_option
@click.pass_context
def asymptotics(ctx, curve_path, betas, k, direct, ns, nu, jobs, override, out):
    """Residuals λ_j + 4/β² - μ_j against β|ln β| over a β grid."""
    grid = _parse_betas(betas)
    profile = load_profile(curve_path)
    report = asymptotics_study(profile, grid, k, direct=direct, n_s=ns, n_u=nu, jobs=jobs, override=override)
    rows = []
    for (beta, a, record), ratio in zip(report.records, report.ratios):
        lam_minus, lam_plus = record.lambda_minus_offset, record.lambda_plus_offset
        rows.append({
            "beta": beta,
            "a": a,
            "j": record.j,
            "lower": record.lower,
            "upper": record.upper,
            "prediction": record.prediction,
            "lambda_minus": None if lam_minus is None else record.threshold + lam_minus,
            "lambda_plus": None if lam_plus is None else record.threshold + lam_plus,
            "lambda_minus_err": record.lambda_minus_err,
            "lambda_plus_err": record.lambda_plus_err,
            "sandwiched": record.sandwiched,
            "residual": record.worst_residual(),
            "ratio_to_beta_lnbeta": ratio,
        })
    frame = pd.DataFrame(rows, columns=list(ASYMPTOTICS_COLUMNS))
    resolved = {"C_fit": report.C_fit, "spread": report.spread, "bounded": report.bounded,
                "in_regime": report.in_regime}
    _emit_table(ctx, _output_path(out, "asymptotics.csv"), frame, profile, resolved)


@cli.command()
@curve_option
@click.option("--beta", type=float, required=True)
@click.option("--tau", type=float, default=float(TAU_GRID[-1]), show_default=True)
@click.option("--a", "a", type=float, default=None, help="Default: the half-width schedule a(beta).")
@out_option
@click.pass_context
def threshold(ctx, curve_path, beta, tau, a, out):
    """Certified lower bound of the essential spectrum."""
    profile = load_profile(curve_path)
    bound = ess_threshold_bound(profile, beta, tau, a)
    payload = {
        "beta": bound.beta,
        "a": bound.a,
        "tau": bound.tau,
        "v_tau": bound.v_tau,
        "bound": bound.value,
        "offset": bound.offset,
        "certified": bound.certified,
        "certified_offset": bound.certified_offset,
        "certified_tau": bound.certified_tau,
        "ratio_to_threshold": bound.certified * bound.beta ** 2 / -4.0,
    }
    _emit_json(ctx, _output_path(out, "threshold.json"), payload, profile, {"a": bound.a})


# -----------------------------------------------------------------------------
# Entry point
# -----------------------------------------------------------------------------
def run(argv: Optional[Sequence[str]] = None) -> int:
    """Dispatch argv to a command and map failures onto exit codes."""
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="spectral", standalone_mode=False)
    except click.exceptions.Abort:
        logger.error("Aborted")
        return EXIT_USAGE
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except (ParameterError, GeometryError) as e:
        logger.error("Parameter error: %s", e)
        return EXIT_PARAMETER
    except NumericalError as e:
        logger.error("Numerical failure: %s", e)
        return EXIT_NUMERICAL
    except SpectralError:
        logger.exception("Unexpected toolkit error")
        return EXIT_NUMERICAL
    return EXIT_OK
