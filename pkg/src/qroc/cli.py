"""Command-line interface: fit, roc, thresholds, simulate.

Every command is deterministic given its input files, flags, and seed.
Exit codes: 0 success, 2 parse errors (including bad usage), 3
validation errors, 4 solver failures, 5 inference failures.
"""

import csv
import functools
import json
import os
import sys
from dataclasses import dataclass

import click
import numpy as np

from .data import BiomarkerDataset, CaseSample, ControlSample, load_csv
from .errors import (InferenceError, ParseError, SolverError, ValidationError)
from .inference import (bootstrap_variance, confidence_band, pointwise_ci,
                        sample_variance)
from .monotone import monotonize_path, monotonize_roc
from .qreg import fit_path, fit_quantile
from .roc import (adjusted_roc, covariate_thresholds, pooled_specificity,
                  swap_roles, unadjusted_roc)
from .simulate import ScenarioConfig, run_scenario
from .svgplot import Series, svg_plot

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_INFERENCE = 5

ESTIMATOR_CHOICES = ("raw", "reg-monotone", "roc-monotone")


@dataclass(frozen=True)
class RunConfig:
    """Parsed options shared by the analysis commands."""

    direction: str = "spec-at-sens"
    rho0: tuple = (0.95, 0.90, 0.85, 0.80)
    rho_lo: float = None
    rho_hi: float = None
    estimators: tuple = ESTIMATOR_CHOICES
    n_boot: int = 1000
    level: float = 0.95
    band: bool = False
    band_grid: tuple = None
    band_center: str = "raw"
    outdir: str = "."
    seed: int = None

    def __post_init__(self):
        for r in self.rho0:
            if not 0.0 < r < 1.0:
                raise ValidationError(f"rho0 must be in (0, 1), got {r}")
        if not 0.0 < self.level < 1.0:
            raise ValidationError(f"level must be in (0, 1), got {self.level}")
        if self.direction not in ("spec-at-sens", "sens-at-spec"):
            raise ValidationError(f"unknown direction {self.direction!r}")
        bad = set(self.estimators) - set(ESTIMATOR_CHOICES)
        if bad or not self.estimators:
            raise ValidationError(
                f"estimators must be a non-empty subset of {ESTIMATOR_CHOICES}")


def _fail(msg, code):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ParseError as exc:
            _fail(exc, EXIT_PARSE)
        except ValidationError as exc:
            _fail(exc, EXIT_VALIDATION)
        except SolverError as exc:
            _fail(exc, EXIT_SOLVER)
        except InferenceError as exc:
            _fail(exc, EXIT_INFERENCE)
    return wrapper


def _data_options(fn):
    opts = [
        click.option("--status-col", default="status", show_default=True,
                     help="Column with 1=case, 0=control."),
        click.option("--marker-col", default="marker", show_default=True,
                     help="Biomarker column."),
        click.option("--covariates", default=None, metavar="COLS",
                     help="Comma-separated covariate columns "
                          "[default: every other column]."),
        click.option("--factor", "factors", multiple=True, metavar="COL",
                     help="Treat this covariate as categorical "
                          "(one-hot, first level dropped). Repeatable."),
        click.option("--direction",
                     type=click.Choice(["spec-at-sens", "sens-at-spec"]),
                     default="spec-at-sens", show_default=True,
                     help="Control sensitivity and report specificity, "
                          "or the reverse (roles swapped internally)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _csv_header(path):
    try:
        with open(path, newline="") as fh:
            row = next(csv.reader(fh), None)
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from None
    if not row:
        raise ParseError(f"{path}: empty file")
    return [c.strip() for c in row]


def _load_dataset(path, status_col, marker_col, covariates, factors,
                  direction):
    if covariates is None:
        cov_cols = [c for c in _csv_header(path)
                    if c not in (status_col, marker_col)]
    else:
        cov_cols = [c.strip() for c in covariates.split(",") if c.strip()]
    ds = load_csv(path, status_col=status_col, marker_col=marker_col,
                  covariate_cols=cov_cols, factor_cols=list(factors))
    if ds.n_dropped:
        click.echo(f"note: dropped {ds.n_dropped} rows with missing values",
                   err=True)
    if direction == "sens-at-spec":
        ds = swap_roles(ds)
    return ds


def _write_report(outdir, payload):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "report.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_table(path, header, columns):
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v
                        for v in (c.item() for c in row)])


def _parse_grid(text):
    """lo:hi[:step] -> increasing grid array."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValidationError(f"grid must be lo:hi or lo:hi:step, got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ValidationError(f"non-numeric grid component in {text!r}") from None
    lo, hi = vals[0], vals[1]
    step = vals[2] if len(vals) == 3 else 0.01
    if not (lo < hi and step > 0):
        raise ValidationError(f"grid {text!r} must have lo < hi and step > 0")
    n = int(round((hi - lo) / step))
    g = lo + step * np.arange(n + 1)
    return np.round(g[g <= hi + 1e-9], 12)


@click.group()
def main():
    """Covariate-adjusted specificity at controlled sensitivity."""


# ---------------------------------------------------------------- fit

def cmd_fit(dataset, config):
    """Estimates, SEs, and CIs at each requested sensitivity level."""
    cases, controls = dataset.cases, dataset.controls
    need_path = any(e != "raw" for e in config.estimators)
    path = mono_reg = mono_roc = None
    if need_path:
        path = fit_path(cases)
        if "reg-monotone" in config.estimators:
            mono_reg = monotonize_path(path, cases)
        if "roc-monotone" in config.estimators:
            mono_roc = monotonize_roc(adjusted_roc(path, controls))
    strip_cases = CaseSample(cases.markers, np.zeros((cases.n, 0)))
    strip_controls = ControlSample(controls.markers,
                                   np.zeros((controls.n, 0)))
    Z0, m0 = controls.design, controls.markers
    results = []
    for k, rho0 in enumerate(config.rho0):
        warm = path.beta_at(rho0) if path is not None else None
        sol = fit_quantile(cases, rho0, _warm_beta=warm)
        sv = sample_variance(dataset, rho0, solution=sol)
        bseed = np.random.SeedSequence(entropy=config.seed, spawn_key=(k,))
        bv = bootstrap_variance(dataset, rho0, seed=bseed,
                                n_boot=config.n_boot, solution=sol)
        phi_n = pooled_specificity(
            strip_controls, fit_quantile(strip_cases, rho0)).phi
        entry = {
            "rho0": rho0,
            "beta": [float(v) for v in sol.beta],
            "interpolated": sol.interpolated,
            "phi_unadjusted": phi_n,
            "se": {"sample": sv.se_phi, "bootstrap": bv.se_phi},
            "estimates": {},
        }
        for est in config.estimators:
            if est == "raw":
                phi = pooled_specificity(controls, sol).phi
            elif est == "reg-monotone":
                phi = float(np.mean(m0 <= Z0 @ mono_reg.beta_at(rho0)))
            else:
                phi = float(mono_roc.evaluate(rho0))
            block = {"phi": phi}
            for name, se in (("sample", sv.se_phi), ("bootstrap", bv.se_phi)):
                ci = pointwise_ci(phi, se, level=config.level)
                block[name] = {
                    "wald": [ci.wald[0], ci.wald[1]],
                    "logit": [ci.logit[0], ci.logit[1]],
                    "logit_defined": ci.logit_defined,
                }
            entry["estimates"][est] = block
        results.append(entry)
    return {
        "command": "fit",
        "direction": config.direction,
        "marker": dataset.marker_name,
        "covariates": list(dataset.covariate_names),
        "n_cases": cases.n,
        "n_controls": controls.n,
        "n_dropped": dataset.n_dropped,
        "level": config.level,
        "n_boot": config.n_boot,
        "seed": config.seed,
        "results": results,
    }


def _print_fit(report):
    level = report["level"]
    ests = list(report["results"][0]["estimates"])
    target = ("specificity" if report["direction"] == "spec-at-sens"
              else "sensitivity")
    click.echo(f"Estimated {target} with {level:.0%} logit CIs (sample SE)")
    head = f"{'rho0':>6} {'unadj':>7}"
    for est in ests:
        head += f"  {est:<28}"
    click.echo(head)
    for row in report["results"]:
        line = f"{row['rho0']:>6g} {row['phi_unadjusted']:>7.3f}"
        for est in ests:
            blk = row["estimates"][est]
            lo, hi = blk["sample"]["logit"]
            cell = f"{blk['phi']:.3f} ({lo:.3f}, {hi:.3f})"
            line += f"  {cell:<28}"
        click.echo(line)
    click.echo("")
    click.echo(f"{'rho0':>6} {'SE(sample)':>12} {'SE(bootstrap)':>14}")
    for row in report["results"]:
        click.echo(f"{row['rho0']:>6g} {row['se']['sample']:>12.4f} "
                   f"{row['se']['bootstrap']:>14.4f}")


@main.command("fit")
@click.argument("data_csv", type=click.Path())
@_data_options
@click.option("--rho0", multiple=True, type=float,
              help="Controlled level; repeatable "
                   "[default: 0.95 0.90 0.85 0.80].")
@click.option("--estimators", default="raw,reg-monotone,roc-monotone",
              show_default=True, help="Comma-separated subset of "
              "raw,reg-monotone,roc-monotone.")
@click.option("--boot", default=1000, show_default=True,
              help="Bootstrap resamples for the bootstrap SE.")
@click.option("--level", default=0.95, show_default=True,
              help="Confidence level.")
@click.option("--seed", type=int, required=True,
              help="Seed for the bootstrap resampling.")
@click.option("--out", default=".", show_default=True,
              help="Output directory.")
@_cli_errors
def fit_command(data_csv, status_col, marker_col, covariates, factors,
                direction, rho0, estimators, boot, level, seed, out):
    """Fit thresholds at controlled levels and report estimates with CIs."""
    dataset = _load_dataset(data_csv, status_col, marker_col, covariates,
                            factors, direction)
    config = RunConfig(
        direction=direction,
        rho0=tuple(rho0) if rho0 else (0.95, 0.90, 0.85, 0.80),
        estimators=tuple(e.strip() for e in estimators.split(",") if e.strip()),
        n_boot=boot,
        level=level,
        outdir=out,
        seed=seed,
    )
    report = cmd_fit(dataset, config)
    path = _write_report(out, report)
    _print_fit(report)
    click.echo(f"\nwrote {path}")


# ---------------------------------------------------------------- roc

def cmd_roc(dataset, config):
    """Adjusted, unadjusted, and monotonized curves plus optional band."""
    cases, controls = dataset.cases, dataset.controls
    path = fit_path(cases, rho_lo=config.rho_lo, rho_hi=config.rho_hi)
    step = adjusted_roc(path, controls)
    mono_reg = monotonize_path(path, cases)
    Z0, m0 = controls.design, controls.markers
    reg_betas = np.atleast_2d(mono_reg.beta_at(step.rho))
    phi_reg = np.array([float(np.mean(m0 <= Z0 @ b)) for b in reg_betas])
    mroc = monotonize_roc(step)
    phi_roc = np.asarray(mroc.evaluate(step.rho))
    unadj = unadjusted_roc(dataset, rho_lo=config.rho_lo,
                           rho_hi=config.rho_hi)
    band = None
    if config.band:
        band = confidence_band(
            dataset,
            seed=np.random.SeedSequence(entropy=config.seed, spawn_key=(0,)),
            grid=config.band_grid,
            n_boot=config.n_boot,
            level=config.level,
            center=config.band_center,
        )
    report = {
        "command": "roc",
        "direction": config.direction,
        "marker": dataset.marker_name,
        "covariates": list(dataset.covariate_names),
        "n_cases": cases.n,
        "n_controls": controls.n,
        "n_dropped": dataset.n_dropped,
        "path": {
            "rho_lo": path.rho_lo,
            "rho_hi": path.rho_hi,
            "n_segments": path.n_segments,
            "fallback_grid": path.fallback_grid,
        },
        "monotone": {
            "reg_rejected": mono_reg.n_rejected,
            "roc_rejected": mroc.n_rejected,
        },
        "band": None if band is None else {
            "eta": band.eta,
            "level": band.level,
            "n_boot": band.n_boot,
            "center": band.method,
            "n_excluded": len(band.excluded),
            "n_redrawn": band.n_redrawn,
            "seed": config.seed,
        },
    }
    return report, step, phi_reg, phi_roc, unadj, band


def _roc_svg(outdir, target, step, phi_reg, phi_roc, unadj, band):
    def rev(rho, phi):
        return tuple(1.0 - np.asarray(rho)[::-1]), tuple(np.asarray(phi)[::-1])

    series = []
    x, y = rev(unadj.rho, unadj.phi)
    series.append(Series(x, y, "unadjusted", "#000000", kind="step"))
    x, y = rev(step.rho, step.phi)
    series.append(Series(x, y, "adjusted", "#1f77b4", kind="step"))
    x, y = rev(step.rho, phi_reg)
    series.append(Series(x, y, "reg-monotone", "#d62728"))
    x, y = rev(step.rho, phi_roc)
    series.append(Series(x, y, "roc-monotone", "#9467bd"))
    band_poly = None
    if band is not None:
        bx = tuple(1.0 - band.grid[::-1])
        band_poly = (bx, tuple(band.lower[::-1]), tuple(band.upper[::-1]))
    path = os.path.join(outdir, "roc.svg")
    svg_plot(path, series,
             xlabel=f"1 - {target}",
             ylabel="specificity" if target == "sensitivity" else "sensitivity",
             xlim=(0.0, 1.0), ylim=(0.0, 1.0), band=band_poly)
    return path


@main.command("roc")
@click.argument("data_csv", type=click.Path())
@_data_options
@click.option("--rho-lo", type=float, default=None,
              help="Lower end of the sensitivity range [default: data-driven].")
@click.option("--rho-hi", type=float, default=None,
              help="Upper end of the sensitivity range [default: data-driven].")
@click.option("--band/--no-band", default=False,
              help="Also compute a simultaneous confidence band.")
@click.option("--band-grid", default=None, metavar="LO:HI[:STEP]",
              help="Band grid [default: 0.1:0.9:0.01 clipped to the domain].")
@click.option("--center", type=click.Choice(["raw", "reg-monotone",
                                             "roc-monotone"]),
              default="raw", show_default=True, help="Band center curve.")
@click.option("--boot", default=1000, show_default=True,
              help="Bootstrap resamples for the band.")
@click.option("--level", default=0.95, show_default=True,
              help="Band confidence level.")
@click.option("--seed", type=int, default=None,
              help="Seed; required with --band.")
@click.option("--out", default=".", show_default=True,
              help="Output directory.")
@_cli_errors
def roc_command(data_csv, status_col, marker_col, covariates, factors,
                direction, rho_lo, rho_hi, band, band_grid, center, boot,
                level, seed, out):
    """Trace the covariate-adjusted curve and write CSV/SVG artifacts."""
    if band and seed is None:
        raise click.UsageError("--seed is required when --band is set")
    dataset = _load_dataset(data_csv, status_col, marker_col, covariates,
                            factors, direction)
    config = RunConfig(
        direction=direction,
        rho_lo=rho_lo,
        rho_hi=rho_hi,
        band=band,
        band_grid=None if band_grid is None else _parse_grid(band_grid),
        band_center=center,
        n_boot=boot,
        level=level,
        outdir=out,
        seed=seed,
    )
    report, step, phi_reg, phi_roc, unadj, best = cmd_roc(dataset, config)
    os.makedirs(out, exist_ok=True)
    files = []
    for name, rho, phi in (
            ("roc_step.csv", step.rho, step.phi),
            ("roc_mono_reg.csv", step.rho, phi_reg),
            ("roc_mono_roc.csv", step.rho, phi_roc),
            ("roc_unadjusted.csv", unadj.rho, unadj.phi)):
        p = os.path.join(out, name)
        _write_table(p, ["rho", "phi"], [np.asarray(rho, dtype=np.float64),
                                         np.asarray(phi, dtype=np.float64)])
        files.append(p)
    if best is not None:
        p = os.path.join(out, "band.csv")
        _write_table(p, ["rho", "center", "se", "lower", "upper"],
                     [best.grid, best.center, best.se, best.lower, best.upper])
        files.append(p)
    target = ("sensitivity" if config.direction == "spec-at-sens"
              else "specificity")
    files.append(_roc_svg(out, target, step, phi_reg, phi_roc, unadj, best))
    report["files"] = [os.path.basename(f) for f in files]
    files.insert(0, _write_report(out, report))
    click.echo(f"path: {report['path']['n_segments']} segments on "
               f"[{report['path']['rho_lo']:.4g}, "
               f"{report['path']['rho_hi']:.4g}]")
    if best is not None:
        click.echo(f"band: eta={best.eta:.4f} over {best.grid.size} points")
    for f in files:
        click.echo(f"wrote {f}")


# ---------------------------------------------------------- thresholds

def cmd_thresholds(dataset, rho0, sweep, fixed, by, lo, hi, points):
    """Threshold table over one covariate, others held fixed."""
    names = list(dataset.covariate_names)
    if sweep not in names:
        raise ValidationError(f"unknown covariate {sweep!r}; have {names}")
    if by is not None:
        if by not in names:
            raise ValidationError(f"unknown covariate {by!r}; have {names}")
        if by == sweep:
            raise ValidationError("--by must name a different covariate "
                                  "than the sweep")
    unknown = set(fixed) - set(names)
    if unknown:
        raise ValidationError(f"--at names unknown covariates: "
                              f"{sorted(unknown)}")
    for nm in (sweep, by):
        if nm in fixed:
            raise ValidationError(f"{nm!r} is swept or grouped; "
                                  "do not also fix it with --at")
    cases = dataset.cases
    sol = fit_quantile(cases, rho0)
    j = names.index(sweep)
    col = cases.covariates[:, j]
    obs_lo, obs_hi = float(col.min()), float(col.max())
    if lo is None:
        lo = obs_lo
    if hi is None:
        hi = obs_hi
    if not lo <= hi:
        raise ValidationError(f"sweep range [{lo}, {hi}] is empty")
    xs = np.linspace(lo, hi, points) if lo < hi else np.array([lo])
    extrapolated = (xs < obs_lo - 1e-12) | (xs > obs_hi + 1e-12)
    fixed_at = {}
    for i, nm in enumerate(names):
        if nm in (sweep, by):
            continue
        fixed_at[nm] = float(fixed.get(nm, cases.covariates[:, i].mean()))
    if by is None:
        levels = [None]
    else:
        levels = sorted(set(np.unique(cases.covariates[:, names.index(by)])
                            .tolist()))
        if len(levels) > 12:
            raise ValidationError(
                f"--by {by!r} has {len(levels)} distinct values; "
                "expected a categorical covariate (at most 12)")
    blocks = []
    for lev in levels:
        Z = np.empty((xs.size, len(names)))
        for i, nm in enumerate(names):
            if nm == sweep:
                Z[:, i] = xs
            elif nm == by:
                Z[:, i] = lev
            else:
                Z[:, i] = fixed_at[nm]
        blocks.append((lev, xs, covariate_thresholds(sol, Z), extrapolated))
    report = {
        "command": "thresholds",
        "marker": dataset.marker_name,
        "rho0": rho0,
        "beta": [float(v) for v in sol.beta],
        "sweep": sweep,
        "by": by,
        "fixed": fixed_at,
        "range": [float(lo), float(hi)],
        "observed_range": [obs_lo, obs_hi],
        "n_extrapolated": int(extrapolated.sum()) * len(levels),
    }
    return report, blocks


def _parse_at(pairs):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ValidationError(f"--at expects NAME=VALUE, got {item!r}")
        name, _, val = item.partition("=")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise ValidationError(
                f"--at {item!r}: value is not numeric") from None
    return out


@main.command("thresholds")
@click.argument("data_csv", type=click.Path())
@_data_options
@click.option("--rho0", default=0.95, show_default=True,
              help="Controlled sensitivity level.")
@click.option("--sweep", required=True, metavar="COL",
              help="Covariate to sweep.")
@click.option("--at", "at_pairs", multiple=True, metavar="COL=VALUE",
              help="Fix another covariate [default: its case-arm mean]. "
                   "Repeatable.")
@click.option("--by", default=None, metavar="COL",
              help="Draw one line per observed level of this covariate.")
@click.option("--lo", type=float, default=None,
              help="Sweep start [default: observed case minimum].")
@click.option("--hi", type=float, default=None,
              help="Sweep end [default: observed case maximum].")
@click.option("--points", default=101, show_default=True,
              help="Grid size over the sweep range.")
@click.option("--out", default=".", show_default=True,
              help="Output directory.")
@_cli_errors
def thresholds_command(data_csv, status_col, marker_col, covariates, factors,
                       direction, rho0, sweep, at_pairs, by, lo, hi, points,
                       out):
    """Covariate-specific thresholds at a controlled level."""
    dataset = _load_dataset(data_csv, status_col, marker_col, covariates,
                            factors, direction)
    if not 0.0 < rho0 < 1.0:
        raise ValidationError(f"rho0 must be in (0, 1), got {rho0}")
    report, blocks = cmd_thresholds(dataset, rho0, sweep, _parse_at(at_pairs),
                                    by, lo, hi, points)
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "thresholds.csv")
    header = [report["sweep"]]
    if by is not None:
        header.append(by)
    header += ["threshold", "extrapolated"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for lev, xs, thr, extra in blocks:
            for i in range(xs.size):
                row = [f"{xs[i]:.17g}"]
                if by is not None:
                    row.append(f"{lev:.17g}")
                row += [f"{thr[i]:.17g}", int(extra[i])]
                w.writerow(row)
    palette = ["#000000", "#1f77b4", "#d62728", "#9467bd", "#2ca02c",
               "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
               "#17becf", "#aec7e8"]
    series = []
    for i, (lev, xs, thr, _) in enumerate(blocks):
        label = "" if lev is None else f"{by}={lev:g}"
        series.append(Series(tuple(xs), tuple(thr), label,
                             palette[i % len(palette)]))
    svg_path = os.path.join(out, "thresholds.svg")
    svg_plot(svg_path, series, xlabel=report["sweep"],
             ylabel=f"{dataset.marker_name} threshold")
    report["files"] = ["thresholds.csv", "thresholds.svg"]
    rpt = _write_report(out, report)
    if report["n_extrapolated"]:
        click.echo(f"warning: {report['n_extrapolated']} grid points fall "
                   f"outside the observed {report['sweep']} range "
                   f"[{report['observed_range'][0]:g}, "
                   f"{report['observed_range'][1]:g}]", err=True)
    for f in (rpt, csv_path, svg_path):
        click.echo(f"wrote {f}")


# ------------------------------------------------------------ simulate

@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file with scenario fields; flags override it.")
@click.option("--n1", type=int, default=None, help="Cases per replicate.")
@click.option("--n0", type=int, default=None, help="Controls per replicate.")
@click.option("--rho0", multiple=True, type=float,
              help="Controlled level; repeatable.")
@click.option("--reps", type=int, default=None, help="Replicates.")
@click.option("--boot", "B", type=int, default=None,
              help="Bootstrap resamples per replicate.")
@click.option("--estimators", default=None,
              help="Comma-separated subset of raw,reg-monotone,roc-monotone.")
@click.option("--variance-methods", default=None,
              help="Comma-separated subset of sample,bootstrap.")
@click.option("--level", type=float, default=None, help="CI level.")
@click.option("--seed", type=int, default=None,
              help="Scenario seed; required here or in the config file.")
@click.option("--workers", type=int, default=None,
              help="Parallel processes [default: QROC_THREADS or 1].")
@click.option("--out", default=".", show_default=True,
              help="Output directory.")
@_cli_errors
def simulate_command(config_path, n1, n0, rho0, reps, B, estimators,
                     variance_methods, level, seed, workers, out):
    """Run a synthetic-data scenario and write the summary table."""
    fields = {}
    if config_path is not None:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ParseError(f"cannot open {config_path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{config_path}: invalid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ParseError(f"{config_path}: expected a JSON object")
        fields.update(loaded)
    overrides = {
        "n1": n1, "n0": n0, "reps": reps, "B": B, "level": level,
        "seed": seed,
        "rho0": tuple(rho0) if rho0 else None,
        "estimators": (tuple(e.strip() for e in estimators.split(","))
                       if estimators else None),
        "variance_methods": (tuple(v.strip()
                                   for v in variance_methods.split(","))
                             if variance_methods else None),
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if fields.get("seed") is None:
        raise click.UsageError("--seed is required (flag or config file)")
    for key in ("n1", "n0", "reps"):
        if fields.get(key) is None:
            raise ValidationError(f"missing scenario field {key!r}")
    if fields.get("rho0") is None:
        raise ValidationError("missing scenario field 'rho0'")
    try:
        cfg = ScenarioConfig(**fields)
    except TypeError:
        known = set(ScenarioConfig.__dataclass_fields__)
        raise ValidationError(
            f"unknown scenario fields: {sorted(set(fields) - known)}"
        ) from None
    report = run_scenario(cfg, workers=workers)
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "simulation.csv")
    report.to_csv(csv_path)
    json_path = os.path.join(out, "report.json")
    report.to_json(json_path)
    hdr = (f"{'rho0':>6} {'estimator':>14} {'method':>10} {'Bias':>8} "
           f"{'SD':>8} {'SE':>8} {'Cov':>7} {'LCov':>7}")
    click.echo(hdr)
    for row in report.rows:
        sd = "NA" if row["SD"] is None else f"{row['SD']:8.1f}"
        click.echo(f"{row['rho0']:>6g} {row['estimator']:>14} "
                   f"{row['method']:>10} {row['Bias']:8.1f} {sd:>8} "
                   f"{row['SE']:8.1f} {row['Cov']:7.2f} {row['LCov']:7.2f}")
    if report.n_failed:
        click.echo(f"note: {report.n_failed} replicates failed and were "
                   "excluded", err=True)
    for f in (csv_path, json_path):
        click.echo(f"wrote {f}")


if __name__ == "__main__":
    main()
