"""Main CLI entry point for hardylab."""

import functools
import json
import logging
import math
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd
from rich.console import Console

from .analytic import (
    CrossSection,
    classify_coupling,
    cone_spectrum,
    exponents,
    solution_cone_dimension,
    truncated_cone_mu,
)
from .config import ConfigLoader, LabConfig
from .eig import BS_FRACTIONS, bs_defects, smallest_pair
from .errors import ExperimentAssertionError, HardyLabError
from .fem import assemble_system
from .geometry import Bulge, DomainSpec, PotentialSpec, TruncationWindow, build_domain, generate_mesh, mesh_lines, write_mesh
from .lab import EXPERIMENTS
from .utils import setup_logging

console = Console()
err_console = Console(stderr=True)

logger = logging.getLogger("hardylab")

EXPERIMENT_HELP = {
    "sweep": "Truncation sweep of one domain family with a localization verdict.",
    "gap": "Paired cone / cone-with-bulge sweeps checking the strict gap.",
    "decay": "Near and far power-law fits of the widest minimizer.",
    "probe": "Shrinking-bulge probe under a Hardy weight with a subtracted bump.",
    "bump-search": "Bulges approaching the ambient cone and their Rayleigh quotients.",
    "mono": "Monotonicity chains in the domain, the mesh and the potential.",
    "wide-cone": "Cone widened by a non-compact perturbation.",
    "convergence": "Truncated-sector error under uniform refinement.",
}


def _fail(message: str):
    err_console.print(f"[red]Error: {message}")
    sys.exit(1)


def handle_errors(func):
    """Report library errors in red and exit with status 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (HardyLabError, ValueError, FileNotFoundError) as e:
            _fail(str(e))

    return wrapper


CONFIG_OPTIONS = [
    click.option("--config", "-c", type=click.Path(exists=True), help="Configuration file path"),
    click.option("--environment", "-e", help="Environment name (development, testing, production)"),
    click.option(
        "--loglevel",
        "-ll",
        type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]),
        help="Set the log level",
    ),
]

DOMAIN_OPTIONS = [
    click.option("--domain", "domain_file", type=click.Path(exists=True), help="Domain file (json/yaml/toml)"),
    click.option("--theta", type=float, default=math.pi / 2, show_default=True, help="Cone opening"),
    click.option("--theta-x", type=float, default=math.pi, show_default=True, help="Ambient cone opening"),
    click.option("--bulge", "bulges", multiple=True, metavar="R_A,R_B,ANGLE", help="Angular bulge (repeatable)"),
    click.option("--rmin", type=float, default=1e-2, show_default=True),
    click.option("--rmax", type=float, default=1e2, show_default=True),
    click.option("--n-radial", type=click.IntRange(min=2), help="Radial layers (default from resolution policy)"),
    click.option("--n-angular", type=click.IntRange(min=2), help="Angular cells (default from resolution policy)"),
]


def _with_options(options):
    def decorator(func):
        for option in reversed(options):
            func = option(func)
        return func

    return decorator


config_options = _with_options(CONFIG_OPTIONS)
domain_options = _with_options(DOMAIN_OPTIONS)


def load_config(config: str | None, environment: str | None, overrides: dict) -> LabConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return ConfigLoader().load(config_file=config, environment=environment, cli_overrides=overrides)


def _parse_bulge(text: str) -> Bulge:
    try:
        r_a, r_b, angle = (float(part) for part in text.split(","))
    except ValueError as e:
        raise click.BadParameter(f"expected R_A,R_B,ANGLE, got {text!r}") from e
    return Bulge(r_a=r_a, r_b=r_b, extra_angle=angle)


def resolve_domain(
    domain_file: str | None,
    theta: float,
    theta_x: float,
    bulges: tuple[str, ...],
    rmin: float,
    rmax: float,
) -> tuple[DomainSpec, PotentialSpec]:
    """Domain and potential from a file, else from the command-line flags.

    A file either holds the domain fields directly or ``domain`` and
    ``potential`` sections.
    """
    if domain_file:
        data = ConfigLoader(discover=False).load_file(Path(domain_file))
        if "domain" in data:
            spec = DomainSpec(**data["domain"])
            potential = PotentialSpec(**data.get("potential", {}))
        else:
            spec, potential = DomainSpec(**data), PotentialSpec()
    else:
        spec = DomainSpec(
            theta=theta,
            theta_X=theta_x,
            bulges=[_parse_bulge(b) for b in bulges],
            r_min=rmin,
            r_max=rmax,
        )
        potential = PotentialSpec()
    spec = build_domain(spec)
    potential.check_support(spec)
    return spec, potential


def _mesh_for(cfg: LabConfig, spec: DomainSpec, n_radial: int | None, n_angular: int | None):
    window = TruncationWindow(r_min=spec.r_min, r_max=spec.r_max)
    n_radial = n_radial or cfg.resolution.n_radial(window)
    n_angular = n_angular or cfg.resolution.n_angular
    return generate_mesh(spec, n_radial, n_angular)


@click.group()
@click.version_option(package_name="hardylab")
def main():
    """hardylab: Rayleigh quotients of Hardy-type potentials on cone-like domains."""


@main.command()
@click.option("--N", "N", type=click.IntRange(min=2), default=2, show_default=True, help="Dimension")
@click.option("--theta", type=float, help="Arc opening (N = 2)")
@click.option("--theta0", type=float, help="Spherical cap half-angle (N = 3)")
@click.option("--lambdaD", "lambda_D", type=float, help="Explicit cross-section eigenvalue")
@click.option("--mu", type=float, help="Coupling for the exponents")
@click.option("--rmin", type=float, help="Inner truncation radius")
@click.option("--rmax", type=float, help="Outer truncation radius")
@handle_errors
def analytic(N, theta, theta0, lambda_D, mu, rmin, rmax):
    """Closed-form cone spectrum as a JSON record."""
    given = [x is not None for x in (theta, theta0, lambda_D)]
    if sum(given) != 1:
        raise click.UsageError("give exactly one of --theta, --theta0, --lambdaD")
    if theta is not None:
        cs = CrossSection(dimension=N, kind="arc", theta=theta)
    elif theta0 is not None:
        cs = CrossSection(dimension=N, kind="cap", theta0=theta0)
    else:
        cs = CrossSection.explicit(lambda_D, N)

    spec = cone_spectrum(cs)
    record = {"N": spec.N, "lambda_D": spec.lambda_D, "mu_C": spec.mu_C}
    if mu is not None:
        pair = exponents(spec.N, spec.lambda_D, mu)
        record.update(
            alpha_plus=pair.alpha_plus,
            alpha_minus=pair.alpha_minus,
            criticality=classify_coupling(spec, mu).value,
            solution_cone_dimension=solution_cone_dimension(spec, mu),
        )
    if rmin is not None and rmax is not None:
        record["L"] = math.log(rmax / rmin)
        record["mu_trunc"] = truncated_cone_mu(spec, rmin, rmax).mu_trunc
    click.echo(json.dumps(record, indent=2))


@main.command()
@domain_options
@config_options
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Mesh dump file (default stdout)")
@handle_errors
def mesh(domain_file, theta, theta_x, bulges, rmin, rmax, n_radial, n_angular, config, environment, loglevel, out):
    """Generate a log-polar mesh and dump it as plain text."""
    cfg = load_config(config, environment, {"log_level": loglevel})
    setup_logging(cfg, console=err_console)
    spec, _ = resolve_domain(domain_file, theta, theta_x, bulges, rmin, rmax)
    m = _mesh_for(cfg, spec, n_radial, n_angular)
    if out:
        write_mesh(m, out)
        logger.info(f"Mesh with {m.n_vertices} vertices written to {out}")
    else:
        click.echo("".join(mesh_lines(m)), nl=False)


@main.command()
@domain_options
@config_options
@handle_errors
def solve(domain_file, theta, theta_x, bulges, rmin, rmax, n_radial, n_angular, config, environment, loglevel):
    """Smallest generalized eigenpair of one truncated domain."""
    cfg = load_config(config, environment, {"log_level": loglevel})
    setup_logging(cfg, console=err_console)
    spec, potential = resolve_domain(domain_file, theta, theta_x, bulges, rmin, rmax)
    system = assemble_system(_mesh_for(cfg, spec, n_radial, n_angular), potential)
    result = smallest_pair(system, **cfg.solver.solve_kwargs())
    record = {k: result.as_record()[k] for k in ("mu_h", "residual", "iterations", "positivity_ok")}
    record["dofs"] = system.n
    click.echo(json.dumps(record, indent=2))


@main.command(name="bs-check")
@domain_options
@config_options
@click.option(
    "--lambda",
    "lambdas",
    type=float,
    multiple=True,
    help="Subcritical shift (repeatable, default 0, 1/4, 1/2, 3/4 and 0.99 of mu_h)",
)
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="CSV file (default stdout)")
@handle_errors
def bs_check(domain_file, theta, theta_x, bulges, rmin, rmax, n_radial, n_angular, config, environment, loglevel, lambdas, out):
    """Resolvent identity defects (lambda, defect) as CSV."""
    cfg = load_config(config, environment, {"log_level": loglevel})
    setup_logging(cfg, console=err_console)
    spec, potential = resolve_domain(domain_file, theta, theta_x, bulges, rmin, rmax)
    system = assemble_system(_mesh_for(cfg, spec, n_radial, n_angular), potential)
    result = smallest_pair(system, **cfg.solver.solve_kwargs())
    if not lambdas:
        lambdas = tuple(f * result.mu_h for f in BS_FRACTIONS)
    defects = bs_defects(system, result, lambdas)
    frame = pd.DataFrame({"lambda": list(defects), "defect": list(defects.values())})
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False)
    else:
        click.echo(frame.to_csv(index=False), nl=False)
    logger.info(f"max defect {np.max(frame['defect']):.3e}")


def run_experiment(name: str, config, environment, loglevel, workers, out) -> None:
    cfg = load_config(config, environment, {"log_level": loglevel, "workers": workers})
    out_dir = Path(out) if out else Path(cfg.paths.results_path) / name
    setup_logging(cfg, out_dir, console=err_console)
    logger.info(f"Running {name} into {out_dir}")

    experiment = EXPERIMENTS[name](cfg)
    try:
        experiment.run()
    except ExperimentAssertionError as e:
        report = getattr(e, "report", None)
        if report is not None:
            experiment.adopt(report)
            try:
                experiment.write(out_dir)
            except (HardyLabError, ValueError, OSError) as write_error:
                logger.warning(f"Partial results could not be written: {write_error}")
        _fail(f"assertion failed: {e}")

    experiment.write(out_dir)
    console.print(experiment.pretty_print())
    logger.info(f"{name} finished, results in {out_dir}")


def _experiment_command(name: str):
    @click.option("--out", "-o", type=click.Path(file_okay=False), help="Output directory")
    @click.option("--workers", "-w", type=click.IntRange(min=1), help="Concurrent sweep points")
    @config_options
    @handle_errors
    def command(config, environment, loglevel, workers, out):
        run_experiment(name, config, environment, loglevel, workers, out)

    command.__doc__ = EXPERIMENT_HELP[name]
    return main.command(name=name)(command)


for _name in EXPERIMENTS:
    _experiment_command(_name)


if __name__ == "__main__":
    main()
