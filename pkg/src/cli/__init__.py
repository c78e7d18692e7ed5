"""CLI entrypoint for privpolar experiments."""

from __future__ import annotations

import logging
from collections.abc import Callable
from pathlib import Path

import typer
from dotenv import load_dotenv

from src import __version__
from src.config import RunConfig
from src.errors import OracleDisagreementError, PrivPolarError

from .experiments import (
    CommandResult,
    run_construct,
    run_oracle,
    run_region,
    run_simulate,
    run_timeshare,
)

app = typer.Typer(
    name="privpolar",
    help="Privacy-constrained lossy source coding with q-ary polar codes",
    no_args_is_help=True,
)

ConfigArg = typer.Argument(..., help="YAML run configuration")
SpecOption = typer.Option(None, "--spec", help="Spec file written by 'construct'")
SeedOption = typer.Option(None, "--seed", help="Override the config seed")
ThreadsOption = typer.Option(None, "--threads", min=1, help="Worker cap (default: all cores)")
VerboseOption = typer.Option(False, "--verbose", "-v", help="Log progress at INFO level")


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _run[T](action: Callable[[], T]) -> T:
    """Run a command body, mapping library errors to ``Error[<category>]`` and an exit code."""
    try:
        return action()
    except PrivPolarError as e:
        typer.echo(f"Error[{e.category}]: {e}", err=True)
        raise typer.Exit(code=e.exit_code)
    except AssertionError as e:
        # a violated internal invariant is reported like an oracle disagreement
        typer.echo(f"Error[{OracleDisagreementError.category}]: {e}", err=True)
        raise typer.Exit(code=OracleDisagreementError.exit_code)


def _load(config: Path, seed: int | None, verbose: bool) -> RunConfig:
    _setup_logging(verbose)
    return _run(lambda: RunConfig.load(config).with_overrides(seed=seed))


def _echo(result: CommandResult) -> None:
    for line in result.summary:
        typer.echo(line)
    for path in result.outputs:
        typer.echo(f"  wrote {path}")


@app.command("version")
def version() -> None:
    """Print the current version of privpolar."""
    typer.echo(f"privpolar version {__version__}")


@app.command("region")
def region(
    config: Path = ConfigArg,
    seed: int | None = SeedOption,
    threads: int | None = ThreadsOption,
    verbose: bool = VerboseOption,
) -> None:
    """Sweep the rate-distortion-equivocation frontier and write it as CSV.

    When the config's channel is a region query, the minimal-rate channel meeting
    (d_max, delta_min) is also written.
    """
    cfg = _load(config, seed, verbose)
    _echo(_run(lambda: run_region(cfg, config, threads)))


@app.command("construct")
def construct(
    config: Path = ConfigArg,
    seed: int | None = SeedOption,
    threads: int | None = ThreadsOption,
    verbose: bool = VerboseOption,
) -> None:
    """Estimate Bhattacharyya parameters, choose F/D/I and write the spec and its spectrum."""
    cfg = _load(config, seed, verbose)
    _echo(_run(lambda: run_construct(cfg, config, threads)))


@app.command("simulate")
def simulate(
    config: Path = ConfigArg,
    spec: Path = typer.Option(..., "--spec", help="Spec file written by 'construct'"),
    seed: int | None = SeedOption,
    threads: int | None = ThreadsOption,
    verbose: bool = VerboseOption,
) -> None:
    """Run encode/decode trials and report distortion, error rate and the equivocation proxy."""
    cfg = _load(config, seed, verbose)
    _echo(_run(lambda: run_simulate(cfg, spec, config, threads)))


@app.command("oracle")
def oracle(
    config: Path = ConfigArg,
    spec: Path | None = SpecOption,
    seed: int | None = SeedOption,
    threads: int | None = ThreadsOption,
    verbose: bool = VerboseOption,
) -> None:
    """Compute every quantity exactly at small n and evaluate the inequality checks.

    Without --spec the code is built from exact Bhattacharyya parameters. Exits with
    code 4 when an asserted check fails.
    """
    cfg = _load(config, seed, verbose)
    result, report = _run(lambda: run_oracle(cfg, spec, config, threads))
    _echo(result)
    if not report.all_passed:
        failed = [c.name for c in report.checks if c.asserted and c.passed is False]
        typer.echo(
            f"Error[{OracleDisagreementError.category}]: Failed checks: {', '.join(failed)}",
            err=True,
        )
        raise typer.Exit(code=OracleDisagreementError.exit_code)


@app.command("timeshare")
def timeshare(
    config: Path = ConfigArg,
    spec: Path | None = SpecOption,
    seed: int | None = SeedOption,
    threads: int | None = ThreadsOption,
    verbose: bool = VerboseOption,
) -> None:
    """Evaluate every frozen vector exactly and pick one, or two time-shared, meeting the target."""
    cfg = _load(config, seed, verbose)
    result, _plan = _run(lambda: run_timeshare(cfg, spec, config, threads))
    _echo(result)


def main() -> None:
    """Main CLI entrypoint."""
    # Load .env file if it exists (doesn't override existing env vars)
    _ = load_dotenv()
    app()


if __name__ == "__main__":
    main()
