"""
Command-line interface for running RQG experiments.
"""

import logging
import sys
import time
from pathlib import Path
from typing import Optional, Tuple

import click

from .. import __version__
from ..app.services import ExperimentService
from ..domain.analysis import trajectory_table
from ..infra.exceptions import RQGConfigError, RQGError
from ..infra.presets import EXPERIMENTS, build_config, parse_assignments, resolve
from ..infra.writers import OutputWriter

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@click.command()
@click.option('--experiment', '-e', required=True,
              help=f'Experiment to run: {", ".join(EXPERIMENTS)}.')
@click.option('--preset', '-p', required=True,
              help='Named parameter set (see rqg-presets).')
@click.option('--set', 'assignments', multiple=True, metavar='KEY=VALUE',
              help='Override a preset or integrator value, e.g. params.omega_r.1=8.7. '
                   'Can be specified multiple times.')
@click.option('--out', '-o', 'out_dir', default='rqg-out', type=click.Path(file_okay=False),
              help='Output directory.')
@click.option('--cutoff', type=int, default=3, help='Maximum photon number per resonator.')
@click.option('--seed', type=int, default=0, help='Seed for random gate inputs.')
@click.option('--no-calibrate', is_flag=True, default=False,
              help='Use the preset drive frequency and the nominal pulse length.')
@click.option('--log-level', default='WARNING', type=click.Choice(LOG_LEVELS, case_sensitive=False),
              help='Logging level on stderr.')
def main(experiment: str, preset: str, assignments: Tuple[str, ...], out_dir: str, cutoff: int,
         seed: int, no_calibrate: bool, log_level: str) -> None:
    """
    Run one experiment and write its trajectory, summary, density matrix and manifest.
    """
    logging.basicConfig(level=getattr(logging, log_level.upper()), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(experiment=experiment, preset=preset,
                              overrides=parse_assignments(list(assignments)), cutoff=cutoff,
                              out_dir=out_dir, seed=seed, calibrate=not no_calibrate)
        resolved, evolution = resolve(config)

        service = ExperimentService(resolved, cutoff=config.cutoff, evolution=evolution,
                                    seed=config.seed, calibrate=config.calibrate)
        started = time.perf_counter()
        outcome = service.run(config.experiment)
        elapsed = time.perf_counter() - started

        writer = OutputWriter(Path(config.out_dir))
        rows: Optional[list] = None
        columns = None
        if outcome.trajectory is not None:
            rows = trajectory_table(outcome.trajectory)
            columns = ["time_ns"] + list(outcome.trajectory.labels)
        files = writer.write(outcome.summary, rows, columns, outcome.density_rows, outcome.reference_rows)
        echo = {
            "run": config.model_dump(mode="json"),
            "preset": resolved.model_dump(mode="json"),
            "evolution": evolution.model_dump(mode="json"),
        }
        writer.write_manifest(echo, __version__, files, elapsed)

        click.echo(f"{config.experiment} finished: {len(files) + 1} files in {config.out_dir}")
        if "fidelity" in outcome.summary:
            click.echo(f"fidelity {outcome.summary['fidelity']:.6f}")
        sys.exit(0)
    except RQGConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(2)
    except RQGError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)
    except Exception as e:
        click.echo(f"Unexpected error: {e}", err=True)
        sys.exit(1)


if __name__ == '__main__':
    main()
