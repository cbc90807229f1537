"""
Command-line interface for listing the named parameter sets.
"""

import json
import sys

import click

from ..infra.presets import list_presets


@click.command()
@click.option('--json', 'as_json', is_flag=True, default=False,
              help='Print the full presets as JSON.')
def main(as_json: bool) -> None:
    """
    List the parameter sets accepted by rqg-run --preset.
    """
    presets = list_presets()
    if as_json:
        data = [p.model_dump(mode="json") for p in presets]
        click.echo(json.dumps(data, sort_keys=True, indent=2))
        sys.exit(0)

    for preset in presets:
        params = preset.params
        click.echo(f"{preset.name}: {preset.description}")
        click.echo(f"  omega_ge={params.omega_ge} omega_ef={params.omega_ef} omega_r={params.omega_r}")
        click.echo(f"  g_ge={params.g_ge} g_ef={params.g_ef}")
        click.echo(f"  drive amplitude={preset.drive.amplitude} ({preset.drive.convention.value}) "
                   f"frequency={preset.drive.frequency}")
        click.echo(f"  provenance: {preset.provenance}")
    sys.exit(0)


if __name__ == '__main__':
    main()
