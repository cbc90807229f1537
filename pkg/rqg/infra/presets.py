"""
Named parameter sets, the strict experiment configuration and ``--set`` overrides.
"""

import json
from typing import Any, Dict, List, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..domain.models import AmplitudeConvention, EvolutionConfig, SystemParams
from .exceptions import RQGConfigError

EXPERIMENTS = ("selective-rabi", "cphase", "ccphase", "prepare", "calibrate", "shift-table")

ExperimentName = Literal["selective-rabi", "cphase", "ccphase", "prepare", "calibrate", "shift-table"]


class PresetDrive(BaseModel):
    """Drive settings as printed, with the convention used to read the amplitude."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    amplitude: float = Field(..., gt=0, description="Printed drive amplitude")
    frequency: float = Field(..., gt=0, description="Printed drive frequency (GHz)")
    convention: AmplitudeConvention = Field(AmplitudeConvention.ORDINARY)

    @property
    def hamiltonian_amplitude(self) -> float:
        return self.convention.to_hamiltonian_amplitude(self.amplitude)


class ProtocolOptions(BaseModel):
    """Knobs of the gate and preparation schedules."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    target_photons: Tuple[int, ...] = Field((0,), description="Photon numbers the rotation targets")
    swap_fractions: Tuple[float, float] = Field((0.5, 0.5), description="First and second swap angles / pi")
    ef_coupling_during_swap: bool = Field(True)
    prep_amplitude: float = Field(0.01, gt=0, description="g<->e pi/2 pulse amplitude (GHz)")
    prep_swap_fraction: float = Field(1.5, gt=0)
    random_inputs: int = Field(20, ge=0, description="Random computational inputs per gate run")


class Preset(BaseModel):
    """An immutable, validated parameter set with provenance."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    description: str
    provenance: str
    params: SystemParams
    drive: PresetDrive
    protocol: ProtocolOptions = Field(default_factory=ProtocolOptions)


class ExperimentConfig(BaseModel):
    """Resolved command-line configuration of one run."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: ExperimentName
    preset: str
    overrides: Dict[str, Any] = Field(default_factory=dict)
    cutoff: int = Field(3, ge=2)
    evolution: EvolutionConfig = Field(default_factory=EvolutionConfig)
    out_dir: str = "rqg-out"
    seed: int = 0
    calibrate: bool = True


PRESETS: Dict[str, Preset] = {
    "paper-cphase": Preset(
        name="paper-cphase",
        description="Two resonators, c-phase with the rotation on n1 = 0",
        provenance=("omega_ge 8.7, omega_ef 8.0, omega_r1 7.5 GHz, r2 resonant with g<->e "
                    "(8.7 GHz) for the swaps, all couplings 0.2 GHz, drive 0.0115 GHz read as "
                    "a full Rabi frequency at 8.043 GHz"),
        params=SystemParams(omega_ge=8.7, omega_ef=8.0, omega_r=[7.5, 8.7],
                            g_ge=[0.2, 0.2], g_ef=[0.2, 0.2], coupling_on=[True, True]),
        drive=PresetDrive(amplitude=0.0115, frequency=8.043, convention=AmplitudeConvention.RABI),
        protocol=ProtocolOptions(target_photons=(0,), swap_fractions=(0.5, 0.5)),
    ),
    "paper-ccphase": Preset(
        name="paper-ccphase",
        description="Three resonators, cc-phase with the rotation on the N = 8 group",
        provenance=("omega_ge 8.7, omega_ef 8.0, omega_r 6.5 / 7.5 / 7.5 GHz, couplings "
                    "0.2 / 0.2 / 0.12 GHz, drive 0.0266 read in rad/ns at 8.1768 GHz"),
        params=SystemParams(omega_ge=8.7, omega_ef=8.0, omega_r=[6.5, 7.5, 7.5],
                            g_ge=[0.2, 0.2, 0.12], g_ef=[0.2, 0.2, 0.12],
                            coupling_on=[True, True, True]),
        drive=PresetDrive(amplitude=0.0266, frequency=8.1768, convention=AmplitudeConvention.ANGULAR),
        protocol=ProtocolOptions(target_photons=(1, 1), swap_fractions=(1.5, 0.5)),
    ),
}


def list_presets() -> List[Preset]:
    """Registered presets in name order."""
    return [PRESETS[name] for name in sorted(PRESETS)]


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise RQGConfigError(f"Unknown preset: {name} (available: {', '.join(sorted(PRESETS))})")


def parse_value(text: str) -> Any:
    """Read an override value as a JSON literal, falling back to the raw string."""
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_assignments(assignments: List[str]) -> Dict[str, Any]:
    """
    Parse repeated ``key=value`` options.

    Raises:
        RQGConfigError: If an assignment has no ``=`` or an empty key.
    """
    overrides = {}
    for assignment in assignments:
        key, sep, value = assignment.partition("=")
        if not sep or not key.strip():
            raise RQGConfigError(f"Malformed --set option (expected key=value): {assignment}")
        overrides[key.strip()] = parse_value(value.strip())
    return overrides


def _assign(data: Any, path: List[str], value: Any, full_key: str) -> None:
    head, rest = path[0], path[1:]
    if isinstance(data, list):
        try:
            index = int(head)
            target = data[index]
        except (ValueError, IndexError):
            raise RQGConfigError(f"Unknown override key: {full_key}")
        if rest:
            _assign(target, rest, value, full_key)
        else:
            data[index] = value
        return
    if not isinstance(data, dict) or head not in data:
        raise RQGConfigError(f"Unknown override key: {full_key}")
    if rest:
        if isinstance(data[head], tuple):
            data[head] = list(data[head])
        _assign(data[head], rest, value, full_key)
    else:
        data[head] = value


def _validation_message(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in item['loc'])}: {item['msg']}" for item in error.errors())


def resolve(config: ExperimentConfig) -> Tuple[Preset, EvolutionConfig]:
    """
    Apply dotted overrides to the named preset and the evolution settings.

    Keys start with ``params``, ``drive``, ``protocol`` or ``evolution``, for
    example ``params.omega_r.1=8.7``.

    Raises:
        RQGConfigError: On unknown presets or keys, or values failing validation.
    """
    preset = get_preset(config.preset)
    preset_data = preset.model_dump(mode="python")
    evolution_data = config.evolution.model_dump(mode="python")
    for key, value in sorted(config.overrides.items()):
        path = key.split(".")
        if path[0] == "evolution" and len(path) > 1:
            _assign(evolution_data, path[1:], value, key)
        elif path[0] in ("params", "drive", "protocol") and len(path) > 1:
            _assign(preset_data, path, value, key)
        else:
            raise RQGConfigError(f"Unknown override key: {key}")
    try:
        return Preset.model_validate(preset_data), EvolutionConfig.model_validate(evolution_data)
    except ValidationError as e:
        raise RQGConfigError(f"Invalid configuration: {_validation_message(e)}")


def build_config(**fields: Any) -> ExperimentConfig:
    """
    Validate raw configuration fields.

    Raises:
        RQGConfigError: If a field is unknown or invalid.
    """
    try:
        return ExperimentConfig.model_validate(fields)
    except ValidationError as e:
        raise RQGConfigError(f"Invalid configuration: {_validation_message(e)}")
