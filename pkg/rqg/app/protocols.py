"""
Schedule builders for swaps, selective rotations, phase gates and state preparation.

Resonator indices are 1-based (r1 is 1), matching the operator constructors in
:mod:`rqg.domain.hilbert`.
"""

import math
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from ..domain.hamiltonian import check_ratio_condition, min_group_separation
from ..domain.models import (
    CalibrationResult,
    DriveParams,
    Frame,
    Schedule,
    Segment,
    SystemParams,
    Transition,
)
from ..infra.exceptions import RQGCalibrationError, RQGPhysicsError, RQGRangeError

RESONANCE_TOLERANCE = 1e-6
GROUP_SEPARATION_FACTOR = 5.0


class DurationPolicy(str, Enum):
    """Where a selective rotation takes its pulse length from."""
    CALIBRATED = "calibrated"
    NOMINAL = "nominal"


def two_pi_rotation_time(amplitude: float) -> float:
    """Time (ns) of a full e<->f cycle at Hamiltonian amplitude ``amplitude`` (GHz)."""
    return 1.0 / (2.0 * amplitude)


def _resonator_slot(params: SystemParams, resonator_index: int) -> int:
    if not 1 <= resonator_index <= params.num_resonators:
        raise RQGRangeError(f"Resonator index {resonator_index} out of range 1..{params.num_resonators}")
    return resonator_index - 1


def resonant_swap_segment(resonator_index: int, params: SystemParams, fraction: float = 0.5,
                          tune: bool = True, ef_coupling: bool = True, label: str = "") -> Segment:
    """
    Resonant qutrit-resonator exchange of duration t with 2 pi g t = fraction * pi.

    At fraction 1/2, |1>_r|g> -> -i|0>_r|e> and |0>_r|e> -> -i|1>_r|g>.

    Args:
        resonator_index: Resonator to swap with (1-based).
        params: Device parameters.
        fraction: Swap angle in units of pi.
        tune: Retune the resonator to omega_ge before checking resonance.
        ef_coupling: Keep the e<->f coupling of the swap resonator on.
        label: Step name.

    Raises:
        RQGPhysicsError: If the resonator is off resonance by more than 1e-6 GHz or its g<->e coupling is zero.
    """
    slot = _resonator_slot(params, resonator_index)
    snapshot = params.with_resonator_frequency(slot, params.omega_ge) if tune else params
    detuning = abs(snapshot.omega_r[slot] - snapshot.omega_ge)
    if detuning > RESONANCE_TOLERANCE:
        raise RQGPhysicsError(
            f"Swap needs r{resonator_index} resonant with omega_ge: detuned by {detuning:.3g} GHz")
    g = snapshot.g_ge[slot]
    if g <= 0:
        raise RQGPhysicsError(f"Swap needs a nonzero g_ge on r{resonator_index}")
    snapshot = snapshot.only_coupled(slot)
    if not ef_coupling:
        snapshot = snapshot.with_ef_coupling(slot, 0.0)
    return Segment(
        duration=fraction / (2.0 * g),
        params=snapshot,
        frame=Frame.BARE,
        label=label or f"swap r{resonator_index} x{fraction:g}",
    )


def selective_rotation_segment(params: SystemParams, target_photons: Sequence[int],
                               calibration: Optional[CalibrationResult],
                               duration_policy: DurationPolicy = DurationPolicy.CALIBRATED,
                               label: str = "") -> Segment:
    """
    Full e<->f Rabi cycle conditioned on the photon numbers of r1..r_len(target).

    Those resonators are coupled and all others are off. The segment runs in the
    dressed frame, so the matched component returns with a -1.

    Raises:
        RQGCalibrationError: If no calibration is given or it targets other photon numbers.
    """
    target = tuple(int(n) for n in target_photons)
    if calibration is None:
        raise RQGCalibrationError(f"Selective rotation on photons {target} is uncalibrated")
    if tuple(calibration.target_photons) != target:
        raise RQGCalibrationError(
            f"Calibration targets photons {tuple(calibration.target_photons)}, not {target}")
    if len(target) > params.num_resonators:
        raise RQGRangeError(f"{len(target)} target photon numbers for {params.num_resonators} resonators")
    if duration_policy is DurationPolicy.NOMINAL:
        duration = two_pi_rotation_time(calibration.amplitude)
    else:
        duration = calibration.pulse_duration
    drive = DriveParams(amplitude=calibration.amplitude, frequency=calibration.drive_frequency,
                        transition=Transition.EF, active=True)
    return Segment(
        duration=duration,
        params=params.only_coupled(*range(len(target))),
        drive=drive,
        frame=Frame.DRESSED,
        label=label or f"rotate ef on n={target}",
    )


def _with_virtual_z(segment: Segment, calibration: Optional[CalibrationResult]) -> Segment:
    if calibration is None or not calibration.resonator_phases:
        return segment
    return segment.model_copy(update={"resonator_phases": tuple(calibration.resonator_phases)})


def cphase_protocol(params: SystemParams, calibration: Optional[CalibrationResult],
                    swap_fractions: Tuple[float, float] = (0.5, 0.5),
                    ef_coupling_during_swap: bool = True,
                    duration_policy: DurationPolicy = DurationPolicy.CALIBRATED) -> Schedule:
    """
    Two-resonator phase gate: swap r2 into the qutrit, rotate on n1 = 0, swap back.

    Raises:
        RQGRangeError: If the parameters do not describe two resonators.
    """
    if params.num_resonators != 2:
        raise RQGRangeError(f"c-phase needs 2 resonators, got {params.num_resonators}")
    first, second = swap_fractions
    return Schedule.chain(
        resonant_swap_segment(2, params, first, ef_coupling=ef_coupling_during_swap, label="swap r2 in"),
        selective_rotation_segment(params, (0,), calibration, duration_policy, label="rotate on n1=0"),
        _with_virtual_z(resonant_swap_segment(2, params, second, ef_coupling=ef_coupling_during_swap,
                                              label="swap r2 out"), calibration),
    )


def ccphase_protocol(params: SystemParams, calibration: Optional[CalibrationResult],
                     swap_fractions: Tuple[float, float] = (1.5, 0.5),
                     ef_coupling_during_swap: bool = True,
                     duration_policy: DurationPolicy = DurationPolicy.CALIBRATED) -> Schedule:
    """
    Three-resonator phase gate: swap r3 in, rotate on the N = 8 group (n1 = n2 = 1), swap back.

    Raises:
        RQGPhysicsError: If the ratio condition fails by more than 1% or the four
            photon groups are closer than five drive amplitudes.
        RQGCalibrationError: If no calibration is given.
    """
    if params.num_resonators != 3:
        raise RQGRangeError(f"cc-phase needs 3 resonators, got {params.num_resonators}")
    if calibration is None:
        raise RQGCalibrationError("cc-phase rotation is uncalibrated")
    check_ratio_condition(params)
    separation = min_group_separation(params)
    if separation < GROUP_SEPARATION_FACTOR * calibration.amplitude:
        raise RQGPhysicsError(
            f"Photon groups separated by {separation:.4g} GHz, need at least "
            f"{GROUP_SEPARATION_FACTOR:g} x amplitude = {GROUP_SEPARATION_FACTOR * calibration.amplitude:.4g} GHz")
    first, second = swap_fractions
    return Schedule.chain(
        resonant_swap_segment(3, params, first, ef_coupling=ef_coupling_during_swap, label="swap r3 in"),
        selective_rotation_segment(params, (1, 1), calibration, duration_policy, label="rotate on N=8"),
        _with_virtual_z(resonant_swap_segment(3, params, second, ef_coupling=ef_coupling_during_swap,
                                              label="swap r3 out"), calibration),
    )


def half_pi_pulse_segment(params: SystemParams, amplitude: float, start: float, label: str = "") -> Segment:
    """
    pi/2 pulse on g<->e with every coupling off.

    The carrier phase is locked to w_d * start so that pulses placed at any time
    share one rotation axis in the bare frame.
    """
    if amplitude <= 0:
        raise RQGRangeError(f"Pulse amplitude must be > 0, got {amplitude}")
    phase = math.fmod(2.0 * math.pi * params.omega_ge * start, 2.0 * math.pi)
    drive = DriveParams(amplitude=amplitude, frequency=params.omega_ge, transition=Transition.GE,
                        phase=phase, active=True)
    return Segment(
        duration=(math.pi / 4.0) / (2.0 * math.pi * amplitude),
        params=params.with_couplings([False] * params.num_resonators),
        drive=drive,
        drive_time_origin=start,
        frame=Frame.BARE,
        label=label or "pi/2 ge",
    )


def prepare_uniform_superposition(params: SystemParams, amplitude: float,
                                  swap_fraction: float = 1.5) -> Schedule:
    """
    Load (|0> + |1>)/sqrt(2) into every resonator from the all-ground state.

    Each resonator gets a pi/2 pulse on the qutrit followed by a 3/2 swap, which
    returns the qutrit to |g>. With no resonators the schedule is empty.
    """
    segments: List[Segment] = []
    clock = 0.0
    for index in range(1, params.num_resonators + 1):
        pulse = half_pi_pulse_segment(params, amplitude, clock, label=f"pi/2 before r{index}")
        clock += pulse.duration
        swap = resonant_swap_segment(index, params, swap_fraction, label=f"load r{index}")
        clock += swap.duration
        segments.extend([pulse, swap])
    return Schedule.chain(*segments)
