"""
Application services for the RQG system.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ..domain.analysis import (
    IdealGate,
    apply_virtual_z,
    computational_state,
    conditional_phase,
    entanglement_entropy,
    figure_data,
    gate_overlap,
    leakage,
    squared_uhlmann_fidelity,
    state_fidelity,
    truth_matrix_from_propagator,
    uniform_superposition,
    virtual_z_correction,
)
from ..domain.evolve import SegmentEvolution, propagate, schedule_propagator
from ..domain.hamiltonian import (
    cc_shift,
    dressed_basis,
    dressed_frequency,
    group_index,
)
from ..domain.hilbert import CompositeSpace, StateVector, basis_state
from ..domain.models import (
    CalibrationResult,
    DriveParams,
    EvolutionConfig,
    Frame,
    GateReport,
    MonitorBasis,
    QutritLevel,
    Schedule,
    Segment,
    SystemParams,
    Trajectory,
    Transition,
)
from ..infra.exceptions import RQGCalibrationError, RQGPhysicsError
from ..infra.presets import Preset
from .protocols import (
    ccphase_protocol,
    cphase_protocol,
    prepare_uniform_superposition,
    selective_rotation_segment,
    two_pi_rotation_time,
)

logger = logging.getLogger(__name__)

DEFAULT_SCAN_HALF_WIDTH = 0.020
DEFAULT_SCAN_RESOLUTION = 0.001
FREQUENCY_XATOL = 1e-4
DURATION_SAMPLES = 300
# Groups closer than this to the target frequency (GHz) cannot be told apart.
DEGENERACY_TOLERANCE = 1e-6
# Refinement must beat the grid optimum by more than rounding.
CONTRAST_GAIN_TOLERANCE = 1e-9
# Compensation search box: relative amplitude change and carrier offset in amplitudes.
COMPENSATION_AMPLITUDE_RANGE = 0.1
COMPENSATION_OFFSET_RANGE = 1.0
COMPENSATION_SIMPLEX = [[0.0, 0.0], [0.03, 0.0], [0.0, 0.2]]
COMPENSATION_MAX_EVALUATIONS = 150


class CalibrationService:
    """Service for calibrating selective e<->f rotations by simulation."""

    def __init__(self, evolution: Optional[EvolutionConfig] = None, cutoff: int = 3,
                 max_workers: Optional[int] = None):
        """
        Initialize the calibration service.

        Args:
            evolution: Integrator settings for the calibration pulses.
            cutoff: Resonator cutoff of the reduced space.
            max_workers: Thread count of the frequency scan. If None, the executor default is used.
        """
        self.evolution = evolution or EvolutionConfig()
        self.cutoff = cutoff
        self.max_workers = max_workers

    def calibration_system(self, params: SystemParams,
                           target_photons: Sequence[int]) -> Tuple[SystemParams, CompositeSpace]:
        """
        Qutrit plus the resonators the rotation is conditioned on, with their coupling flags.

        Uncoupled resonators only add their own energy, so they are left out.
        """
        k = len(target_photons)
        reduced = SystemParams(
            omega_ge=params.omega_ge, omega_ef=params.omega_ef,
            omega_r=params.omega_r[:k], g_ge=params.g_ge[:k], g_ef=params.g_ef[:k],
            coupling_on=list(params.coupling_on[:k]),
        )
        return reduced, CompositeSpace(tuple([self.cutoff] * k))

    def _evolution(self, params: SystemParams, space: CompositeSpace, amplitude: float,
                   frequency: float, duration: float) -> SegmentEvolution:
        drive = DriveParams(amplitude=amplitude, frequency=frequency, transition=Transition.EF, active=True)
        segment = Segment(duration=duration, params=params, drive=drive, frame=Frame.DRESSED,
                          label=f"scan {frequency:.6f} GHz")
        return SegmentEvolution(segment, space, self.evolution)

    def transfers(self, params: SystemParams, space: CompositeSpace, amplitude: float,
                  frequency: float) -> Dict[Tuple[int, ...], float]:
        """Dressed e->f transfer of every photon group in {0,1}^k after a pi pulse."""
        u = self._evolution(params, space, amplitude, frequency, 1.0 / (4.0 * amplitude)).propagator()
        result = {}
        for group in product((0, 1), repeat=space.num_resonators):
            source = space.index(QutritLevel.E, group)
            result[group] = float(abs(u[space.index(QutritLevel.F, group), source]) ** 2)
        return result

    @staticmethod
    def contrast(transfers: Dict[Tuple[int, ...], float], target: Tuple[int, ...],
                 degenerate: Sequence[Tuple[int, ...]] = ()) -> float:
        """
        Target transfer minus the largest transfer among the groups the drive can tell apart.

        Groups listed in ``degenerate`` share the target's transition frequency and are skipped.
        """
        others = [p for group, p in transfers.items() if group != target and group not in degenerate]
        return transfers[target] - (max(others) if others else 0.0)

    def degenerate_groups(self, params: SystemParams, space: CompositeSpace,
                          target: Tuple[int, ...]) -> List[Tuple[int, ...]]:
        """Photon groups whose dressed e->f frequency equals the target's."""
        reference = dressed_frequency(params, space, Transition.EF, target)
        return [group for group in product((0, 1), repeat=space.num_resonators)
                if group != target and abs(dressed_frequency(params, space, Transition.EF, group)
                                           - reference) < DEGENERACY_TOLERANCE]

    def pulse_duration(self, params: SystemParams, space: CompositeSpace, target: Tuple[int, ...],
                       amplitude: float, frequency: float) -> float:
        """
        First return of the target's dressed f population to its minimum after the first maximum.

        Raises:
            RQGCalibrationError: If the target never reaches half transfer in the window.
        """
        window = 1.5 * two_pi_rotation_time(amplitude)
        evolution = self._evolution(params, space, amplitude, frequency, window)
        dressed = evolution.dressed
        start = dressed.vectors[:, space.index(QutritLevel.E, target)]
        f_state = dressed.vectors[:, space.index(QutritLevel.F, target)]

        def population(times: Sequence[float]) -> np.ndarray:
            states = evolution.lab_states(start, times)
            return np.array([abs(np.vdot(f_state, s)) ** 2 for s in states])

        times = np.linspace(0.0, window, DURATION_SAMPLES + 1)
        values = population(times)
        threshold = 0.5 * values.max()
        peak = next((i for i in range(1, len(values) - 1)
                     if values[i] >= threshold and values[i] >= values[i + 1]), None)
        if peak is None or values.max() < 0.5:
            raise RQGCalibrationError(
                f"Target {target} reaches only {values.max():.3f} transfer at {frequency:.6f} GHz")
        trough = next((i for i in range(peak + 1, len(values) - 1) if values[i] <= values[i + 1]), None)
        if trough is None:
            raise RQGCalibrationError(f"No return of target {target} within {window:.2f} ns")
        refined = minimize_scalar(lambda t: population([t])[0],
                                  bounds=(times[trough - 1], times[trough + 1]), method="bounded",
                                  options={"xatol": 1e-4})
        return float(refined.x)

    def calibrate_drive(self, params: SystemParams, target_photons: Sequence[int], amplitude: float,
                        scan_range: Optional[Tuple[float, float]] = None,
                        resolution: float = DEFAULT_SCAN_RESOLUTION,
                        allow_edge: bool = False) -> CalibrationResult:
        """
        Find the carrier maximizing the conditional transfer contrast, then the full-return time.

        Args:
            params: Device parameters; the first ``len(target_photons)`` resonators are coupled.
            target_photons: Photon numbers the rotation should act on.
            amplitude: Hamiltonian drive amplitude (GHz).
            scan_range: Frequency window (GHz). Defaults to 20 MHz around the dressed estimate.
            resolution: Coarse grid spacing (GHz).
            allow_edge: Accept an optimum on the scan edge and flag it for a rescan.

        Returns:
            The calibration result.

        Raises:
            RQGCalibrationError: If the optimum lies on the scan edge and ``allow_edge`` is false.
        """
        target = tuple(int(n) for n in target_photons)
        reduced, space = self.calibration_system(params, target)
        estimate = dressed_frequency(reduced, space, Transition.EF, target)
        degenerate = self.degenerate_groups(reduced, space, target)
        if scan_range is None:
            steps = int(round(DEFAULT_SCAN_HALF_WIDTH / resolution))
            grid = estimate + resolution * np.arange(-steps, steps + 1)
            low, high = float(grid[0]), float(grid[-1])
        else:
            low, high = scan_range
            grid = np.linspace(low, high, int(round((high - low) / resolution)) + 1)
        logger.info("Calibrating target %s: %d points in [%.4f, %.4f] GHz", target, len(grid), low, high)

        def score(frequency: float) -> float:
            value = self.contrast(self.transfers(reduced, space, amplitude, frequency), target, degenerate)
            logger.debug("Scan %.6f GHz: contrast %.6f", frequency, value)
            return value

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            scores = np.array(list(executor.map(score, grid)))

        best = int(np.argmax(scores))
        needs_rescan = False
        if best in (0, len(grid) - 1):
            message = f"Calibration optimum {grid[best]:.6f} GHz lies on the scan edge"
            if not allow_edge:
                raise RQGCalibrationError(message)
            logger.warning(message)
            needs_rescan = True
        lower, upper = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
        frequency, contrast = float(grid[best]), float(scores[best])
        if upper > lower:
            refined = minimize_scalar(lambda f: -score(f), bounds=(lower, upper), method="bounded",
                                      options={"xatol": FREQUENCY_XATOL})
            if -refined.fun > contrast + CONTRAST_GAIN_TOLERANCE:
                frequency, contrast = float(refined.x), float(-refined.fun)

        duration = self.pulse_duration(reduced, space, target, amplitude, frequency)
        logger.info("Calibrated target %s: %.6f GHz, %.3f ns, contrast %.4f",
                    target, frequency, duration, contrast)
        return CalibrationResult(
            drive_frequency=frequency, pulse_duration=duration, amplitude=amplitude,
            achieved_selectivity=max(-1.0, min(1.0, contrast)), target_photons=target,
            scan_range=(float(low), float(high)), scan_resolution=resolution,
            estimate=estimate, needs_rescan=needs_rescan,
        )

    def compensate(self, params: SystemParams, calibration: CalibrationResult,
                   schedule_for: Callable[[CalibrationResult], Schedule], space: CompositeSpace,
                   gate: IdealGate) -> CalibrationResult:
        """
        Retune amplitude and carrier so the drive-induced phases of the gate close, then add the
        virtual Z on every resonator.

        The search is a bounded Nelder-Mead over the relative amplitude change and the carrier
        offset (in units of the amplitude). The pulse duration follows the full return of the
        target at each candidate. The untouched calibration wins if the search does not beat it.

        Args:
            params: Device parameters of the gate.
            calibration: Drive calibration of the selective rotation.
            schedule_for: Builds the gate schedule for a candidate calibration.
            space: Space the gate is evaluated in.
            gate: Ideal gate the truth matrix is compared with.

        Returns:
            The tuned calibration, carrying the virtual Z phases.
        """
        target = tuple(calibration.target_photons)
        reduced, reduced_space = self.calibration_system(params, target)
        base_amplitude, base_frequency = calibration.amplitude, calibration.drive_frequency
        ideal = gate.matrix

        def candidate(x: np.ndarray) -> CalibrationResult:
            amplitude = base_amplitude * (1.0 + x[0])
            frequency = base_frequency + x[1] * base_amplitude
            duration = self.pulse_duration(reduced, reduced_space, target, amplitude, frequency)
            return calibration.model_copy(update={
                "amplitude": amplitude, "drive_frequency": frequency, "pulse_duration": duration,
                "resonator_phases": (),
            })

        def truth_of(result: CalibrationResult) -> np.ndarray:
            u = schedule_propagator(schedule_for(result), space, self.evolution)
            return truth_matrix_from_propagator(u, space)

        def infidelity(x: np.ndarray) -> float:
            try:
                truth = truth_of(candidate(x))
            except (RQGCalibrationError, RQGPhysicsError) as e:
                logger.debug("Compensation candidate %s rejected: %s", x, e)
                return 1.0
            value = 1.0 - gate_overlap(apply_virtual_z(truth, virtual_z_correction(truth, ideal)), ideal) ** 2
            logger.debug("Compensation candidate %s: infidelity %.3e", x, value)
            return value

        origin = np.zeros(2)
        untouched = infidelity(origin)
        search = minimize(
            infidelity, origin, method="Nelder-Mead",
            bounds=[(-COMPENSATION_AMPLITUDE_RANGE, COMPENSATION_AMPLITUDE_RANGE),
                    (-COMPENSATION_OFFSET_RANGE, COMPENSATION_OFFSET_RANGE)],
            options={"initial_simplex": COMPENSATION_SIMPLEX, "xatol": 1e-4, "fatol": 1e-8,
                     "maxfev": COMPENSATION_MAX_EVALUATIONS},
        )
        best = search.x if search.fun < untouched else origin
        tuned = candidate(best)
        phases = virtual_z_correction(truth_of(tuned), ideal)
        logger.info("Compensated target %s: amplitude %.6g GHz, %.6f GHz, %.3f ns, infidelity %.3e -> %.3e",
                    target, tuned.amplitude, tuned.drive_frequency, tuned.pulse_duration,
                    untouched, min(untouched, float(search.fun)))
        return tuned.model_copy(update={"resonator_phases": tuple(float(p) for p in phases)})

    def fixed(self, params: SystemParams, target_photons: Sequence[int], amplitude: float,
              frequency: float, duration: Optional[float] = None) -> CalibrationResult:
        """Calibration record for a given carrier, without scanning."""
        target = tuple(int(n) for n in target_photons)
        reduced, space = self.calibration_system(params, target)
        contrast = self.contrast(self.transfers(reduced, space, amplitude, frequency), target,
                                 self.degenerate_groups(reduced, space, target))
        return CalibrationResult(
            drive_frequency=frequency,
            pulse_duration=duration or two_pi_rotation_time(amplitude),
            amplitude=amplitude, achieved_selectivity=max(-1.0, min(1.0, contrast)),
            target_photons=target, scan_range=(frequency, frequency), scan_resolution=0.0,
            estimate=dressed_frequency(reduced, space, Transition.EF, target),
        )


@dataclass
class ExperimentOutcome:
    """Everything a run writes out."""
    experiment: str
    summary: Dict[str, Any]
    trajectory: Optional[Trajectory] = None
    density_rows: Optional[List[dict]] = None
    report: Optional[GateReport] = None
    # Extra density tables keyed by name, e.g. the input and ideal output states.
    reference_rows: Dict[str, List[dict]] = field(default_factory=dict)


class ExperimentService:
    """Service for running named experiments on a preset."""

    def __init__(self, preset: Preset, cutoff: int = 3, evolution: Optional[EvolutionConfig] = None,
                 seed: int = 0, calibrate: bool = True,
                 calibration_service: Optional[CalibrationService] = None):
        self.preset = preset
        self.params = preset.params
        self.cutoff = cutoff
        self.evolution = evolution or EvolutionConfig()
        self.seed = seed
        self.calibrate_first = calibrate
        self.calibration_service = calibration_service or CalibrationService(self.evolution, cutoff)
        self._runners: Dict[str, Callable[[], ExperimentOutcome]] = {
            "selective-rabi": self.selective_rabi,
            "cphase": self.cphase,
            "ccphase": self.ccphase,
            "prepare": self.prepare,
            "calibrate": self.calibrate,
            "shift-table": self.shift_table,
        }

    @property
    def space(self) -> CompositeSpace:
        return CompositeSpace.uniform(self.params.num_resonators, self.cutoff)

    @property
    def amplitude(self) -> float:
        return self.preset.drive.hamiltonian_amplitude

    def run(self, experiment: str) -> ExperimentOutcome:
        """
        Run one named experiment.

        Raises:
            KeyError: If the experiment name is unknown.
            RQGPhysicsError: If the physics configuration is invalid.
        """
        logger.info("Running %s on preset %s", experiment, self.preset.name)
        outcome = self._runners[experiment]()
        outcome.summary.update({"experiment": experiment, "preset": self.preset.name,
                                "cutoff": self.cutoff})
        logger.info("Finished %s", experiment)
        return outcome

    def calibration(self, target_photons: Optional[Sequence[int]] = None) -> CalibrationResult:
        target = tuple(self.preset.protocol.target_photons if target_photons is None else target_photons)
        if self.calibrate_first:
            return self.calibration_service.calibrate_drive(self.params, target, self.amplitude)
        return self.calibration_service.fixed(self.params, target, self.amplitude,
                                              self.preset.drive.frequency)

    def calibrate(self) -> ExperimentOutcome:
        result = self.calibration()
        return ExperimentOutcome("calibrate", {"calibration": result.model_dump(mode="json")})

    def selective_rabi(self) -> ExperimentOutcome:
        """
        Dressed populations under the n1 = 0 drive, starting from dressed (e, n1=0) and (e, n1=1).
        """
        calibration = self.calibration((0,))
        space = self.space
        rest = (0,) * (space.num_resonators - 1)
        window = 2.0 * calibration.pulse_duration
        segment = selective_rotation_segment(self.params, (0,), calibration)
        schedule = Schedule.chain(segment.model_copy(update={"duration": window}))
        monitored = [space.index(level, (n,) + rest) for n in (0, 1) for level in QutritLevel]

        merged = None
        summary: Dict[str, Any] = {"calibration": calibration.model_dump(mode="json"),
                                   "window_ns": window}
        for n in (0, 1):
            start = basis_state(space, QutritLevel.E, (n,) + rest)
            _, trajectory = propagate(start, schedule, self.evolution, monitored, MonitorBasis.DRESSED)
            f_column = trajectory.column(space.label(space.index(QutritLevel.F, (n,) + rest)))
            g_column = trajectory.column(space.label(space.index(QutritLevel.G, (n,) + rest)))
            summary[f"rot{n}_ef_max_transfer"] = max(f_column)
            summary[f"rot{n}_ge_max_transfer"] = max(g_column)
            prefixed = [f"rot{n}:{label}" for label in trajectory.labels]
            if merged is None:
                merged = Trajectory(times=trajectory.times, labels=prefixed,
                                    populations=trajectory.populations, basis=MonitorBasis.DRESSED)
            else:
                merged.labels.extend(prefixed)
                for row, extra in zip(merged.populations, trajectory.populations):
                    row.extend(extra)
            merged.norm_drift = max(merged.norm_drift, trajectory.norm_drift)
        return ExperimentOutcome("selective-rabi", summary, trajectory=merged)

    def cphase(self) -> ExperimentOutcome:
        return self._gate("cphase", cphase_protocol, 2)

    def ccphase(self) -> ExperimentOutcome:
        return self._gate("ccphase", ccphase_protocol, 3)

    def _gate(self, name: str, builder, num_resonators: int) -> ExperimentOutcome:
        options = self.preset.protocol
        space = self.space
        gate = IdealGate(num_resonators)

        def schedule_for(result: CalibrationResult) -> Schedule:
            return builder(self.params, result, swap_fractions=options.swap_fractions,
                           ef_coupling_during_swap=options.ef_coupling_during_swap)

        calibration = self.calibration()
        if self.calibrate_first:
            calibration = self.calibration_service.compensate(self.params, calibration, schedule_for,
                                                              space, gate)
        schedule = schedule_for(calibration)
        u = schedule_propagator(schedule, space, self.evolution)
        truth = truth_matrix_from_propagator(u, space)

        initial = uniform_superposition(space)
        final, trajectory = propagate(initial, schedule, self.evolution,
                                      space.computational_indices(QutritLevel.G))
        ideal = computational_state(space, gate.apply(np.ones(2 ** num_resonators)))
        fidelity = state_fidelity(final, ideal)
        conventional = min(1.0, squared_uhlmann_fidelity(final, ideal))

        rng = np.random.default_rng(self.seed)
        random_fidelities = []
        for _ in range(options.random_inputs):
            amplitudes = rng.normal(size=2 ** num_resonators) + 1j * rng.normal(size=2 ** num_resonators)
            source = computational_state(space, amplitudes)
            output = StateVector(u @ source.amplitudes, space, check=False)
            target = computational_state(space, gate.apply(amplitudes))
            random_fidelities.append(state_fidelity(output, target))

        report = GateReport(
            fidelity=fidelity, conventional_fidelity=conventional, total_time=schedule.total_time,
            truth_real=truth.real.tolist(), truth_imag=truth.imag.tolist(),
            leakage=leakage(truth), conditional_phase=conditional_phase(truth), calibration=calibration,
        )
        logger.info("Gate fidelity %.5f in %.2f ns", fidelity, schedule.total_time)
        summary = report.model_dump(mode="json")
        summary.update({
            "total_time_ns": schedule.total_time,
            "segments": [{"label": s.label, "duration_ns": s.duration} for s in schedule.segments],
            "random_input_min_fidelity": min(random_fidelities) if random_fidelities else None,
            "random_inputs": options.random_inputs,
            "seed": self.seed,
            "norm_drift": trajectory.norm_drift,
        })
        return ExperimentOutcome(name, summary, trajectory, figure_data(final), report,
                                 reference_rows={"initial": figure_data(initial), "ideal": figure_data(ideal)})

    def prepare(self) -> ExperimentOutcome:
        options = self.preset.protocol
        space = self.space
        schedule = prepare_uniform_superposition(self.params, options.prep_amplitude,
                                                 options.prep_swap_fraction)
        initial = basis_state(space, QutritLevel.G, (0,) * space.num_resonators)
        final, trajectory = propagate(initial, schedule, self.evolution,
                                      space.computational_indices(QutritLevel.G))
        fidelity = state_fidelity(final, uniform_superposition(space))
        summary = {
            "fidelity": fidelity,
            "conventional_fidelity": min(1.0, squared_uhlmann_fidelity(final, uniform_superposition(space))),
            "total_time_ns": schedule.total_time,
            "norm_drift": trajectory.norm_drift,
        }
        if space.num_resonators >= 2:
            summary["entanglement_entropy_r1_bits"] = entanglement_entropy(final, ["r1"])
        return ExperimentOutcome("prepare", summary, trajectory, figure_data(final))

    def shift_table(self) -> ExperimentOutcome:
        """Perturbative and exact e<->f frequencies of the four (n1, n2) groups."""
        reduced, space = self.calibration_service.calibration_system(self.params, (0, 0))
        basis = dressed_basis(reduced, space)
        rows = []
        for n1, n2 in product((0, 1), repeat=2):
            lower = space.index(QutritLevel.E, (n1, n2))
            upper = space.index(QutritLevel.F, (n1, n2))
            rows.append({
                "n1": n1, "n2": n2, "N": group_index(n1, n2),
                "perturbative_ghz": cc_shift(self.params, n1, n2),
                "exact_ghz": basis.frequency(lower, upper),
            })
        return ExperimentOutcome("shift-table", {"shift_table": rows})
