"""
Core domain models for the RQG system.

All frequencies are ordinary frequencies in GHz, exactly as printed with the
``/(2*pi)`` in device parameter tables. Times are in ns. The conversion to
angular units happens once, in :mod:`rqg.domain.hamiltonian`.
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Dispersive-validity warning threshold for (g/Delta)^2.
DISPERSIVE_WARNING_RATIO = 0.1


class QutritLevel(str, Enum):
    """The three lowest transmon levels."""
    G = "g"
    E = "e"
    F = "f"

    @property
    def index(self) -> int:
        return "gef".index(self.value)


class Transition(str, Enum):
    """Qutrit transitions addressed by couplings and drives."""
    GE = "ge"
    EF = "ef"

    @property
    def levels(self) -> Tuple[QutritLevel, QutritLevel]:
        """Lower and upper level of the transition."""
        if self is Transition.GE:
            return QutritLevel.G, QutritLevel.E
        return QutritLevel.E, QutritLevel.F


class Frame(str, Enum):
    """Bookkeeping frame in which a segment's result is reported."""
    LAB = "lab"
    BARE = "bare"
    DRESSED = "dressed"


class MonitorBasis(str, Enum):
    """Basis in which trajectory populations are recorded."""
    BARE = "bare"
    DRESSED = "dressed"


class AmplitudeConvention(str, Enum):
    """How a printed drive amplitude is read."""
    ORDINARY = "ordinary"
    ANGULAR = "angular"
    RABI = "rabi"

    def to_hamiltonian_amplitude(self, printed: float) -> float:
        """
        Convert a printed amplitude to the Hamiltonian amplitude in GHz.

        Args:
            printed: Amplitude as printed in the parameter table.

        Returns:
            Amplitude Omega (ordinary GHz) entering H_d = Omega (sigma+ e^{-i w t} + h.c.).
        """
        if self is AmplitudeConvention.ANGULAR:
            return printed / (2.0 * math.pi)
        if self is AmplitudeConvention.RABI:
            return printed / 2.0
        return printed


class SystemParams(BaseModel):
    """
    Device frequencies and couplings of one qutrit and K resonators.

    Per-resonator lists are indexed 0..K-1 for resonators r1..rK.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    omega_ge: float = Field(..., gt=0, description="Qutrit g<->e transition frequency (GHz)")
    omega_ef: float = Field(..., gt=0, description="Qutrit e<->f transition frequency (GHz)")
    omega_r: List[float] = Field(default_factory=list, description="Resonator frequencies (GHz)")
    g_ge: List[float] = Field(default_factory=list, description="g<->e couplings (GHz)")
    g_ef: List[float] = Field(default_factory=list, description="e<->f couplings (GHz)")
    coupling_on: List[bool] = Field(default_factory=list, description="Per-resonator coupling switch")

    @field_validator("omega_r")
    @classmethod
    def _positive_frequencies(cls, value: List[float]) -> List[float]:
        if any(f <= 0 for f in value):
            raise ValueError("resonator frequencies must be > 0")
        return value

    @field_validator("g_ge", "g_ef")
    @classmethod
    def _nonnegative_couplings(cls, value: List[float]) -> List[float]:
        if any(g < 0 for g in value):
            raise ValueError("couplings must be >= 0")
        return value

    @model_validator(mode="after")
    def _consistent_lengths(self) -> "SystemParams":
        lengths = {len(self.omega_r), len(self.g_ge), len(self.g_ef), len(self.coupling_on)}
        if len(lengths) != 1:
            raise ValueError(
                "omega_r, g_ge, g_ef and coupling_on must have equal lengths, got "
                f"{len(self.omega_r)}, {len(self.g_ge)}, {len(self.g_ef)}, {len(self.coupling_on)}")
        return self

    @property
    def num_resonators(self) -> int:
        return len(self.omega_r)

    @property
    def omega_f(self) -> float:
        """Energy of |f> above |g> (GHz)."""
        return self.omega_ge + self.omega_ef

    def with_couplings(self, on: List[bool]) -> "SystemParams":
        """Return a snapshot with the given coupling switches."""
        return self.model_copy(update={"coupling_on": list(on)})

    def only_coupled(self, *indices: int) -> "SystemParams":
        """Return a snapshot where only the given resonators (0-based) are coupled."""
        return self.with_couplings([i in indices for i in range(self.num_resonators)])

    def with_resonator_frequency(self, index: int, frequency: float) -> "SystemParams":
        """Return a snapshot with resonator ``index`` (0-based) retuned."""
        omega_r = list(self.omega_r)
        omega_r[index] = frequency
        return self.model_copy(update={"omega_r": omega_r})

    def with_ef_coupling(self, index: int, value: float) -> "SystemParams":
        """Return a snapshot with the e<->f coupling of resonator ``index`` replaced."""
        g_ef = list(self.g_ef)
        g_ef[index] = value
        return self.model_copy(update={"g_ef": g_ef})

    def dispersive_ratios(self) -> List[float]:
        """(g/Delta)^2 for every active coupling, Delta being the transition-resonator detuning."""
        ratios = []
        for i in range(self.num_resonators):
            if not self.coupling_on[i]:
                continue
            for g, omega_q in ((self.g_ge[i], self.omega_ge), (self.g_ef[i], self.omega_ef)):
                delta = omega_q - self.omega_r[i]
                if g == 0:
                    continue
                ratios.append(math.inf if delta == 0 else (g / delta) ** 2)
        return ratios

    @property
    def dispersive_warning(self) -> bool:
        """True when any active coupling violates (g/Delta)^2 <= 0.1."""
        return any(r > DISPERSIVE_WARNING_RATIO for r in self.dispersive_ratios())


class DriveParams(BaseModel):
    """Microwave drive on one qutrit transition."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    amplitude: float = Field(0.0, ge=0, description="Hamiltonian amplitude Omega (GHz)")
    frequency: float = Field(0.0, ge=0, description="Carrier frequency (GHz)")
    transition: Transition = Field(Transition.EF, description="Driven transition")
    phase: float = Field(0.0, description="Carrier phase offset (rad)")
    active: bool = Field(False, description="Whether the drive is on")

    @classmethod
    def off(cls) -> "DriveParams":
        return cls()


class Segment(BaseModel):
    """A piecewise-constant piece of a schedule."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    duration: float = Field(..., gt=0, description="Duration (ns)")
    params: SystemParams
    drive: DriveParams = Field(default_factory=DriveParams.off)
    drive_time_origin: float = Field(0.0, description="Global time at segment start (ns)")
    frame: Frame = Field(Frame.LAB, description="Bookkeeping frame")
    backward: bool = Field(False, description="Apply the adjoint propagator")
    label: str = Field("", description="Human-readable step name")
    resonator_phases: Tuple[float, ...] = Field(
        (), description="Virtual Z at exit: phase (rad) per photon of r1, r2, ... added after the frame map")

    def shifted(self, origin: float) -> "Segment":
        """Return the same segment starting at global time ``origin``."""
        return self.model_copy(update={"drive_time_origin": origin})

    @model_validator(mode="after")
    def _phases_fit_resonators(self) -> "Segment":
        if len(self.resonator_phases) > self.params.num_resonators:
            raise ValueError(f"{len(self.resonator_phases)} resonator phases for "
                             f"{self.params.num_resonators} resonators")
        return self


class Schedule(BaseModel):
    """
    Ordered segments forming a protocol.

    An empty schedule is the identity.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    segments: List[Segment] = Field(default_factory=list)
    initial_frame: Frame = Field(Frame.BARE)

    @classmethod
    def chain(cls, *segments: Segment, initial_frame: Frame = Frame.BARE) -> "Schedule":
        """Build a schedule whose segment origins follow each other in time."""
        placed = []
        origin = 0.0
        for segment in segments:
            placed.append(segment.shifted(origin))
            origin += segment.duration
        return cls(segments=placed, initial_frame=initial_frame)

    def then(self, other: "Schedule") -> "Schedule":
        """
        Concatenate ``other`` after this schedule.

        Forward segments of ``other`` are delayed by this schedule's duration.
        Backward segments keep their clock, since they undo the segment they mirror.
        """
        offset = self.total_time
        moved = [s if s.backward else s.shifted(s.drive_time_origin + offset) for s in other.segments]
        return Schedule(segments=[*self.segments, *moved], initial_frame=self.initial_frame)

    def inverse(self) -> "Schedule":
        """Time-reversed schedule: reversed order, every segment applied backwards on its own clock."""
        reversed_segments = [
            s.model_copy(update={"backward": not s.backward}) for s in reversed(self.segments)
        ]
        return Schedule(segments=reversed_segments, initial_frame=self.initial_frame)

    @property
    def total_time(self) -> float:
        return sum(s.duration for s in self.segments)


class EvolutionConfig(BaseModel):
    """Integrator settings."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_step: float = Field(0.002, gt=0, description="Maximum midpoint step (ns)")
    sample_interval: float = Field(0.5, gt=0, description="Trajectory sampling interval (ns)")
    integrator_order: int = Field(2, description="Magnus order (fixed)")
    renormalize_each_step: bool = Field(False)
    max_phase_per_step: float = Field(0.5, gt=0, description="Bound on drive phase per step (rad)")
    norm_tolerance: float = Field(1e-6, gt=0, description="Allowed norm drift before failing")

    @field_validator("integrator_order")
    @classmethod
    def _fixed_order(cls, value: int) -> int:
        if value != 2:
            raise ValueError("only the second-order exponential midpoint integrator is available")
        return value


class Trajectory(BaseModel):
    """Sampled populations of monitored states."""
    model_config = ConfigDict(extra="forbid")

    times: List[float] = Field(default_factory=list)
    labels: List[str] = Field(default_factory=list)
    populations: List[List[float]] = Field(default_factory=list)
    basis: MonitorBasis = MonitorBasis.BARE
    norm_drift: float = 0.0

    def column(self, label: str) -> List[float]:
        """Population time series of one monitored state."""
        j = self.labels.index(label)
        return [row[j] for row in self.populations]


class CalibrationResult(BaseModel):
    """Outcome of a drive-frequency and pulse-duration calibration."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    drive_frequency: float = Field(..., description="Calibrated carrier (GHz)")
    pulse_duration: float = Field(..., gt=0, description="Full-return time (ns)")
    amplitude: float = Field(..., ge=0, description="Hamiltonian amplitude used (GHz)")
    achieved_selectivity: float = Field(..., ge=-1.0, le=1.0, description="Transfer contrast")
    target_photons: Tuple[int, ...]
    scan_range: Tuple[float, float]
    scan_resolution: float
    estimate: float = Field(..., description="Exact dressed-frequency estimate (GHz)")
    needs_rescan: bool = False
    resonator_phases: Tuple[float, ...] = Field(
        (), description="Virtual Z per resonator (rad per photon) closing the gate")


class GateReport(BaseModel):
    """Figures of merit of a simulated gate protocol."""
    model_config = ConfigDict(extra="forbid")

    fidelity: float = Field(..., ge=0.0, le=1.0 + 1e-9, description="Tr|sqrt(rho) sigma sqrt(rho)|")
    conventional_fidelity: float = Field(..., ge=0.0, le=1.0 + 1e-9, description="Squared Uhlmann fidelity")
    total_time: float = Field(..., ge=0, description="Schedule duration (ns)")
    truth_real: List[List[float]] = Field(..., description="Real part of the computational-subspace matrix")
    truth_imag: List[List[float]] = Field(..., description="Imaginary part of the computational-subspace matrix")
    leakage: float = Field(..., ge=0)
    conditional_phase: Optional[float] = Field(None, description="Phase of the all-ones entry (rad)")
    calibration: Optional[CalibrationResult] = None

    @property
    def truth_matrix(self) -> np.ndarray:
        return np.asarray(self.truth_real) + 1j * np.asarray(self.truth_imag)
