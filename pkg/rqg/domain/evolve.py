"""
Time-ordered propagation of piecewise-constant schedules with a microwave drive.

Every step is the exponential midpoint rule exp(-i H(t + dt/2) dt). Because the
static Hamiltonian conserves the excitation number N and the drive changes it
by one, H(t) = V(t) H_R V(t)^dagger with V(t) = exp(-i w_d t N), so a driven
segment of n steps collapses to V(t_end) S^n V(t_start)^dagger with
S = D^{1/2} exp(-i H_R dt) D^{1/2} and D = exp(i w_d N dt). This is the same
midpoint scheme, evaluated by repeated squaring instead of one exponential per
step. Undriven segments are propagated exactly.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, expm

from .hamiltonian import (
    TWO_PI,
    build_drive,
    build_static,
    dressed_basis,
    drive_operator,
    excitation_operator,
)
from .hilbert import CompositeSpace, StateVector
from .models import EvolutionConfig, Frame, MonitorBasis, Schedule, Segment, Trajectory
from ..infra.exceptions import RQGIntegrationError

logger = logging.getLogger(__name__)

# Slack when comparing times against the step and sample grids (ns).
TIME_EPSILON = 1e-9

COMMUTATOR_TOLERANCE = 1e-10


def step_count(duration: float, max_step: float) -> int:
    """Number of equal steps no longer than ``max_step`` covering ``duration``."""
    return max(1, math.ceil(duration / max_step - TIME_EPSILON))


class SegmentEvolution:
    """
    Lab-frame evolution of one segment, plus the frame maps that bracket it.

    Args:
        segment: Segment to propagate.
        space: Composite space of the state.
        cfg: Integrator settings.

    Raises:
        RQGIntegrationError: If a driven segment violates the phase-per-step bound.
    """

    def __init__(self, segment: Segment, space: CompositeSpace, cfg: EvolutionConfig):
        self.segment = segment
        self.space = space
        self.cfg = cfg
        self.duration = segment.duration
        self.t0 = segment.drive_time_origin
        self.h_static = build_static(segment.params, space).matrix
        drive = segment.drive
        self.driven = drive.active and drive.amplitude > 0
        self._dressed = None
        self._powers: Dict[int, np.ndarray] = {}

        if not self.driven:
            self.steps = 0
            self._energies, self._eigvecs = eigh(self.h_static)
            logger.debug("Segment %r: %.4f ns undriven, exact", segment.label, self.duration)
            return

        self.steps = step_count(self.duration, cfg.max_step)
        self.dt = self.duration / self.steps
        self.omega_d = TWO_PI * drive.frequency
        self.h_rotating = self.h_static + drive_operator(drive, space).matrix
        phase = (self.omega_d + TWO_PI * drive.amplitude) * self.dt
        if phase >= cfg.max_phase_per_step:
            raise RQGIntegrationError(
                f"Step size {self.dt:.3g} ns gives drive phase {phase:.3f} rad per step, "
                f"limit {cfg.max_phase_per_step} rad")

        self.excitations = np.diag(excitation_operator(space).matrix).real
        mismatch = self.h_static * (self.excitations[None, :] - self.excitations[:, None])
        self.commuting = np.max(np.abs(mismatch)) < COMMUTATOR_TOLERANCE
        if self.commuting:
            half = np.exp(0.5j * self.omega_d * self.dt * self.excitations)
            self._step = half[:, None] * expm(-1j * self.h_rotating * self.dt) * half[None, :]
        else:
            logger.warning("Static Hamiltonian does not conserve excitations; stepping one by one")
            self._drive = build_drive(drive, space)
        logger.debug("Segment %r: %.4f ns, %d steps of %.3g ns",
                     segment.label, self.duration, self.steps, self.dt)

    def _rotation(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.omega_d * t * self.excitations)

    def _power(self, k: int) -> np.ndarray:
        if k not in self._powers:
            self._powers[k] = np.linalg.matrix_power(self._step, k)
        return self._powers[k]

    def _midpoint(self, t: float, h: float) -> np.ndarray:
        """One midpoint step of length ``h`` starting at global time ``t``."""
        if self.commuting:
            rot = self._rotation(t + 0.5 * h)
            return rot[:, None] * expm(-1j * self.h_rotating * h) * rot.conj()[None, :]
        return expm(-1j * (self.h_static + self._drive(t + 0.5 * h).matrix) * h)

    def _split(self, tau: float) -> Tuple[int, float]:
        k = min(self.steps, int(math.floor(tau / self.dt + TIME_EPSILON)))
        h = tau - k * self.dt
        return k, (h if h > TIME_EPSILON else 0.0)

    def lab_states(self, psi: np.ndarray, local_times: Sequence[float]) -> List[np.ndarray]:
        """
        Lab-frame states at increasing local times, starting from ``psi`` at local time 0.
        """
        if not self.driven:
            coeffs = self._eigvecs.conj().T @ psi
            return [self._eigvecs @ (np.exp(-1j * self._energies * tau) * coeffs) for tau in local_times]

        states = []
        done, current = 0, psi
        if self.commuting:
            current = self._rotation(self.t0).conj() * psi
        for tau in local_times:
            k, h = self._split(tau)
            if self.commuting:
                if k > done:
                    current = self._power(k - done) @ current
                    done = k
                lab = self._rotation(self.t0 + k * self.dt) * current
            else:
                while done < k:
                    current = self._midpoint(self.t0 + done * self.dt, self.dt) @ current
                    done += 1
                lab = current
            if h > 0:
                lab = self._midpoint(self.t0 + k * self.dt, h) @ lab
            states.append(lab)
        return states

    def lab_matrix(self) -> np.ndarray:
        """Lab-frame propagator over the whole segment."""
        if not self.driven:
            phases = np.exp(-1j * self._energies * self.duration)
            return (self._eigvecs * phases[None, :]) @ self._eigvecs.conj().T
        if self.commuting:
            end = self._rotation(self.t0 + self.duration)
            start = self._rotation(self.t0).conj()
            return end[:, None] * self._power(self.steps) * start[None, :]
        u = np.eye(self.space.dimension, dtype=complex)
        for k in range(self.steps):
            u = self._midpoint(self.t0 + k * self.dt, self.dt) @ u
        return u

    @property
    def dressed(self):
        if self._dressed is None:
            self._dressed = dressed_basis(self.segment.params, self.space)
        return self._dressed

    def entry_map(self) -> Optional[np.ndarray]:
        if self.segment.frame is Frame.DRESSED:
            return self.dressed.vectors
        return None

    def _frame_exit(self) -> Optional[np.ndarray]:
        frame = self.segment.frame
        if frame is Frame.BARE:
            return np.diag(np.exp(1j * np.diag(self.h_static).real * self.duration))
        if frame is Frame.DRESSED:
            phases = np.exp(1j * self.dressed.energies * self.duration)
            return phases[:, None] * self.dressed.vectors.conj().T
        return None

    def exit_map(self) -> Optional[np.ndarray]:
        """Frame exit map followed by the segment's virtual Z on the resonators."""
        frame_exit = self._frame_exit()
        phases = self.segment.resonator_phases
        if not phases:
            return frame_exit
        photons = self.space.photon_numbers()[:, :len(phases)]
        virtual = np.exp(1j * (photons @ np.asarray(phases, dtype=float)))
        if frame_exit is None:
            return np.diag(virtual)
        return virtual[:, None] * frame_exit

    def propagator(self) -> np.ndarray:
        """Segment propagator including frame maps; adjoint for backward segments."""
        u = self.lab_matrix()
        entry, exit_ = self.entry_map(), self.exit_map()
        if entry is not None:
            u = u @ entry
        if exit_ is not None:
            u = exit_ @ u
        return u.conj().T if self.segment.backward else u

    def monitor_populations(self, lab_state: np.ndarray, indices: Sequence[int],
                            basis: MonitorBasis) -> List[float]:
        if basis is MonitorBasis.DRESSED:
            amplitudes = self.dressed.vectors[:, indices].conj().T @ lab_state
        else:
            amplitudes = lab_state[list(indices)]
        return [float(p) for p in np.abs(amplitudes) ** 2]


def _sample_times(total: float, interval: float) -> List[float]:
    count = int(math.floor(total / interval + TIME_EPSILON))
    return [k * interval for k in range(count + 1)]


def _check_norm(psi: np.ndarray, cfg: EvolutionConfig, where: str) -> float:
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > cfg.norm_tolerance:
        raise RQGIntegrationError(f"Norm drift {drift:.3g} after {where} exceeds {cfg.norm_tolerance}")
    return drift


def propagate(state: StateVector, schedule: Schedule, cfg: Optional[EvolutionConfig] = None,
              monitored: Optional[Sequence[int]] = None,
              basis: MonitorBasis = MonitorBasis.BARE) -> Tuple[StateVector, Trajectory]:
    """
    Propagate a state through a schedule and record monitored populations.

    Samples are taken at k * sample_interval of cumulative schedule time. Inside a
    segment they report the lab-frame state, in the bare basis or in the dressed
    basis of that segment's static Hamiltonian. Backward segments are recorded at
    their end only.

    Args:
        state: Normalized initial state.
        schedule: Segments to apply in order. An empty schedule is the identity.
        cfg: Integrator settings, defaults when omitted.
        monitored: Basis indices to record, every basis state when omitted.
        basis: Basis of the recorded populations.

    Returns:
        Final state and the sampled trajectory.

    Raises:
        RQGIntegrationError: On a step-size violation or norm drift beyond tolerance.
    """
    cfg = cfg or EvolutionConfig()
    space = state.space
    indices = list(range(space.dimension)) if monitored is None else list(monitored)
    trajectory = Trajectory(labels=[space.label(i) for i in indices], basis=basis)
    times = _sample_times(schedule.total_time, cfg.sample_interval)
    psi = state.amplitudes.copy()
    drift = 0.0

    if not schedule.segments:
        trajectory.times.append(0.0)
        trajectory.populations.append([float(p) for p in np.abs(psi[indices]) ** 2])
        return StateVector(psi, space), trajectory

    start = 0.0
    for position, segment in enumerate(schedule.segments):
        evolution = SegmentEvolution(segment, space, cfg)
        end = start + segment.duration
        last = position == len(schedule.segments) - 1
        lower = -TIME_EPSILON if position == 0 else start + TIME_EPSILON
        upper = end + (TIME_EPSILON if not last else 10 * TIME_EPSILON)
        local = [t - start for t in times if lower < t <= upper]

        if segment.backward:
            psi = evolution.propagator() @ psi
            if local:
                trajectory.times.append(start + local[-1])
                trajectory.populations.append([float(p) for p in np.abs(psi[indices]) ** 2])
        else:
            entry = evolution.entry_map()
            psi_lab = entry @ psi if entry is not None else psi
            sample_points = sorted(set(local + [segment.duration]))
            states = evolution.lab_states(psi_lab, sample_points)
            for tau, lab in zip(sample_points, states):
                if any(abs(tau - s) < TIME_EPSILON for s in local):
                    trajectory.times.append(start + tau)
                    trajectory.populations.append(evolution.monitor_populations(lab, indices, basis))
            psi = states[-1]
            exit_ = evolution.exit_map()
            if exit_ is not None:
                psi = exit_ @ psi

        drift = max(drift, _check_norm(psi, cfg, f"segment {position} ({segment.label or 'unnamed'})"))
        if cfg.renormalize_each_step:
            psi = psi / np.linalg.norm(psi)
        start = end

    trajectory.norm_drift = drift
    return StateVector(psi, space, check=False), trajectory


def monitor_dressed(state: StateVector, schedule: Schedule, monitored: Sequence[int],
                    cfg: Optional[EvolutionConfig] = None) -> Trajectory:
    """
    Populations of dressed states of the active static Hamiltonian along a schedule.

    Raises:
        RQGPhysicsError: If a segment's dressing is ambiguous.
    """
    _, trajectory = propagate(state, schedule, cfg, monitored, MonitorBasis.DRESSED)
    return trajectory


def schedule_propagator(schedule: Schedule, space: CompositeSpace,
                        cfg: Optional[EvolutionConfig] = None) -> np.ndarray:
    """Full propagator of a schedule; the identity for an empty schedule."""
    cfg = cfg or EvolutionConfig()
    u = np.eye(space.dimension, dtype=complex)
    for segment in schedule.segments:
        u = SegmentEvolution(segment, space, cfg).propagator() @ u
    drift = np.max(np.abs(u.conj().T @ u - np.eye(space.dimension)))
    if drift > cfg.norm_tolerance:
        raise RQGIntegrationError(f"Propagator unitarity drift {drift:.3g} exceeds {cfg.norm_tolerance}")
    return u
