"""
Fidelities, truth tables, reduced density matrices and export tables.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .evolve import schedule_propagator
from .hilbert import (
    CompositeSpace,
    DensityMatrix,
    StateVector,
    Subsystem,
    partial_trace,
)
from .models import EvolutionConfig, QutritLevel, Schedule, SystemParams, Trajectory
from ..infra.exceptions import RQGFidelityError, RQGRangeError

logger = logging.getLogger(__name__)

# Eigenvalues in [-CLAMP_TOLERANCE, 0) are treated as zero.
CLAMP_TOLERANCE = 1e-9
# Negative eigenvalues above this are rounding noise and clamp silently.
CLAMP_WARNING_LEVEL = -1e-12

State = Union[StateVector, DensityMatrix]


def as_density_matrix(state: State) -> DensityMatrix:
    if isinstance(state, StateVector):
        return state.to_density_matrix()
    return state


def _psd_eigen(matrix: np.ndarray, what: str):
    values, vectors = np.linalg.eigh(matrix)
    most_negative = values.min(initial=0.0)
    if most_negative < -CLAMP_TOLERANCE:
        raise RQGFidelityError(f"{what} has eigenvalue {most_negative:.3g} below -{CLAMP_TOLERANCE}")
    if most_negative < CLAMP_WARNING_LEVEL:
        logger.warning("Clamping negative eigenvalue %.3g of %s to zero", most_negative, what)
    return np.clip(values, 0.0, None), vectors


def _sqrtm_psd(matrix: np.ndarray, what: str) -> np.ndarray:
    values, vectors = _psd_eigen(matrix, what)
    return (vectors * np.sqrt(values)[None, :]) @ vectors.conj().T


def _sandwich(rho: DensityMatrix, sigma: DensityMatrix) -> np.ndarray:
    if rho.space.dims != sigma.space.dims:
        raise RQGRangeError(f"Dimension mismatch: {rho.space.dims} vs {sigma.space.dims}")
    root = _sqrtm_psd(rho.matrix, "rho")
    product = root @ sigma.matrix @ root
    return 0.5 * (product + product.conj().T)


def uhlmann_fidelity(rho_f: State, rho_ideal: State) -> float:
    """
    Fidelity in the trace form F = Tr|sqrt(rho_f) rho_ideal sqrt(rho_f)|.

    Equals |<psi|phi>|^2 for two pure states and <phi|rho_f|phi> when the ideal
    state is pure.

    Raises:
        RQGFidelityError: If an input has eigenvalues below -1e-9.
    """
    rho_f, rho_ideal = as_density_matrix(rho_f), as_density_matrix(rho_ideal)
    _psd_eigen(rho_ideal.matrix, "rho_ideal")
    values = np.linalg.eigvalsh(_sandwich(rho_f, rho_ideal))
    return float(np.sum(np.abs(values)))


def squared_uhlmann_fidelity(rho: State, sigma: State) -> float:
    """
    Conventional fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, symmetric in its arguments.
    """
    rho, sigma = as_density_matrix(rho), as_density_matrix(sigma)
    _psd_eigen(sigma.matrix, "sigma")
    values, _ = _psd_eigen(_sandwich(rho, sigma), "sqrt(rho) sigma sqrt(rho)")
    return float(np.sum(np.sqrt(values)) ** 2)


def state_fidelity(actual: State, ideal: State) -> float:
    """Trace-form fidelity clipped to [0, 1] for reporting."""
    return float(min(1.0, max(0.0, uhlmann_fidelity(actual, ideal))))


@dataclass(frozen=True)
class IdealGate:
    """
    Diagonal phase gate on K resonator qubits with -1 on the all-ones state.

    Computational states are ordered with r1 most significant.
    """
    num_resonators: int

    def __post_init__(self):
        if self.num_resonators not in (2, 3):
            raise RQGRangeError(f"Ideal phase gates cover 2 or 3 resonators, got {self.num_resonators}")

    @property
    def matrix(self) -> np.ndarray:
        diagonal = np.ones(2 ** self.num_resonators, dtype=complex)
        diagonal[-1] = -1.0
        return np.diag(diagonal)

    def apply(self, amplitudes: Sequence[complex]) -> np.ndarray:
        return self.matrix @ np.asarray(amplitudes, dtype=complex)


def computational_state(space: CompositeSpace, amplitudes: Sequence[complex]) -> StateVector:
    """Embed 2^K amplitudes on |g> ⊗ |n1..nK>, n_i in {0,1}, and normalize."""
    indices = space.computational_indices(QutritLevel.G)
    if len(amplitudes) != len(indices):
        raise RQGRangeError(f"Expected {len(indices)} amplitudes, got {len(amplitudes)}")
    vec = np.zeros(space.dimension, dtype=complex)
    vec[indices] = np.asarray(amplitudes, dtype=complex)
    return StateVector.normalized(space, vec)


def uniform_superposition(space: CompositeSpace) -> StateVector:
    """Product state ⊗_i (|0> + |1>)_i / sqrt(2) ⊗ |g>."""
    return computational_state(space, np.ones(2 ** space.num_resonators))


def extract_truth_matrix(schedule: Schedule, params: SystemParams, space: CompositeSpace,
                         cfg: Optional[EvolutionConfig] = None) -> np.ndarray:
    """
    Action of a schedule on the computational states |g, n1..nK>, n_i in {0,1}.

    The global phase is fixed so that the |0..0> diagonal entry is positive real.
    """
    if params.num_resonators != space.num_resonators:
        raise RQGRangeError(
            f"Space has {space.num_resonators} resonators but parameters list {params.num_resonators}")
    return truth_matrix_from_propagator(schedule_propagator(schedule, space, cfg), space)


def truth_matrix_from_propagator(u: np.ndarray, space: CompositeSpace) -> np.ndarray:
    """Computational block of a full propagator, gauged like :func:`extract_truth_matrix`."""
    indices = space.computational_indices(QutritLevel.G)
    matrix = u[np.ix_(indices, indices)]
    reference = matrix[0, 0]
    if abs(reference) > 0:
        matrix = matrix * (abs(reference) / reference)
    return matrix


def leakage(truth_matrix: np.ndarray) -> float:
    """Largest population lost from the computational subspace over its basis inputs."""
    lost = 1.0 - np.sum(np.abs(truth_matrix) ** 2, axis=0)
    return float(max(0.0, lost.max()))


def conditional_phase(truth_matrix: np.ndarray) -> float:
    """Phase of the all-ones diagonal entry relative to the all-zeros entry (rad)."""
    return float(np.angle(truth_matrix[-1, -1] / truth_matrix[0, 0]))


def gate_overlap(truth_matrix: np.ndarray, ideal: np.ndarray) -> float:
    """|Tr(ideal^dagger M)| / d, insensitive to a global phase."""
    return float(abs(np.trace(ideal.conj().T @ truth_matrix)) / ideal.shape[0])


def _photon_bits(dimension: int) -> np.ndarray:
    num_resonators = int(round(np.log2(dimension)))
    k = np.arange(dimension)
    return np.array([(k >> (num_resonators - 1 - i)) & 1 for i in range(num_resonators)]).T


def apply_virtual_z(truth_matrix: np.ndarray, phases: Sequence[float]) -> np.ndarray:
    """Truth matrix after exp(i sum_i phases[i] n_i) on the outputs, regauged."""
    rows = np.exp(1j * (_photon_bits(truth_matrix.shape[0]) @ np.asarray(phases, dtype=float)))
    matrix = rows[:, None] * truth_matrix
    reference = matrix[0, 0]
    if abs(reference) > 0:
        matrix = matrix * (abs(reference) / reference)
    return matrix


def virtual_z_correction(truth_matrix: np.ndarray, ideal: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """
    Per-resonator phases maximizing the overlap of the corrected truth matrix with ``ideal``.

    Each phase is optimized in turn over (-pi, pi]; the overlap is unimodal in
    any single phase, so a few sweeps settle.
    """
    num_resonators = int(round(np.log2(truth_matrix.shape[0])))
    phases = np.zeros(num_resonators)

    def overlap_with(i: int, value: float) -> float:
        trial = phases.copy()
        trial[i] = value
        return gate_overlap(apply_virtual_z(truth_matrix, trial), ideal)

    for _ in range(sweeps):
        for i in range(num_resonators):
            result = minimize_scalar(lambda value: -overlap_with(i, value), bounds=(-np.pi, np.pi),
                                     method="bounded", options={"xatol": 1e-8})
            if -result.fun > overlap_with(i, phases[i]):
                phases[i] = result.x
    return phases


def resonator_density_matrix(state: State) -> DensityMatrix:
    """Reduced density matrix of the resonators, the qutrit traced out."""
    rho = as_density_matrix(state)
    return partial_trace(rho, rho.space.resonator_labels)


def computational_block(rho: DensityMatrix) -> np.ndarray:
    """Elements of a resonator density matrix between computational states."""
    if rho.space.has_qutrit:
        rho = resonator_density_matrix(rho)
    bits = np.indices([2] * rho.space.num_resonators).reshape(rho.space.num_resonators, -1).T
    indices = [rho.space.index(None, b) for b in bits]
    return rho.matrix[np.ix_(indices, indices)]


def entanglement_entropy(rho: State, keep: Iterable[Subsystem]) -> float:
    """Von Neumann entropy (bits) of the reduced state on ``keep``."""
    reduced = partial_trace(as_density_matrix(rho), keep)
    values, _ = _psd_eigen(0.5 * (reduced.matrix + reduced.matrix.conj().T), "reduced state")
    values = values[values > 1e-15]
    return float(-np.sum(values * np.log2(values)))


def density_matrix_table(block: np.ndarray, num_resonators: int) -> List[dict]:
    """Rows (row, col, real, imag) of a computational-block density matrix."""
    labels = ["".join(str(b) for b in bits)
              for bits in np.indices([2] * num_resonators).reshape(num_resonators, -1).T]
    rows = []
    for i, row_label in enumerate(labels):
        for j, col_label in enumerate(labels):
            rows.append({"row": row_label, "col": col_label,
                         "real": float(block[i, j].real), "imag": float(block[i, j].imag)})
    return rows


def trajectory_table(trajectory: Trajectory) -> List[dict]:
    """One row per sample: time_ns followed by the monitored populations."""
    rows = []
    for t, populations in zip(trajectory.times, trajectory.populations):
        row = {"time_ns": float(t)}
        row.update({label: float(p) for label, p in zip(trajectory.labels, populations)})
        rows.append(row)
    return rows


def figure_data(data: Union[Trajectory, DensityMatrix, StateVector]) -> List[dict]:
    """Export rows for a trajectory or for the resonators' computational block of a state."""
    if isinstance(data, Trajectory):
        return trajectory_table(data)
    rho = as_density_matrix(data)
    num_resonators = rho.space.num_resonators
    return density_matrix_table(computational_block(rho), num_resonators)
