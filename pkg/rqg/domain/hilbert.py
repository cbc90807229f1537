"""
Composite Hilbert space of one transmon qutrit and K truncated resonators.

Subsystem order is fixed: qutrit first, then resonators r1..rK. Basis indices
are row-major over (qutrit level, n1, ..., nK), so index 0 is |g, 0, ..., 0>.
"""

from dataclasses import InitVar, dataclass
from functools import reduce
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .models import QutritLevel, Transition
from ..infra.exceptions import RQGPhysicsError, RQGRangeError

QUTRIT_DIM = 3
NORM_TOLERANCE = 1e-10
HERMITIAN_TOLERANCE = 1e-10
OPERATOR_HERMITIAN_TOLERANCE = 1e-12
EIGENVALUE_FLOOR = -1e-9

Subsystem = Union[int, str]


@dataclass(frozen=True)
class CompositeSpace:
    """
    Ordered tensor product of an optional qutrit and truncated Fock spaces.

    Attributes:
        resonator_cutoffs: Maximum photon number n_max of each resonator.
        has_qutrit: Whether the qutrit factor is present (reduced spaces may drop it).
        resonator_labels: Names of the resonator factors, default r1..rK.
    """
    resonator_cutoffs: Tuple[int, ...]
    has_qutrit: bool = True
    resonator_labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        cutoffs = tuple(int(c) for c in self.resonator_cutoffs)
        object.__setattr__(self, "resonator_cutoffs", cutoffs)
        if any(c < 1 for c in cutoffs):
            raise RQGRangeError(f"Resonator cutoffs must be >= 1, got {cutoffs}")
        if self.resonator_labels is None:
            labels = tuple(f"r{i + 1}" for i in range(len(cutoffs)))
            object.__setattr__(self, "resonator_labels", labels)
        elif len(self.resonator_labels) != len(cutoffs):
            raise RQGRangeError("One label per resonator is required")
        if not self.has_qutrit and not cutoffs:
            raise RQGRangeError("A space needs at least one factor")

    @classmethod
    def uniform(cls, num_resonators: int, cutoff: int = 3) -> "CompositeSpace":
        """Qutrit plus ``num_resonators`` resonators sharing one cutoff."""
        return cls(tuple([cutoff] * num_resonators))

    @property
    def num_resonators(self) -> int:
        return len(self.resonator_cutoffs)

    @property
    def subsystem_names(self) -> Tuple[str, ...]:
        return (("q",) if self.has_qutrit else ()) + tuple(self.resonator_labels)

    @property
    def dims(self) -> Tuple[int, ...]:
        return (((QUTRIT_DIM,) if self.has_qutrit else ())
                + tuple(c + 1 for c in self.resonator_cutoffs))

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def position(self, subsystem: Subsystem) -> int:
        """Position of a subsystem given by name or position."""
        if isinstance(subsystem, str):
            try:
                return self.subsystem_names.index(subsystem)
            except ValueError:
                raise RQGRangeError(f"Unknown subsystem: {subsystem}")
        if not 0 <= subsystem < len(self.dims):
            raise RQGRangeError(f"Subsystem position out of range: {subsystem}")
        return subsystem

    def resonator_position(self, resonator_index: int) -> int:
        """Position of resonator ``resonator_index`` (1-based, r1 is 1)."""
        if not 1 <= resonator_index <= self.num_resonators:
            raise RQGRangeError(
                f"Resonator index {resonator_index} out of range 1..{self.num_resonators}")
        return resonator_index - 1 + (1 if self.has_qutrit else 0)

    def index(self, qutrit: Optional[QutritLevel], photons: Sequence[int]) -> int:
        """
        Basis index of (qutrit level, n1, ..., nK).

        Raises:
            RQGRangeError: If a photon count exceeds its cutoff or the tuple has the wrong length.
        """
        photons = tuple(int(n) for n in photons)
        if len(photons) != self.num_resonators:
            raise RQGRangeError(
                f"Expected {self.num_resonators} photon numbers, got {len(photons)}")
        for i, (n, cutoff) in enumerate(zip(photons, self.resonator_cutoffs)):
            if not 0 <= n <= cutoff:
                raise RQGRangeError(f"Photon number {n} of r{i + 1} exceeds cutoff {cutoff}")
        if self.has_qutrit:
            level = QutritLevel(qutrit)
            digits = (level.index,) + photons
        else:
            digits = photons
        return int(np.ravel_multi_index(digits, self.dims))

    def labels(self, index: int) -> Tuple[Optional[QutritLevel], Tuple[int, ...]]:
        """Inverse of :meth:`index`."""
        if not 0 <= index < self.dimension:
            raise RQGRangeError(f"Basis index {index} out of range")
        digits = tuple(int(d) for d in np.unravel_index(index, self.dims))
        if self.has_qutrit:
            return QutritLevel("gef"[digits[0]]), digits[1:]
        return None, digits

    def label(self, index: int) -> str:
        """Compact ket label such as ``f,1,0``."""
        level, photons = self.labels(index)
        parts = ([level.value] if level is not None else []) + [str(n) for n in photons]
        return ",".join(parts)

    def computational_indices(self, level: QutritLevel = QutritLevel.G) -> List[int]:
        """
        Indices of |level> ⊗ |n1..nK> with every n_i in {0, 1}, ordered with r1 most significant.
        """
        indices = []
        for k in range(2 ** self.num_resonators):
            bits = [(k >> (self.num_resonators - 1 - i)) & 1 for i in range(self.num_resonators)]
            indices.append(self.index(level, bits))
        return indices

    def embed(self, local: np.ndarray, position: int) -> np.ndarray:
        """Tensor a single-factor matrix with identities on every other factor."""
        factors = [local if p == position else np.eye(d) for p, d in enumerate(self.dims)]
        return reduce(np.kron, factors).astype(complex)

    def photon_numbers(self) -> np.ndarray:
        """Array (dimension x K) of photon numbers of every basis state."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1).T
        offset = 1 if self.has_qutrit else 0
        return grids[:, offset:]

    def qutrit_levels(self) -> np.ndarray:
        """Qutrit level index (0, 1, 2) of every basis state."""
        if not self.has_qutrit:
            raise RQGRangeError("Space has no qutrit factor")
        return np.indices(self.dims).reshape(len(self.dims), -1)[0]


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on a composite space."""
    amplitudes: np.ndarray
    space: CompositeSpace
    check: InitVar[bool] = True

    def __post_init__(self, check: bool):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amplitudes)
        if amplitudes.shape[0] != self.space.dimension:
            raise RQGRangeError(
                f"State length {amplitudes.shape[0]} does not match dimension {self.space.dimension}")
        if check and abs(np.linalg.norm(amplitudes) - 1.0) > NORM_TOLERANCE:
            raise RQGRangeError(f"State is not normalized: norm={np.linalg.norm(amplitudes)}")

    @classmethod
    def normalized(cls, space: CompositeSpace, amplitudes: Iterable[complex]) -> "StateVector":
        """Build a state from unnormalized amplitudes."""
        vec = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                         dtype=complex)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise RQGRangeError("Cannot normalize the zero vector")
        return cls(vec / norm, space)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        _require_same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.space, check=False)


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state: Hermitian, unit trace, positive semidefinite."""
    matrix: np.ndarray
    space: CompositeSpace
    check: InitVar[bool] = True

    def __post_init__(self, check: bool):
        matrix = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", matrix)
        d = self.space.dimension
        if matrix.shape != (d, d):
            raise RQGRangeError(f"Density matrix shape {matrix.shape} does not match dimension {d}")
        if not check:
            return
        if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOLERANCE:
            raise RQGRangeError("Density matrix is not Hermitian")
        if abs(np.trace(matrix) - 1.0) > HERMITIAN_TOLERANCE:
            raise RQGRangeError(f"Density matrix trace is {np.trace(matrix).real}, expected 1")
        if np.min(np.linalg.eigvalsh(matrix)) < EIGENVALUE_FLOOR:
            raise RQGRangeError("Density matrix has negative eigenvalues")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def is_pure(self, tol: float = 1e-9) -> bool:
        return abs(np.trace(self.matrix @ self.matrix).real - 1.0) < tol


@dataclass(frozen=True)
class Operator:
    """Dense operator on a composite space."""
    matrix: np.ndarray
    space: CompositeSpace
    hermitian_hint: bool = False

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", matrix)
        d = self.space.dimension
        if matrix.shape != (d, d):
            raise RQGRangeError(f"Operator shape {matrix.shape} does not match dimension {d}")
        if self.hermitian_hint and np.max(np.abs(matrix - matrix.conj().T), initial=0.0) \
                >= OPERATOR_HERMITIAN_TOLERANCE:
            raise RQGRangeError("Operator flagged Hermitian is not Hermitian")

    def __add__(self, other: "Operator") -> "Operator":
        _require_same_space(self.space, other.space)
        return Operator(self.matrix + other.matrix, self.space,
                        self.hermitian_hint and other.hermitian_hint)

    def __sub__(self, other: "Operator") -> "Operator":
        _require_same_space(self.space, other.space)
        return Operator(self.matrix - other.matrix, self.space,
                        self.hermitian_hint and other.hermitian_hint)

    def scaled(self, factor: complex) -> "Operator":
        hermitian = self.hermitian_hint and np.isreal(factor)
        return Operator(self.matrix * factor, self.space, bool(hermitian))

    def commutator(self, other: "Operator") -> "Operator":
        _require_same_space(self.space, other.space)
        return Operator(self.matrix @ other.matrix - other.matrix @ self.matrix, self.space)


def _require_same_space(a: CompositeSpace, b: CompositeSpace) -> None:
    if a != b:
        raise RQGRangeError(f"Dimension mismatch: {a.dims} vs {b.dims}")


def basis_state(space: CompositeSpace, qutrit: Optional[QutritLevel], photons: Sequence[int]) -> StateVector:
    """
    Unit vector on the basis element (qutrit, n1, ..., nK).

    Raises:
        RQGRangeError: If a photon count exceeds its cutoff.
    """
    vec = np.zeros(space.dimension, dtype=complex)
    vec[space.index(qutrit, photons)] = 1.0
    return StateVector(vec, space)


def identity(space: CompositeSpace) -> Operator:
    return Operator(np.eye(space.dimension), space, hermitian_hint=True)


def annihilation(space: CompositeSpace, resonator_index: int) -> Operator:
    """Lowering operator a_i of resonator ``resonator_index`` (1-based)."""
    position = space.resonator_position(resonator_index)
    d = space.dims[position]
    local = np.diag(np.sqrt(np.arange(1, d)), k=1)
    return Operator(space.embed(local, position), space)


def creation(space: CompositeSpace, resonator_index: int) -> Operator:
    return adjoint(annihilation(space, resonator_index))


def number(space: CompositeSpace, resonator_index: int) -> Operator:
    """Photon-number operator a_i^dagger a_i."""
    position = space.resonator_position(resonator_index)
    local = np.diag(np.arange(space.dims[position], dtype=float))
    return Operator(space.embed(local, position), space, hermitian_hint=True)


def qutrit_transition(space: CompositeSpace, source: QutritLevel, target: QutritLevel) -> Operator:
    """
    |target><source| on the qutrit, identity elsewhere.

    Raises:
        RQGPhysicsError: For the g<->f transition, which is not part of the model.
    """
    if not space.has_qutrit:
        raise RQGRangeError("Space has no qutrit factor")
    source, target = QutritLevel(source), QutritLevel(target)
    if abs(source.index - target.index) != 1:
        raise RQGPhysicsError(
            f"Unsupported qutrit transition {source.value}->{target.value}: "
            "only g<->e and e<->f are modeled")
    local = np.zeros((QUTRIT_DIM, QUTRIT_DIM))
    local[target.index, source.index] = 1.0
    return Operator(space.embed(local, 0), space)


def raising(space: CompositeSpace, transition: Transition) -> Operator:
    """sigma^+ of a transition."""
    lower, upper = Transition(transition).levels
    return qutrit_transition(space, lower, upper)


def qutrit_projector(space: CompositeSpace, level: QutritLevel) -> Operator:
    local = np.zeros((QUTRIT_DIM, QUTRIT_DIM))
    level = QutritLevel(level)
    local[level.index, level.index] = 1.0
    return Operator(space.embed(local, 0), space, hermitian_hint=True)


def adjoint(op: Operator) -> Operator:
    return Operator(op.matrix.conj().T, op.space, op.hermitian_hint)


def matmul(a: Operator, b: Union[Operator, StateVector]) -> Union[Operator, StateVector]:
    """Operator product, or operator applied to a state (result not renormalized)."""
    _require_same_space(a.space, b.space)
    if isinstance(b, StateVector):
        return StateVector(a.matrix @ b.amplitudes, b.space, check=False)
    return Operator(a.matrix @ b.matrix, a.space)


def _joined_space(a: CompositeSpace, b: CompositeSpace) -> CompositeSpace:
    if b.has_qutrit:
        raise RQGRangeError("The qutrit factor must come first in a tensor product")
    return CompositeSpace(a.resonator_cutoffs + b.resonator_cutoffs, a.has_qutrit,
                          tuple(a.resonator_labels) + tuple(b.resonator_labels))


def tensor(a, b):
    """
    Tensor product of two operators, two states or two density matrices.

    The left factor's subsystems precede the right factor's.
    """
    if type(a) is not type(b):
        raise RQGRangeError(f"Cannot tensor {type(a).__name__} with {type(b).__name__}")
    space = _joined_space(a.space, b.space)
    if isinstance(a, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes), space)
    if isinstance(a, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix), space)
    return Operator(np.kron(a.matrix, b.matrix), space, a.hermitian_hint and b.hermitian_hint)


def expectation(op: Operator, state: Union[StateVector, DensityMatrix]) -> complex:
    """
    <psi|op|psi> or Tr(op rho). Real (within 1e-10) for Hermitian operators.
    """
    _require_same_space(op.space, state.space)
    if isinstance(state, StateVector):
        value = complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))
    else:
        value = complex(np.trace(op.matrix @ state.matrix))
    if op.hermitian_hint:
        return complex(value.real, 0.0)
    return value


def partial_trace(rho: DensityMatrix, keep: Iterable[Subsystem]) -> DensityMatrix:
    """
    Reduced density matrix on the kept subsystems, in canonical order.

    Args:
        rho: Density matrix on a composite space.
        keep: Subsystems to keep, by name (``"q"``, ``"r1"``...) or position.

    Returns:
        Reduced density matrix on the kept factors.
    """
    space = rho.space
    keep_positions = sorted({space.position(s) for s in keep})
    if not keep_positions:
        raise RQGRangeError("partial_trace needs at least one subsystem to keep")
    dims = space.dims
    tensor_form = rho.matrix.reshape(dims + dims)
    traced = [p for p in range(len(dims)) if p not in keep_positions]
    for position in sorted(traced, reverse=True):
        half = tensor_form.ndim // 2
        tensor_form = np.trace(tensor_form, axis1=position, axis2=position + half)
    kept_dim = int(np.prod([dims[p] for p in keep_positions]))
    reduced_space = _reduced_space(space, keep_positions)
    return DensityMatrix(tensor_form.reshape(kept_dim, kept_dim), reduced_space, check=False)


def _reduced_space(space: CompositeSpace, keep_positions: List[int]) -> CompositeSpace:
    offset = 1 if space.has_qutrit else 0
    has_qutrit = space.has_qutrit and 0 in keep_positions
    resonators = [p - offset for p in keep_positions if p >= offset]
    return CompositeSpace(
        tuple(space.resonator_cutoffs[r] for r in resonators),
        has_qutrit,
        tuple(space.resonator_labels[r] for r in resonators),
    )
