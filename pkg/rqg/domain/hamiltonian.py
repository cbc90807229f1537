"""
Hamiltonian assembly and dispersive-shift calculations.

Parameters are stored in ordinary GHz; every matrix returned here is in
angular units (rad/ns), the 2*pi factor being applied in this module only.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .hilbert import (
    CompositeSpace,
    Operator,
    adjoint,
    annihilation,
    number,
    qutrit_projector,
    qutrit_transition,
    raising,
)
from .models import DriveParams, QutritLevel, SystemParams, Transition
from ..infra.exceptions import RQGPhysicsError, RQGRangeError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Minimum squared overlap between a bare state and its dressed partner.
DRESSING_OVERLAP_THRESHOLD = 0.5
# Overlaps within this of the threshold count as ambiguous.
OVERLAP_SLACK = 1e-9

# Relative tolerance on 3 g1^2/D1 = g2^2/D2 for the cc-phase grouping.
RATIO_CONDITION_TOLERANCE = 0.01


def _check_space(params: SystemParams, space: CompositeSpace) -> None:
    if not space.has_qutrit:
        raise RQGRangeError("Hamiltonian assembly needs a space with a qutrit factor")
    if space.num_resonators != params.num_resonators:
        raise RQGRangeError(
            f"Space has {space.num_resonators} resonators but parameters list {params.num_resonators}")


def build_static(params: SystemParams, space: CompositeSpace) -> Operator:
    """
    Static Hamiltonian of the qutrit and resonators in the rotating-wave form.

    Coupling terms are added only for resonators whose ``coupling_on`` flag is set.

    Args:
        params: Device parameters (GHz).
        space: Composite space whose resonator count matches ``params``.

    Returns:
        Hermitian operator in rad/ns.

    Raises:
        RQGRangeError: If the list lengths do not match the space.
    """
    _check_space(params, space)
    qutrit_energies = np.diag([0.0, params.omega_ge, params.omega_f])
    diagonal = space.embed(qutrit_energies, 0)
    for i, omega in enumerate(params.omega_r, start=1):
        diagonal = diagonal + omega * number(space, i).matrix

    coupling = np.zeros((space.dimension, space.dimension), dtype=complex)
    lowering_ge = qutrit_transition(space, QutritLevel.E, QutritLevel.G).matrix
    lowering_ef = qutrit_transition(space, QutritLevel.F, QutritLevel.E).matrix
    for i in range(params.num_resonators):
        if not params.coupling_on[i]:
            continue
        a_dag = adjoint(annihilation(space, i + 1)).matrix
        coupling += params.g_ge[i] * (a_dag @ lowering_ge)
        coupling += params.g_ef[i] * (a_dag @ lowering_ef)

    # X + X^dagger, Hermitian to the last bit
    matrix = TWO_PI * (diagonal + coupling + coupling.conj().T)
    return Operator(matrix, space, hermitian_hint=True)


def excitation_operator(space: CompositeSpace) -> Operator:
    """Total excitation number: photons plus 1 for |e> and 2 for |f>."""
    matrix = (qutrit_projector(space, QutritLevel.E).matrix
              + 2.0 * qutrit_projector(space, QutritLevel.F).matrix)
    for i in range(1, space.num_resonators + 1):
        matrix = matrix + number(space, i).matrix
    return Operator(matrix, space, hermitian_hint=True)


def drive_operator(drive: DriveParams, space: CompositeSpace) -> Operator:
    """Drive Hamiltonian at global time zero, Omega (e^{i phi} sigma+ + h.c.), in rad/ns."""
    sigma_plus = raising(space, drive.transition).matrix
    term = TWO_PI * drive.amplitude * np.exp(1j * drive.phase) * sigma_plus
    return Operator(term + term.conj().T, space, hermitian_hint=True)


def build_drive(drive: DriveParams, space: CompositeSpace) -> Callable[[float], Operator]:
    """
    Time-dependent drive H_d(t) = Omega (sigma+ e^{-i(w_d t - phi)} + h.c.).

    Returns:
        Function mapping global time (ns) to a Hermitian operator. An inactive
        drive maps every time to the zero operator.
    """
    if not drive.active:
        zero = Operator(np.zeros((space.dimension, space.dimension)), space, hermitian_hint=True)
        return lambda t: zero
    sigma_plus = raising(space, drive.transition).matrix
    amplitude = TWO_PI * drive.amplitude
    omega_d = TWO_PI * drive.frequency

    def hamiltonian(t: float) -> Operator:
        term = amplitude * np.exp(-1j * (omega_d * t - drive.phase)) * sigma_plus
        return Operator(term + term.conj().T, space, hermitian_hint=True)

    return hamiltonian


def dispersive_shift_two_level(g: float, delta: float, n: int) -> float:
    """
    Photon-number-dependent qubit shift (g^2/Delta)(2n + 1).

    Args:
        g: Coupling (GHz).
        delta: Qubit-resonator detuning (GHz).
        n: Photon number.

    Returns:
        Shift of the qubit transition frequency (GHz).

    Raises:
        RQGPhysicsError: If the detuning is zero.
        RQGRangeError: If |g/delta| >= 1.
    """
    if delta == 0:
        raise RQGPhysicsError("Degenerate detuning: delta = 0")
    if abs(g / delta) >= 1:
        raise RQGRangeError(f"Dispersive formula needs |g/delta| < 1, got {abs(g / delta):.3f}")
    return g * g / delta * (2 * n + 1)


def build_two_level(omega_q: float, omega_r: float, g: float, cutoff: int) -> np.ndarray:
    """
    Jaynes-Cummings matrix of a qubit and one resonator, in rad/ns.

    Basis order is (qubit level, n) with the qubit most significant.
    """
    if cutoff < 1:
        raise RQGRangeError(f"Cutoff must be >= 1, got {cutoff}")
    fock = cutoff + 1
    a = np.diag(np.sqrt(np.arange(1, fock)), k=1)
    sigma_minus = np.array([[0.0, 1.0], [0.0, 0.0]])
    h = (omega_q * np.kron(np.diag([0.0, 1.0]), np.eye(fock))
         + omega_r * np.kron(np.eye(2), a.T @ a))
    coupling = g * np.kron(sigma_minus, a.T)
    return TWO_PI * (h + coupling + coupling.T).astype(complex)


def exact_two_level_shift(omega_q: float, omega_r: float, g: float, n: int,
                          cutoff: Optional[int] = None) -> float:
    """
    Exact shift of the qubit transition at photon number ``n`` (GHz).

    The eigenstates adiabatically connected to |g,n> and |e,n> are found by
    maximum overlap in the Jaynes-Cummings spectrum.
    """
    cutoff = cutoff if cutoff is not None else n + 2
    h = build_two_level(omega_q, omega_r, g, cutoff)
    energies, vectors = np.linalg.eigh(h)
    fock = cutoff + 1

    def dressed_energy(bare_index: int) -> float:
        return energies[int(np.argmax(np.abs(vectors[bare_index, :]) ** 2))]

    transition = (dressed_energy(fock + n) - dressed_energy(n)) / TWO_PI
    return float(transition - omega_q)


@dataclass(frozen=True)
class DressedBasis:
    """
    Eigenbasis of a static Hamiltonian labeled by the bare states it connects to.

    Attributes:
        vectors: Unitary whose column k is the dressed partner of bare basis state k.
        energies: Dressed energy of each column (rad/ns).
        space: Composite space.
    """
    vectors: np.ndarray
    energies: np.ndarray
    space: CompositeSpace

    def frequency(self, lower: int, upper: int) -> float:
        """Transition frequency between two dressed states, by bare index (GHz)."""
        return float((self.energies[upper] - self.energies[lower]) / TWO_PI)

    def to_dressed(self, amplitudes: np.ndarray) -> np.ndarray:
        """Components of a lab-basis vector on the dressed states."""
        return self.vectors.conj().T @ amplitudes


def _conserved_sectors(params: SystemParams, space: CompositeSpace) -> Dict[tuple, np.ndarray]:
    excitations = np.rint(np.diag(excitation_operator(space).matrix).real).astype(int)
    photons = space.photon_numbers()
    uncoupled = [i for i in range(params.num_resonators)
                 if not params.coupling_on[i] or (params.g_ge[i] == 0 and params.g_ef[i] == 0)]
    sectors: Dict[tuple, list] = {}
    for k in range(space.dimension):
        key = (int(excitations[k]),) + tuple(int(photons[k, i]) for i in uncoupled)
        sectors.setdefault(key, []).append(k)
    return {key: np.asarray(indices) for key, indices in sectors.items()}


@lru_cache(maxsize=64)
def _warn_non_dispersive(params_json: str) -> None:
    logger.warning("Dispersive validity flag: (g/Delta)^2 > 0.1 for an active coupling")


@lru_cache(maxsize=64)
def _dressed_basis_cached(params_json: str, space: CompositeSpace) -> DressedBasis:
    params = SystemParams.model_validate_json(params_json)
    h = build_static(params, space).matrix
    dim = space.dimension
    vectors = np.zeros((dim, dim), dtype=complex)
    energies = np.zeros(dim)

    for key, block in _conserved_sectors(params, space).items():
        values, local = np.linalg.eigh(h[np.ix_(block, block)])
        overlaps = np.abs(local) ** 2
        rows, cols = linear_sum_assignment(-overlaps)
        worst = overlaps[rows, cols].min()
        if worst < DRESSING_OVERLAP_THRESHOLD + OVERLAP_SLACK:
            bare = block[rows[np.argmin(overlaps[rows, cols])]]
            raise RQGPhysicsError(
                f"Non-dispersive regime: dressed partner of |{space.label(bare)}> "
                f"has squared overlap {worst:.3f} < {DRESSING_OVERLAP_THRESHOLD}")
        for row, col in zip(rows, cols):
            column = local[:, col]
            dominant = column[row]
            column = column * (abs(dominant) / dominant)
            vectors[block, block[row]] = column
            energies[block[row]] = values[col]

    vectors.setflags(write=False)
    energies.setflags(write=False)
    return DressedBasis(vectors, energies, space)


def dressed_basis(params: SystemParams, space: CompositeSpace) -> DressedBasis:
    """
    Dressed eigenbasis of :func:`build_static` matched to the bare basis.

    Diagonalization runs block-wise over the excitation-number sectors (split
    further by the photon numbers of uncoupled resonators). Within a block
    eigenvectors are assigned to bare states by maximum squared overlap, and
    each column's phase makes its dominant component positive real.

    Raises:
        RQGPhysicsError: If any matched squared overlap is below 0.5.
    """
    _check_space(params, space)
    params_json = params.model_dump_json()
    if params.dispersive_warning:
        _warn_non_dispersive(params_json)
    return _dressed_basis_cached(params_json, space)


def dressed_frequency(params: SystemParams, space: CompositeSpace,
                      transition: Transition, photons: Sequence[int]) -> float:
    """
    Exact transition frequency between the dressed partners of
    |lower, photons> and |upper, photons> (GHz).
    """
    lower, upper = Transition(transition).levels
    basis = dressed_basis(params, space)
    return basis.frequency(space.index(lower, photons), space.index(upper, photons))


def _ef_chi(params: SystemParams, i: int) -> float:
    delta = params.omega_ef - params.omega_r[i]
    if delta == 0:
        raise RQGPhysicsError(f"Degenerate detuning: omega_ef equals omega_r{i + 1}")
    return params.g_ef[i] ** 2 / delta


def cc_shift(params: SystemParams, n1: int, n2: int) -> float:
    """
    Perturbative e<->f frequency with n1 photons in r1 and n2 in r2 (GHz).

    Raises:
        RQGPhysicsError: If either e<->f detuning is zero.
    """
    if params.num_resonators < 2:
        raise RQGRangeError("cc_shift needs at least two resonators")
    return (params.omega_ef
            + _ef_chi(params, 0) * (2 * n1 + 1)
            + _ef_chi(params, 1) * (2 * n2 + 1))


def group_index(n1: int, n2: int) -> int:
    """Group label N = 2 n1 + 6 n2 under the ratio condition."""
    return 2 * n1 + 6 * n2


def ratio_mismatch(params: SystemParams) -> float:
    """Relative violation |3 chi1 - chi2| / |chi2| of the ratio condition."""
    chi1, chi2 = _ef_chi(params, 0), _ef_chi(params, 1)
    if chi2 == 0:
        return math.inf
    return abs(3 * chi1 - chi2) / abs(chi2)


def check_ratio_condition(params: SystemParams, tolerance: float = RATIO_CONDITION_TOLERANCE) -> None:
    """
    Raises:
        RQGPhysicsError: If 3 g1^2/D1 = g2^2/D2 fails by more than ``tolerance``.
    """
    mismatch = ratio_mismatch(params)
    if mismatch > tolerance:
        raise RQGPhysicsError(
            f"Ratio condition 3 g1^2/D1 = g2^2/D2 violated: relative mismatch {mismatch:.4f}")


def group_frequencies(params: SystemParams) -> Dict[Tuple[int, int], float]:
    """Perturbative e<->f frequency of each (n1, n2) in {0, 1}^2."""
    return {(n1, n2): cc_shift(params, n1, n2) for n1, n2 in product((0, 1), repeat=2)}


def min_group_separation(params: SystemParams) -> float:
    """Smallest pairwise distance between the four group frequencies (GHz)."""
    values = sorted(group_frequencies(params).values())
    return float(min(b - a for a, b in zip(values, values[1:])))
