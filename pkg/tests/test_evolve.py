"""
Unit tests for schedule propagation.
"""

import math
import unittest
from unittest.mock import patch

import numpy as np

from rqg.domain import evolve
from rqg.domain.evolve import SegmentEvolution, monitor_dressed, propagate, schedule_propagator, step_count
from rqg.domain.hamiltonian import TWO_PI, build_static
from rqg.domain.hilbert import CompositeSpace, StateVector, basis_state
from rqg.domain.models import (
    DriveParams,
    EvolutionConfig,
    Frame,
    MonitorBasis,
    QutritLevel,
    Schedule,
    Segment,
    SystemParams,
    Transition,
)
from rqg.infra.exceptions import RQGIntegrationError


def qutrit_only(omega_ge: float = 2.0, omega_ef: float = 1.0) -> SystemParams:
    return SystemParams(omega_ge=omega_ge, omega_ef=omega_ef)


def one_resonator(coupled: bool = True) -> SystemParams:
    return SystemParams(omega_ge=8.7, omega_ef=8.0, omega_r=[7.5], g_ge=[0.2], g_ef=[0.2],
                        coupling_on=[coupled])


def ef_drive(amplitude: float, frequency: float, phase: float = 0.0) -> DriveParams:
    return DriveParams(amplitude=amplitude, frequency=frequency, transition=Transition.EF,
                       phase=phase, active=True)


class TestClosedForms(unittest.TestCase):
    """Test cases against closed-form evolutions."""

    def test_step_count(self):
        self.assertEqual(step_count(1.0, 0.002), 500)
        self.assertEqual(step_count(1e-9, 0.002), 1)
        self.assertEqual(step_count(0.0031, 0.002), 2)

    def test_static_diagonal_phase(self):
        space = CompositeSpace((2,))
        state = basis_state(space, QutritLevel.E, (1,))
        schedule = Schedule.chain(Segment(duration=3.7, params=one_resonator(False)))
        final, _ = propagate(state, schedule)
        phase = np.exp(-1j * TWO_PI * (8.7 + 7.5) * 3.7)
        np.testing.assert_allclose(final.amplitudes, phase * state.amplitudes, atol=1e-10)

    def test_resonant_rabi(self):
        space = CompositeSpace(())
        amplitude = 0.01
        schedule = Schedule.chain(Segment(duration=25.0, params=qutrit_only(), drive=ef_drive(amplitude, 1.0)))
        cfg = EvolutionConfig(max_step=2e-4, sample_interval=2.5)
        e, f = space.index(QutritLevel.E, ()), space.index(QutritLevel.F, ())
        _, trajectory = propagate(basis_state(space, QutritLevel.E, ()), schedule, cfg, [e, f])
        self.assertEqual(len(trajectory.times), 11)
        for t, (p_e, p_f) in zip(trajectory.times, trajectory.populations):
            angle = TWO_PI * amplitude * t
            self.assertAlmostEqual(p_e, math.cos(angle) ** 2, delta=1e-6)
            self.assertAlmostEqual(p_f, math.sin(angle) ** 2, delta=1e-6)

    def test_zero_duration_limit(self):
        space = CompositeSpace((2,))
        state = StateVector.normalized(space, np.arange(1, space.dimension + 1))
        schedule = Schedule.chain(Segment(duration=1e-9, params=one_resonator(), drive=ef_drive(0.01, 8.0)))
        final, _ = propagate(state, schedule)
        self.assertGreater(abs(np.vdot(state.amplitudes, final.amplitudes)), 1 - 1e-9)


class TestInvariants(unittest.TestCase):
    """Test cases for unitarity, convergence and composition."""

    def setUp(self):
        self.space = CompositeSpace((3,))
        self.state = StateVector.normalized(
            self.space, [1.0, 0.5j, 0.0, 0.0, 0.8, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])

    def test_norm_preserved(self):
        schedule = Schedule.chain(
            Segment(duration=20.0, params=one_resonator(), drive=ef_drive(0.006, 8.04)),
            Segment(duration=5.0, params=one_resonator(False)),
            Segment(duration=20.0, params=one_resonator(), drive=ef_drive(0.006, 8.04, phase=0.7)),
        )
        final, trajectory = propagate(self.state, schedule)
        self.assertLess(abs(final.norm - 1.0), 1e-8)
        self.assertLess(trajectory.norm_drift, 1e-8)
        for row in trajectory.populations:
            self.assertLessEqual(sum(row), 1 + 1e-9)

    def test_concatenation(self):
        drive = ef_drive(0.006, 8.04)
        whole = Schedule.chain(Segment(duration=2.0, params=one_resonator(), drive=drive))
        split = Schedule.chain(Segment(duration=1.0, params=one_resonator(), drive=drive),
                               Segment(duration=1.0, params=one_resonator(), drive=drive))
        a, _ = propagate(self.state, whole)
        b, _ = propagate(self.state, split)
        np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-9)

    def test_step_halving_converges(self):
        space = CompositeSpace(())
        state = basis_state(space, QutritLevel.E, ())
        schedule = Schedule.chain(Segment(duration=5.0, params=qutrit_only(), drive=ef_drive(0.01, 1.02)))
        coarse, _ = propagate(state, schedule, EvolutionConfig(max_step=2e-4))
        fine, _ = propagate(state, schedule, EvolutionConfig(max_step=1e-4))
        self.assertLess(np.max(np.abs(coarse.amplitudes - fine.amplitudes)), 1e-7)

    def test_constant_energy_offset_is_global_phase(self):
        schedule = Schedule.chain(Segment(duration=3.0, params=one_resonator(), drive=ef_drive(0.006, 8.04)))
        reference, _ = propagate(self.state, schedule)
        offset = 2.5

        def shifted(params, space):
            op = build_static(params, space)
            return type(op)(op.matrix + offset * np.eye(space.dimension), space, hermitian_hint=True)

        with patch.object(evolve, "build_static", side_effect=shifted):
            moved, _ = propagate(self.state, schedule)
        overlap = np.vdot(reference.amplitudes, moved.amplitudes)
        self.assertAlmostEqual(abs(overlap), 1.0, places=9)
        self.assertAlmostEqual(np.angle(overlap), np.angle(np.exp(-1j * offset * 3.0)), places=6)

    def test_inverse_schedule_undoes_evolution(self):
        schedule = Schedule.chain(
            Segment(duration=4.0, params=one_resonator(), drive=ef_drive(0.006, 8.04), frame=Frame.DRESSED),
            Segment(duration=1.5, params=one_resonator().with_resonator_frequency(0, 8.7), frame=Frame.BARE),
        )
        u = schedule_propagator(schedule.then(schedule.inverse()), self.space)
        np.testing.assert_allclose(u, np.eye(self.space.dimension), atol=1e-9)

    def test_step_size_violation(self):
        schedule = Schedule.chain(Segment(duration=1.0, params=one_resonator(), drive=ef_drive(0.01, 8.0)))
        with self.assertRaises(RQGIntegrationError):
            propagate(self.state, schedule, EvolutionConfig(max_step=0.02))

    def test_undriven_segment_ignores_step_bound(self):
        schedule = Schedule.chain(Segment(duration=1.0, params=one_resonator()))
        final, _ = propagate(self.state, schedule, EvolutionConfig(max_step=0.5))
        self.assertLess(abs(final.norm - 1.0), 1e-10)


class TestFramesAndSampling(unittest.TestCase):
    """Test cases for frame bookkeeping and trajectory sampling."""

    def setUp(self):
        self.space = CompositeSpace((3,))

    def test_bare_frame_removes_free_evolution(self):
        segment = Segment(duration=7.3, params=one_resonator(False), frame=Frame.BARE)
        u = SegmentEvolution(segment, self.space, EvolutionConfig()).propagator()
        np.testing.assert_allclose(u, np.eye(self.space.dimension), atol=1e-10)

    def test_dressed_frame_removes_coupled_evolution(self):
        segment = Segment(duration=7.3, params=one_resonator(), frame=Frame.DRESSED)
        u = SegmentEvolution(segment, self.space, EvolutionConfig()).propagator()
        np.testing.assert_allclose(u, np.eye(self.space.dimension), atol=1e-9)

    def test_virtual_z_at_segment_exit(self):
        segment = Segment(duration=7.3, params=one_resonator(False), frame=Frame.BARE,
                          resonator_phases=(0.4,))
        u = SegmentEvolution(segment, self.space, EvolutionConfig()).propagator()
        photons = self.space.photon_numbers()[:, 0]
        np.testing.assert_allclose(u, np.diag(np.exp(0.4j * photons)), atol=1e-10)
        state = basis_state(self.space, QutritLevel.G, (2,))
        final, _ = propagate(state, Schedule.chain(segment))
        self.assertAlmostEqual(state.overlap(final), np.exp(0.8j), places=9)

    def test_virtual_z_needs_matching_resonators(self):
        with self.assertRaises(ValueError):
            Segment(duration=1.0, params=one_resonator(), resonator_phases=(0.1, 0.2))

    def test_empty_schedule_is_identity(self):
        state = basis_state(self.space, QutritLevel.E, (1,))
        final, trajectory = propagate(state, Schedule())
        np.testing.assert_array_equal(final.amplitudes, state.amplitudes)
        self.assertEqual(trajectory.times, [0.0])
        np.testing.assert_array_equal(schedule_propagator(Schedule(), self.space),
                                      np.eye(self.space.dimension))

    def test_sample_count(self):
        schedule = Schedule.chain(Segment(duration=1.1, params=one_resonator()),
                                  Segment(duration=1.2, params=one_resonator(), drive=ef_drive(0.01, 8.0)))
        state = basis_state(self.space, QutritLevel.E, (0,))
        _, trajectory = propagate(state, schedule, EvolutionConfig(sample_interval=0.5))
        self.assertEqual(len(trajectory.times), math.floor(2.3 / 0.5) + 1)
        np.testing.assert_allclose(trajectory.times, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_dressed_monitor_without_coupling_matches_bare(self):
        params = one_resonator(False)
        schedule = Schedule.chain(Segment(duration=10.0, params=params, drive=ef_drive(0.01, 8.0)))
        state = basis_state(self.space, QutritLevel.E, (1,))
        monitored = list(range(self.space.dimension))
        bare = propagate(state, schedule, monitored=monitored)[1]
        dressed = monitor_dressed(state, schedule, monitored)
        self.assertEqual(dressed.basis, MonitorBasis.DRESSED)
        np.testing.assert_allclose(dressed.populations, bare.populations, atol=1e-12)

    def test_dressed_populations_sum_to_one(self):
        schedule = Schedule.chain(Segment(duration=10.0, params=one_resonator(), drive=ef_drive(0.01, 8.05)))
        state = basis_state(self.space, QutritLevel.E, (0,))
        trajectory = monitor_dressed(state, schedule, list(range(self.space.dimension)))
        for row in trajectory.populations:
            self.assertAlmostEqual(sum(row), 1.0, delta=1e-9)


if __name__ == '__main__':
    unittest.main()
