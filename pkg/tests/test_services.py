"""
Unit tests for the RQG application services.
"""

import math
import unittest
from unittest.mock import MagicMock

from rqg.app.protocols import cphase_protocol, two_pi_rotation_time
from rqg.app.services import CalibrationService, ExperimentService
from rqg.domain.analysis import IdealGate, conditional_phase, gate_overlap, truth_matrix_from_propagator
from rqg.domain.evolve import schedule_propagator
from rqg.domain.hilbert import CompositeSpace
from rqg.domain.models import CalibrationResult, SystemParams
from rqg.infra.exceptions import RQGCalibrationError
from rqg.infra.presets import get_preset


AMPLITUDE = 0.00575


def one_resonator(coupled: bool = True) -> SystemParams:
    return SystemParams(omega_ge=8.7, omega_ef=8.0, omega_r=[7.5], g_ge=[0.2], g_ef=[0.2],
                        coupling_on=[coupled])


class TestCalibrationService(unittest.TestCase):
    """Test cases for the drive calibration service."""

    def setUp(self):
        self.service = CalibrationService(cutoff=2)

    def test_calibration_system(self):
        params = get_preset("paper-ccphase").params
        reduced, space = self.service.calibration_system(params, (1, 1))
        self.assertEqual(reduced.num_resonators, 2)
        self.assertEqual(reduced.coupling_on, [True, True])
        self.assertEqual(reduced.omega_r, [6.5, 7.5])
        self.assertEqual(space.dims, (3, 3, 3))

    def test_contrast(self):
        self.assertAlmostEqual(CalibrationService.contrast({(0,): 0.9, (1,): 0.1}, (0,)), 0.8)
        self.assertAlmostEqual(CalibrationService.contrast({(0,): 0.7}, (0,)), 0.7)
        self.assertAlmostEqual(CalibrationService.contrast({(0,): 0.9, (1,): 0.9}, (0,), [(1,)]), 0.9)

    def test_calibrate_drive(self):
        result = self.service.calibrate_drive(one_resonator(), (0,), AMPLITUDE)
        self.assertAlmostEqual(result.drive_frequency, result.estimate, delta=5e-4)
        self.assertGreater(result.achieved_selectivity, 0.9)
        self.assertAlmostEqual(result.pulse_duration / two_pi_rotation_time(AMPLITUDE), 1.0, delta=0.02)
        self.assertFalse(result.needs_rescan)
        self.assertEqual(result.target_photons, (0,))

    def test_uncoupled_calibration_is_bare_and_analytic(self):
        result = self.service.calibrate_drive(one_resonator(coupled=False), (0,), AMPLITUDE)
        self.assertAlmostEqual(result.estimate, 8.0, places=12)
        self.assertAlmostEqual(result.drive_frequency, 8.0, places=9)
        self.assertAlmostEqual(result.pulse_duration / two_pi_rotation_time(AMPLITUDE), 1.0, delta=2e-3)
        self.assertAlmostEqual(result.achieved_selectivity, 1.0, places=3)
        self.assertFalse(result.needs_rescan)

    def test_calibration_system_keeps_coupling_flags(self):
        reduced, _ = self.service.calibration_system(one_resonator(coupled=False), (0,))
        self.assertEqual(reduced.coupling_on, [False])

    def test_optimum_on_scan_edge(self):
        estimate = self.service.fixed(one_resonator(), (0,), AMPLITUDE, 8.0).estimate
        window = (estimate + 0.002, estimate + 0.012)
        with self.assertRaises(RQGCalibrationError):
            self.service.calibrate_drive(one_resonator(), (0,), AMPLITUDE, scan_range=window)
        result = self.service.calibrate_drive(one_resonator(), (0,), AMPLITUDE, scan_range=window,
                                              allow_edge=True)
        self.assertTrue(result.needs_rescan)
        self.assertLessEqual(window[0], result.drive_frequency)
        self.assertLessEqual(result.drive_frequency, window[1])

    def test_compensation_closes_conditional_phase(self):
        params = get_preset("paper-cphase").params
        space = CompositeSpace.uniform(2, 2)
        gate = IdealGate(2)

        def schedule_for(result):
            return cphase_protocol(params, result)

        def truth_of(result):
            return truth_matrix_from_propagator(schedule_propagator(schedule_for(result), space), space)

        calibration = self.service.calibrate_drive(params, (0,), AMPLITUDE)
        tuned = self.service.compensate(params, calibration, schedule_for, space, gate)
        self.assertEqual(len(tuned.resonator_phases), 2)
        self.assertEqual(tuned.target_photons, (0,))
        before, after = truth_of(calibration), truth_of(tuned)
        self.assertGreaterEqual(gate_overlap(after, gate.matrix), gate_overlap(before, gate.matrix))
        self.assertAlmostEqual(abs(conditional_phase(after)), math.pi, delta=0.05)

    def test_fixed(self):
        result = self.service.fixed(one_resonator(), (0,), AMPLITUDE, 8.08)
        self.assertEqual(result.drive_frequency, 8.08)
        self.assertAlmostEqual(result.pulse_duration, two_pi_rotation_time(AMPLITUDE))
        self.assertEqual(result.scan_resolution, 0.0)


class TestExperimentService(unittest.TestCase):
    """Test cases for the experiment runner."""

    def test_unknown_experiment(self):
        service = ExperimentService(get_preset("paper-cphase"), cutoff=2)
        with self.assertRaises(KeyError):
            service.run("teleport")

    def test_uncalibrated_run_uses_preset_frequency(self):
        preset = get_preset("paper-cphase")
        calibration_service = MagicMock()
        calibration_service.fixed.return_value = MagicMock(spec=CalibrationResult)
        service = ExperimentService(preset, cutoff=2, calibrate=False,
                                    calibration_service=calibration_service)
        service.calibration()
        calibration_service.fixed.assert_called_once_with(preset.params, (0,), 0.00575, 8.043)
        calibration_service.calibrate_drive.assert_not_called()

    def test_shift_table(self):
        outcome = ExperimentService(get_preset("paper-ccphase"), cutoff=2).run("shift-table")
        rows = outcome.summary["shift_table"]
        self.assertEqual([row["N"] for row in rows], [0, 6, 2, 8])
        by_n = sorted(rows, key=lambda row: row["N"])
        perturbative = [row["perturbative_ghz"] for row in by_n]
        self.assertEqual(perturbative, sorted(perturbative))
        for row in rows:
            self.assertLess(abs(row["exact_ghz"] - row["perturbative_ghz"]), 0.3)
        self.assertEqual(outcome.summary["preset"], "paper-ccphase")

    def test_prepare(self):
        outcome = ExperimentService(get_preset("paper-cphase"), cutoff=2).run("prepare")
        self.assertGreaterEqual(outcome.summary["fidelity"], 0.99)
        self.assertLess(outcome.summary["entanglement_entropy_r1_bits"], 0.05)
        self.assertEqual(len(outcome.density_rows), 16)
        self.assertIsNotNone(outcome.trajectory)


if __name__ == '__main__':
    unittest.main()
