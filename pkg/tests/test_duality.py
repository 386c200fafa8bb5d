import os
import unittest as ut
import pytest
import tempfile

import numpy as np

from loguru import logger
from pydantic import ValidationError

from ioduality import duality
from ioduality import oracles
from ioduality import report
from ioduality.duality import PhaseCurve
from ioduality.duality import PhaseEvaluator
from ioduality.duality import PhaseSample
from ioduality.duality import Thresholds
from ioduality.exceptions import DegenerateRangeError
from ioduality.forward import ScatteringProblem
from ioduality.geometry import make_circle
from ioduality.geometry import make_kite
from ioduality.geometry import validate_scene
from ioduality.potentials import WaveContext
from ioduality.utils.cache import NearFieldCache

DIRICHLET = ScatteringProblem(kind="dirichlet")
NEUMANN = ScatteringProblem(kind="neumann")


def _disk_scene():
    return validate_scene(make_circle((0, 0), 1, 128), make_circle((2, 0), 0.3, 64))


def _synthetic_curve(psis, problem, step=0.1, start=1.0):
    samples = []
    for i, psi in enumerate(psis):
        lam = start + i * step
        if problem.sigma == 1:
            samples.append(PhaseSample(lam=lam, sigma=1, phi=psi, phi_sup=psi + 0.5))
        else:
            samples.append(PhaseSample(lam=lam, sigma=-1, phi=1.0, phi_sup=2 * np.pi - psi))
    interval = (start, start + step * (len(psis) - 1))
    return PhaseCurve(
        samples=samples, problem=problem, interval=interval, step=step, evaluator=None
    )


class TestPhaseFloor(ut.TestCase):
    def test_diagonal_matrix(self):
        A = np.diag([np.exp(0.3j), 2 * np.exp(1.0j), 0.5 * np.exp(2.0j)])
        sample = duality.phase_floor(A, theta_points=360)
        self.assertAlmostEqual(sample.phi, 0.3, delta=1e-6)
        self.assertAlmostEqual(sample.phi_sup, 2.0, delta=1e-6)
        self.assertAlmostEqual(sample.psi, 0.3, delta=1e-6)
        self.assertEqual(sample.n_retained, 3)
        self.assertAlmostEqual(sample.min_eigphase, 0.3, delta=1e-12)

    def test_modulus_filter(self):
        A = np.diag([1e-8 * np.exp(-1.0j), np.exp(0.3j), np.exp(1.0j)])
        filtered = duality.phase_floor(A, delta_rel=1e-6, theta_points=360)
        self.assertAlmostEqual(filtered.phi, 0.3, delta=1e-6)
        self.assertEqual(filtered.n_retained, 2)
        unfiltered = duality.phase_floor(A, delta_rel=1e-10, theta_points=360)
        self.assertEqual(unfiltered.phi, 0.0)

    def test_arc_through_positive_axis(self):
        sample = duality.phase_floor(np.diag([np.exp(-0.2j), np.exp(0.5j)]), theta_points=360)
        self.assertEqual((sample.phi, sample.phi_sup), (0.0, 2 * np.pi))
        self.assertEqual(sample.psi, 0.0)

    def test_degenerate(self):
        with self.assertRaises(DegenerateRangeError):
            duality.phase_floor(np.zeros((4, 4)))
        with self.assertRaises(DegenerateRangeError):
            duality.phase_floor(np.diag([1.0, -1.0, 1j, -1j]))
        with self.assertRaises(ValueError):
            duality.phase_floor(np.eye(3), delta_rel=2.0)

    def test_wrap_and_arcs(self):
        values = duality.wrap_phase(np.array([1j, -1j, 1.0]))
        np.testing.assert_allclose(values, [np.pi / 2, 3 * np.pi / 2, 0])
        self.assertAlmostEqual(duality.arc_distance((0.1, 1.0), (2 * np.pi - 0.1, 1.2)), 0.2)

    def test_skipped_sample(self):
        sample = PhaseSample.skip(3.0, -1, "PoleError: test")
        self.assertTrue(np.isnan(sample.psi))
        self.assertTrue(np.isnan(sample.min_eigphase))


class TestSyntheticDetection(ut.TestCase):
    def test_below(self):
        curve = _synthetic_curve([1.0, 0.5, 0.1, 2.5, 2.4], DIRICHLET)
        (det,) = duality.detect(curve, multiplicity=False)
        self.assertAlmostEqual(det.lambda_hat, 1.25)
        self.assertEqual(det.side, "below")
        self.assertEqual(det.sigma, 1)
        self.assertIn("bracket not refined", det.notes)

    def test_above(self):
        curve = _synthetic_curve([2.5, 0.1, 0.5, 1.0], NEUMANN)
        (det,) = duality.detect(curve, multiplicity=False)
        self.assertAlmostEqual(det.lambda_hat, 1.05)
        self.assertEqual(det.side, "above")
        self.assertEqual(det.sigma, -1)

    def test_no_jump(self):
        curve = _synthetic_curve([1.0, 0.5, 0.1, 0.9, 1.2], DIRICHLET)
        self.assertEqual(duality.detect(curve, multiplicity=False), [])

    def test_skipped_samples_are_ignored(self):
        curve = _synthetic_curve([1.0, 0.5, 0.1, 2.5, 2.4], DIRICHLET)
        curve.samples[3] = PhaseSample.skip(curve.samples[3].lam, 1, "PoleError: test")
        (det,) = duality.detect(curve, multiplicity=False)
        self.assertEqual(
            (det.bracket_lo, det.bracket_hi), (curve.samples[2].lam, curve.samples[4].lam)
        )

    def test_bisection_steps_over_exceptional_midpoint(self):
        curve = _synthetic_curve([1.0, 0.5, 0.1, 2.5, 2.4], DIRICHLET)
        evaluated = []

        def evaluator(lam):
            evaluated.append(lam)
            if abs(lam - 1.25) < 1e-9:
                return PhaseSample.skip(lam, 1, "PoleError: test"), False
            psi = 0.05 if lam < 1.27 else 2.5
            return PhaseSample(lam=lam, sigma=1, phi=psi, phi_sup=psi + 0.5), False

        (det,) = duality.detect(curve, evaluator=evaluator, multiplicity=False)
        self.assertAlmostEqual(evaluated[0], 1.25, delta=1e-9)
        self.assertAlmostEqual(evaluated[1], 1.2501, delta=1e-9)
        self.assertLessEqual(det.bracket_hi - det.bracket_lo, 1e-4)
        self.assertAlmostEqual(det.lambda_hat, 1.27, delta=1e-4)
        self.assertNotIn("bracket not refined", det.notes)

    def test_thresholds(self):
        with self.assertRaises(ValidationError):
            Thresholds(tau_dip=-1)
        with self.assertRaises(ValidationError):
            Thresholds(tau_rise=1.0)
        curve = _synthetic_curve([1.0, 0.5, 0.1, 2.5, 2.4], DIRICHLET)
        self.assertEqual(duality.detect(curve, Thresholds(tau_jump=3.0), multiplicity=False), [])


class TestDiskDetection(ut.TestCase):
    def test_dirichlet(self):
        curve = duality.sweep(_disk_scene(), DIRICHLET, (2.0, 16.0), 0.02)
        found = duality.detect(curve)
        self.assertEqual(len(found), 2)
        np.testing.assert_allclose([d.lambda_hat for d in found], [5.7832, 14.6819], atol=1e-3)
        self.assertEqual([d.multiplicity_estimate for d in found], [1, 2])
        for det in found:
            self.assertEqual(det.side, "below")
            self.assertLessEqual(det.bracket_hi - det.bracket_lo, 1e-4)
            self.assertTrue(det.bracket_lo < det.lambda_hat <= det.bracket_hi)

    def test_quiet_window(self):
        curve = duality.sweep(_disk_scene(), DIRICHLET, (6.5, 13.5), 0.1)
        self.assertEqual(duality.detect(curve), [])
        # the indicator decreases towards the double eigenvalue at 14.68 past 12
        quiet = [s.psi for s in curve.valid if s.lam <= 12.0 + 1e-9]
        self.assertGreaterEqual(np.min(quiet), 0.3)
        for sample in curve.valid:
            self.assertLessEqual(sample.phi, sample.min_eigphase + 1e-9)

    def test_neumann(self):
        curve = duality.sweep(_disk_scene(), NEUMANN, (2.0, 12.0), 0.02)
        found = duality.detect(curve)
        self.assertEqual(len(found), 2)
        np.testing.assert_allclose([d.lambda_hat for d in found], [3.3900, 9.3284], atol=1e-3)
        self.assertEqual([d.multiplicity_estimate for d in found], [2, 2])
        self.assertTrue(all(d.side == "above" and d.sigma == -1 for d in found))

    def test_transmission(self):
        problem = ScatteringProblem(kind="transmission", n=4)
        roots = [e for e in oracles.ite_disk_eigs(1.0, 4.0, (2, 50)) if e.order == 0]
        self.assertGreaterEqual(len(roots), 2)
        scene = _disk_scene()
        # the m = 0 transmission jumps are smaller than the Dirichlet ones
        thresholds = Thresholds(tau_jump=0.5)
        for root in roots[:2]:
            curve = duality.sweep(scene, problem, (root.lam - 0.4, root.lam + 0.4), 0.02)
            found = duality.detect(curve, thresholds)
            self.assertTrue(any(abs(d.lambda_hat - root.lam) <= 5e-3 for d in found))
            self.assertTrue(all(d.side == "two-sided" and d.sigma == -1 for d in found))

    def test_one_sided_limit(self):
        lam0 = oracles.dirichlet_disk_eigs(1.0, (5, 6))[0].lam
        evaluator = PhaseEvaluator(_disk_scene(), DIRICHLET)
        values = [evaluator(lam0 - 2.0 ** (-j) * 0.2)[0].psi for j in range(7)]
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))
        self.assertLess(values[-1], 0.02)

    def test_neumann_one_sided_limit(self):
        lam0 = oracles.neumann_disk_eigs(1.0, (3, 4))[0].lam
        evaluator = PhaseEvaluator(_disk_scene(), NEUMANN)
        values = [evaluator(lam0 + 2.0 ** (-j) * 0.2)[0].psi for j in range(7)]
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_interior_eigenvalue_is_regular(self):
        # the direct route does not see interior eigenvalues
        lam = oracles.dirichlet_disk_eigs(1.0, (5, 6))[0].lam
        sample, hit = PhaseEvaluator(_disk_scene(), DIRICHLET)(lam)
        self.assertFalse(sample.skipped)
        self.assertFalse(hit)


class TestSweep(ut.TestCase):
    def test_grid(self):
        grid = duality.lambda_grid((2, 16), 0.02)
        self.assertEqual(len(grid), 701)
        self.assertEqual(grid[0], 2.0)
        self.assertAlmostEqual(grid[-1], 16.0, delta=1e-12)
        with self.assertRaises(ValueError):
            duality.lambda_grid((3, 2), 0.1)

    def test_parallel_determinism(self):
        scene = _disk_scene()
        serial = duality.sweep(scene, DIRICHLET, (4.0, 4.4), 0.04, parallelism=1)
        parallel = duality.sweep(scene, DIRICHLET, (4.0, 4.4), 0.04, parallelism=2)
        self.assertTrue(serial.to_dataframe().equals(parallel.to_dataframe()))

    def test_warm_cache(self):
        scene = _disk_scene()
        with tempfile.TemporaryDirectory() as tmpdir:
            cache = NearFieldCache(tmpdir, config_hash="test")
            cold = duality.sweep(scene, DIRICHLET, (4.0, 4.2), 0.05, cache=cache)
            warm = duality.sweep(scene, DIRICHLET, (4.0, 4.2), 0.05, cache=cache)
        self.assertEqual(cold.cache_hits, 0)
        self.assertEqual(warm.cache_hits, len(warm))
        self.assertTrue(cold.to_dataframe().equals(warm.to_dataframe()))

    def test_dataframe(self):
        curve = duality.sweep(_disk_scene(), DIRICHLET, (4.0, 4.1), 0.05)
        frame = curve.to_dataframe()
        self.assertEqual(
            list(frame.columns),
            ["lambda", "phi", "psi", "n_retained_eigs", "min_eigphase", "skipped"],
        )
        self.assertEqual(len(frame), 3)
        self.assertEqual(curve.n_skipped, 0)

    def test_skipped_rows_are_written(self):
        curve = _synthetic_curve([1.0, 0.5, 0.1, 2.5, 2.4], DIRICHLET)
        curve.samples[1] = PhaseSample.skip(curve.samples[1].lam, 1, "PoleError: test")
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "sweep.csv")
            report.write_sweep_csv(curve, path, "test")
            frame = report.read_sweep_csv(path)
            with open(path) as IN:
                text = IN.read()
        self.assertEqual(len(frame), 5)
        self.assertEqual(frame["skipped"].tolist(), [0, 1, 0, 0, 0])
        self.assertTrue(np.isnan(frame["psi"][1]))
        self.assertAlmostEqual(frame["psi"][2], 0.1, delta=1e-15)
        self.assertIn("PoleError: test", text)

    def test_workers_are_quiet(self):
        scene = validate_scene(make_kite(128), make_circle((3, 0), 0.4, 64))
        evaluator = PhaseEvaluator(scene, DIRICHLET, solver="nystrom")
        records = []
        handler = logger.add(
            records.append,
            level="TRACE",
            filter=lambda record: record["name"].startswith("ioduality.forward"),
        )
        try:
            duality.evaluate_quietly(evaluator, 2.25, quiet=True)
            self.assertEqual(records, [])
            duality.evaluate_quietly(evaluator, 2.25, quiet=False)
            self.assertGreater(len(records), 0)
        finally:
            logger.remove(handler)


@pytest.mark.parametrize("k", [1.5, 2.5])
def test_farfield_phase_check(k):
    report = duality.farfield_phase_check(_disk_scene(), DIRICHLET, WaveContext.from_wavenumber(k))
    assert report.passed
    assert report.unitarity_residual <= 1e-6
    assert report.phase_floor_distance <= 0.05
    assert abs(report.gamma_ratio_derived - 1) < 1e-6


def test_fit_gamma_recovers_scaling():
    rng = np.random.default_rng(0)
    gamma = 0.7 * np.exp(0.4j)
    # eigenvalues of unitary I + gamma F on the unit circle
    phases = rng.uniform(0.1, 6.0, size=12)
    Q, _ = np.linalg.qr(rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)))
    F = Q @ np.diag((np.exp(1j * phases) - 1) / gamma) @ Q.conj().T
    fitted, residual = duality.fit_gamma(F)
    assert abs(fitted - gamma) < 1e-8
    assert residual < 1e-8
