import unittest as ut
import pytest

import numpy as np

from ioduality import specfun
from ioduality.exceptions import SpecialFunctionDomainError


class TestBessel(ut.TestCase):
    def test_values_at_origin(self):
        self.assertEqual(specfun.bessel_j(0, 0.0), 1.0)
        self.assertEqual(specfun.bessel_j(1, 0.0), 0.0)
        self.assertLess(abs(specfun.bessel_j(0, 2.404826)), 1e-6)

    def test_domain_errors(self):
        with self.assertRaises(SpecialFunctionDomainError):
            specfun.bessel_j(0, -1.0)
        with self.assertRaises(SpecialFunctionDomainError):
            specfun.bessel_j(0, np.inf)
        with self.assertRaises(SpecialFunctionDomainError):
            specfun.bessel_y(0, 0.0)
        with self.assertRaises(SpecialFunctionDomainError):
            specfun.hankel1(2, -3.0)
        with self.assertRaises(SpecialFunctionDomainError):
            specfun.bessel_j(specfun.MAX_ORDER + 1, 1.0)
        with self.assertRaises(SpecialFunctionDomainError):
            specfun.bessel_j(0, specfun.MAX_ARGUMENT + 1)

    def test_hankel_parts(self):
        x = np.linspace(0.5, 30, 17)
        for m in (0, 1, 7):
            h = specfun.hankel1(m, x)
            np.testing.assert_array_equal(h.real, specfun.bessel_j(m, x))
            np.testing.assert_array_equal(h.imag, specfun.bessel_y(m, x))
            np.testing.assert_array_equal(
                specfun.deriv_hankel1(m, x).imag, specfun.deriv_y(m, x)
            )

    def test_negative_orders(self):
        x = np.linspace(0.5, 30, 17)
        for m in (1, 2, 7):
            np.testing.assert_allclose(
                specfun.hankel1(-m, x), (-1) ** m * specfun.hankel1(m, x), rtol=1e-12
            )

    def test_hankel_modulus_decreasing(self):
        x = np.linspace(1, 50, 200)
        modulus = np.abs(specfun.hankel1(0, x))
        self.assertTrue(np.all(np.diff(modulus) < 0))

    def test_wronskian(self):
        for m, x in [(0, 1.0), (3, 7.5), (10, 20.0)]:
            w = specfun.bessel_j(m, x) * specfun.deriv_y(m, x)
            w -= specfun.deriv_j(m, x) * specfun.bessel_y(m, x)
            self.assertAlmostEqual(w, 2 / (np.pi * x), delta=1e-10)

    def test_recurrence_and_wronskian_grid(self):
        x = np.logspace(-3, 2, 60)
        for m in range(1, 31):
            jm = specfun.bessel_j(m, x)
            residual = specfun.bessel_j(m - 1, x) + specfun.bessel_j(m + 1, x) - 2 * m / x * jm
            self.assertTrue(np.all(np.abs(residual) <= 1e-9 * (1 + np.abs(jm))))
        for m in (0, 5, 12):
            xs = x[x >= 1]
            w = specfun.bessel_j(m, xs) * specfun.deriv_y(m, xs)
            w = w - specfun.deriv_j(m, xs) * specfun.bessel_y(m, xs)
            np.testing.assert_allclose(w, 2 / (np.pi * xs), rtol=1e-10, atol=0)

    def test_derivatives(self):
        x = np.array([0.5, 3.0, 11.0])
        np.testing.assert_allclose(specfun.deriv_j(0, x), -specfun.bessel_j(1, x), atol=1e-15)
        self.assertLess(abs(specfun.deriv_j(1, 1.841184)), 1e-6)
        step = 1e-5
        grid = np.linspace(0.7, 25, 31)
        for m in (0, 2, 9):
            fd = (specfun.bessel_j(m, grid + step) - specfun.bessel_j(m, grid - step)) / (2 * step)
            self.assertLess(np.max(np.abs(specfun.deriv_j(m, grid) - fd)), 1e-6)
            fd = (specfun.hankel1(m, grid + step) - specfun.hankel1(m, grid - step)) / (2 * step)
            dh = specfun.deriv_hankel1(m, grid)
            self.assertTrue(np.all(np.abs(dh - fd) <= 1e-6 * (1 + np.abs(dh))))


class TestZeros(ut.TestCase):
    def test_reference_zeros(self):
        np.testing.assert_allclose(
            specfun.bessel_j_zeros(0, (0, 10)), [2.404826, 5.520078, 8.653728], atol=1e-6
        )
        np.testing.assert_allclose(specfun.bessel_j_zeros(1, (0, 4)), [3.831706], atol=1e-6)
        self.assertAlmostEqual(specfun.deriv_j_zeros(1, (0, 3))[0], 1.841184, delta=1e-6)
        self.assertAlmostEqual(specfun.deriv_j_zeros(2, (0, 4))[0], 3.054237, delta=1e-6)

    def test_interlacing(self):
        j01, j02 = specfun.bessel_j_zeros(0, (0, 6))
        (j11,) = specfun.bessel_j_zeros(1, (0, 4))
        self.assertTrue(j01 < j11 < j02)

    def test_zero_quality(self):
        for m in (0, 3, 8):
            for z in specfun.bessel_j_zeros(m, (0, 40)):
                self.assertLessEqual(abs(specfun.bessel_j(m, z)), 1e-10)
                self.assertLess(specfun.bessel_j(m, z - 1e-8) * specfun.bessel_j(m, z + 1e-8), 0)

    def test_zeros_sorted_and_in_interval(self):
        zeros = specfun.deriv_j_zeros(4, (2, 30))
        self.assertEqual(zeros, sorted(zeros))
        self.assertTrue(all(2 <= z <= 30 for z in zeros))


@pytest.mark.parametrize("interval", [(-1, 3), (5, 2), (0, 250)])
def test_invalid_zero_interval(interval):
    with pytest.raises(SpecialFunctionDomainError):
        specfun.bessel_j_zeros(0, interval)
