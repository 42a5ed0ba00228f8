#!/usr/bin/env python
#
# Copyright 2026 The coretune developers
#
# This file is part of the coretune python package.
#
# The coretune python package is free software: you can redistribute it
# and/or modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation, either version 3 of
# the License, or (at your option) any later version.
#
# The coretune python package is distributed in the hope that it will
# be useful, but WITHOUT ANY WARRANTY; without even the implied
# warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.
# See the GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with the coretune python package.  If not, see
# <http://www.gnu.org/licenses/>.

'''
Quick runs of the brute-force verification suites.
'''

import logging
import unittest

from ..oracles import SuiteResult, omp_suite, nnls_suite, hyperband_suite, \
    asha_suite, gradient_suite, run_suites, SUITE_ORDER
from ..setup_logs import configure_logging
LOGGER = configure_logging('test')

class TestOracles(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def _check(self, result):
    self.assertTrue(result.passed, result.failures)
    self.assertIn('PASS', result.summary())

  def test_omp(self):
    self._check(omp_suite(40))

  def test_nnls(self):
    self._check(nnls_suite(10))

  def test_hyperband(self):
    self._check(hyperband_suite(20))

  def test_asha(self):
    self._check(asha_suite(6))

  def test_gradients(self):
    result = gradient_suite(10)
    self._check(result)
    self.assertGreater(result.instances, 0)

  def test_run_suites(self):
    results = run_suites(['hyperband', 'asha'], instances=2, seed=3)
    self.assertEqual([ r.name for r in results ], ['hyperband', 'asha'])
    self.assertEqual(len(SUITE_ORDER), 5)
    with self.assertRaises(ValueError):
      run_suites(['sorting'])

  def test_failure_summary(self):
    result = SuiteResult('omp', 3, ['instance 1: mismatch'])
    self.assertFalse(result.passed)
    self.assertIn('FAIL', result.summary())

if __name__ == '__main__':
  unittest.main()
