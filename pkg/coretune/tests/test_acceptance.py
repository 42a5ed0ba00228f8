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
End-to-end runs on the LIBSVM dna dataset. These take several
minutes and only run when CORETUNE_DATA_DIR points at a directory
holding dna.scale.tr, dna.scale.val and dna.scale.t (see
util/fetchLibsvmData.py).
'''

import os
import logging
import unittest

from ..dataio import load_splits
from ..experiment import ExperimentConfig, DATA_DIR_ENV
from ..tuner import compare_strategies
from ..setup_logs import configure_logging
LOGGER = configure_logging('test')

DATA_DIR = os.environ.get(DATA_DIR_ENV)

@unittest.skipUnless(DATA_DIR, '%s not set' % DATA_DIR_ENV)
class TestDna(unittest.TestCase):

  _runs = {}

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def _resolved(self, *overrides):
    conf = ExperimentConfig.from_preset('dna')
    conf.apply_overrides(['dataset.cache=false'] + list(overrides))
    return conf.resolved()

  def _compare(self, *overrides):
    if overrides not in self._runs:
      self._runs[overrides] = compare_strategies(self._resolved(*overrides),
                                                 ['full', 'gss'], [0.1])
    return self._runs[overrides]

  def test_gss_close_to_full_with_27_configs(self):
    full, gss = self._compare('scheduler.n_configs=27')
    self.assertEqual(full.n_trials, 27)
    self.assertLessEqual(gss.test_error - full.test_error, 0.02)
    self.assertGreater(gss.speedup, 2.0)

  # With 27 configs Hyperband fills only its most exploratory bracket,
  # about 156 epochs in all, while final training alone bills 50 epochs
  # of the full set; the speedup stays near 2.3.
  @unittest.expectedFailure
  def test_gss_three_times_cheaper_with_27_configs(self):
    _full, gss = self._compare('scheduler.n_configs=27')
    self.assertGreaterEqual(gss.speedup, 3.0)

  def test_gss_three_times_cheaper_with_all_brackets(self):
    full, gss = self._compare()
    self.assertEqual(full.n_trials, 49)
    self.assertLessEqual(gss.test_error - full.test_error, 0.02)
    self.assertGreaterEqual(gss.speedup, 3.0)

  def test_gss_not_worse_than_random_at_one_percent(self):
    wins = 0
    for seed in range(5):
      res = self._resolved('seed=%d' % (20260101 + seed,))
      splits = load_splits(res['dataset'], int(res['seed']))
      reports = compare_strategies(res, ['full', 'gss', 'random'], [0.01],
                                   splits=splits)
      by_strategy = dict( (r.strategy, r) for r in reports )
      wins += by_strategy['gss'].test_accuracy \
              >= by_strategy['random'].test_accuracy
    self.assertGreaterEqual(wins, 3)

if __name__ == '__main__':
  unittest.main()
