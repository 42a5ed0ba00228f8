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
Tests for loading the config file correctly.
'''

import os
import shutil
import logging
import tempfile
import unittest
import xml.etree.ElementTree as ET

from ..config import Config, PACKAGE_CONFIG
from ..setup_logs import configure_logging
LOGGER = configure_logging()

THISDIR   = os.path.dirname( os.path.realpath( __file__ ) )
CLEAN_CFG = os.path.join(THISDIR, 'clean_config.xml')

class TestConfig(unittest.TestCase):

  def setUp(self):
    self.tmpdir  = tempfile.mkdtemp()
    self.cfgfile = os.path.join(self.tmpdir, 'test_config.xml')
    shutil.copy(CLEAN_CFG, self.cfgfile)
    LOGGER.setLevel(logging.FATAL) # For verbose testing, set this to DEBUG.

  def tearDown(self):
    # Every module shares the singleton; put the package defaults back.
    Config(PACKAGE_CONFIG, force_reload=True)
    shutil.rmtree(self.tmpdir)

  def test_parsing(self):
    '''
    Tests that the config parser and underlying singleton object behaves itself.
    '''
    cfg = Config(self.cfgfile, force_reload=True)
    self.assertEqual(cfg.searcher, 'tpe')
    self.assertEqual(cfg['searcher'], 'tpe')
    self.assertEqual(cfg.n_workers, 4)
    self.assertAlmostEqual(cfg.gamma, 0.25)
    self.assertIs(cfg.standardize, True)
    self.assertEqual(cfg.fractions, [0.01, 0.3])
    self.assertEqual(cfg.limits, {'low': 1, 'high': 81})
    self.assertIn('gamma', cfg)
    self.assertEqual(len(cfg), 6)

    with self.assertRaises(KeyError):
      cfg['not_in_this_config']

    with self.assertRaises(AttributeError):
      cfg.not_in_this_config

    with self.assertRaises(KeyError):
      cfg['not_in_this_config'] = True

    with self.assertRaises(ValueError):
      del cfg['gamma']

  def test_singleton(self):
    self.assertIs(Config(self.cfgfile, force_reload=True), Config())

  def test_save(self):
    cfg = Config(self.cfgfile, force_reload=True)
    self.assertIsNone(cfg.save())

    cfg.searcher = 'random'
    self.assertEqual(cfg.searcher, 'random')
    self.assertEqual(cfg.save(), self.cfgfile)

    LOGGER.debug("Rereading test config file.")
    newcfg = ET.parse(self.cfgfile)
    opt = newcfg.getroot().find(
      "./section[@name='Search']/option[@name='searcher']")
    self.assertEqual(opt.text, 'random')

  def test_save_list_keeps_type(self):
    cfg = Config(self.cfgfile, force_reload=True)
    cfg.fractions = [0.5, 0.25]
    cfg['n_workers'] = 8
    cfg.save()

    cfg = Config(self.cfgfile, force_reload=True)
    self.assertEqual(cfg.fractions, [0.5, 0.25])
    self.assertEqual(cfg.n_workers, 8)

  def test_package_defaults(self):
    cfg = Config(PACKAGE_CONFIG, force_reload=True)
    self.assertAlmostEqual(cfg.tpe_gamma, 0.25)
    self.assertEqual(cfg.tpe_candidates, 24)
    self.assertEqual(cfg.tpe_min_obs, 10)
    self.assertEqual(cfg.omp_epsilon, 1e-10)
    self.assertEqual(cfg.nnls_max_iter, 10000)
    self.assertEqual(cfg.standard_fractions, [0.01, 0.05, 0.1, 0.3])
    self.assertAlmostEqual(cfg.momentum, 0.9)
    self.assertIs(cfg.standardize, True)

  def test_missing_file(self):
    with self.assertRaises(IOError):
      Config(os.path.join(self.tmpdir, 'nonexistent.xml'), force_reload=True)

if __name__ == '__main__':
  unittest.main()
