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
Tests for parameter spaces, random sampling and the TPE searcher.
'''

import math
import logging
import unittest

import numpy as np
from scipy.stats import kstest, truncnorm
from scipy.integrate import trapezoid

from ..search import Uniform, LogUniform, Choice, IntChoice, ParamSpace, \
    ConfigSample, ObservationHistory, RandomSearcher, TpeSearcher, \
    domain_from_json, tabular_space, sample_random, tpe_split_sizes, \
    tpe_suggest, make_searcher, generate_configs, _ParzenContinuous
from ..setup_logs import configure_logging
LOGGER = configure_logging('test')

def _quadratic(sample):
  return (sample['x'] - 0.2) ** 2

def _best_after(searcher, n_evals):
  history = ObservationHistory()
  best = np.inf
  for i in range(n_evals):
    sample = searcher.suggest(i, history)
    score = _quadratic(sample)
    history.add(sample, score, resource=1, trial=i)
    best = min(best, score)
  return best

class TestSpaces(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def test_domain_validation(self):
    with self.assertRaises(ValueError):
      Uniform(1.0, 1.0)
    with self.assertRaises(ValueError):
      LogUniform(0.0, 1.0)
    with self.assertRaises(ValueError):
      Choice([])
    with self.assertRaises(ValueError):
      domain_from_json({'kind': 'normal', 'lo': 0, 'hi': 1})

  def test_space_json(self):
    space = tabular_space()
    again = ParamSpace.from_json(space.to_json())
    self.assertEqual(sorted(again.names), sorted(space.names))
    self.assertIsInstance(dict(again)['lr'], LogUniform)
    self.assertEqual(dict(again)['h1'].values, [150, 200, 250, 300])

  def test_space_validation(self):
    with self.assertRaises(ValueError):
      ParamSpace([('a', Uniform(0, 1)), ('a', Uniform(0, 2))])
    with self.assertRaises(ValueError):
      ParamSpace([])

  def test_contains(self):
    space = ParamSpace([('x', Uniform(0, 1)), ('k', IntChoice([1, 2]))])
    self.assertTrue(space.contains(ConfigSample({'x': 0.5, 'k': 2})))
    self.assertFalse(space.contains(ConfigSample({'x': 1.5, 'k': 2})))
    self.assertFalse(space.contains(ConfigSample({'x': 0.5})))

  def test_sample_equality(self):
    a = ConfigSample({'lr': np.float64(0.01), 'h1': np.int64(200)})
    b = ConfigSample({'lr': 0.01, 'h1': 200}, 'tpe-ei')
    self.assertEqual(a, b)
    self.assertIs(type(a['h1']), int)
    self.assertEqual(a.get('missing', 3), 3)
    with self.assertRaises(ValueError):
      ConfigSample({}, 'grid')

class TestRandom(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def test_log_uniform_draws(self):
    space = ParamSpace([('lr', LogUniform(0.001, 0.01))])
    rng = np.random.default_rng(2026)
    draws = np.array([ sample_random(space, rng)['lr'] for _ in range(10000) ])
    self.assertTrue(np.all((draws >= 0.001) & (draws <= 0.01)))
    unit = (np.log(draws) - math.log(0.001)) / (math.log(0.01) - math.log(0.001))
    self.assertGreater(kstest(unit, 'uniform').pvalue, 0.01)

  def test_choice_frequency(self):
    space = ParamSpace([('optimizer', Choice(['adam', 'sgd']))])
    rng = np.random.default_rng(17)
    draws = [ sample_random(space, rng)['optimizer'] for _ in range(10000) ]
    freq = draws.count('adam') / 10000.0
    self.assertAlmostEqual(freq, 0.5, delta=0.02)

  def test_seeded(self):
    space = tabular_space()
    self.assertEqual(sample_random(space, 5), sample_random(space, 5))
    searcher = RandomSearcher(space, seed=3)
    self.assertEqual(searcher.suggest(4), searcher.suggest(4))
    self.assertNotEqual(searcher.suggest(4), searcher.suggest(5))

  def test_generate_configs(self):
    space = tabular_space()
    configs = generate_configs(space, 27, 'random', seed=1)
    self.assertEqual(len(configs), 27)
    self.assertEqual(len(set(c['lr'] for c in configs)), 27)
    self.assertTrue(all(space.contains(c) for c in configs))
    self.assertEqual(len(generate_configs(space, 54, 'random', seed=1)), 54)
    self.assertEqual(len(generate_configs(space, 1, 'tpe', seed=1)), 1)
    for n in (0, -3):
      with self.assertRaises(ValueError):
        generate_configs(space, n, 'random', seed=1)

  def test_history_provider_called(self):
    calls = []
    def provider():
      calls.append(1)
      return None
    generate_configs(tabular_space(), 4, 'tpe', seed=0,
                     history_provider=provider)
    self.assertEqual(len(calls), 4)

  def test_unknown_searcher(self):
    with self.assertRaises(ValueError):
      make_searcher('grid', tabular_space(), 0)

class TestHistory(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def test_rejects_non_finite(self):
    history = ObservationHistory()
    for bad in (float('nan'), float('inf')):
      with self.assertRaises(ValueError):
        history.add(ConfigSample({'x': 0.1}), bad)
    self.assertEqual(len(history), 0)

  def test_latest(self):
    history = ObservationHistory()
    history.add(ConfigSample({'x': 0.1}), 5.0, resource=1, trial=0)
    history.add(ConfigSample({'x': 0.2}), 4.0, resource=1, trial=1)
    history.add(ConfigSample({'x': 0.1}), 2.0, resource=3, trial=0)
    history.add(ConfigSample({'x': 0.3}), 1.0)
    latest = history.latest()
    self.assertEqual([ obs.score for obs in latest ], [2.0, 4.0, 1.0])
    self.assertEqual(len(history.snapshot()), 4)

class TestTpe(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)
    self.space = ParamSpace([('x', Uniform(0.0, 1.0))])

  def test_split_sizes(self):
    self.assertEqual(tpe_split_sizes(8, 0.25), (2, 6))
    self.assertEqual(tpe_split_sizes(1, 0.25), (1, 0))
    self.assertEqual(tpe_split_sizes(10, 0.25), (3, 7))

  def test_prior_fallback(self):
    self.assertEqual(tpe_suggest(self.space, ObservationHistory(),
                                 seed=0).provenance, 'tpe-prior')
    history = ObservationHistory()
    for i in range(12):
      history.add(ConfigSample({'x': i / 12.0}), 1.0, trial=i)
    self.assertEqual(tpe_suggest(self.space, history, seed=0).provenance,
                     'tpe-prior')

  def test_identical_scores_match_random(self):
    history = ObservationHistory()
    rng = np.random.default_rng(6)
    for i in range(20):
      history.add(sample_random(self.space, rng), 0.5, trial=i)
    draws = [ tpe_suggest(self.space, history, seed=seed)['x']
              for seed in range(10000) ]
    self.assertGreater(kstest(draws, 'uniform').pvalue, 0.01)

  def test_kernels_keep_prior_and_width_floor(self):
    dom = Uniform(0.0, 1.0)
    kde = _ParzenContinuous(dom, [0.3, 0.3, 0.3], 1.0)
    self.assertEqual(kde.mus.tolist(), [0.3, 0.3, 0.3, 0.5])
    self.assertEqual(kde.sigmas[-1], 1.0)
    self.assertTrue(np.all(kde.sigmas >= 0.2))
    np.testing.assert_allclose(kde.weights, [0.25] * 4)
    grid = np.linspace(0.0, 1.0, 2001)
    density = np.exp(kde.logpdf(grid))
    self.assertTrue(np.all(np.isfinite(density)))
    self.assertAlmostEqual(trapezoid(density, grid), 1.0, places=3)

    spread = _ParzenContinuous(dom, np.linspace(0.0, 1.0, 300), 1.0)
    self.assertAlmostEqual(spread.sigmas.min(), 0.01)

    empty = _ParzenContinuous(dom, [], 1.0)
    self.assertEqual(empty.mus.tolist(), [0.5])
    np.testing.assert_allclose(np.exp(empty.logpdf(np.array([0.0, 0.5]))),
                               truncnorm.pdf([0.0, 0.5], -0.5, 0.5, 0.5, 1.0))

  def test_concentrates_near_minimum(self):
    rng = np.random.default_rng(0)
    history = ObservationHistory()
    for i in range(30):
      sample = sample_random(self.space, rng)
      history.add(sample, _quadratic(sample), trial=i)
    hits = 0
    for seed in range(200):
      suggestion = tpe_suggest(self.space, history, seed=seed)
      self.assertEqual(suggestion.provenance, 'tpe-ei')
      hits += 0.1 <= suggestion['x'] <= 0.3
    self.assertGreaterEqual(hits / 200.0, 0.4)

  def test_beats_random(self):
    wins = 0
    for seed in range(20):
      tpe = _best_after(TpeSearcher(self.space, seed), 30)
      rand = _best_after(RandomSearcher(self.space, seed), 30)
      wins += tpe < rand
    self.assertGreaterEqual(wins, 14)

  def test_mixed_space_containment(self):
    space = tabular_space()
    rng = np.random.default_rng(4)
    history = ObservationHistory()
    for i in range(15):
      sample = sample_random(space, rng)
      history.add(sample, abs(math.log10(sample['lr']) + 2.5)
                  + (sample['optimizer'] == 'sgd'), trial=i)
    searcher = make_searcher('tpe', space, seed=9)
    for i in range(10):
      suggestion = searcher.suggest(i, history)
      self.assertEqual(suggestion.provenance, 'tpe-ei')
      self.assertTrue(space.contains(suggestion))
    self.assertEqual(searcher.suggest(3, history), searcher.suggest(3, history))

if __name__ == '__main__':
  unittest.main()
