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
Tests for the MLP: initialization, backpropagation against finite
differences, optimizer updates and last-layer batch gradients.
'''

import math
import shutil
import logging
import tempfile
import unittest
import os

import numpy as np

from ..dataio import Dataset, make_batches, make_synthetic
from ..model import MlpModel, CostCounter, NonFiniteError, OptimizerConfig, \
    OptimizerState, init_mlp, forward, loss_and_grad, evaluate, \
    per_batch_last_layer_gradients, learning_rate, sgd_step, train_epoch, \
    optimizer_from_config, layer_dims_from_config, save_checkpoint, \
    load_checkpoint
from ..setup_logs import configure_logging
LOGGER = configure_logging('test')

def _numeric_grads(model, X, y, weights, step=1e-4):
  '''Central finite differences of the weighted mean loss.'''
  grads = []
  for param in model.params():
    grad = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
      saved = param[idx]
      param[idx] = saved + step
      upper = loss_and_grad(model, X, y, weights)[0].mean_loss
      param[idx] = saved - step
      lower = loss_and_grad(model, X, y, weights)[0].mean_loss
      param[idx] = saved
      grad[idx] = (upper - lower) / (2 * step)
    grads.append(grad)
  return grads

def _relative_error(analytic, numeric):
  a = np.concatenate([ g.ravel() for g in analytic ])
  n = np.concatenate([ g.ravel() for g in numeric ])
  return np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n),
                                     1e-12)

def _away_from_kinks(model, X, margin=1e-3):
  pres, _acts = forward(model, X)
  return all(np.all(np.abs(p) >= margin) for p in pres[:-1])

def _separator():
  '''A linear model that classifies the two unit vectors with a wide margin.'''
  weights = [np.array([[50.0, -50.0], [-50.0, 50.0]])]
  return MlpModel([2, 2], weights, [np.zeros(2)])

class TestInit(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def test_parameter_count(self):
    model = init_mlp([180, 200, 200, 3], seed=0)
    self.assertEqual(model.n_params,
                     180 * 200 + 200 + 200 * 200 + 200 + 200 * 3 + 3)
    self.assertEqual(model.flat().size, model.n_params)

  def test_deterministic(self):
    first  = init_mlp([4, 8, 8, 3], seed=7)
    second = init_mlp([4, 8, 8, 3], seed=7)
    np.testing.assert_array_equal(first.flat(), second.flat())
    other = init_mlp([4, 8, 8, 3], seed=8)
    self.assertFalse(np.array_equal(first.flat(), other.flat()))

  def test_fan_in_bounds(self):
    model = init_mlp([16, 5, 2], seed=1)
    self.assertLessEqual(np.abs(model.weights[0]).max(), 0.25)
    self.assertLessEqual(np.abs(model.weights[1]).max(), 1 / math.sqrt(5))
    for bias in model.biases:
      np.testing.assert_array_equal(bias, 0.0)

  def test_bad_dims(self):
    for dims in ([], [3], [3, 0, 2]):
      with self.assertRaises(ValueError):
        init_mlp(dims, seed=0)

  def test_shape_mismatch(self):
    with self.assertRaises(ValueError):
      MlpModel([2, 3], [np.zeros((3, 2))], [np.zeros(3)])

  def test_copy_is_independent(self):
    model = init_mlp([3, 4, 2], seed=0)
    clone = model.copy()
    clone.weights[0][0, 0] += 1.0
    self.assertNotEqual(clone.weights[0][0, 0], model.weights[0][0, 0])
    self.assertEqual(model.param_name(3), 'layer 1 biases')

class TestLoss(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)
    self.rng = np.random.default_rng(42)

  def test_uniform_output(self):
    model = init_mlp([4, 8, 3], seed=0)
    model.weights[-1][:] = 0.0
    X = self.rng.normal(size=(6, 4))
    y = np.array([0, 1, 2, 0, 1, 2])
    report, _grads = loss_and_grad(model, X, y)
    self.assertAlmostEqual(report.mean_loss, math.log(3), places=12)

  def test_unit_weights(self):
    model = init_mlp([3, 4, 2], seed=3)
    X = self.rng.normal(size=(5, 3))
    y = np.array([0, 1, 1, 0, 1])
    plain, plain_grads = loss_and_grad(model, X, y)
    unit, unit_grads = loss_and_grad(model, X, y, np.ones(5))
    self.assertEqual(plain.mean_loss, unit.mean_loss)
    for a, b in zip(plain_grads, unit_grads):
      np.testing.assert_array_equal(a, b)

  def test_weight_errors(self):
    model = init_mlp([3, 2], seed=0)
    X = self.rng.normal(size=(4, 3))
    y = np.array([0, 1, 0, 1])
    for weights in (np.ones(3), np.array([1.0, -1.0, 1.0, 1.0]), np.zeros(4)):
      with self.assertRaises(ValueError):
        loss_and_grad(model, X, y, weights)

  def test_finite_differences(self):
    checked = 0
    for seed in range(20):
      rng = np.random.default_rng(seed)
      model = init_mlp([3, 4, 2], seed=seed)
      for bias in model.biases:
        bias[:] = rng.normal(scale=0.1, size=bias.shape)
      X = rng.normal(size=(5, 3))
      if not _away_from_kinks(model, X):
        continue
      y = rng.integers(0, 2, size=5)
      weights = rng.uniform(0.5, 2.0, size=5)
      for w in (None, weights):
        _report, analytic = loss_and_grad(model, X, y, w)
        numeric = _numeric_grads(model, X, y, w)
        self.assertLessEqual(_relative_error(analytic, numeric), 1e-4)
      checked += 1
    self.assertGreater(checked, 5)

  def test_weighted_linearity(self):
    model = init_mlp([3, 5, 3], seed=9)
    X = self.rng.normal(size=(8, 3))
    y = self.rng.integers(0, 3, size=8)
    w = self.rng.uniform(0.1, 3.0, size=8)
    whole = loss_and_grad(model, X, y, w)[0].mean_loss
    first = loss_and_grad(model, X[:3], y[:3], w[:3])[0].mean_loss
    rest  = loss_and_grad(model, X[3:], y[3:], w[3:])[0].mean_loss
    combined = (w[:3].sum() * first + w[3:].sum() * rest) / w.sum()
    self.assertAlmostEqual(whole, combined, delta=1e-10)

  def test_cost_accounting(self):
    model = init_mlp([3, 2], seed=0)
    ds = Dataset(self.rng.normal(size=(7, 3)), [0, 1] * 3 + [0], 2)
    counter = CostCounter()
    loss_and_grad(model, ds.features[:4], ds.labels[:4], counter=counter)
    evaluate(model, ds, counter)
    self.assertEqual(counter.gradient_samples, 4)
    self.assertEqual(counter.forward_samples, 7)
    self.assertEqual(counter.billed, 4)
    self.assertEqual(counter.snapshot()['billed'], 4)

class TestEvaluate(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def test_tie_goes_to_first_class(self):
    model = MlpModel([2, 2], [np.zeros((2, 2))], [np.zeros(2)])
    ds = Dataset(np.eye(2).repeat(3, axis=0), [0, 0, 0, 1, 1, 1], 2)
    report = evaluate(model, ds)
    self.assertEqual(report.accuracy, 0.5)
    self.assertAlmostEqual(report.mean_loss, math.log(2))

  def test_perfect_separator(self):
    ds = Dataset(np.eye(2), [0, 1], 2)
    report = evaluate(_separator(), ds)
    self.assertEqual(report.accuracy, 1.0)
    self.assertLess(report.mean_loss, 1e-10)

  def test_mean_of_per_sample_losses(self):
    ds = make_synthetic(12, 3, 3, seed=4)
    model = init_mlp([3, 6, 3], seed=4)
    report = evaluate(model, ds)
    single = [ evaluate(model, ds.subset([i])).mean_loss
               for i in range(len(ds)) ]
    self.assertAlmostEqual(report.mean_loss, np.mean(single), places=12)

  def test_empty(self):
    ds = Dataset(np.zeros((0, 2)), np.zeros(0), 2)
    with self.assertRaises(ValueError):
      evaluate(init_mlp([2, 2], seed=0), ds)

class TestBatchGradients(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)
    self.ds = make_synthetic(45, 4, 3, seed=0)
    self.model = init_mlp([4, 7, 5, 3], seed=1)

  def test_additivity_and_shape(self):
    plan = make_batches(self.ds, 10, seed=2)
    batch_grads, full = per_batch_last_layer_gradients(self.model, plan,
                                                       self.ds)
    self.assertEqual(batch_grads.shape, (5, (5 + 1) * 3))
    self.assertLessEqual(np.abs(full - batch_grads.sum(axis=0)).max(), 1e-6)

  def test_matches_backprop(self):
    plan = make_batches(self.ds, 10, seed=2)
    batch_grads, _full = per_batch_last_layer_gradients(self.model, plan,
                                                        self.ds)
    members = plan.batch_assignments[1]
    _report, grads = loss_and_grad(self.model, self.ds.features[members],
                                   self.ds.labels[members])
    # loss_and_grad averages; the batch vector is a sum.
    expected = np.concatenate([ grads[-2].ravel(), grads[-1] ]) * len(members)
    np.testing.assert_allclose(batch_grads[1], expected, atol=1e-10)

  def test_one_batch(self):
    plan = make_batches(self.ds, len(self.ds), seed=0)
    batch_grads, full = per_batch_last_layer_gradients(self.model, plan,
                                                       self.ds)
    self.assertEqual(batch_grads.shape[0], 1)
    np.testing.assert_array_equal(batch_grads[0], full)

  def test_perfect_fit(self):
    ds = Dataset(np.eye(2).repeat(4, axis=0), [0] * 4 + [1] * 4, 2)
    plan = make_batches(ds, 3, seed=0)
    batch_grads, full = per_batch_last_layer_gradients(_separator(), plan, ds)
    self.assertLessEqual(np.linalg.norm(batch_grads, axis=1).max(), 1e-4)
    self.assertLessEqual(np.linalg.norm(full), 1e-4)

class TestOptimizers(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)

  def test_step_schedule(self):
    opt = OptimizerConfig(lr=0.01, schedule='step', gamma=0.1, period=20)
    self.assertAlmostEqual(learning_rate(opt, 40), 1e-4, places=15)
    self.assertAlmostEqual(learning_rate(opt, 19), 0.01)

  def test_cosine_schedule(self):
    opt = OptimizerConfig(lr=0.1, schedule='cosine', total_epochs=10)
    self.assertAlmostEqual(learning_rate(opt, 0), 0.1)
    self.assertAlmostEqual(learning_rate(opt, 5), 0.05)

  def test_bad_configs(self):
    with self.assertRaises(ValueError):
      OptimizerConfig(kind='rmsprop')
    with self.assertRaises(ValueError):
      OptimizerConfig(lr=0.0)
    with self.assertRaises(ValueError):
      OptimizerConfig(schedule='step', gamma=1.5)
    with self.assertRaises(ValueError):
      OptimizerConfig(schedule='exponential')

  def test_zero_gradient_is_identity(self):
    model = init_mlp([3, 4, 2], seed=0)
    before = model.flat()
    zeros = [ np.zeros_like(p) for p in model.params() ]
    opt = OptimizerConfig(lr=0.1, momentum=0.9, weight_decay=0.0)
    sgd_step(model, zeros, opt, 0, OptimizerState())
    np.testing.assert_array_equal(model.flat(), before)

  def test_plain_sgd(self):
    model = init_mlp([2, 2], seed=0)
    before = model.flat()
    grads = [ np.ones_like(p) for p in model.params() ]
    opt = OptimizerConfig(lr=0.5, momentum=0.0, weight_decay=0.0)
    sgd_step(model, grads, opt, 0)
    np.testing.assert_allclose(model.flat(), before - 0.5)

  def test_momentum_accumulates(self):
    model = init_mlp([2, 2], seed=0)
    before = model.flat()
    grads = [ np.ones_like(p) for p in model.params() ]
    opt = OptimizerConfig(lr=0.1, momentum=0.9, weight_decay=0.0)
    state = OptimizerState()
    sgd_step(model, grads, opt, 0, state)
    sgd_step(model, grads, opt, 0, state)
    # Steps of 1.0 then 1.9 gradient units.
    np.testing.assert_allclose(model.flat(), before - 0.1 * 2.9)

  def test_adam_first_step(self):
    model = init_mlp([3, 2], seed=0)
    before = model.flat()
    rng = np.random.default_rng(0)
    grads = [ rng.choice([-1.0, 1.0], size=p.shape)
              * rng.uniform(0.5, 2.0, size=p.shape) for p in model.params() ]
    opt = OptimizerConfig(kind='adam', lr=0.01, weight_decay=0.0)
    sgd_step(model, grads, opt, 0, OptimizerState())
    np.testing.assert_allclose(np.abs(model.flat() - before), 0.01, rtol=1e-5)

  def test_non_finite_gradient(self):
    model = init_mlp([3, 4, 2], seed=0)
    grads = [ np.zeros_like(p) for p in model.params() ]
    grads[2][0, 0] = np.nan
    with self.assertRaises(NonFiniteError) as ctx:
      sgd_step(model, grads, OptimizerConfig(), 0)
    self.assertIn('layer 1 weights', str(ctx.exception))

  def test_gradient_shape_mismatch(self):
    model = init_mlp([3, 2], seed=0)
    with self.assertRaises(ValueError):
      sgd_step(model, [np.zeros((2, 3)), np.zeros(2)], OptimizerConfig(), 0)

  def test_train_epoch_deterministic(self):
    ds = make_synthetic(40, 3, 2, seed=5)
    results = []
    for _ in range(2):
      model = init_mlp([3, 6, 2], seed=5)
      counter = CostCounter()
      opt = OptimizerConfig(lr=0.05)
      state = OptimizerState()
      rng = np.random.default_rng(11)
      for epoch in range(3):
        train_epoch(model, ds.features, ds.labels, None, 8, opt, epoch,
                    state, rng, counter)
      results.append((model.flat(), counter.gradient_samples))
    np.testing.assert_array_equal(results[0][0], results[1][0])
    self.assertEqual(results[0][1], 3 * 40)

  def test_training_reduces_loss(self):
    ds = make_synthetic(90, 4, 3, seed=1, separation=3.0)
    model = init_mlp([4, 16, 3], seed=1)
    start = evaluate(model, ds).mean_loss
    opt = OptimizerConfig(lr=0.05)
    state = OptimizerState()
    rng = np.random.default_rng(0)
    for epoch in range(10):
      train_epoch(model, ds.features, ds.labels, None, 16, opt, epoch,
                  state, rng)
    self.assertLess(evaluate(model, ds).mean_loss, start)

  def test_from_config(self):
    opt = optimizer_from_config({'optimizer': 'Adam', 'lr': 0.003,
                                 'scheduler': 'linear'}, total_epochs=30)
    self.assertEqual(opt.kind, 'adam')
    self.assertEqual(opt.schedule, 'step')
    self.assertEqual(opt.lr, 0.003)
    self.assertEqual(opt.to_dict()['total_epochs'], 30)
    self.assertEqual(layer_dims_from_config({'h1': 16}, 5, 3), [5, 16, 200, 3])

class TestCheckpoint(unittest.TestCase):

  def setUp(self):
    LOGGER.setLevel(logging.FATAL)
    self.tmpdir = tempfile.mkdtemp()

  def tearDown(self):
    shutil.rmtree(self.tmpdir)

  def test_round_trip(self):
    model = init_mlp([5, 7, 3], seed=2)
    prefix = save_checkpoint(model, os.path.join(self.tmpdir, 'ck', 'trial0'))
    again = load_checkpoint(prefix)
    self.assertEqual(again.layer_dims, [5, 7, 3])
    np.testing.assert_array_equal(again.flat(), model.flat())

  def test_truncated(self):
    prefix = save_checkpoint(init_mlp([3, 2], seed=0),
                             os.path.join(self.tmpdir, 'bad'))
    with open(prefix + '.bin', 'r+b') as handle:
      handle.truncate(8)
    with self.assertRaises((IOError, ValueError)):
      load_checkpoint(prefix)

if __name__ == '__main__':
  unittest.main()
