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
A small ReLU multi-layer perceptron with softmax cross-entropy,
hand-written backpropagation, SGD/Adam optimizers and the per-batch
last-layer gradients used for coreset selection.

Gradients are plain lists of arrays in the same order as
MlpModel.params(): [W_0, b_0, W_1, b_1, ...]. Weight matrices are
stored (fan_in, fan_out) so that a forward pass is X @ W + b.
'''

import os
import math
import json

import numpy as np
from scipy.special import log_softmax, softmax

from .utilities import ensure_dir, write_json
from .config import Config
from .setup_logs import configure_logging

CONFIG = Config()
LOGGER = configure_logging('model')

##############################################################################

class NonFiniteError(ArithmeticError):
  '''Raised when a gradient or parameter becomes NaN or infinite.'''
  pass

class CostCounter(object):
  '''
  Sample-level cost accounting. Gradient samples and selection units
  are billed; evaluation forwards are tracked separately.
  '''
  __slots__ = ('gradient_samples', 'forward_samples', 'selection_units')

  def __init__(self):
    self.gradient_samples = 0
    self.forward_samples  = 0
    self.selection_units  = 0

  @property
  def billed(self):
    return self.gradient_samples + self.selection_units

  def snapshot(self):
    return {'gradient_samples' : self.gradient_samples,
            'forward_samples'  : self.forward_samples,
            'selection_units'  : self.selection_units,
            'billed'           : self.billed}

class LossReport(object):
  __slots__ = ('mean_loss', 'accuracy')

  def __init__(self, mean_loss, accuracy):
    self.mean_loss = float(mean_loss)
    self.accuracy  = float(accuracy)

  def __repr__(self):
    return "LossReport(mean_loss=%.6g, accuracy=%.4f)" % (self.mean_loss,
                                                        self.accuracy)

class MlpModel(object):
  '''
  Fully-connected network; ReLU on every hidden layer and a linear
  output layer feeding softmax.
  '''
  __slots__ = ('layer_dims', 'weights', 'biases')

  def __init__(self, layer_dims, weights, biases):
    self.layer_dims = list(layer_dims)
    self.weights    = weights
    self.biases     = biases
    for i, (w, b) in enumerate(zip(weights, biases)):
      if w.shape != (layer_dims[i], layer_dims[i + 1]) \
            or b.shape != (layer_dims[i + 1],):
        raise ValueError("Parameter shapes for layer %d do not match"
                         " layer_dims %s" % (i, layer_dims))

  @property
  def n_layers(self):
    return len(self.weights)

  @property
  def n_params(self):
    return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

  def params(self):
    out = []
    for w, b in zip(self.weights, self.biases):
      out.extend((w, b))
    return out

  def copy(self):
    return MlpModel(self.layer_dims,
                    [ w.copy() for w in self.weights ],
                    [ b.copy() for b in self.biases ])

  def flat(self):
    return np.concatenate([ p.ravel() for p in self.params() ])

  def param_name(self, i):
    '''Human-readable name for the i-th entry of params().'''
    return "layer %d %s" % (i // 2, 'weights' if i % 2 == 0 else 'biases')

##############################################################################

def init_mlp(layer_dims, seed):
  '''
  Build an MLP with weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  and zero biases.
  '''
  layer_dims = [ int(d) for d in layer_dims ]
  if len(layer_dims) < 2:
    raise ValueError("layer_dims needs at least input and output sizes: %s"
                     % (layer_dims,))
  if any(d < 1 for d in layer_dims):
    raise ValueError("All layer dimensions must be >= 1: %s" % (layer_dims,))

  rng = np.random.default_rng(seed)
  weights = []
  biases  = []
  for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
    bound = 1.0 / math.sqrt(fan_in)
    weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    biases.append(np.zeros(fan_out))
  return MlpModel(layer_dims, weights, biases)

def forward(model, X):
  '''
  Returns (pre-activations, activations) per layer. activations[0] is
  the input; the final pre-activation is the logits.
  '''
  acts = [np.asarray(X, dtype=np.float64)]
  pres = []
  for i, (w, b) in enumerate(zip(model.weights, model.biases)):
    pre = acts[-1] @ w + b
    pres.append(pre)
    if i < model.n_layers - 1:
      acts.append(np.maximum(pre, 0.0))
  return pres, acts

def _check_weights(weights, n_samples):
  if weights is None:
    return np.ones(n_samples)
  weights = np.asarray(weights, dtype=np.float64)
  if weights.shape != (n_samples,):
    raise ValueError("Expected %d sample weights, got %s"
                     % (n_samples, weights.shape))
  if np.any(weights < 0):
    raise ValueError("Sample weights must be non-negative.")
  if weights.sum() <= 0:
    raise ValueError("Sample weights sum to zero.")
  return weights

def loss_and_grad(model, X, y, weights=None, counter=None):
  '''
  Weighted mean cross-entropy sum_j w_j CE_j / sum_j w_j and its
  gradient with respect to every parameter. Returns (LossReport,
  gradient list); the accuracy in the report is weighted likewise.
  '''
  y = np.asarray(y, dtype=np.int64)
  weights = _check_weights(weights, y.shape[0])
  norm = weights / weights.sum()

  pres, acts = forward(model, X)
  logp = log_softmax(pres[-1], axis=1)
  rows = np.arange(y.shape[0])
  losses = -logp[rows, y]
  correct = (np.argmax(pres[-1], axis=1) == y)

  delta = np.exp(logp)
  delta[rows, y] -= 1.0
  delta *= norm[:, None]

  grads = [None] * (2 * model.n_layers)
  for i in range(model.n_layers - 1, -1, -1):
    grads[2 * i]     = acts[i].T @ delta
    grads[2 * i + 1] = delta.sum(axis=0)
    if i > 0:
      delta = (delta @ model.weights[i].T) * (pres[i - 1] > 0)

  if counter is not None:
    counter.gradient_samples += y.shape[0]

  report = LossReport(np.dot(norm, losses), np.dot(norm, correct))
  return report, grads

def evaluate(model, ds, counter=None):
  '''Unweighted mean loss and top-1 accuracy (ties go to the lowest
  class index).'''
  if len(ds) == 0:
    raise ValueError("Cannot evaluate on an empty dataset.")
  pres, _acts = forward(model, ds.features)
  logp = log_softmax(pres[-1], axis=1)
  losses = -logp[np.arange(len(ds)), ds.labels]
  accuracy = np.mean(np.argmax(pres[-1], axis=1) == ds.labels)
  if counter is not None:
    counter.forward_samples += len(ds)
  return LossReport(losses.mean(), accuracy)

def per_batch_last_layer_gradients(model, plan, ds, counter=None):
  '''
  Batch-summed gradients of the cross-entropy with respect to the
  final linear layer (weights flattened row-major, then biases). Returns
  (b_N x (h+1)C matrix, full-data vector); the full vector is the sum
  of the batch rows.
  '''
  pres, acts = forward(model, ds.features)
  hidden = acts[-1]
  delta  = softmax(pres[-1], axis=1)
  delta[np.arange(len(ds)), ds.labels] -= 1.0

  rows = []
  for members in plan.batch_assignments:
    h_b = hidden[members]
    d_b = delta[members]
    rows.append(np.concatenate([ (h_b.T @ d_b).ravel(), d_b.sum(axis=0) ]))
  batch_grads = np.vstack(rows)

  if counter is not None:
    counter.forward_samples += len(ds)
  return batch_grads, batch_grads.sum(axis=0)

##############################################################################
# Optimizers.

OPTIMIZERS = ('sgd', 'adam')
SCHEDULES  = ('none', 'cosine', 'step')

class OptimizerConfig(object):
  '''
  Optimizer hyper-parameters. Momentum, weight decay and the Adam
  constants default to the site config values.
  '''
  __slots__ = ('kind', 'lr', 'momentum', 'nesterov', 'weight_decay',
               'schedule', 'gamma', 'period', 'total_epochs',
               'beta1', 'beta2', 'eps')

  def __init__(self, kind='sgd', lr=0.01, momentum=None, nesterov=False,
               weight_decay=None, schedule='none', gamma=None, period=None,
               total_epochs=1, beta1=None, beta2=None, eps=None):

    if kind not in OPTIMIZERS:
      raise ValueError("Unknown optimizer kind: %s" % (kind,))
    if schedule not in SCHEDULES:
      raise ValueError("Unknown learning rate schedule: %s" % (schedule,))
    if not lr > 0:
      raise ValueError("Learning rate must be positive, got %r" % (lr,))

    self.kind         = kind
    self.lr           = float(lr)
    self.momentum     = CONFIG.momentum if momentum is None else float(momentum)
    self.nesterov     = bool(nesterov)
    self.weight_decay = CONFIG.weight_decay if weight_decay is None \
                        else float(weight_decay)
    self.schedule     = schedule
    self.gamma        = CONFIG.step_gamma if gamma is None else float(gamma)
    self.period       = CONFIG.step_period if period is None else int(period)
    self.total_epochs = int(total_epochs)
    self.beta1        = CONFIG.adam_beta1 if beta1 is None else float(beta1)
    self.beta2        = CONFIG.adam_beta2 if beta2 is None else float(beta2)
    self.eps          = CONFIG.adam_eps if eps is None else float(eps)

    if schedule == 'step':
      if not 0.0 < self.gamma < 1.0:
        raise ValueError("Step schedule gamma must lie in (0, 1), got %r"
                         % (self.gamma,))
      if self.period < 1:
        raise ValueError("Step schedule period must be >= 1.")
    if schedule == 'cosine' and self.total_epochs < 1:
      raise ValueError("Cosine schedule needs total_epochs >= 1.")

  def to_dict(self):
    return dict( (key, getattr(self, key)) for key in self.__slots__ )

class OptimizerState(object):
  '''Per-parameter momentum buffers (sgd) or first and second moments
  (adam), plus the number of steps taken.'''
  __slots__ = ('steps', 'first', 'second')

  def __init__(self):
    self.steps  = 0
    self.first  = None
    self.second = None

def learning_rate(opt, epoch):
  '''Schedule-adjusted learning rate for a 0-based epoch.'''
  if opt.schedule == 'cosine':
    return opt.lr * (1.0 + math.cos(math.pi * epoch / opt.total_epochs)) / 2.0
  if opt.schedule == 'step':
    return opt.lr * opt.gamma ** (epoch // opt.period)
  return opt.lr

def sgd_step(model, grads, opt, epoch, state=None):
  '''
  Apply one optimizer update in place and return the model. SGD
  momentum follows the buffer = m * buffer + g convention; Adam uses
  bias-corrected moments. Weight decay is added to the gradient.
  '''
  params = model.params()
  if len(grads) != len(params):
    raise ValueError("Gradient has %d entries, model has %d"
                     % (len(grads), len(params)))
  for i, (p, g) in enumerate(zip(params, grads)):
    if g.shape != p.shape:
      raise ValueError("Gradient shape mismatch at %s" % (model.param_name(i),))
    if not np.all(np.isfinite(g)):
      raise NonFiniteError("Non-finite gradient in %s" % (model.param_name(i),))

  if state is None:
    state = OptimizerState()
  if state.first is None:
    state.first  = [ np.zeros_like(p) for p in params ]
    state.second = [ np.zeros_like(p) for p in params ]
  state.steps += 1
  alpha = learning_rate(opt, epoch)

  for i, (p, g) in enumerate(zip(params, grads)):
    if opt.weight_decay:
      g = g + opt.weight_decay * p

    if opt.kind == 'adam':
      state.first[i]  = opt.beta1 * state.first[i] + (1 - opt.beta1) * g
      state.second[i] = opt.beta2 * state.second[i] + (1 - opt.beta2) * g * g
      m_hat = state.first[i] / (1 - opt.beta1 ** state.steps)
      v_hat = state.second[i] / (1 - opt.beta2 ** state.steps)
      p -= alpha * m_hat / (np.sqrt(v_hat) + opt.eps)

    else:
      if opt.momentum:
        if state.steps == 1:
          state.first[i] = g.copy()
        else:
          state.first[i] = opt.momentum * state.first[i] + g
        g = g + opt.momentum * state.first[i] if opt.nesterov \
            else state.first[i]
      p -= alpha * g

    if not np.all(np.isfinite(p)):
      raise NonFiniteError("Non-finite parameters in %s after update"
                           % (model.param_name(i),))
  return model

def train_epoch(model, X, y, sample_weights, batch_size, opt, epoch,
                state, rng, counter=None):
  '''
  One pass of weighted mini-batch SGD over a pool of samples, visited
  in an order drawn from rng. Returns the sample-averaged LossReport.
  '''
  n_samples = y.shape[0]
  if sample_weights is None:
    sample_weights = np.ones(n_samples)
  order = rng.permutation(n_samples)
  loss_sum = 0.0
  acc_sum  = 0.0
  for start in range(0, n_samples, batch_size):
    idx = order[start:start + batch_size]
    report, grads = loss_and_grad(model, X[idx], y[idx],
                                  sample_weights[idx], counter)
    if not math.isfinite(report.mean_loss):
      raise NonFiniteError("Non-finite training loss at epoch %d" % (epoch,))
    sgd_step(model, grads, opt, epoch, state)
    loss_sum += report.mean_loss * idx.shape[0]
    acc_sum  += report.accuracy * idx.shape[0]
  return LossReport(loss_sum / max(n_samples, 1), acc_sum / max(n_samples, 1))

def optimizer_from_config(values, total_epochs):
  '''
  Map a tabular search-space assignment (optimizer, lr, scheduler)
  onto an OptimizerConfig. 'linear' decay is the site step schedule.
  '''
  kind = str(values.get('optimizer', 'sgd')).lower()
  schedule = str(values.get('scheduler', 'none')).lower()
  if schedule == 'linear':
    schedule = 'step'
  return OptimizerConfig(kind=kind,
                         lr=values.get('lr', 0.01),
                         momentum=values.get('momentum'),
                         nesterov=values.get('nesterov', False),
                         weight_decay=values.get('weight_decay'),
                         schedule=schedule,
                         total_epochs=total_epochs)

def layer_dims_from_config(values, n_features, n_classes):
  '''[d, h1, h2, C] from a config assignment; hidden sizes default to 200.'''
  hidden = [ int(values.get(key, 200)) for key in ('h1', 'h2') ]
  return [n_features] + hidden + [n_classes]

##############################################################################
# Checkpoints: flat little-endian float64 parameters plus a JSON header.

def save_checkpoint(model, prefix):
  ensure_dir(os.path.dirname(prefix))
  model.flat().astype('<f8').tofile(prefix + '.bin')
  write_json(prefix + '.json', {'layer_dims' : model.layer_dims,
                                'dtype'      : '<f8'})
  return prefix

def load_checkpoint(prefix):
  with open(prefix + '.json') as handle:
    header = json.load(handle)
  flat = np.fromfile(prefix + '.bin', dtype=header['dtype'])
  dims = header['layer_dims']
  weights = []
  biases  = []
  offset = 0
  for fan_in, fan_out in zip(dims[:-1], dims[1:]):
    weights.append(flat[offset:offset + fan_in * fan_out]
                   .reshape(fan_in, fan_out).astype(np.float64))
    offset += fan_in * fan_out
    biases.append(flat[offset:offset + fan_out].astype(np.float64))
    offset += fan_out
  if offset != flat.size:
    raise IOError("Checkpoint %s.bin has %d values, expected %d"
                  % (prefix, flat.size, offset))
  return MlpModel(dims, weights, biases)
