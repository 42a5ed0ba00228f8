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
Per-batch gradient-matching subset selection. A weighted set of
mini-batches is chosen so that the weighted sum of their gradients
approximates the full training gradient:

  min_{S, w >= 0}  || sum_{l in S} w_l g_l - g_full ||^2 + lambda ||w||^2
  subject to |S| <= b_k

solved greedily by orthogonal matching pursuit with a non-negative
least squares refit after every pick.
'''

import math
import json

import numpy as np

from .model import per_batch_last_layer_gradients, NonFiniteError
from .config import Config
from .setup_logs import configure_logging

CONFIG = Config()
LOGGER = configure_logging('coreset')

STRATEGIES = ('gss', 'random', 'full')

##############################################################################

class SelectionConfig(object):
  __slots__ = ('fraction', 'lam', 'epsilon', 'strategy')

  def __init__(self, fraction=0.1, lam=0.0, epsilon=None, strategy='gss'):
    if strategy not in STRATEGIES:
      raise ValueError("Unknown selection strategy: %s" % (strategy,))
    if not 0.0 < fraction <= 1.0:
      raise ValueError("Subset fraction must lie in (0, 1], got %r"
                       % (fraction,))
    if lam < 0:
      raise ValueError("Regularization lambda must be >= 0, got %r" % (lam,))
    self.fraction = float(fraction)
    self.lam      = float(lam)
    self.epsilon  = CONFIG.omp_epsilon if epsilon is None else float(epsilon)
    self.strategy = strategy
    if self.epsilon < 0:
      raise ValueError("OMP epsilon must be >= 0, got %r" % (self.epsilon,))

  def budget(self, n_batches):
    '''b_k = max(1, floor(fraction * b_N)).'''
    return max(1, int(math.floor(self.fraction * n_batches + 1e-9)))

class Coreset(object):
  '''
  Selected batch ids with their non-negative weights and the residual
  norm || sum w_l g_l - g_full || of the stored fit.
  '''
  __slots__ = ('batch_indices', 'weights', 'residual_norm',
               'objective_trace', 'strategy')

  def __init__(self, batch_indices, weights, residual_norm,
               objective_trace=None, strategy='gss'):
    self.batch_indices   = np.asarray(batch_indices, dtype=np.int64)
    self.weights         = np.asarray(weights, dtype=np.float64)
    self.residual_norm   = float(residual_norm)
    self.objective_trace = list(objective_trace or [])
    self.strategy        = strategy

    if self.batch_indices.shape != self.weights.shape:
      raise ValueError("Coreset indices and weights differ in length.")
    if np.any(self.weights < 0):
      raise ValueError("Coreset weights must be non-negative.")
    if np.unique(self.batch_indices).size != self.batch_indices.size:
      raise ValueError("Coreset batch indices must be unique.")

  def __len__(self):
    return self.batch_indices.size

  def to_dict(self):
    return {'indices'       : self.batch_indices.tolist(),
            'weights'       : self.weights.tolist(),
            'residual_norm' : self.residual_norm,
            'strategy'      : self.strategy}

##############################################################################

def _objective(A, b, w, lam):
  resid = A @ w - b
  return float(resid @ resid + lam * (w @ w))

def nnls_solve(A, b, lam=0.0, tol=None, max_iter=None, x0=None):
  '''
  argmin_{w >= 0} ||A w - b||^2 + lam ||w||^2 for a dim x m matrix A.

  Accelerated projected gradient (FISTA with function-value restart)
  using step 1/(||A||_2^2 + lam). Stops when the projected-gradient
  residual drops below tol (relative to max(1, ||A^T b||_inf)) or after
  max_iter steps; always returns the best iterate visited, x0 included.
  '''
  A = np.atleast_2d(np.asarray(A, dtype=np.float64))
  b = np.asarray(b, dtype=np.float64)
  if A.shape[1] < 1:
    raise ValueError("nnls_solve needs at least one column.")
  if A.shape[0] != b.shape[0]:
    raise ValueError("Incompatible dimensions: A is %s, b is %s"
                     % (A.shape, b.shape))
  if tol is None:
    tol = CONFIG.nnls_tolerance
  if max_iter is None:
    max_iter = CONFIG.nnls_max_iter

  m = A.shape[1]
  gram = A.T @ A + lam * np.eye(m)
  rhs  = A.T @ b
  lipschitz = np.linalg.norm(A, 2) ** 2 + lam
  if lipschitz <= 0:
    return np.zeros(m)
  threshold = tol * max(1.0, np.abs(rhs).max())

  x = np.zeros(m) if x0 is None else np.maximum(np.asarray(x0, float), 0.0)
  obj = _objective(A, b, x, lam)
  best, best_obj = x.copy(), obj
  y = x.copy()
  t = 1.0

  for _ in range(max_iter):
    grad = gram @ x - rhs
    if np.abs(x - np.maximum(x - grad, 0.0)).max() <= threshold:
      break

    x_new = np.maximum(y - (gram @ y - rhs) / lipschitz, 0.0)
    obj_new = _objective(A, b, x_new, lam)
    if obj_new > obj:
      # Momentum overshot; restart from the current point.
      y = x.copy()
      t = 1.0
      continue

    t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
    y = x_new + ((t - 1.0) / t_new) * (x_new - x)
    x, obj, t = x_new, obj_new, t_new
    if obj < best_obj:
      best, best_obj = x.copy(), obj

  return best

def omp_select(batch_grads, full_grad, b_k, lam=0.0, epsilon=None,
               tol=None, max_iter=None):
  '''
  Greedy selection of at most b_k rows of batch_grads. Each step adds
  the unselected row with the largest positive normalized correlation
  with the residual (lowest index on ties), then refits all selected
  weights by NNLS warm-started from the previous solution. Stops early
  when no row correlates positively or the objective drops to epsilon.
  '''
  G = np.asarray(batch_grads, dtype=np.float64)
  f = np.asarray(full_grad, dtype=np.float64)
  n_batches = G.shape[0]
  if epsilon is None:
    epsilon = CONFIG.omp_epsilon
  if b_k < 1:
    raise ValueError("b_k must be >= 1, got %r" % (b_k,))
  if not (np.all(np.isfinite(G)) and np.all(np.isfinite(f))):
    raise ValueError("Gradients passed to omp_select must be finite.")
  if b_k > n_batches:
    LOGGER.warning("Requested %d batches but only %d exist; clamping.",
                   b_k, n_batches)
    b_k = n_batches

  norms = np.linalg.norm(G, axis=1)
  selected = []
  weights = np.zeros(0)
  residual = f.copy()
  obj = float(f @ f)
  trace = [obj]

  while len(selected) < b_k and obj > epsilon:
    score = np.full(n_batches, -np.inf)
    usable = norms > 0
    score[usable] = (G[usable] @ residual) / norms[usable]
    score[selected] = -np.inf
    pick = int(np.argmax(score))
    if not score[pick] > 0:
      LOGGER.debug("No batch correlates with the residual; stopping at %d.",
                   len(selected))
      break

    selected.append(pick)
    A = G[selected].T
    weights = nnls_solve(A, f, lam, tol, max_iter,
                         x0=np.append(weights, 0.0))
    residual = f - A @ weights
    new_obj = _objective(A, f, weights, lam)
    assert new_obj <= obj + 1e-9 * max(1.0, obj), \
        "OMP objective increased from %g to %g" % (obj, new_obj)
    obj = new_obj
    trace.append(obj)

  return Coreset(selected, weights, np.linalg.norm(residual), trace, 'gss')

##############################################################################

def _residual_norm(G, f, indices, weights):
  return float(np.linalg.norm(G[indices].T @ weights - f)) if len(indices) \
         else float(np.linalg.norm(f))

def _random_coreset(G, f, n_batches, b_k, rng):
  indices = np.sort(rng.choice(n_batches, size=b_k, replace=False))
  weights = np.ones(b_k)
  return Coreset(indices, weights, _residual_norm(G, f, indices, weights),
                 strategy='random')

def select_coreset(model, ds, plan, sel, seed, counter=None):
  '''
  Strategy dispatch: gss runs OMP on per-batch last-layer gradients
  and rescales the weights so that sum_l w_l |batch_l| = N; random
  draws b_k batches uniformly with unit weights; full takes every
  batch with unit weights and zero residual.
  '''
  n_batches = plan.n_batches
  if sel.strategy == 'full':
    return Coreset(np.arange(n_batches), np.ones(n_batches), 0.0,
                   strategy='full')

  b_k = sel.budget(n_batches)
  G, f = per_batch_last_layer_gradients(model, plan, ds, counter)
  if not np.all(np.isfinite(G)):
    raise NonFiniteError("Non-finite last-layer gradients during selection.")
  rng = np.random.default_rng(seed)

  if sel.strategy == 'random':
    return _random_coreset(G, f, n_batches, b_k, rng)

  coreset = omp_select(G, f, b_k, sel.lam, sel.epsilon)
  keep = coreset.weights > 0
  indices = coreset.batch_indices[keep]
  weights = coreset.weights[keep]
  if indices.size == 0:
    LOGGER.warning("Gradient matching selected no batches;"
                   " falling back to a random subset.")
    return _random_coreset(G, f, n_batches, b_k, rng)

  weights = weights * (len(ds) / np.dot(weights, plan.sizes()[indices]))
  return Coreset(indices, weights, _residual_norm(G, f, indices, weights),
                 coreset.objective_trace, 'gss')

class SelectionLog(object):
  '''Appends one JSON line per selection event to a file.'''

  def __init__(self, path):
    self.path = path
    with open(self.path, 'w'):
      pass

  def record(self, trial, epoch, coreset):
    entry = coreset.to_dict()
    entry.update(trial=int(trial), epoch=int(epoch))
    with open(self.path, 'a') as out:
      out.write(json.dumps(entry, sort_keys=True) + "\n")
