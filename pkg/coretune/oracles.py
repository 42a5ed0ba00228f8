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
Brute-force verification suites. Each suite draws seeded random
instances, solves them with the production code and with an
independent (slow or closed-form) method, and reports disagreements.
'''

import math
import itertools
from fractions import Fraction

import numpy as np
from scipy.optimize import nnls as scipy_nnls

from .coreset import nnls_solve, omp_select
from .model import init_mlp, loss_and_grad, forward
from .scheduler import sha_plan, hyperband_brackets, ShaScheduler, \
    AshaScheduler, run_virtual, JobResult
from .utilities import derive_seed
from .setup_logs import configure_logging

LOGGER = configure_logging('oracles')

class SuiteResult(object):
  __slots__ = ('name', 'passed', 'instances', 'failures')

  def __init__(self, name, instances, failures):
    self.name      = name
    self.instances = instances
    self.failures  = failures
    self.passed    = not failures

  def summary(self):
    return "%-10s %s (%d instances, %d failures)" % (
      self.name, 'PASS' if self.passed else 'FAIL', self.instances,
      len(self.failures))

##############################################################################

def _augmented_optimum(G, f, lam):
  '''Global min of ||G^T w - f||^2 + lam ||w||^2 over w >= 0.'''
  A = G.T
  if lam > 0:
    A = np.vstack([A, math.sqrt(lam) * np.eye(G.shape[0])])
    f = np.concatenate([f, np.zeros(G.shape[0])])
  _x, rnorm = scipy_nnls(A, f)
  return rnorm ** 2

def _single_batch_best(G, f):
  best = math.inf
  for j in range(G.shape[0]):
    _x, rnorm = scipy_nnls(G[j][:, None], f)
    best = min(best, rnorm ** 2)
  return best

def omp_suite(instances=200, seed=0):
  '''OMP at b_k = b_N reaches the NNLS optimum; at b_k = 1 it matches the
  best single batch; the objective trace never increases.'''
  failures = []
  for i in range(instances):
    rng = np.random.default_rng(derive_seed(seed, 'selection', i))
    n_batches = int(rng.integers(1, 9))
    dim = int(rng.integers(1, 5))
    lam = 0.0 if i % 2 == 0 else float(rng.uniform(0, 0.5))
    G = rng.normal(size=(n_batches, dim))
    f = rng.normal(size=dim) + G.sum(axis=0)

    full = omp_select(G, f, n_batches, lam)
    obj = full.objective_trace[-1]
    optimum = _augmented_optimum(G, f, lam)
    if abs(obj - optimum) > 1e-6 * max(1.0, optimum):
      failures.append("instance %d: OMP %.10g vs optimum %.10g"
                      % (i, obj, optimum))
    if np.any(np.diff(full.objective_trace) > 1e-9 * max(1.0, obj)):
      failures.append("instance %d: objective increased" % (i,))

    if lam == 0.0:
      first = omp_select(G, f, 1, 0.0).objective_trace[-1]
      single = _single_batch_best(G, f)
      if first > single * (1.0 + 1e-9) + 1e-12:
        failures.append("instance %d: b_k=1 objective %.10g above best"
                        " single batch %.10g" % (i, first, single))
  return SuiteResult('omp', instances, failures)

def _grid_minimum(A, b, lam, top=5.0, step=1e-3):
  '''
  Minimum over the grid {0, step, ..., top}^2. For each w1 the best
  w2 is found from the vertex of the quadratic in w2 and its two
  neighbouring grid points.
  '''
  grid = np.round(np.arange(0.0, top + step / 2, step), 12)
  Q = A.T @ A + lam * np.eye(2)
  c = A.T @ b
  const = b @ b
  w1 = grid
  # f(w1, w2) = Q11 w1^2 + 2 Q12 w1 w2 + Q22 w2^2 - 2 c1 w1 - 2 c2 w2 + const
  vertex = (c[1] - Q[0, 1] * w1) / Q[1, 1] if Q[1, 1] > 0 \
           else np.zeros_like(w1)
  best = math.inf
  base = np.floor(np.clip(vertex, 0.0, top) / step)
  for offset in (-1, 0, 1, 2):
    w2 = np.clip((base + offset) * step, 0.0, top)
    vals = (Q[0, 0] * w1 ** 2 + 2 * Q[0, 1] * w1 * w2 + Q[1, 1] * w2 ** 2
            - 2 * c[0] * w1 - 2 * c[1] * w2 + const)
    best = min(best, vals.min())
  return best

def nnls_suite(instances=100, seed=0, lam=0.1):
  '''Projected-gradient NNLS never does worse than a fine grid search.'''
  failures = []
  for i in range(instances):
    rng = np.random.default_rng(derive_seed(seed, 'selection', 10000 + i))
    A = rng.normal(size=(3, 2))
    b = A @ rng.uniform(0.0, 4.0, size=2) + 0.1 * rng.normal(size=3)
    w = nnls_solve(A, b, lam)
    resid = A @ w - b
    obj = resid @ resid + lam * (w @ w)
    grid = _grid_minimum(A, b, lam)
    if obj > grid + 1e-6:
      failures.append("instance %d: nnls %.10g above grid %.10g"
                      % (i, obj, grid))
    if np.all(w <= 5.0):
      slack = 2 * (np.linalg.norm(A, 2) ** 2 + lam) * 1e-6 / 4.0
      if obj < grid - slack - 1e-9:
        failures.append("instance %d: nnls %.10g implausibly below grid %.10g"
                        % (i, obj, grid))
  return SuiteResult('nnls', instances, failures)

##############################################################################

HYPERBAND_81_3 = [(81, 1), (34, 3), (15, 9), (8, 27), (5, 81)]

def _closed_form_brackets(max_resource, eta):
  '''Independent rendering of the bracket formula in exact arithmetic.'''
  s_max = int(math.log(max_resource) / math.log(eta) + 1e-9)
  brackets = []
  for s in range(s_max, -1, -1):
    n = math.ceil(Fraction(s_max + 1, s + 1) * eta ** s)
    r = Fraction(max_resource, eta ** s)
    rounds = []
    while n >= 1:
      rounds.append((n, r))
      if r >= max_resource:
        break
      n, r = n // eta, min(r * eta, Fraction(max_resource))
    brackets.append(rounds)
  return brackets

def _same_plan(got, expected):
  return len(got) == len(expected) and all(
    n1 == n2 and abs(r1 - float(r2)) <= 1e-9 * max(1.0, float(r2))
    for (n1, r1), (n2, r2) in zip(got, expected))

def hyperband_suite(instances=50, seed=0):
  failures = []
  firsts = [ plan[0] for plan in hyperband_brackets(81, 3) ]
  if not _same_plan(firsts, HYPERBAND_81_3):
    failures.append("R=81, eta=3 brackets %s != %s" % (firsts, HYPERBAND_81_3))
  if sha_plan(27, 1, 3, 27) != [(27, 1), (9, 3), (3, 9), (1, 27)]:
    failures.append("sha_plan(27, 1, 3, 27) = %s" % (sha_plan(27, 1, 3, 27),))

  rng = np.random.default_rng(derive_seed(seed, 'scheduler', 0))
  for i in range(instances):
    eta = int(rng.integers(2, 5))
    max_resource = int(rng.integers(eta, 500))
    got = hyperband_brackets(max_resource, eta)
    expected = _closed_form_brackets(max_resource, eta)
    if len(got) != len(expected) or not all(
        _same_plan(g, e) for g, e in zip(got, expected)):
      failures.append("instance %d: R=%d eta=%d mismatch" % (i, max_resource,
                                                             eta))
  return SuiteResult('hyperband', instances + 2, failures)

##############################################################################

def _table_runner(table, done):
  '''A runner scoring each trial from a fixed table; each job costs the
  epochs it adds.'''
  def runner(job):
    cost = max(0, job.target - done.get(job.trial, 0))
    done[job.trial] = max(done.get(job.trial, 0), job.target)
    return JobResult(table[job.trial], cost)
  return runner

def _max_rungs(trace):
  rungs = {}
  for event in trace.finishes():
    rungs[event['trial']] = max(rungs.get(event['trial'], 0), event['rung'])
  return rungs

def _simulate(kind, table, eta, levels, workers):
  n = eta ** levels
  ids = itertools.count()
  spawn = lambda: next(ids)
  if kind == 'sha':
    sched = ShaScheduler(n, 1, eta, n, spawn)
  else:
    sched = AshaScheduler(1, eta, n, spawn, n)
  return run_virtual(sched, _table_runner(table, {}), workers)

def asha_suite(instances=20, seed=0):
  '''
  A serial ASHA run reaches the same per-trial rungs as SHA when
  scores are rung-constant and increase with trial id (the best trial
  arrives first); four workers pick the same winner as one.
  '''
  failures = []
  for i in range(instances):
    rng = np.random.default_rng(derive_seed(seed, 'scheduler', 1000 + i))
    eta = int(rng.integers(2, 4))
    levels = int(rng.integers(1, 4))
    n = eta ** levels
    table = np.sort(rng.uniform(size=n)).tolist()

    sha = _max_rungs(_simulate('sha', table, eta, levels, 1))
    serial_trace = _simulate('asha', table, eta, levels, 1)
    serial = _max_rungs(serial_trace)
    if sha != serial:
      failures.append("instance %d: SHA rungs %s != serial ASHA %s"
                      % (i, sha, serial))

    parallel_trace = _simulate('asha', table, eta, levels, 4)
    parallel = _max_rungs(parallel_trace)
    best = lambda rungs: min(rungs, key=lambda t: (-rungs[t], table[t], t))
    if best(parallel) != best(serial):
      failures.append("instance %d: 4-worker ASHA picked trial %d, serial %d"
                      % (i, best(parallel), best(serial)))
  return SuiteResult('asha', instances, failures)

##############################################################################

def _weighted_loss(model, X, y, w):
  report, _grads = loss_and_grad(model, X, y, w)
  return report.mean_loss

def gradient_suite(instances=50, seed=0, step=1e-4, kink=1e-3, tol=1e-4):
  '''Analytic gradients agree with central finite differences.'''
  failures = []
  checked = 0
  for i in range(instances):
    rng = np.random.default_rng(derive_seed(seed, 'init', 50000 + i))
    n_hidden = int(rng.integers(0, 3))
    dims = ([int(rng.integers(1, 5))]
            + [ int(rng.integers(1, 6)) for _ in range(n_hidden) ]
            + [int(rng.integers(2, 5))])
    model = init_mlp(dims, derive_seed(seed, 'init', i))

    for _attempt in range(100):
      X = rng.normal(size=(5, dims[0]))
      pres, _acts = forward(model, X)
      if all(np.abs(p).min() >= kink for p in pres[:-1]):
        break
    else:
      LOGGER.debug("Instance %d: no kink-free batch found; skipped", i)
      continue

    y = rng.integers(0, dims[-1], size=5)
    w = rng.uniform(0.1, 2.0, size=5)
    _report, grads = loss_and_grad(model, X, y, w)

    analytic = np.concatenate([ g.ravel() for g in grads ])
    numeric = []
    for param in model.params():
      flat = param.reshape(-1)
      for j in range(flat.size):
        saved = flat[j]
        flat[j] = saved + step
        upper = _weighted_loss(model, X, y, w)
        flat[j] = saved - step
        lower = _weighted_loss(model, X, y, w)
        flat[j] = saved
        numeric.append((upper - lower) / (2 * step))
    numeric = np.array(numeric)

    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    err = np.linalg.norm(analytic - numeric) / scale
    checked += 1
    if err > tol:
      failures.append("instance %d (dims %s): relative error %.3g"
                      % (i, dims, err))
  return SuiteResult('gradients', checked, failures)

##############################################################################

SUITES = {'omp'       : (omp_suite, 200),
          'nnls'      : (nnls_suite, 100),
          'hyperband' : (hyperband_suite, 50),
          'asha'      : (asha_suite, 20),
          'gradients' : (gradient_suite, 50)}

SUITE_ORDER = ('omp', 'nnls', 'hyperband', 'asha', 'gradients')

def run_suites(names=None, instances=None, seed=0):
  '''Run the named suites (all by default) and return SuiteResults.'''
  names = list(names or SUITE_ORDER)
  results = []
  for name in names:
    if name not in SUITES:
      raise ValueError("Unknown oracle suite: %s" % (name,))
    func, default = SUITES[name]
    count = default if instances is None else instances
    LOGGER.info("Running %s suite (%d instances)", name, count)
    results.append(func(count, seed))
  return results
