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
The tuning loop. Configurations drawn by a searcher become trials;
a scheduler hands each trial grants of epochs; every grant trains the
trial's model on its current coreset (reselected every R epochs, after
an optional full-data warm start) and reports a validation score. The
best trial is finally retrained on the full training set and scored
on the test split.
'''

import os
import math
import copy

import numpy as np

from .utilities import derive_seed, make_rng, to_builtin
from .dataio import make_batches, load_splits
from .model import init_mlp, evaluate, train_epoch, CostCounter, \
    OptimizerState, NonFiniteError, optimizer_from_config, \
    layer_dims_from_config, save_checkpoint, load_checkpoint
from .coreset import select_coreset, SelectionConfig, SelectionLog
from .search import ParamSpace, ObservationHistory, make_searcher
from .scheduler import make_scheduler, run_virtual, JobResult
from .experiment import ExperimentConfig, scheduler_config, selection_config
from .setup_logs import configure_logging

LOGGER = configure_logging('tuner')

##############################################################################

class TuningError(RuntimeError):
  '''Raised when no trial produced a usable result.'''
  pass

class TrialSchedule(object):
  __slots__ = ('total_epochs', 'selection_interval', 'warm_frac',
               'fraction', 'random_init')

  def __init__(self, total_epochs, selection_interval, warm_frac=0.0,
               fraction=1.0, random_init=False):
    if total_epochs < 1:
      raise ValueError("total_epochs must be >= 1, got %r" % (total_epochs,))
    if selection_interval < 1:
      raise ValueError("selection_interval must be >= 1, got %r"
                       % (selection_interval,))
    if not 0.0 <= warm_frac <= 1.0:
      raise ValueError("warm_frac must lie in [0, 1], got %r" % (warm_frac,))
    self.total_epochs       = int(total_epochs)
    self.selection_interval = int(selection_interval)
    self.warm_frac          = float(warm_frac)
    self.fraction           = float(fraction)
    self.random_init        = bool(random_init)

  def warm_epochs(self, n_samples):
    return warmstart_epochs(self.warm_frac, self.total_epochs,
                            self.fraction * n_samples, n_samples)

class Trial(object):
  '''
  One configuration's lifecycle. model is None while the trial is
  parked in a checkpoint file.
  '''
  __slots__ = ('id', 'config', 'model', 'opt_config', 'opt_state', 'plan',
               'epochs_done', 'last_eval', 'last_report', 'cost', 'coreset',
               'failed', 'rung', 'grants', 'selections', 'checkpoint')

  def __init__(self, trial_id, config, model, opt_config, plan):
    self.id          = trial_id
    self.config      = config
    self.model       = model
    self.opt_config  = opt_config
    self.opt_state   = OptimizerState()
    self.plan        = plan
    self.epochs_done = 0
    self.last_eval   = math.inf
    self.last_report = None
    self.cost        = CostCounter()
    self.coreset     = None
    self.failed      = False
    self.rung        = 0
    self.grants      = []
    self.selections  = []
    self.checkpoint  = None

  @property
  def batch_size(self):
    return self.plan.batch_size

  def row(self, space_names):
    '''Flat record for trials.csv.'''
    row = {'id': self.id}
    for name in space_names:
      row[name] = self.config.get(name)
    row.update(rung=self.rung, eval=self.last_eval, cost=self.cost.billed,
               failed=int(self.failed), epochs=self.epochs_done)
    return row

def warmstart_epochs(kappa, total_epochs, k, n_samples):
  '''T_w = round(kappa T k / N), clamped to [0, T].'''
  if not 0.0 <= kappa <= 1.0:
    raise ValueError("kappa must lie in [0, 1], got %r" % (kappa,))
  if n_samples <= 0:
    raise ValueError("Sample count must be positive.")
  t_w = int(math.floor(kappa * total_epochs * k / float(n_samples) + 0.5))
  return min(max(t_w, 0), total_epochs)

def score_from_report(report, metric='accuracy'):
  '''Scores are minimized: negated accuracy or mean loss.'''
  return -report.accuracy if metric == 'accuracy' else report.mean_loss

def _pool(plan, coreset):
  '''Sample indices and per-sample weights for a coreset's batches.'''
  indices = plan.indices(coreset.batch_indices)
  sizes = plan.sizes()[coreset.batch_indices]
  return indices, np.repeat(coreset.weights, sizes)

def run_trial_grant(trial, train, val, schedule, selection, grant, seed,
                    metric='accuracy', selection_log=None):
  '''
  Train a trial for `grant` more epochs and evaluate it once on the
  validation split. Epochs before the warm-start horizon use all of
  the training data; later epochs use the coreset, which is selected
  when missing and refreshed whenever the epoch is a positive multiple
  of the selection interval. A non-finite loss marks the trial failed.
  '''
  if trial.failed:
    return trial
  if grant <= 0:
    return trial

  n_samples = len(train)
  warm = schedule.warm_epochs(n_samples)
  interval = schedule.selection_interval

  try:
    for _ in range(grant):
      t = trial.epochs_done
      if t < warm:
        X, y, weights = train.features, train.labels, None
      else:
        if trial.coreset is None or (t % interval == 0 and t > 0):
          sel = selection
          if trial.coreset is None and schedule.random_init \
                and selection.strategy == 'gss':
            sel = SelectionConfig(selection.fraction, selection.lam,
                                  selection.epsilon, 'random')
          trial.coreset = select_coreset(
            trial.model, train, trial.plan, sel,
            derive_seed(seed, 'selection', trial.id, t), trial.cost)
          if trial.coreset.strategy == 'gss':
            trial.cost.selection_units += trial.plan.n_batches
          trial.selections.append(t)
          if selection_log is not None:
            selection_log.record(trial.id, t, trial.coreset)
        indices, weights = _pool(trial.plan, trial.coreset)
        X, y = train.features[indices], train.labels[indices]

      train_epoch(trial.model, X, y, weights, trial.batch_size,
                  trial.opt_config, t, trial.opt_state,
                  make_rng(seed, 'shuffle', trial.id, t), trial.cost)
      trial.epochs_done += 1

  except (NonFiniteError, FloatingPointError) as err:
    LOGGER.warning("Trial %d failed at epoch %d: %s", trial.id,
                   trial.epochs_done, err)
    trial.failed = True
    trial.last_eval = math.inf
    trial.grants.append(grant)
    return trial

  trial.grants.append(grant)
  trial.last_report = evaluate(trial.model, val, trial.cost)
  trial.last_eval = score_from_report(trial.last_report, metric)
  return trial

def best_trial(trials):
  '''
  Best last_eval among the non-failed trials that received the most
  epochs; ties go to the lower id. None if every trial failed.
  '''
  usable = [ t for t in trials if not t.failed and math.isfinite(t.last_eval) ]
  if not usable:
    return None
  deepest = max(t.epochs_done for t in usable)
  return min([ t for t in usable if t.epochs_done == deepest ],
             key=lambda t: (t.last_eval, t.id))

def final_train(config, train, test, total_epochs, seed, counter=None):
  '''
  Retrain a configuration from scratch on the full training split for
  total_epochs epochs and score it on the test split. Returns (model,
  test LossReport).
  '''
  if counter is None:
    counter = CostCounter()
  model = init_mlp(layer_dims_from_config(config.values, train.n_features,
                                          train.n_classes),
                   derive_seed(seed, 'final', 0))
  opt = optimizer_from_config(config.values, total_epochs)
  state = OptimizerState()
  batch_size = min(int(config.get('batch_size', 32)), len(train))
  for epoch in range(total_epochs):
    train_epoch(model, train.features, train.labels, None, batch_size, opt,
                epoch, state, make_rng(seed, 'final', 1, epoch), counter)
  report = evaluate(model, test, counter)
  LOGGER.info("Final training: test accuracy %.4f, loss %.4f",
              report.accuracy, report.mean_loss)
  return model, report

##############################################################################

class TuneReport(object):
  '''Summary of one tuning run. JSON output is deterministic.'''

  FIELDS = ('name', 'strategy', 'fraction', 'seed', 'best_trial',
            'best_config', 'best_eval', 'test_accuracy', 'test_loss',
            'tuning_cost', 'final_cost', 'total_cost', 'selection_units',
            'n_trials', 'n_failed', 'makespan', 'speedup',
            'relative_test_error', 'config')

  def __init__(self, **kwargs):
    for field in self.FIELDS:
      setattr(self, field, kwargs.get(field))

  @property
  def test_error(self):
    return 1.0 - self.test_accuracy

  def to_json(self):
    return to_builtin(dict( (f, getattr(self, f)) for f in self.FIELDS ))

  @classmethod
  def from_json(cls, data):
    return cls(**dict( (f, data.get(f)) for f in cls.FIELDS ))

class Tuner(object):
  '''
  Owns the datasets, searcher, observation history and trials of one
  tuning run. splits may be passed in to share data between runs.
  '''

  def __init__(self, experiment, splits=None, out_dir=None):
    if isinstance(experiment, ExperimentConfig):
      experiment = experiment.resolved()
    self.conf = copy.deepcopy(experiment)
    self.seed = int(self.conf['seed'])
    self.metric = self.conf['metric']
    self.workers = int(self.conf['workers'])

    if splits is None:
      splits = load_splits(self.conf['dataset'], self.seed)
    self.train, self.val, self.test = splits

    self.space = ParamSpace.from_json(self.conf['space'])
    searcher_opts = dict( (k, v) for k, v in self.conf['searcher'].items()
                          if k != 'kind' )
    self.searcher = make_searcher(self.conf['searcher']['kind'], self.space,
                                  self.seed, **searcher_opts)
    self.history = ObservationHistory()
    self.sched_conf = scheduler_config(self.conf)
    self.selection = selection_config(self.conf)

    training = self.conf['training']
    self.total_epochs = int(training['epochs'])
    self.schedule = TrialSchedule(self.total_epochs,
                                  training['selection_interval'],
                                  self.conf['strategy']['warm_frac'],
                                  self.selection.fraction,
                                  self.conf['strategy'].get('random_init',
                                                            False))
    self.checkpoint_dir = training.get('checkpoint_dir')
    self.selection_log = None
    if out_dir is not None and training.get('selection_log'):
      self.selection_log = SelectionLog(os.path.join(out_dir,
                                                     'selections.jsonl'))
    self.trials = []
    self.trace = None

  def spawn(self):
    '''Create the next trial from the searcher.'''
    trial_id = len(self.trials)
    config = self.searcher.suggest(trial_id, self.history)
    dims = layer_dims_from_config(config.values, self.train.n_features,
                                  self.train.n_classes)
    model = init_mlp(dims, derive_seed(self.seed, 'init', trial_id))
    opt = optimizer_from_config(config.values, self.total_epochs)
    plan = make_batches(self.train, int(config.get('batch_size', 32)),
                        derive_seed(self.seed, 'batch', trial_id))
    trial = Trial(trial_id, config, model, opt, plan)
    self.trials.append(trial)
    LOGGER.debug("Spawned trial %d: %s", trial_id, config.values)
    return trial_id

  def _park(self, trial):
    if self.checkpoint_dir is None or trial.model is None:
      return
    trial.checkpoint = save_checkpoint(
      trial.model, os.path.join(self.checkpoint_dir, 'trial_%04d' % trial.id))
    trial.model = None

  def _unpark(self, trial):
    if trial.model is None and trial.checkpoint is not None:
      trial.model = load_checkpoint(trial.checkpoint)
    return trial.model

  def run_job(self, job):
    trial = self.trials[job.trial]
    before = trial.cost.billed
    self._unpark(trial)
    grant = max(0, job.target - trial.epochs_done)
    run_trial_grant(trial, self.train, self.val, self.schedule,
                    self.selection, grant, self.seed, self.metric,
                    self.selection_log)
    trial.rung = max(trial.rung, job.rung)
    self._park(trial)
    return JobResult(trial.last_eval, trial.cost.billed - before,
                     trial.failed)

  def observe(self, job, result):
    if not result.failed and math.isfinite(result.score):
      trial = self.trials[job.trial]
      self.history.add(trial.config, result.score, trial.epochs_done,
                       trial.id)

  def tune(self):
    '''Run the scheduler to completion, then final training.'''
    scheduler = make_scheduler(self.sched_conf, self.spawn)
    self.trace = run_virtual(scheduler, self.run_job, self.workers,
                             on_finish=self.observe)

    best = best_trial(self.trials)
    n_failed = sum(1 for t in self.trials if t.failed)
    if best is None:
      raise TuningError("All %d trials failed; see the execution trace."
                        % (len(self.trials),))
    LOGGER.info("Best trial %d (eval %.4f after %d epochs) of %d",
                best.id, best.last_eval, best.epochs_done, len(self.trials))

    tuning_cost = sum(t.cost.billed for t in self.trials)
    final_counter = CostCounter()
    if self.selection.strategy == 'full':
      test_report = evaluate(self._unpark(best), self.test, final_counter)
    else:
      _model, test_report = final_train(best.config, self.train, self.test,
                                        self.total_epochs, self.seed,
                                        final_counter)

    return TuneReport(
      name=self.conf['name'],
      strategy=self.selection.strategy,
      fraction=self.selection.fraction,
      seed=self.seed,
      best_trial=best.id,
      best_config=best.config.values,
      best_eval=best.last_eval,
      test_accuracy=test_report.accuracy,
      test_loss=test_report.mean_loss,
      tuning_cost=tuning_cost,
      final_cost=final_counter.billed,
      total_cost=tuning_cost + final_counter.billed,
      selection_units=sum(t.cost.selection_units for t in self.trials),
      n_trials=len(self.trials),
      n_failed=n_failed,
      makespan=self.trace.makespan,
      config=self.conf)

  def trial_rows(self):
    return [ t.row(self.space.names) for t in self.trials ]

def tune(experiment, splits=None, out_dir=None):
  '''Convenience wrapper: returns (TuneReport, Tuner).'''
  tuner = Tuner(experiment, splits, out_dir)
  return tuner.tune(), tuner

##############################################################################

def _variant(conf, strategy, fraction):
  res = copy.deepcopy(conf)
  res['strategy']['kind'] = strategy
  res['strategy']['fraction'] = 1.0 if strategy == 'full' else fraction
  return res

def annotate(report, reference):
  '''Fill speedup and relative test error (percentage points) against
  the full-data reference run.'''
  report.speedup = reference.total_cost / float(report.total_cost)
  report.relative_test_error = (report.test_error - reference.test_error) * 100
  return report

def compare_strategies(experiment, strategies=None, fractions=None,
                       splits=None, out_dir=None):
  '''
  Run the full-data reference and each (strategy, fraction) variant
  with the same master seed; returns the annotated reports, reference
  first.
  '''
  if isinstance(experiment, ExperimentConfig):
    experiment = experiment.resolved()
  strategies = list(strategies or experiment['compare']['strategies'])
  fractions  = list(fractions or experiment['compare']['fractions'])
  if 'full' not in strategies or len(strategies) < 2:
    raise ValueError("compare_strategies needs 'full' plus at least one"
                     " other strategy: %s" % (strategies,))
  if splits is None:
    splits = load_splits(experiment['dataset'], int(experiment['seed']))

  LOGGER.info("Running full-data reference")
  reference, _tuner = tune(_variant(experiment, 'full', 1.0), splits, out_dir)
  reports = [annotate(reference, reference)]
  for strategy in strategies:
    if strategy == 'full':
      continue
    for fraction in fractions:
      LOGGER.info("Running %s at fraction %g", strategy, fraction)
      report, _tuner = tune(_variant(experiment, strategy, fraction), splits,
                            out_dir)
      reports.append(annotate(report, reference))
  return reports
