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
Resource allocation across trials. Successive halving (SHA),
Hyperband and asynchronous successive halving (ASHA) all hand out
jobs of the form "train trial i up to e epochs"; run_virtual executes
those jobs on a simulated pool of workers whose clock advances by the
cost (in sample-gradient units) of each job.

Scores are minimized. Ties are broken by the lower trial id, and
failed or NaN results rank last.
'''

import json
import math
import heapq
from bisect import insort

from .setup_logs import configure_logging

LOGGER = configure_logging('scheduler')

KINDS = ('sha', 'hyperband', 'asha')

##############################################################################

class SchedulerConfig(object):
  __slots__ = ('kind', 'eta', 'min_resource', 'max_resource', 'n_configs')

  def __init__(self, kind='hyperband', eta=3, min_resource=1,
               max_resource=27, n_configs=None):
    if kind not in KINDS:
      raise ValueError("Unknown scheduler kind: %s" % (kind,))
    if eta < 2:
      raise ValueError("Reduction factor eta must be >= 2, got %r" % (eta,))
    if not 1 <= min_resource <= max_resource:
      raise ValueError("Need 1 <= min_resource <= max_resource, got %r, %r"
                       % (min_resource, max_resource))
    if n_configs is not None and n_configs < 1:
      raise ValueError("n_configs must be >= 1, got %r" % (n_configs,))
    if kind in ('sha', 'asha') and n_configs is None:
      raise ValueError("The %s scheduler needs n_configs." % (kind,))
    self.kind         = kind
    self.eta          = int(eta)
    self.min_resource = min_resource
    self.max_resource = int(max_resource)
    self.n_configs    = n_configs

  def to_dict(self):
    return dict( (key, getattr(self, key)) for key in self.__slots__ )

class Job(object):
  '''Train `trial` until it has `target` epochs; `rung` is its ladder level.'''
  __slots__ = ('trial', 'rung', 'target', 'bracket')

  def __init__(self, trial, rung, target, bracket=0):
    self.trial   = trial
    self.rung    = rung
    self.target  = target
    self.bracket = bracket

  def __repr__(self):
    return "Job(trial=%d, rung=%d, target=%d)" % (self.trial, self.rung,
                                                  self.target)

class JobResult(object):
  __slots__ = ('score', 'cost', 'failed')

  def __init__(self, score, cost, failed=False):
    self.score  = score
    self.cost   = cost
    self.failed = failed

def rank_score(score):
  '''NaN and failed scores sort last.'''
  return math.inf if score is None or math.isnan(score) else score

def resource_target(resource, max_resource):
  '''Integer epoch target for a (possibly fractional) resource level.'''
  return int(min(max_resource, max(1, int(round(resource)))))

##############################################################################
# Plans.

def sha_plan(n, r, eta, max_resource):
  '''
  Successive-halving rounds [(n_0, r_0), (n_1, r_1), ...] with
  n_{i+1} = floor(n_i / eta) and r_{i+1} = min(eta r_i, R_max). The
  plan ends after the first round at R_max or when no config survives.
  '''
  if n < 1:
    raise ValueError("sha_plan needs n >= 1, got %r" % (n,))
  if eta < 2:
    raise ValueError("Reduction factor eta must be >= 2, got %r" % (eta,))
  if not 0 < r <= max_resource:
    raise ValueError("Need 0 < r <= R_max, got %r, %r" % (r, max_resource))

  rounds = []
  n_i, r_i = int(n), r
  while n_i >= 1:
    rounds.append((n_i, r_i))
    if r_i >= max_resource:
      break
    n_i = n_i // eta
    r_i = eta * r_i
    # Fractional Hyperband resources can land a rounding error short of R_max.
    if r_i >= max_resource * (1 - 1e-9):
      r_i = max_resource
  return rounds

def hyperband_brackets(max_resource, eta):
  '''
  One SHA plan per bracket s = s_max..0 with
  n_s = ceil((s_max + 1) eta^s / (s + 1)) and r_s = R_max / eta^s,
  where s_max = floor(log_eta R_max).
  '''
  if eta < 2:
    raise ValueError("Reduction factor eta must be >= 2, got %r" % (eta,))
  if max_resource < eta:
    raise ValueError("Hyperband needs R_max >= eta, got %r < %r"
                     % (max_resource, eta))
  s_max = 0
  while eta ** (s_max + 1) <= max_resource:
    s_max += 1

  brackets = []
  for s in range(s_max, -1, -1):
    n_s = -(-(s_max + 1) * eta ** s // (s + 1))
    r_s = max_resource / float(eta ** s)
    brackets.append(sha_plan(n_s, r_s, eta, max_resource))
  return brackets

def capped_brackets(max_resource, eta, n_configs=None):
  '''Hyperband brackets, filled in order from the most exploratory one
  until n_configs base configurations have been allotted.'''
  brackets = hyperband_brackets(max_resource, eta)
  if n_configs is None:
    return brackets
  remaining = n_configs
  capped = []
  for plan in brackets:
    n_s = min(plan[0][0], remaining)
    if n_s < 1:
      break
    capped.append(sha_plan(n_s, plan[0][1], eta, max_resource))
    remaining -= n_s
  return capped

##############################################################################
# Synchronous schedulers.

class ShaScheduler(object):
  '''
  Successive halving with a barrier per round: all jobs of a round
  must report before the best floor(n_i / eta) trials are promoted.
  '''

  def __init__(self, n, r, eta, max_resource, spawn, bracket=0, plan=None):
    self.rounds       = plan if plan is not None \
                        else sha_plan(n, r, eta, max_resource)
    self.max_resource = max_resource
    self.spawn        = spawn
    self.bracket      = bracket
    self.round        = 0
    self.queue        = None
    self.outstanding  = 0
    self.results      = {}
    self._done        = False

  def _start_round(self, trials):
    _n_i, r_i = self.rounds[self.round]
    target = resource_target(r_i, self.max_resource)
    self.queue = [ Job(t, self.round, target, self.bracket) for t in trials ]
    self.results = {}
    self.outstanding = len(trials)

  def next_job(self):
    if self._done:
      return None
    if self.queue is None:
      self._start_round([ self.spawn() for _ in range(self.rounds[0][0]) ])
    if self.queue:
      return self.queue.pop(0)
    return None

  def on_result(self, trial, rung, score):
    self.results[trial] = rank_score(score)
    self.outstanding -= 1
    if self.outstanding > 0 or self.queue:
      return
    if self.round + 1 >= len(self.rounds):
      self._done = True
      return
    ranked = sorted(self.results, key=lambda t: (self.results[t], t))
    self.round += 1
    survivors = ranked[:self.rounds[self.round][0]]
    LOGGER.debug("Bracket %d round %d: promoting %s", self.bracket,
                 self.round, survivors)
    self._start_round(survivors)

  def finished(self):
    return self._done

class HyperbandScheduler(object):
  '''Runs the (optionally capped) Hyperband brackets one after another.'''

  def __init__(self, max_resource, eta, spawn, n_configs=None):
    self.plans = capped_brackets(max_resource, eta, n_configs)
    self.brackets = [ ShaScheduler(None, None, eta, max_resource, spawn,
                                   bracket=i, plan=plan)
                      for i, plan in enumerate(self.plans) ]
    self.current = 0

  @property
  def n_configs(self):
    return sum(plan[0][0] for plan in self.plans)

  def next_job(self):
    while self.current < len(self.brackets):
      sha = self.brackets[self.current]
      if sha.finished():
        self.current += 1
        continue
      return sha.next_job()
    return None

  def on_result(self, trial, rung, score):
    self.brackets[self.current].on_result(trial, rung, score)

  def finished(self):
    return all(sha.finished() for sha in self.brackets)

##############################################################################
# Asynchronous successive halving.

class RungState(object):
  __slots__ = ('index', 'resource', 'completed', 'promoted')

  def __init__(self, index, resource):
    self.index     = index
    self.resource  = resource
    self.completed = []
    self.promoted  = set()

  def top(self, k):
    return sorted(self.completed, key=lambda c: (c[1], c[0]))[:k]

  def promotable(self, eta):
    '''First unpromoted finite-score trial among the top
    floor(|completed| / eta), or None once that many have been promoted.'''
    k = len(self.completed) // eta
    if len(self.promoted) >= k:
      return None
    for trial, score in self.top(k):
      if trial not in self.promoted and math.isfinite(score):
        return trial
    return None

class AshaState(object):
  __slots__ = ('rungs', 'eta', 'max_trials', 'spawned')

  def __init__(self, min_resource, eta, max_resource, max_trials):
    self.rungs = []
    resource = min_resource
    while True:
      self.rungs.append(RungState(len(self.rungs),
                                  min(resource, max_resource)))
      if resource >= max_resource:
        break
      resource *= eta
    self.eta        = eta
    self.max_trials = max_trials
    self.spawned    = 0

class Promote(object):
  __slots__ = ('trial', 'rung')

  def __init__(self, trial, rung):
    self.trial = trial
    self.rung  = rung

  def __repr__(self):
    return "Promote(trial=%d, rung=%d)" % (self.trial, self.rung)

class Spawn(object):
  __slots__ = ()

  def __repr__(self):
    return "Spawn()"

def asha_record(state, trial, rung, score):
  state.rungs[rung].completed.append((trial, rank_score(score)))

def asha_step(state, event=None):
  '''
  Record an optional (trial, rung, score) event, then decide the next
  action: promote the first unpromoted trial found among the top
  floor(|completed| / eta) of a rung (scanning from the highest rung
  down, and at most that many per rung in total), else spawn a new base
  configuration while the trial budget lasts. Returns None once nothing
  can be done.
  '''
  if event is not None:
    asha_record(state, *event)

  for rung in reversed(state.rungs[:-1]):
    trial = rung.promotable(state.eta)
    if trial is not None:
      rung.promoted.add(trial)
      return Promote(trial, rung.index + 1)

  if state.spawned < state.max_trials:
    state.spawned += 1
    return Spawn()
  return None

class AshaScheduler(object):

  def __init__(self, min_resource, eta, max_resource, spawn, n_configs):
    self.state        = AshaState(min_resource, eta, max_resource, n_configs)
    self.max_resource = max_resource
    self.spawn        = spawn
    self.running      = 0

  def next_job(self):
    action = asha_step(self.state)
    if action is None:
      return None
    self.running += 1
    if isinstance(action, Spawn):
      rung = self.state.rungs[0]
      return Job(self.spawn(), 0, resource_target(rung.resource,
                                                  self.max_resource))
    rung = self.state.rungs[action.rung]
    return Job(action.trial, action.rung,
               resource_target(rung.resource, self.max_resource))

  def on_result(self, trial, rung, score):
    self.running -= 1
    asha_record(self.state, trial, rung, score)

  def finished(self):
    if self.running > 0 or self.state.spawned < self.state.max_trials:
      return False
    # Nothing running; finished unless some rung can still promote.
    return all(rung.promotable(self.state.eta) is None
               for rung in self.state.rungs[:-1])

def make_scheduler(conf, spawn):
  '''Build a scheduler from a SchedulerConfig; spawn() must return
  the id of a freshly created trial.'''
  if conf.kind == 'sha':
    return ShaScheduler(conf.n_configs, conf.min_resource, conf.eta,
                        conf.max_resource, spawn)
  if conf.kind == 'hyperband':
    return HyperbandScheduler(conf.max_resource, conf.eta, spawn,
                              conf.n_configs)
  return AshaScheduler(conf.min_resource, conf.eta, conf.max_resource,
                       spawn, conf.n_configs)

##############################################################################
# Discrete-event execution.

class VirtualClock(object):
  '''Event queue ordered by (virtual time, insertion order).'''

  def __init__(self):
    self.now    = 0.0
    self._queue = []
    self._seq   = 0

  def schedule(self, time, payload):
    if time < self.now:
      raise ValueError("Cannot schedule an event in the past (%r < %r)"
                       % (time, self.now))
    heapq.heappush(self._queue, (time, self._seq, payload))
    self._seq += 1

  def pop(self):
    time, _seq, payload = heapq.heappop(self._queue)
    self.now = time
    return payload

  def __len__(self):
    return len(self._queue)

class ExecutionTrace(object):
  '''Start and finish records of every job, in virtual-time order.'''

  def __init__(self):
    self.events = []

  def record(self, time, event, worker, job, score=None, cost=None):
    self.events.append({'t_virtual' : float(time),
                        'event'     : event,
                        'worker'    : worker,
                        'trial'     : job.trial,
                        'rung'      : job.rung,
                        'target'    : job.target,
                        'score'     : score,
                        'cost'      : cost})

  def finishes(self):
    return [ e for e in self.events if e['event'] == 'finish' ]

  @property
  def makespan(self):
    return max([ e['t_virtual'] for e in self.events ] + [0.0])

  @property
  def total_cost(self):
    return sum(e['cost'] for e in self.finishes())

  def max_target(self):
    return max([ e['target'] for e in self.events ] + [0])

  def to_jsonl(self, path):
    with open(path, 'w') as out:
      for event in self.events:
        score = event['score']
        if score is not None and not math.isfinite(score):
          event = dict(event, score=None)
        out.write(json.dumps(event, sort_keys=True) + "\n")
    return path

  @classmethod
  def from_jsonl(cls, path):
    trace = cls()
    with open(path) as handle:
      trace.events = [ json.loads(line) for line in handle if line.strip() ]
    return trace

def run_virtual(scheduler, runner, workers=1, cost_model=None, on_finish=None):
  '''
  Drive a scheduler on `workers` simulated workers. runner(job) returns
  a JobResult and runs immediately at dispatch; its result is delivered
  to the scheduler when the virtual clock reaches dispatch time + cost.
  The lowest-numbered idle worker is always used first.
  '''
  if workers < 1:
    raise ValueError("Need at least one worker, got %r" % (workers,))

  clock = VirtualClock()
  idle  = list(range(workers))
  trace = ExecutionTrace()

  while True:
    while idle:
      job = scheduler.next_job()
      if job is None:
        break
      worker = idle.pop(0)
      trace.record(clock.now, 'start', worker, job)
      try:
        result = runner(job)
      except Exception as err:
        LOGGER.warning("Trial %d failed: %s", job.trial, err)
        result = JobResult(math.inf, 0, failed=True)
      cost = cost_model(job, result) if cost_model is not None else result.cost
      clock.schedule(clock.now + cost, (worker, job, result, cost))

    if len(clock) == 0:
      break

    worker, job, result, cost = clock.pop()
    trace.record(clock.now, 'finish', worker, job, result.score, cost)
    scheduler.on_result(job.trial, job.rung, result.score)
    if on_finish is not None:
      on_finish(job, result)
    insort(idle, worker)

  if not scheduler.finished():
    LOGGER.warning("Scheduler stalled with no runnable jobs.")
  return trace
