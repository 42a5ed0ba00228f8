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
Hyper-parameter spaces and the searchers which draw configurations
from them: plain random search and a tree-structured Parzen estimator
(TPE) with independent per-dimension densities. Scores are always
minimized.
'''

import math
import threading

import numpy as np
from scipy.special import logsumexp
from scipy.stats import truncnorm

from .utilities import derive_seed, to_builtin
from .config import Config
from .setup_logs import configure_logging

CONFIG = Config()
LOGGER = configure_logging('search')

PROVENANCE = ('random', 'tpe-prior', 'tpe-ei')

##############################################################################
# Domains.

class Uniform(object):
  kind = 'uniform'
  __slots__ = ('lo', 'hi')

  def __init__(self, lo, hi):
    if not lo < hi:
      raise ValueError("Domain needs lo < hi, got [%r, %r]" % (lo, hi))
    self.lo = float(lo)
    self.hi = float(hi)

  # Continuous domains are modelled in a transformed space; identity here.
  def forward(self, value):
    return value

  def inverse(self, value):
    return float(np.clip(value, self.lo, self.hi))

  def bounds(self):
    return self.forward(self.lo), self.forward(self.hi)

  def sample(self, rng):
    return float(rng.uniform(self.lo, self.hi))

  def contains(self, value):
    return self.lo <= value <= self.hi

  def to_json(self):
    return {'kind': self.kind, 'lo': self.lo, 'hi': self.hi}

class LogUniform(Uniform):
  kind = 'log_uniform'
  __slots__ = ()

  def __init__(self, lo, hi):
    if not lo > 0:
      raise ValueError("Log-uniform domains need lo > 0, got %r" % (lo,))
    super(LogUniform, self).__init__(lo, hi)

  def forward(self, value):
    return np.log(value)

  def inverse(self, value):
    return float(np.clip(np.exp(value), self.lo, self.hi))

  def sample(self, rng):
    return self.inverse(rng.uniform(math.log(self.lo), math.log(self.hi)))

class Choice(object):
  kind = 'choice'
  __slots__ = ('values',)

  def __init__(self, values):
    values = list(values)
    if not values:
      raise ValueError("Choice domains need at least one value.")
    self.values = values

  def sample(self, rng):
    return self.values[int(rng.integers(len(self.values)))]

  def index(self, value):
    return self.values.index(value)

  def contains(self, value):
    return value in self.values

  def to_json(self):
    return {'kind': self.kind, 'values': list(self.values)}

class IntChoice(Choice):
  kind = 'int_choice'
  __slots__ = ()

  def __init__(self, values):
    super(IntChoice, self).__init__([ int(v) for v in values ])

DOMAINS = dict( (cls.kind, cls) for cls in (Uniform, LogUniform,
                                            Choice, IntChoice) )

def domain_from_json(spec):
  kind = spec.get('kind')
  if kind not in DOMAINS:
    raise ValueError("Unknown domain kind: %s" % (kind,))
  if kind in ('choice', 'int_choice'):
    return DOMAINS[kind](spec['values'])
  return DOMAINS[kind](spec['lo'], spec['hi'])

class ParamSpace(object):
  '''An ordered collection of uniquely named domains.'''

  def __init__(self, domains):
    names = [ name for name, _dom in domains ]
    if len(set(names)) != len(names):
      raise ValueError("Parameter names must be unique: %s" % (names,))
    if not names:
      raise ValueError("A parameter space needs at least one domain.")
    self.domains = list(domains)

  @classmethod
  def from_json(cls, spec):
    return cls([ (name, domain_from_json(dom)) for name, dom in spec.items() ])

  def to_json(self):
    return dict( (name, dom.to_json()) for name, dom in self.domains )

  @property
  def names(self):
    return [ name for name, _dom in self.domains ]

  def __len__(self):
    return len(self.domains)

  def __iter__(self):
    return iter(self.domains)

  def contains(self, sample):
    return all(name in sample.values and dom.contains(sample.values[name])
               for name, dom in self.domains)

def tabular_space():
  '''The MLP search space used for the LIBSVM tabular datasets.'''
  return ParamSpace([('lr',         LogUniform(0.001, 0.01)),
                     ('optimizer',  Choice(['adam', 'sgd'])),
                     ('scheduler',  Choice(['none', 'cosine', 'linear'])),
                     ('h1',         IntChoice([150, 200, 250, 300])),
                     ('h2',         IntChoice([150, 200, 250, 300])),
                     ('batch_size', IntChoice([16, 32, 64]))])

##############################################################################

class ConfigSample(object):
  __slots__ = ('values', 'provenance')

  def __init__(self, values, provenance='random'):
    if provenance not in PROVENANCE:
      raise ValueError("Unknown provenance: %s" % (provenance,))
    self.values     = to_builtin(dict(values))
    self.provenance = provenance

  def __getitem__(self, key):
    return self.values[key]

  def get(self, key, default=None):
    return self.values.get(key, default)

  def __eq__(self, other):
    return isinstance(other, ConfigSample) and self.values == other.values

  def __repr__(self):
    return "ConfigSample(%r, %s)" % (self.values, self.provenance)

  def to_dict(self):
    return {'values': dict(self.values), 'provenance': self.provenance}

class Observation(object):
  __slots__ = ('sample', 'score', 'resource', 'trial')

  def __init__(self, sample, score, resource, trial):
    self.sample   = sample
    self.score    = score
    self.resource = resource
    self.trial    = trial

class ObservationHistory(object):
  '''
  Append-only record of evaluated configurations. Appends are guarded
  by a lock; readers work on snapshots.
  '''

  def __init__(self):
    self._lock = threading.Lock()
    self._entries = []

  def add(self, sample, score, resource=0, trial=None):
    if not math.isfinite(score):
      raise ValueError("Observation scores must be finite, got %r" % (score,))
    with self._lock:
      self._entries.append(Observation(sample, float(score), resource, trial))

  def snapshot(self):
    with self._lock:
      return list(self._entries)

  def __len__(self):
    with self._lock:
      return len(self._entries)

  def latest(self):
    '''One observation per trial, taken at the largest resource seen
    (the most recent on ties). Anonymous entries are all kept.'''
    chosen = {}
    order = []
    for pos, obs in enumerate(self.snapshot()):
      key = ('trial', obs.trial) if obs.trial is not None else ('pos', pos)
      if key not in chosen:
        order.append(key)
        chosen[key] = obs
      elif obs.resource >= chosen[key].resource:
        chosen[key] = obs
    return [ chosen[key] for key in order ]

##############################################################################
# Searchers.

def _rng(seed):
  if isinstance(seed, np.random.Generator):
    return seed
  return np.random.default_rng(seed)

def sample_random(space, seed, provenance='random'):
  '''One independent draw per domain.'''
  rng = _rng(seed)
  return ConfigSample(dict( (name, dom.sample(rng)) for name, dom in space ),
                      provenance)

def tpe_split_sizes(n_obs, gamma):
  '''(good, rest) group sizes: the best ceil(gamma * n) form the good set.'''
  n_good = min(n_obs, max(1, int(math.ceil(gamma * n_obs))))
  return n_good, n_obs - n_good

def _neighbour_gaps(points, lo, hi, prior_mu):
  '''Per-point distance to the farther of its two sorted neighbours,
  with the prior centre counted as a point; the outermost points use
  their inner gap.'''
  with_prior = np.append(points, prior_mu)
  order = np.argsort(with_prior, kind='stable')
  padded = np.concatenate(([lo], with_prior[order], [hi]))
  gaps = np.maximum(padded[1:-1] - padded[:-2], padded[2:] - padded[1:-1])
  if padded.size >= 4:
    gaps[0] = padded[2] - padded[1]
    gaps[-1] = padded[-2] - padded[-3]
  sigmas = np.empty_like(gaps)
  sigmas[order] = gaps
  return sigmas[:points.size]

class _ParzenContinuous(object):
  '''
  Mixture of truncated Gaussians in the domain's transformed space:
  one kernel per observation plus a wide prior kernel at the domain
  centre. Bandwidths are the neighbour gaps clipped to
  [width / min(100, 1 + n_kernels), width].
  '''

  def __init__(self, domain, values, prior_weight):
    self.lo, self.hi = domain.bounds()
    width = self.hi - self.lo
    points = np.array([ domain.forward(v) for v in values ], dtype=float)
    prior_mu = 0.5 * (self.lo + self.hi)

    n_kernels = points.size + 1
    sigmas = np.clip(_neighbour_gaps(points, self.lo, self.hi, prior_mu),
                     width / min(100.0, 1.0 + n_kernels), width)

    self.mus    = np.append(points, prior_mu)
    self.sigmas = np.append(sigmas, width)
    weights = np.append(np.ones(points.size), prior_weight)
    self.weights = weights / weights.sum()
    self.a = (self.lo - self.mus) / self.sigmas
    self.b = (self.hi - self.mus) / self.sigmas

  def logpdf(self, x):
    x = np.atleast_1d(x)
    comp = truncnorm.logpdf(x[:, None], self.a[None, :], self.b[None, :],
                            loc=self.mus[None, :], scale=self.sigmas[None, :])
    return logsumexp(comp + np.log(self.weights)[None, :], axis=1)

  def sample(self, rng, size):
    which = rng.choice(self.mus.size, size=size, p=self.weights)
    return truncnorm.rvs(self.a[which], self.b[which], loc=self.mus[which],
                         scale=self.sigmas[which], size=size, random_state=rng)

class _ParzenCategorical(object):
  '''Laplace-smoothed mass function over a choice domain.'''

  def __init__(self, domain, values):
    counts = np.ones(len(domain.values))
    for v in values:
      counts[domain.index(v)] += 1
    self.probs = counts / counts.sum()

  def logpdf(self, idx):
    return np.log(self.probs[np.atleast_1d(idx)])

  def sample(self, rng, size):
    return rng.choice(self.probs.size, size=size, p=self.probs)

def tpe_suggest(space, history, gamma=None, n_candidates=None, seed=None,
                min_obs=None, prior_weight=None):
  '''
  Suggest the candidate maximizing sum_dims [log i(x) - log g(x)],
  where i is fitted on the best ceil(gamma n) observations and g on the
  rest. Falls back to a random draw (provenance tpe-prior) with fewer
  than min_obs observations or when every score is equal.
  '''
  gamma        = CONFIG.tpe_gamma if gamma is None else gamma
  n_candidates = CONFIG.tpe_candidates if n_candidates is None else n_candidates
  min_obs      = CONFIG.tpe_min_obs if min_obs is None else min_obs
  prior_weight = CONFIG.tpe_prior_weight if prior_weight is None \
                 else prior_weight
  rng = _rng(seed)

  if history is None:
    observations = []
  elif isinstance(history, ObservationHistory):
    observations = history.latest()
  else:
    observations = list(history)

  scores = np.array([ obs.score for obs in observations ], dtype=float)
  if len(observations) < max(min_obs, 2) or np.all(scores == scores[0]):
    return sample_random(space, rng, 'tpe-prior')

  order = np.argsort(scores, kind='stable')
  n_good, _n_rest = tpe_split_sizes(len(observations), gamma)
  good = [ observations[i].sample for i in order[:n_good] ]
  rest = [ observations[i].sample for i in order[n_good:] ]

  total = np.zeros(n_candidates)
  columns = []
  for name, dom in space:
    if isinstance(dom, Choice):
      below = _ParzenCategorical(dom, [ s[name] for s in good ])
      above = _ParzenCategorical(dom, [ s[name] for s in rest ])
    else:
      below = _ParzenContinuous(dom, [ s[name] for s in good ], prior_weight)
      above = _ParzenContinuous(dom, [ s[name] for s in rest ], prior_weight)
    draws = below.sample(rng, n_candidates)
    total += below.logpdf(draws) - above.logpdf(draws)
    columns.append((name, dom, draws))

  best = int(np.argmax(total))
  values = {}
  for name, dom, draws in columns:
    if isinstance(dom, Choice):
      values[name] = dom.values[int(draws[best])]
    else:
      values[name] = dom.inverse(float(draws[best]))
  LOGGER.debug("TPE picked candidate %d of %d (score %.4g)",
               best, n_candidates, total[best])
  return ConfigSample(values, 'tpe-ei')

class RandomSearcher(object):
  kind = 'random'

  def __init__(self, space, seed):
    self.space = space
    self.seed  = seed

  def suggest(self, index, history=None):
    return sample_random(self.space, derive_seed(self.seed, 'searcher', index))

class TpeSearcher(object):
  kind = 'tpe'

  def __init__(self, space, seed, gamma=None, n_candidates=None,
               min_obs=None, prior_weight=None):
    self.space           = space
    self.seed            = seed
    self.gamma           = gamma
    self.n_candidates    = n_candidates
    self.min_obs         = min_obs
    self.prior_weight    = prior_weight

  def suggest(self, index, history=None):
    return tpe_suggest(self.space, history, self.gamma, self.n_candidates,
                       derive_seed(self.seed, 'searcher', index),
                       self.min_obs, self.prior_weight)

SEARCHERS = {'random' : RandomSearcher,
             'tpe'    : TpeSearcher}

def make_searcher(kind, space, seed, **opts):
  if kind not in SEARCHERS:
    raise ValueError("Unknown searcher: %s" % (kind,))
  return SEARCHERS[kind](space, seed, **opts)

def generate_configs(space, n, searcher, seed, history_provider=None,
                     offset=0):
  '''
  Draw n configurations. searcher is a searcher object or its kind;
  history_provider, if given, is called before each draw so that
  sequential TPE sees results as they arrive.
  '''
  if n <= 0:
    raise ValueError("Number of configurations must be >= 1, got %r" % (n,))
  if not hasattr(searcher, 'suggest'):
    searcher = make_searcher(searcher, space, seed)
  configs = []
  for i in range(n):
    history = history_provider() if history_provider is not None else None
    configs.append(searcher.suggest(offset + i, history))
  return configs
