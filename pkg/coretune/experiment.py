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
Experiment configuration files. An experiment is a JSON object with
sections dataset, space, searcher, scheduler, strategy, training and
compare; anything left out is filled in from DEFAULTS. Presets
shipped with the package can be named instead of a file path.
'''

import os
import copy
import json

from .search import ParamSpace, tabular_space
from .scheduler import SchedulerConfig
from .coreset import SelectionConfig
from .config import Config
from .setup_logs import configure_logging

CONFIG = Config()
LOGGER = configure_logging('experiment')

PRESET_DIR = os.path.join(os.path.dirname(os.path.realpath(__file__)),
                          'config', 'presets')

DATA_DIR_ENV = 'CORETUNE_DATA_DIR'

METRICS = ('accuracy', 'loss')

DEFAULTS = {
  'name'      : 'experiment',
  'seed'      : 0,
  'workers'   : 1,
  'metric'    : 'accuracy',
  'dataset'   : {'val_frac'    : 0.1,
                 'test_frac'   : 0.2,
                 'cache'       : False},
  'space'     : None,
  'searcher'  : {'kind' : 'random'},
  'scheduler' : {'kind'         : 'hyperband',
                 'eta'          : 3,
                 'min_resource' : 1,
                 'max_resource' : None,
                 'n_configs'    : None},
  'strategy'  : {'kind'        : 'gss',
                 'fraction'    : 0.1,
                 'lambda'      : 0.0,
                 'epsilon'     : None,
                 'warm_frac'   : None,
                 'random_init' : False},
  'training'  : {'epochs'             : 50,
                 'selection_interval' : 5,
                 'checkpoint_dir'     : None,
                 'selection_log'      : False},
  'compare'   : {'strategies' : ['full', 'gss'],
                 'fractions'  : [0.1]},
}

# Warm start is only used with ASHA by default.
DEFAULT_WARM_FRAC = {'sha': 0.0, 'hyperband': 0.0, 'asha': 0.35}

# Names accepted for compare.fractions in place of an explicit list.
STANDARD_FRACTION_NAMES = ('standard', 'paper-fractions')

class ConfigError(ValueError):
  '''Unreadable or invalid experiment configuration.'''
  pass

def _merge(base, extra):
  '''Recursive dict merge; values in extra win.'''
  out = copy.deepcopy(base)
  for key, value in extra.items():
    if isinstance(value, dict) and isinstance(out.get(key), dict):
      out[key] = _merge(out[key], value)
    else:
      out[key] = copy.deepcopy(value)
  return out

def parse_override(text):
  '''Split "a.b.c=value" into (['a','b','c'], value). Values are read
  as JSON where possible and as plain strings otherwise.'''
  if '=' not in text:
    raise ConfigError("Override must look like key=value: %s" % (text,))
  key, raw = text.split('=', 1)
  path = [ part for part in key.strip().split('.') if part ]
  if not path:
    raise ConfigError("Override has an empty key: %s" % (text,))
  try:
    value = json.loads(raw)
  except ValueError:
    value = raw
  return path, value

def list_presets():
  return sorted(os.path.splitext(f)[0] for f in os.listdir(PRESET_DIR)
                if f.endswith('.json'))

class ExperimentConfig(object):

  def __init__(self, data=None, source=None):
    self.data   = _merge(DEFAULTS, data or {})
    self.source = source

  @classmethod
  def load(cls, path):
    if not os.path.exists(path):
      raise ConfigError("Experiment config not found: %s" % (path,))
    try:
      with open(path) as handle:
        data = json.load(handle)
    except ValueError as err:
      raise ConfigError("Cannot parse %s: %s" % (path, err))
    if not isinstance(data, dict):
      raise ConfigError("Experiment config must be a JSON object: %s" % (path,))
    LOGGER.info("Loaded experiment config %s", path)
    return cls(data, source=os.path.abspath(path))

  @classmethod
  def from_preset(cls, name):
    path = os.path.join(PRESET_DIR, name + '.json')
    if not os.path.exists(path):
      raise ConfigError("Unknown preset '%s' (available: %s)"
                        % (name, ", ".join(list_presets())))
    conf = cls.load(path)
    conf.source = None
    return conf

  @classmethod
  def from_arg(cls, arg):
    '''A config file path, or failing that a preset name.'''
    if os.path.exists(arg) or arg.endswith('.json'):
      return cls.load(arg)
    return cls.from_preset(arg)

  def apply_overrides(self, overrides):
    '''Apply dotted key=value overrides in order; the last one wins.'''
    for text in overrides or ():
      path, value = parse_override(text)
      node = self.data
      for part in path[:-1]:
        if not isinstance(node.get(part), dict):
          node[part] = {}
        node = node[part]
      node[path[-1]] = value
      LOGGER.debug("Override %s = %r", ".".join(path), value)
    return self

  def __getitem__(self, key):
    return self.data[key]

  def _resolve_dataset(self, dataset):
    base = dataset.get('data_dir') or os.environ.get(DATA_DIR_ENV)
    if base is None and self.source is not None:
      base = os.path.dirname(self.source)
    for key in ('path', 'train', 'validation', 'test'):
      value = dataset.get(key)
      if value and not os.path.isabs(value) and base is not None:
        dataset[key] = os.path.join(os.path.expanduser(base), value)
    return dataset

  def resolved(self):
    '''
    The fully resolved experiment: defaults filled, automatic values
    (warm-start fraction, maximum resource, search space, dataset
    paths, named fraction lists) made explicit and validated.
    '''
    res = copy.deepcopy(self.data)

    if res['space'] is None:
      res['space'] = tabular_space().to_json()
    sched = res['scheduler']
    if sched.get('max_resource') is None:
      sched['max_resource'] = res['training']['epochs']
    strat = res['strategy']
    if strat.get('warm_frac') is None:
      strat['warm_frac'] = DEFAULT_WARM_FRAC.get(sched.get('kind'), 0.0)
    if strat.get('epsilon') is None:
      strat['epsilon'] = CONFIG.omp_epsilon
    fractions = res['compare'].get('fractions')
    if fractions in STANDARD_FRACTION_NAMES:
      res['compare']['fractions'] = list(CONFIG.standard_fractions)
    res['dataset'] = self._resolve_dataset(res['dataset'])

    validate(res)
    return res

##############################################################################

def scheduler_config(res):
  sched = res['scheduler']
  return SchedulerConfig(kind=sched['kind'], eta=sched['eta'],
                         min_resource=sched['min_resource'],
                         max_resource=sched['max_resource'],
                         n_configs=sched.get('n_configs'))

def selection_config(res):
  strat = res['strategy']
  return SelectionConfig(fraction=strat['fraction'], lam=strat['lambda'],
                         epsilon=strat['epsilon'], strategy=strat['kind'])

def validate(res):
  '''Raise ConfigError if a resolved experiment cannot be run.'''
  try:
    ParamSpace.from_json(res['space'])
    sched = scheduler_config(res)
    selection_config(res)
  except (ValueError, KeyError, TypeError) as err:
    raise ConfigError("Invalid experiment config: %s" % (err,))

  training = res['training']
  strat = res['strategy']
  dataset = res['dataset']
  if res['metric'] not in METRICS:
    raise ConfigError("Unknown metric '%s'" % (res['metric'],))
  if res['searcher'].get('kind') not in ('random', 'tpe'):
    raise ConfigError("Unknown searcher '%s'" % (res['searcher'].get('kind'),))
  if not int(res['workers']) >= 1:
    raise ConfigError("workers must be >= 1")
  if not int(training['epochs']) >= 1:
    raise ConfigError("training.epochs must be >= 1")
  if not int(training['selection_interval']) >= 1:
    raise ConfigError("training.selection_interval must be >= 1")
  if not 0.0 <= float(strat['warm_frac']) <= 1.0:
    raise ConfigError("strategy.warm_frac must lie in [0, 1]")
  if sched.max_resource > int(training['epochs']):
    raise ConfigError("scheduler.max_resource (%d) exceeds training.epochs (%d)"
                      % (sched.max_resource, training['epochs']))
  if not any(key in dataset for key in ('synthetic', 'path', 'train')):
    raise ConfigError("dataset needs one of 'synthetic', 'path' or 'train'")
  for key in ('path', 'train', 'validation', 'test'):
    if key in dataset and not os.path.exists(dataset[key]):
      raise ConfigError("Dataset file not found: %s" % (dataset[key],))
  strategies = res['compare'].get('strategies', [])
  if any(s not in ('full', 'gss', 'random') for s in strategies):
    raise ConfigError("Unknown strategy in compare.strategies: %s"
                      % (strategies,))
  if any(not 0.0 < float(f) <= 1.0 for f in res['compare'].get('fractions', [])):
    raise ConfigError("compare.fractions must lie in (0, 1]")
