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
Code used to read LIBSVM-format tabular datasets into dense arrays,
split them deterministically and partition the training split into
the fixed mini-batches used for per-batch coreset selection.
'''

import os
import io
import json
import math

import numpy as np

from .utilities import flexi_open, checksum_file, checksum_text, \
    derive_seed, ensure_dir, write_json
from .config import Config
from .setup_logs import configure_logging

CONFIG = Config()
LOGGER = configure_logging('dataio')

SPLIT_TAGS = ('train', 'validation', 'test')

##############################################################################

class LibsvmParseError(ValueError):
  '''Raised for malformed LIBSVM input; carries the 1-based line number.'''

  def __init__(self, lineno, message):
    self.lineno = lineno
    super(LibsvmParseError, self).__init__("line %d: %s" % (lineno, message))

class Dataset(object):
  '''
  A dense feature matrix with integer class labels in [0, n_classes).
  '''
  __slots__ = ('features', 'labels', 'n_classes', 'split_tag')

  def __init__(self, features, labels, n_classes, split_tag='train'):

    features = np.asarray(features, dtype=np.float64)
    labels   = np.asarray(labels, dtype=np.int64)

    if features.ndim != 2:
      raise ValueError("Features must be a 2-d matrix, got shape %s"
                       % (features.shape,))
    if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
      raise ValueError("Feature row count (%d) does not match label count (%s)"
                       % (features.shape[0], labels.shape))
    if n_classes < 2:
      raise ValueError("A dataset needs at least two classes, got %d"
                       % (n_classes,))
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
      raise ValueError("Labels must lie in [0, %d)" % (n_classes,))
    if split_tag not in SPLIT_TAGS:
      raise ValueError("Unknown split tag: %s" % (split_tag,))

    self.features  = features
    self.labels    = labels
    self.n_classes = int(n_classes)
    self.split_tag = split_tag

  def __len__(self):
    return self.features.shape[0]

  @property
  def n_features(self):
    return self.features.shape[1]

  def subset(self, indices, split_tag=None):
    '''Return a new Dataset restricted to the given row indices.'''
    indices = np.asarray(indices, dtype=np.int64)
    return Dataset(self.features[indices], self.labels[indices],
                   self.n_classes,
                   self.split_tag if split_tag is None else split_tag)

class BatchPlan(object):
  '''
  A fixed partition of sample indices 0..N-1 into mini-batches of
  batch_size members (the last batch may be short).
  '''
  __slots__ = ('batch_size', 'batch_assignments', 'seed')

  def __init__(self, batch_size, batch_assignments, seed):
    self.batch_size        = batch_size
    self.batch_assignments = batch_assignments
    self.seed              = seed

  @property
  def n_batches(self):
    return len(self.batch_assignments)

  def sizes(self):
    return np.array([ len(b) for b in self.batch_assignments ], dtype=np.int64)

  def indices(self, batch_ids):
    '''Concatenated sample indices for a list of batch ids.'''
    if len(batch_ids) == 0:
      return np.zeros(0, dtype=np.int64)
    return np.concatenate([ self.batch_assignments[b] for b in batch_ids ])

##############################################################################
# LIBSVM text format.

def _read_libsvm_rows(stream):
  '''
  Core of the LIBSVM parser. Returns a list of (lineno, label, indices,
  values) tuples with 0-based feature indices.
  '''
  rows = []
  for lineno, line in enumerate(stream, 1):
    line = line.split('#', 1)[0].strip()
    if not line:
      continue
    tokens = line.split()
    try:
      label = float(tokens[0])
    except ValueError:
      raise LibsvmParseError(lineno, "non-numeric label '%s'" % (tokens[0],))
    if label != math.floor(label):
      raise LibsvmParseError(lineno, "non-integer class label '%s'"
                             % (tokens[0],))
    indices = []
    values  = []
    previous = 0
    for token in tokens[1:]:
      parts = token.split(':')
      if len(parts) != 2:
        raise LibsvmParseError(lineno, "malformed token '%s'" % (token,))
      try:
        idx = int(parts[0])
        val = float(parts[1])
      except ValueError:
        raise LibsvmParseError(lineno, "non-numeric token '%s'" % (token,))
      if idx <= previous:
        raise LibsvmParseError(lineno, "feature indices must be strictly"
                               + " increasing and 1-based ('%s')" % (token,))
      previous = idx
      indices.append(idx - 1)
      values.append(val)
    rows.append((lineno, int(label), indices, values))
  return rows

def _densify(rows, n_features, label_map, split_tag):
  features = np.zeros((len(rows), n_features), dtype=np.float64)
  labels   = np.zeros(len(rows), dtype=np.int64)
  for i, (lineno, label, indices, values) in enumerate(rows):
    if indices and indices[-1] >= n_features:
      raise LibsvmParseError(lineno, "feature index %d exceeds width %d"
                             % (indices[-1] + 1, n_features))
    if label not in label_map:
      raise LibsvmParseError(lineno, "label %d absent from label map"
                             % (label,))
    features[i, indices] = values
    labels[i] = label_map[label]
  return Dataset(features, labels, len(label_map), split_tag)

def _label_map(label_values):
  '''Sorted original label values map to 0..C-1.'''
  return dict( (value, i) for i, value in enumerate(sorted(set(label_values))) )

def parse_libsvm(text, split_tag='train', n_features=None, label_values=None):
  '''
  Parse LIBSVM text (a string or an iterable of lines) into a dense
  Dataset. The feature width is the largest index seen unless
  n_features is given; labels are remapped to 0..C-1 using the sorted
  distinct labels (or the supplied label_values, for shared maps).
  '''
  if isinstance(text, str):
    text = io.StringIO(text)
  rows = _read_libsvm_rows(text)
  if not rows:
    raise ValueError("Empty LIBSVM input.")

  width = max([ r[2][-1] + 1 for r in rows if r[2] ] + [0])
  if n_features is None:
    n_features = width
  if label_values is None:
    label_values = [ r[1] for r in rows ]
  return _densify(rows, n_features, _label_map(label_values), split_tag)

def write_libsvm(ds, stream):
  '''
  Write a Dataset as LIBSVM text using the remapped labels. Zero
  entries are omitted, except that the final column is always written
  on the first row so that reparsing recovers the feature width.
  '''
  for i in range(len(ds)):
    row = ds.features[i]
    nonzero = np.flatnonzero(row)
    tokens = [ "%d:%r" % (j + 1, float(row[j])) for j in nonzero ]
    if i == 0 and row[-1] == 0:
      tokens.append("%d:0" % (ds.n_features,))
    stream.write(" ".join([ "%d" % (ds.labels[i],) ] + tokens) + "\n")

def read_libsvm_file(path, split_tag='train', n_features=None,
                     label_values=None):
  '''Parse a (possibly compressed) LIBSVM file.'''
  LOGGER.info("Reading LIBSVM file %s", path)
  with flexi_open(path) as handle:
    return parse_libsvm(handle, split_tag, n_features, label_values)

def load_libsvm_splits(train, validation=None, test=None):
  '''
  Parse predefined split files with one shared label map and feature
  width. Returns a dict of split tag -> Dataset.
  '''
  sources = [ (tag, path) for tag, path in zip(SPLIT_TAGS,
                                               (train, validation, test))
              if path is not None ]
  raw = {}
  for tag, path in sources:
    with flexi_open(path) as handle:
      raw[tag] = _read_libsvm_rows(handle)
    if not raw[tag]:
      raise ValueError("Empty LIBSVM input: %s" % (path,))

  all_rows = [ r for rows in raw.values() for r in rows ]
  width = max([ r[2][-1] + 1 for r in all_rows if r[2] ] + [0])
  label_map = _label_map([ r[1] for r in all_rows ])
  return dict( (tag, _densify(raw[tag], width, label_map, tag))
               for tag in raw )

##############################################################################
# Splits and batches.

def split_dataset(ds, val_frac, test_frac, seed):
  '''
  Deterministic disjoint train/validation/test partition. Validation
  and test sizes are floor(N * frac); the remainder is training data.
  '''
  for name, frac in (('val_frac', val_frac), ('test_frac', test_frac)):
    if not 0.0 < frac < 1.0:
      raise ValueError("%s must lie in (0, 1), got %r" % (name, frac))
  if val_frac + test_frac >= 1.0:
    raise ValueError("val_frac + test_frac must be < 1, got %r"
                     % (val_frac + test_frac,))

  n_total = len(ds)
  n_val   = int(math.floor(n_total * val_frac))
  n_test  = int(math.floor(n_total * test_frac))

  perm = np.random.default_rng(seed).permutation(n_total)
  val_idx   = np.sort(perm[:n_val])
  test_idx  = np.sort(perm[n_val:n_val + n_test])
  train_idx = np.sort(perm[n_val + n_test:])

  LOGGER.debug("Split %d samples into %d/%d/%d", n_total,
               len(train_idx), len(val_idx), len(test_idx))
  return (ds.subset(train_idx, 'train'),
          ds.subset(val_idx, 'validation'),
          ds.subset(test_idx, 'test'))

def make_batches(ds, batch_size, seed):
  '''
  Shuffle sample indices and cut them into ceil(N / B) batches. Takes
  a Dataset or a sample count.
  '''
  n_samples = ds if isinstance(ds, (int, np.integer)) else len(ds)
  if batch_size <= 0:
    raise ValueError("Batch size must be positive, got %r" % (batch_size,))
  if n_samples < 1:
    raise ValueError("Cannot batch an empty dataset.")
  if batch_size > n_samples:
    LOGGER.warning("Batch size %d exceeds sample count %d; using one batch.",
                   batch_size, n_samples)
    batch_size = n_samples

  perm = np.random.default_rng(seed).permutation(n_samples)
  assignments = [ perm[start:start + batch_size]
                  for start in range(0, n_samples, batch_size) ]
  return BatchPlan(batch_size, assignments, seed)

def standardize(train, *others):
  '''
  Per-column z-scores fitted on the training split and applied to all
  splits. Constant columns are left centred but unscaled. Returns
  (list of standardized datasets, mean, std).
  '''
  mean = train.features.mean(axis=0)
  std  = train.features.std(axis=0)
  std[std == 0] = 1.0
  result = [ Dataset((d.features - mean) / std, d.labels, d.n_classes,
                     d.split_tag) for d in (train,) + others ]
  return result, mean, std

def make_synthetic(n, d, n_classes, seed, separation=2.0):
  '''
  Gaussian-blob classification data: one isotropic unit-variance
  cluster per class with centres drawn at the given scale.
  '''
  if n < n_classes:
    raise ValueError("Need at least one sample per class.")
  rng = np.random.default_rng(seed)
  centres  = rng.normal(scale=separation, size=(n_classes, d))
  labels   = np.arange(n) % n_classes
  labels   = labels[rng.permutation(n)]
  features = centres[labels] + rng.normal(size=(n, d))
  return Dataset(features, labels, n_classes, 'train')

##############################################################################
# Dataset cache: flat little-endian float32 binary plus a JSON header.

def save_cache(prefix, splits):
  '''
  Write splits (dict tag -> Dataset) to <prefix>.bin and <prefix>.json.
  Each split is stored as its feature rows followed by its labels.
  '''
  ensure_dir(os.path.dirname(prefix))
  order = [ tag for tag in SPLIT_TAGS if tag in splits ]
  first = splits[order[0]]
  header = {'n_features' : first.n_features,
            'n_classes'  : first.n_classes,
            'order'      : order,
            'splits'     : dict( (tag, len(splits[tag])) for tag in order ),
            'dtype'      : '<f4'}
  with open(prefix + '.bin', 'wb') as out:
    for tag in order:
      ds = splits[tag]
      ds.features.astype('<f4').tofile(out)
      ds.labels.astype('<f4').tofile(out)
  write_json(prefix + '.json', header)
  LOGGER.info("Cached %s to %s.bin", ", ".join(order), prefix)
  return prefix

def load_cache(prefix):
  '''Read a cache written by save_cache back into a dict of Datasets.'''
  with open(prefix + '.json') as handle:
    header = json.load(handle)
  data = np.fromfile(prefix + '.bin', dtype=header['dtype'])
  n_features = header['n_features']
  expected = sum( n * (n_features + 1) for n in header['splits'].values() )
  if data.size != expected:
    raise IOError("Cache %s.bin is truncated: %d of %d values"
                  % (prefix, data.size, expected))
  splits = {}
  offset = 0
  for tag in header['order']:
    n = header['splits'][tag]
    features = data[offset:offset + n * n_features].reshape(n, n_features)
    offset  += n * n_features
    labels   = data[offset:offset + n]
    offset  += n
    splits[tag] = Dataset(features.astype(np.float64),
                          labels.astype(np.int64),
                          header['n_classes'], tag)
  return splits

##############################################################################

def _at_cache_precision(splits):
  '''Round features through little-endian float32 so that a fresh load
  and a cached load see identical values.'''
  return dict( (tag, Dataset(ds.features.astype('<f4').astype(np.float64),
                             ds.labels, ds.n_classes, tag))
               for tag, ds in splits.items() )

def _raw_splits(conf, seed):
  '''Resolve the source datasets described by an experiment's
  "dataset" section into a dict of unstandardized splits.'''
  if 'synthetic' in conf:
    syn = conf['synthetic']
    full = make_synthetic(syn.get('n', 600), syn.get('d', 10),
                          syn.get('classes', 3),
                          derive_seed(seed, 'split', 1),
                          syn.get('separation', 2.0))
    train, val, test = split_dataset(full, conf.get('val_frac', 0.1),
                                     conf.get('test_frac', 0.2),
                                     derive_seed(seed, 'split', 0))
    return {'train': train, 'validation': val, 'test': test}

  if 'path' in conf:
    full = read_libsvm_file(conf['path'])
    train, val, test = split_dataset(full, conf.get('val_frac', 0.1),
                                     conf.get('test_frac', 0.2),
                                     derive_seed(seed, 'split', 0))
    return _at_cache_precision({'train': train, 'validation': val,
                                'test': test})

  if 'train' in conf:
    splits = load_libsvm_splits(conf['train'], conf.get('validation'),
                                conf.get('test'))
    if 'validation' not in splits or 'test' not in splits:
      raise ValueError("Predefined splits need train, validation and test files.")
    return _at_cache_precision(splits)

  raise ValueError("Dataset section needs one of 'synthetic', 'path' or 'train'.")

def _cache_key(conf, seed):
  parts = [json.dumps(conf, sort_keys=True), seed]
  for key in ('path', 'train', 'validation', 'test'):
    if key in conf:
      parts.append(checksum_file(conf[key]))
  return checksum_text(*parts)

def load_splits(conf, seed):
  '''
  Return standardized (train, validation, test) datasets for an
  experiment's "dataset" section. Standardization follows the
  'standardize' key, defaulting to the site config.
  '''
  prefix = None
  if conf.get('cache', False) and 'synthetic' not in conf:
    cache_dir = os.path.expanduser(conf.get('cache_dir', CONFIG.cache_dir))
    prefix = os.path.join(cache_dir, _cache_key(conf, seed))

  if prefix is not None and os.path.exists(prefix + '.json'):
    LOGGER.info("Loading cached dataset %s", prefix)
    splits = load_cache(prefix)
  else:
    splits = _raw_splits(conf, seed)
    if prefix is not None:
      save_cache(prefix, splits)

  train, val, test = splits['train'], splits['validation'], splits['test']
  if conf.get('standardize', CONFIG.standardize):
    (train, val, test), _mean, _std = standardize(train, val, test)

  LOGGER.info("Dataset: %d train, %d validation, %d test, d=%d, C=%d",
              len(train), len(val), len(test), train.n_features,
              train.n_classes)
  return train, val, test
