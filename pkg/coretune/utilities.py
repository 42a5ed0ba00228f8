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

'''A collection of frequently unrelated functions used elsewhere in the code.'''

import os
import io
import bz2
import gzip
import json
import hashlib
from contextlib import contextmanager

import numpy as np

from .setup_logs import configure_logging

LOGGER = configure_logging('utilities')

###########################################################################
# Seed streams. One master seed fans out into independent streams so
# that paired runs (e.g. full vs. subset strategies) see identical
# splits, initialisations and configuration draws.

STREAMS = {'split'     : 0,
           'init'      : 1,
           'batch'     : 2,
           'selection' : 3,
           'searcher'  : 4,
           'scheduler' : 5,
           'shuffle'   : 6,
           'final'     : 7}

def derive_seed(master, stream, *keys):
  '''
  Derive a 32-bit seed from the master seed, a named stream and any
  number of non-negative integer counters (trial id, epoch, ...).
  '''
  if stream not in STREAMS:
    raise ValueError("Unknown seed stream: %s" % (stream,))
  spawn_key = (STREAMS[stream],) + tuple(int(k) for k in keys)
  if any(k < 0 for k in spawn_key):
    raise ValueError("Seed counters must be non-negative: %s" % (keys,))
  seq = np.random.SeedSequence(entropy=int(master), spawn_key=spawn_key)
  return int(seq.generate_state(1, dtype=np.uint32)[0])

def make_rng(master, stream, *keys):
  '''Convenience wrapper returning a numpy Generator for a stream.'''
  return np.random.default_rng(derive_seed(master, stream, *keys))

###########################################################################
# File handling.

def is_zipped(fname):
  '''
  Test whether a file is gzipped or not, based on magic number with an
  additional check on file suffix.
  '''
  suff = os.path.splitext(fname)[1]
  with open(fname, 'rb') as handle:
    magic = handle.read(2)
  if magic == b'\x1f\x8b':
    if suff != '.gz':
      LOGGER.warning("Gzipped file detected without .gz suffix: %s", fname)
    return True
  if suff == '.gz':
    LOGGER.warning("Uncompressed file masquerading as gzipped: %s", fname)
  return False

def is_bzipped(fname):
  '''
  Test whether a file is bzipped or not, based on magic number with an
  additional check on file suffix.
  '''
  suff = os.path.splitext(fname)[1]
  with open(fname, 'rb') as handle:
    magic = handle.read(3)
  if magic == b'BZh':
    if suff != '.bz2':
      LOGGER.warning("Bzipped file detected without '.bz2' suffix: %s",
                     fname)
    return True
  if suff == '.bz2':
    LOGGER.warning("Uncompressed file masquerading as bzipped: %s", fname)
  return False

@contextmanager
def flexi_open(filename, mode='rt'):
  '''
  Simple context manager function to seamlessly handle gzipped,
  bzipped and uncompressed files. Only reading is supported.
  '''
  if 'r' not in mode:
    raise ValueError("flexi_open only supports reading: %s" % (mode,))
  if is_zipped(filename):
    handle = gzip.open(filename, mode)
  elif is_bzipped(filename):
    handle = bz2.open(filename, mode)
  else:
    handle = io.open(filename, mode)

  try:
    yield handle
  finally:
    handle.close()

def _checksum_fileobj(fileobj, blocksize=65536):
  '''
  Use the hashlib.md5() function to calculate MD5 checksum on a file
  object, in a reasonably memory-efficient way.
  '''
  hasher = hashlib.md5()
  buf = fileobj.read(blocksize)
  while len(buf) > 0:
    hasher.update(buf)
    buf = fileobj.read(blocksize)

  return hasher.hexdigest()

def checksum_file(fname, unzip=True):
  '''
  Calculate the MD5 checksum for a file. Handles compressed files by
  decompressing on the fly (i.e., the returned checksum is of the
  uncompressed data).
  '''
  with flexi_open(fname, 'rb') if unzip else open(fname, 'rb') as fileobj:
    return _checksum_fileobj(fileobj)

def checksum_text(*parts):
  '''MD5 over a sequence of strings; used to key cache entries.'''
  hasher = hashlib.md5()
  for part in parts:
    hasher.update(str(part).encode('utf-8'))
    hasher.update(b'\0')
  return hasher.hexdigest()

###########################################################################
# Serialisation.

def to_builtin(value):
  '''Recursively convert numpy scalars and arrays to plain python
  types so that json output is stable.'''
  if isinstance(value, dict):
    return dict( (str(k), to_builtin(v)) for k, v in value.items() )
  if isinstance(value, (list, tuple)):
    return [ to_builtin(v) for v in value ]
  if isinstance(value, np.ndarray):
    return [ to_builtin(v) for v in value.tolist() ]
  if isinstance(value, np.bool_):
    return bool(value)
  if isinstance(value, np.integer):
    return int(value)
  if isinstance(value, np.floating):
    return float(value)
  return value

def dump_json(obj):
  '''Deterministic JSON text: sorted keys, fixed indentation, and
  non-finite floats encoded as null.'''
  return json.dumps(_finite_or_none(to_builtin(obj)),
                    sort_keys=True, indent=2, allow_nan=False) + "\n"

def _finite_or_none(value):
  if isinstance(value, float) and not np.isfinite(value):
    return None
  if isinstance(value, dict):
    return dict( (k, _finite_or_none(v)) for k, v in value.items() )
  if isinstance(value, list):
    return [ _finite_or_none(v) for v in value ]
  return value

def write_json(path, obj):
  '''Write obj as deterministic JSON to path.'''
  with open(path, 'w') as out:
    out.write(dump_json(obj))
  return path

def read_json(path):
  with open(path) as handle:
    return json.load(handle)

def ensure_dir(path):
  '''Create a directory (and parents) if it doesn't already exist.'''
  if path and not os.path.isdir(path):
    LOGGER.debug("Creating directory %s", path)
    os.makedirs(path)
  return path
