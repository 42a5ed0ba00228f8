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

'''Readers and writers for the files a run leaves behind.'''

import os
import csv
import math

from .utilities import write_json, read_json
from .scheduler import ExecutionTrace
from .tuner import TuneReport
from .setup_logs import configure_logging

LOGGER = configure_logging('report')

REPORT_FILE  = 'report.json'
TRIALS_FILE  = 'trials.csv'
TRACE_FILE   = 'trace.jsonl'
SCATTER_FILE = 'scatter.csv'
COMPARE_FILE = 'compare.json'

SCATTER_COLUMNS = ('strategy', 'fraction', 'speedup',
                   'relative_test_error_pct')

##############################################################################

def write_report(path, report):
  return write_json(path, report.to_json())

def read_report(path):
  return TuneReport.from_json(read_json(path))

def _csv_value(value):
  if isinstance(value, float) and not math.isfinite(value):
    return 'inf' if value > 0 else ('-inf' if value < 0 else 'nan')
  return value

def write_trials_csv(path, rows, columns=None):
  '''One row per trial; columns default to the keys of the first row.'''
  if columns is None:
    columns = list(rows[0].keys()) if rows else ['id']
  with open(path, 'w', newline='') as out:
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator='\n')
    writer.writeheader()
    for row in rows:
      writer.writerow(dict( (k, _csv_value(row.get(k))) for k in columns ))
  return path

def _parse_cell(text):
  for convert in (int, float):
    try:
      return convert(text)
    except ValueError:
      pass
  return text

def read_trials_csv(path):
  with open(path, newline='') as handle:
    return [ dict( (k, _parse_cell(v)) for k, v in row.items() )
             for row in csv.DictReader(handle) ]

def write_trace(path, trace):
  return trace.to_jsonl(path)

def read_trace(path):
  return ExecutionTrace.from_jsonl(path)

##############################################################################

def scatter_rows(reports):
  '''Plot-ready (strategy, fraction, speedup, relative error) rows.'''
  rows = []
  for rep in reports:
    rows.append({'strategy'                : rep.strategy,
                 'fraction'                : rep.fraction,
                 'speedup'                 : rep.speedup,
                 'relative_test_error_pct' : rep.relative_test_error})
  return rows

def flag_ordering(rows):
  '''
  Within each strategy, a smaller fraction should give a larger
  speedup. Returns the (strategy, fraction) pairs that break this.
  '''
  flagged = []
  by_strategy = {}
  for row in rows:
    if row['strategy'] != 'full' and row['speedup'] is not None:
      by_strategy.setdefault(row['strategy'], []).append(row)
  for strategy in sorted(by_strategy):
    ordered = sorted(by_strategy[strategy], key=lambda r: r['fraction'])
    for smaller, larger in zip(ordered[:-1], ordered[1:]):
      if not smaller['speedup'] > larger['speedup']:
        flagged.append((strategy, larger['fraction']))
  for strategy, fraction in flagged:
    LOGGER.warning("Speedup ordering violated for %s at fraction %g",
                   strategy, fraction)
  return flagged

def write_scatter_csv(path, rows):
  with open(path, 'w', newline='') as out:
    writer = csv.DictWriter(out, fieldnames=SCATTER_COLUMNS,
                            lineterminator='\n')
    writer.writeheader()
    for row in rows:
      writer.writerow(dict( (k, repr(row[k]) if isinstance(row[k], float)
                             else row[k]) for k in SCATTER_COLUMNS ))
  return path

def _float_or_none(text):
  return float(text) if text not in ('', None) else None

def read_scatter_csv(path):
  with open(path, newline='') as handle:
    return [ dict([('strategy', row['strategy'])]
                  + [ (k, _float_or_none(row[k])) for k in SCATTER_COLUMNS[1:] ])
             for row in csv.DictReader(handle) ]

def write_compare(path, reports):
  rows = scatter_rows(reports)
  return write_json(path, {'reports' : [ r.to_json() for r in reports ],
                           'scatter' : rows,
                           'flagged' : flag_ordering(rows)})

def read_compare(path):
  return [ TuneReport.from_json(r) for r in read_json(path)['reports'] ]

def load_run(run_dir):
  '''Reports found in a run directory (compare.json or report.json).'''
  compare = os.path.join(run_dir, COMPARE_FILE)
  if os.path.exists(compare):
    return read_compare(compare)
  single = os.path.join(run_dir, REPORT_FILE)
  if os.path.exists(single):
    return [read_report(single)]
  raise IOError("No %s or %s in %s" % (COMPARE_FILE, REPORT_FILE, run_dir))
