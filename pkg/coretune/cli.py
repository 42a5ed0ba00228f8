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
Command-line front end. Sub-commands tune, compare, oracle and
report. Diagnostics go to stderr through logging; stdout carries a
short summary only.

Exit codes: 0 success, 1 oracle failure, 2 configuration error,
3 runtime failure.
'''

import os
import sys
import argparse
from logging import DEBUG, INFO

from .utilities import ensure_dir
from .dataio import LibsvmParseError, load_splits
from .experiment import ExperimentConfig, ConfigError
from .tuner import Tuner, TuningError, compare_strategies, annotate
from .oracles import run_suites, SUITE_ORDER
from .report import write_report, write_trials_csv, write_trace, \
    write_scatter_csv, write_compare, scatter_rows, flag_ordering, load_run, \
    REPORT_FILE, TRIALS_FILE, TRACE_FILE, SCATTER_FILE, COMPARE_FILE
from .setup_logs import configure_logging, set_root_level

LOGGER = configure_logging('cli')

EXIT_OK      = 0
EXIT_ORACLE  = 1
EXIT_CONFIG  = 2
EXIT_RUNTIME = 3

##############################################################################

def _experiment(args):
  '''Load, override and resolve the experiment named on the command line.'''
  conf = ExperimentConfig.from_arg(args.config)
  overrides = list(args.overrides or [])
  if args.workers is not None:
    overrides.append('workers=%d' % (args.workers,))
  if args.seed is not None:
    overrides.append('seed=%d' % (args.seed,))
  conf.apply_overrides(overrides)
  res = conf.resolved()
  try:
    splits = load_splits(res['dataset'], int(res['seed']))
  except (LibsvmParseError, IOError, ValueError) as err:
    raise ConfigError("Cannot load dataset: %s" % (err,))
  return res, splits

def _guarded(func, args):
  try:
    return func(args)
  except ConfigError as err:
    LOGGER.error("Configuration error: %s", err)
    return EXIT_CONFIG
  except TuningError as err:
    LOGGER.error("Tuning failed: %s", err)
    return EXIT_RUNTIME
  except Exception as err:
    LOGGER.exception("Run failed: %s", err)
    return EXIT_RUNTIME

def cmd_tune(args):
  res, splits = _experiment(args)
  out_dir = ensure_dir(args.out)
  tuner = Tuner(res, splits, out_dir)
  report = tuner.tune()
  write_report(os.path.join(out_dir, REPORT_FILE), report)
  write_trials_csv(os.path.join(out_dir, TRIALS_FILE), tuner.trial_rows())
  write_trace(os.path.join(out_dir, TRACE_FILE), tuner.trace)
  print("tune %s: strategy=%s fraction=%g best_trial=%d test_accuracy=%.4f"
        " total_cost=%d" % (report.name, report.strategy, report.fraction,
                            report.best_trial, report.test_accuracy,
                            report.total_cost))
  return EXIT_OK

def cmd_compare(args):
  res, splits = _experiment(args)
  out_dir = ensure_dir(args.out)
  reports = compare_strategies(res, splits=splits, out_dir=out_dir)
  rows = scatter_rows(reports)
  write_scatter_csv(os.path.join(out_dir, SCATTER_FILE), rows)
  write_compare(os.path.join(out_dir, COMPARE_FILE), reports)
  best = max(reports[1:], key=lambda r: r.speedup)
  print("compare %s: %d runs, best speedup %.2fx (%s at %g,"
        " relative test error %+.2f pts)"
        % (res['name'], len(reports), best.speedup, best.strategy,
           best.fraction, best.relative_test_error))
  return EXIT_OK

def cmd_oracle(args):
  results = run_suites(args.suites, args.instances, args.seed or 0)
  for result in results:
    print(result.summary())
    for failure in result.failures[:10]:
      LOGGER.error("%s: %s", result.name, failure)
  failed = [ r.name for r in results if not r.passed ]
  print("oracle: %d suites, %d failed%s"
        % (len(results), len(failed),
           (" (%s)" % ", ".join(failed)) if failed else ""))
  return EXIT_ORACLE if failed else EXIT_OK

def cmd_report(args):
  '''Rebuild scatter.csv from the report files of earlier runs.'''
  reports = []
  for run_dir in args.runs:
    try:
      reports.extend(load_run(run_dir))
    except (IOError, ValueError) as err:
      raise ConfigError(str(err))
  references = [ r for r in reports if r.strategy == 'full' ]
  if references:
    for rep in reports:
      if rep.speedup is None:
        annotate(rep, references[0])
  rows = scatter_rows(reports)
  out_dir = ensure_dir(args.out)
  write_scatter_csv(os.path.join(out_dir, SCATTER_FILE), rows)
  flagged = flag_ordering(rows)
  print("report: %d rows from %d runs, %d ordering flags"
        % (len(rows), len(args.runs), len(flagged)))
  return EXIT_OK

##############################################################################

def _add_experiment_args(parser):
  parser.add_argument('--config', type=str, dest='config', required=True,
                      help='Experiment config file, or the name of a preset.')
  parser.add_argument('--out', type=str, dest='out', default='.',
                      help='Output directory.')
  parser.add_argument('--set', type=str, dest='overrides', action='append',
                      metavar='KEY=VALUE',
                      help='Dotted config override; may be repeated.')
  parser.add_argument('--workers', type=int, dest='workers',
                      help='Number of simulated workers.')
  parser.add_argument('--seed', type=int, dest='seed',
                      help='Master random seed.')

def build_parser():
  parser = argparse.ArgumentParser(
    prog='coretune',
    description='Hyper-parameter tuning on gradient-matched data subsets.')

  parser.add_argument('-v', '--verbose', dest='verbose', action='store_true',
                      help='Report progress on stderr.')
  parser.add_argument('-d', '--debug', dest='debug', action='store_true',
                      help='Turn on debugging output.')

  subparsers = parser.add_subparsers(dest='command')
  subparsers.required = True

  tune_p = subparsers.add_parser('tune', help='Run one tuning experiment.')
  _add_experiment_args(tune_p)
  tune_p.set_defaults(func=cmd_tune)

  comp_p = subparsers.add_parser(
    'compare', help='Compare subset strategies against full-data tuning.')
  _add_experiment_args(comp_p)
  comp_p.set_defaults(func=cmd_compare)

  orac_p = subparsers.add_parser('oracle',
                                 help='Run the brute-force verification suites.')
  orac_p.add_argument('--suite', type=str, dest='suites', action='append',
                      choices=SUITE_ORDER,
                      help='Suite to run; may be repeated (default: all).')
  orac_p.add_argument('--instances', type=int, dest='instances',
                      help='Instances per suite.')
  orac_p.add_argument('--seed', type=int, dest='seed', default=0,
                      help='Seed for the generated instances.')
  orac_p.set_defaults(func=cmd_oracle)

  rep_p = subparsers.add_parser('report',
                                help='Rebuild scatter.csv from earlier runs.')
  rep_p.add_argument('runs', metavar='<run dir>', type=str, nargs='+',
                     help='Directories holding report.json or compare.json.')
  rep_p.add_argument('--out', type=str, dest='out', default='.',
                     help='Output directory.')
  rep_p.set_defaults(func=cmd_report)

  return parser

def main(argv=None):
  parser = build_parser()
  args = parser.parse_args(argv)
  if args.debug:
    set_root_level(DEBUG)
  elif args.verbose:
    set_root_level(INFO)
  return _guarded(args.func, args)

if __name__ == '__main__':
  sys.exit(main())
