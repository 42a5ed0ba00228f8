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

'''Quick script to download the LIBSVM tabular datasets used by the
coretune presets. Point CORETUNE_DATA_DIR at the output directory
afterwards.'''

import os
import sys
from urllib.request import urlopen
from shutil import copyfileobj

from coretune.utilities import ensure_dir, checksum_file
from coretune.setup_logs import configure_logging
from logging import INFO
LOGGER = configure_logging('fetch', level=INFO)

BASE_URL = 'https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass/'

DATASETS = {'dna'       : ('dna.scale.tr', 'dna.scale.val', 'dna.scale.t'),
            'satimage'  : ('satimage.scale.tr', 'satimage.scale.val',
                           'satimage.scale.t'),
            'letter'    : ('letter.scale.tr', 'letter.scale.val',
                           'letter.scale.t'),
            'connect-4' : ('connect-4',)}

def fetch(name, outdir, force=False):

  '''Download the files making up one dataset; existing files are
  kept unless force is set.'''

  ensure_dir(outdir)
  for fname in DATASETS[name]:
    target = os.path.join(outdir, fname)
    if os.path.exists(target) and not force:
      LOGGER.info("Skipping existing file %s", target)
      continue
    LOGGER.info("Downloading %s%s", BASE_URL, fname)
    partial = target + '.partial'
    with urlopen(BASE_URL + fname) as response, open(partial, 'wb') as out:
      copyfileobj(response, out)
    os.rename(partial, target)
    LOGGER.info("Wrote %s (md5 %s)", target, checksum_file(target))

if __name__ == '__main__':

  import argparse

  PARSER = argparse.ArgumentParser(
    description='Download LIBSVM multiclass datasets for coretune.')

  PARSER.add_argument('datasets', metavar='<dataset>', type=str, nargs='*',
                      default=['dna'],
                      help='Datasets to fetch (default: dna). Known: %s.'
                      % ', '.join(sorted(DATASETS)))

  PARSER.add_argument('-o', '--outdir', dest='outdir', type=str,
                      default=os.environ.get('CORETUNE_DATA_DIR', 'data'),
                      help='Output directory.')

  PARSER.add_argument('--force', dest='force', action='store_true',
                      help='Download again even if the files exist.')

  ARGS = PARSER.parse_args()

  for dataset in ARGS.datasets:
    if dataset not in DATASETS:
      PARSER.error('Unknown dataset: %s' % (dataset,))
  for dataset in ARGS.datasets:
    fetch(dataset, ARGS.outdir, ARGS.force)

  sys.stderr.write("Data written to %s\n" % (ARGS.outdir,))
