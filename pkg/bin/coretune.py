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

'''Run coretune tuning, comparison, oracle and report commands.'''

import sys

from coretune.cli import main

##################  M A I N   P R O G R A M  ######################

if __name__ == '__main__':
  sys.exit(main())
