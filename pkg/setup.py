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

import os
import re

from setuptools import setup, find_packages

# Allow setup.py to be run from any path
os.chdir(os.path.normpath(os.path.join(os.path.abspath(__file__), os.pardir)))

README  = open('README.rst').read()
SCRIPTS = [ os.path.join('bin', x) for x in os.listdir('bin') if re.search(r'\.py$', x) ]

# The util/*.py scripts are not installed by default.

setup(
    name='coretune',
    version='0.1.0',
    packages=find_packages(),
    include_package_data=True,
    package_data={'coretune': ['config/*.xml', 'config/presets/*.json']},
    license='GPLv3 License',
    description='Hyper-parameter tuning on gradient-matched subsets of the training data.',
    long_description=README,
    author='The coretune developers',
    classifiers=[
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    python_requires='>=3.8',
    scripts=SCRIPTS,
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.7',
    ],
    extras_require={
        'test': ['pytest', 'hypothesis'],
    },
    tests_require=['pytest', 'hypothesis'],
    zip_safe=False,  # Prevents zipping of the installed egg, for accessing config defaults.
)
