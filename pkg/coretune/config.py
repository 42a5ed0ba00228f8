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

'''Class definition for a singleton config class used for parsing,
editing and writing site-wide default options back to disk. The
per-experiment JSON configuration lives in coretune.experiment.'''

import os
import weakref

import xml.etree.ElementTree as ET

from .setup_logs import configure_logging
LOGGER = configure_logging('config')

CONFNAME = 'coretune_config.xml'
PACKAGE_CONFIG = os.path.join(os.path.dirname(os.path.realpath(__file__)),
                              'config', CONFNAME)

def _to_bool(text):
  value = text.strip().lower()
  if value in ('true', 'yes', '1', 'on'):
    return True
  if value in ('false', 'no', '0', 'off'):
    return False
  raise ValueError("Not a boolean config value: %s" % (text,))

CONVERTERS = {'str'   : str,
              'int'   : int,
              'float' : float,
              'bool'  : _to_bool}

################################################################

class Config(object):

  '''Creates a singleton object which acts as a facade to the
  underlying config file. Config options are set and get using the
  usual syntax (e.g. conf.tpe_gamma, conf.tpe_gamma = 0.15). Settable
  options are constrained to those found in the input config file;
  changes are only written back to disk by an explicit save().'''

  _instance           = None
  _initialised_status = False
  _changed_status     = False
  _xml_docroot        = None
  _config_file        = None

  # A series of class methods used to store the singleton config data.
  @classmethod
  def _is_initialised(cls, status=None):
    '''Accessor/mutator method indicating if the class has an
    initialised config object.'''
    if status is not None:
      cls._initialised_status = status
    return cls._initialised_status

  @classmethod
  def _is_changed(cls, status=None):
    '''Accessor/mutator method indicating if the class config object
    has been changed at all.'''
    if status is not None:
      cls._changed_status = status
    return cls._changed_status

  @classmethod
  def _config(cls, obj=None):
    '''Accessor/mutator method for the underlying ET.ElementTree.'''
    if obj is not None:
      cls._xml_docroot = obj
    return cls._xml_docroot

  @classmethod
  def _conffile(cls, cfg=None):
    '''Accessor/mutator method for the name of the config file.'''
    if cfg:
      cls._config_file = cfg
    return cls._config_file

  def __new__(cls, *args, **kwargs):

    '''The core of the singleton implementation, this method only ever
    creates a single instance.'''

    inst = cls._instance() if cls._instance is not None else None

    if inst is None:
      inst = super(Config, cls).__new__(cls)

      # Store instance with a weak reference to allow object destruction
      cls._instance = weakref.ref(inst)

    return inst

  def __init__(self, conffile=None, force_reload=False):
    '''
    Typically the Config class is instantiated without arguments. The
    conffile and force_reload options are used to control the class
    singleton behaviour during testing.
    '''
    if force_reload:
      self.__dict__.clear()
      self._is_initialised(False)
      self._is_changed(False)

    if self._is_initialised():
      return

    if conffile is None:
      conffile = self.locate()

    if not os.path.exists(conffile):
      LOGGER.error("Configuration file not found (%s).", conffile)
      raise IOError("Configuration file not found: %s" % (conffile,))

    config = ET.parse(conffile)

    # Option names are assumed unique across sections.
    for section in config.getroot().findall('./section'):
      for option in section.findall('./option'):
        if 'name' not in option.attrib:
          raise ET.ParseError("Option tag has no name attribute.")
        key = option.attrib['name']
        if key in self.__dict__:
          raise ET.ParseError(
            "Duplicate option name in config file: %s" % (key,))
        self.__dict__[key] = self._parse_value_elem(option)

    self._config(config)
    self._conffile(conffile)
    self._is_initialised(True)

  @staticmethod
  def locate():
    '''Find the site config file, falling back to the package copy.'''
    LOGGER.debug("Looking for config file %s...", CONFNAME)
    for loc in (os.curdir, os.path.expanduser("~"), "/etc",
                os.environ.get("CORETUNE_CONFDIR")):
      if loc is not None:
        source = os.path.join(loc, CONFNAME)
        if os.path.exists(source):
          LOGGER.info("Found config file at %s", source)
          return source
    LOGGER.debug("Site configuration file not found."
                 + " Falling back to package config %s.", PACKAGE_CONFIG)
    return PACKAGE_CONFIG

  def _parse_value_elem(self, value, vtype=None):
    '''
    A recursive method used to extract a config value (dict, list, or
    scalar) of abritrary depth. Scalars are converted according to the
    nearest enclosing 'type' attribute.
    '''
    vtype = value.attrib.get('type', vtype)
    children = list(value)
    if len(children) > 0:

      if all('name' in e.attrib for e in children):
        return dict( (e.attrib['name'], self._parse_value_elem(e, vtype))
                     for e in children )

      elif all('name' not in e.attrib for e in children):
        return [ self._parse_value_elem(e, vtype) for e in children ]

      else:
        raise ET.ParseError(
          "Value is ambiguous; neither list nor dict. Values must"
          + " all have 'name' attribute, or must all lack it.")

    text = value.text if value.text is not None else ''
    if vtype is None:
      return text
    if vtype not in CONVERTERS:
      raise ET.ParseError("Unsupported option type: %s" % (vtype,))
    return CONVERTERS[vtype](text)

  def _encode_value_elem(self, var, value):
    '''
    The converse of _parse_value_elem. Encode var either as children
    of the 'option' Element (list, dict) or as its text (scalar).
    '''
    if type(var) in (list, tuple, set):
      for item in var:
        subelem = ET.Element('value')
        value.append(subelem)
        self._encode_value_elem(item, subelem)
    elif type(var) is dict:
      for (key, item) in var.items():
        subelem = ET.Element('value', {'name':key})
        value.append(subelem)
        self._encode_value_elem(item, subelem)
    elif type(var) is bool:
      value.text = 'true' if var else 'false'
    elif type(var) in (str, int, float):
      value.text = str(var)
    else:
      raise ValueError("Unsupported data type: must be list, tuple,"
                       + " set, dict, str, bool, int or float")
    return value

  def __getitem__(self, key):
    if key in self.__dict__:
      return self.__dict__[key]
    LOGGER.debug("Attempt to retrieve unknown config key '%s'", key)
    raise KeyError("Unknown config option '%s'" % (key,))

  def __setitem__(self, key, value):
    if key not in self.__dict__:
      raise KeyError("Config option not available: %s." % (key,))
    self.__setattr__(key, value)

  def __contains__(self, key):
    return key in self.__dict__

  def __len__(self):
    return len(self.__dict__)

  def __delattr__(self, key):
    raise ValueError("Unsupported config deletion operation attempted.")

  def __delitem__(self, key):
    self.__delattr__(key)

  def __getattr__(self, key):
    # Keeps ipython autocomplete quiet.
    if key.startswith('__') or key in ('trait_names', '_getAttributeNames'):
      raise AttributeError(key)
    LOGGER.debug("Attempt to retrieve unknown config key '%s'", key)
    raise AttributeError("Unknown config option '%s'" % (key,))

  def __setattr__(self, key, value):
    if key in self.__dict__ and self.__dict__[key] == value:
      return

    if key not in self.__dict__:
      LOGGER.error("Attempt to set config option not found"
                   + " in any section of the config file: %s", key)
      raise AttributeError("Config option not available: %s." % key)

    if type(self.__dict__[key]) != type(value):
      LOGGER.warning("Changing data type of config value '%s'", key)

    self.__dict__[key] = value

    tree   = self._config().getroot()
    query  = "./section/option[@name='%s']" % key
    option = tree.find(query)
    vtype  = option.attrib.get('type')
    LOGGER.info("Setting '%s' -> '%s' (section %s).",
                key, value, tree.find(query + '/..').attrib['name'])
    option.clear()
    option.set('name', key)
    if vtype is not None:
      option.set('type', vtype)
    self._encode_value_elem(value, option)
    self._is_changed(True)

  def save(self, conffile=None):
    '''Write the config out to disk (but only if it's been altered).
    Returns the file written, or None.'''
    if not self._is_changed():
      return None
    if conffile is None:
      conffile = self._conffile()
    LOGGER.debug("Writing out changed options to %s.", conffile)
    self._config().write(conffile, encoding='utf-8', xml_declaration=True)
    self._is_changed(False)
    return conffile
