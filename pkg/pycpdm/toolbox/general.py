"""
This module implements some useful functions for the despeckling pipeline runner.
"""
import logging
import os
from typing import List

import simplejson
import yaml

from pycpdm.toolbox.exceptions import ToolBoxException, AppConfigException


class ParameterConfiguration:
    """
    Configuration and logging shared by the simulate, train, despeckle and evaluate services. Each service owns one
    section of the yaml file, and commandline values override that section.
    """

    _logger_formatters = {
        "DEBUG": "%(asctime)s [%(levelname)7s][%(name)28s][%(module)18s, %(lineno)4s] %(message)s",
        "INFO": "%(asctime)s [%(levelname)7s][%(name)28s] %(message)s"
    }
    _log_level = 'INFO'
    _log_directory = '.'

    _CONFIG_LOGGER = 'logger'
    _CONFIG_LOGGER_FORMATTER = 'formatters'
    _CONFIG_LOGGER_LEVEL = 'loglevel'
    _CONFIG_LOGGER_DIRECTORY = 'directory'

    def __init__(self, root_config_name, yaml_configuration, pipeline_parameters):
        """
        This function creates a parameter structure from a yaml config file and the pipeline parameters provided
        in the commandline
        :param root_config_name: section of the yaml file owned by the service
        :param yaml_configuration: yaml configuration already parsed
        :param pipeline_parameters: commandline parameters.
        """

        self._ROOT_CONFIG_NAME = root_config_name

        if pipeline_parameters is not None:
            self._pipeline_parameters = pipeline_parameters
        else:
            self._pipeline_parameters = {}

        if yaml_configuration is not None:
            self._default_params = yaml_configuration
        else:
            self._default_params = {}

        # Logging: one file per level in the configured directory
        if self._ROOT_CONFIG_NAME in self._default_params:
            logger_config = self._default_params[self._ROOT_CONFIG_NAME].get(self._CONFIG_LOGGER) or {}
            if self._CONFIG_LOGGER_LEVEL in logger_config:
                self._log_level = logger_config[self._CONFIG_LOGGER_LEVEL]
            if self._CONFIG_LOGGER_FORMATTER in logger_config:
                self._logger_formatters = logger_config[self._CONFIG_LOGGER_FORMATTER]
            if self._CONFIG_LOGGER_DIRECTORY in logger_config:
                self._log_directory = logger_config[self._CONFIG_LOGGER_DIRECTORY]

        if not hasattr(logging, str(self._log_level)):
            raise AppConfigException("Unknown log level '{}'".format(self._log_level))

        self._log_handlers = []
        log_handlers_prefix = self._ROOT_CONFIG_NAME + '-'
        log_handlers_extension = '.log'

        self._logger = logging.getLogger("pycpdm." + self._ROOT_CONFIG_NAME)
        self._logger.setLevel(getattr(logging, self._log_level))
        for handler in list(self._logger.handlers):
            if isinstance(handler, logging.FileHandler):
                self._logger.removeHandler(handler)
                handler.close()
        self._log_files = []
        if self._log_directory is not None:
            check_create_folders([self._log_directory])
            for llevel, lformat in self._logger_formatters.items():
                logfile = os.path.join(self._log_directory,
                                       log_handlers_prefix + llevel.lower() + log_handlers_extension)
                lformatter = logging.Formatter(lformat)
                lhandler = logging.FileHandler(logfile, mode='w')
                lhandler.setLevel(getattr(logging, llevel))
                lhandler.setFormatter(lformatter)
                self._log_handlers.append(lhandler)
                self._logger.addHandler(lhandler)
                self._log_files.append(logfile)
        self.get_logger().debug("Logging system initialized")

    def get_pipeline_parameters(self):
        return self._pipeline_parameters

    def get_default_parameters(self):
        return self._default_params

    def get_log_handlers(self):
        return self._log_handlers

    def get_logger(self):
        return self._logger

    def get_logger_for(self, name):
        """
        Logger for a library module that writes to the same log files as the service.
        :param name: logger name, usually the module path
        :return: configured logger
        """
        self.get_logger().debug("Creating logger with name {}".format(name))
        lg = logging.getLogger(name)
        for handler in list(lg.handlers):
            if isinstance(handler, logging.FileHandler) and handler not in self.get_log_handlers():
                lg.removeHandler(handler)
        for handler in self.get_log_handlers():
            if handler not in lg.handlers:
                lg.addHandler(handler)
        lg.setLevel(self._log_level)
        return lg

    def get_configuration_value(self, variable: str, default_value):
        """
        Resolve a parameter of the service section: commandline argument first, then the yaml section and finally
        the default value.
        :param variable: name of the parameter
        :param default_value: value used when neither the commandline nor the yaml define it
        :return: the resolved value
        """
        value_return = default_value
        if variable in self.get_pipeline_parameters():
            value_return = self.get_pipeline_parameters()[variable]
        elif self._ROOT_CONFIG_NAME in self.get_default_parameters() and \
                variable in self.get_default_parameters()[self._ROOT_CONFIG_NAME]:
            value_return = self.get_default_parameters()[self._ROOT_CONFIG_NAME][variable]
        return value_return


def read_json(json_file):
    """
    Load a json document, e.g. a despeckle trace or a metrics file.
    """
    with open(json_file) as jf:
        return simplejson.load(jf)


def write_json(data, json_file):
    """
    Write a json document with sorted keys, so the same data always produces the same bytes.
    :param data: json serializable object
    :param json_file: output path
    """
    with open(json_file, 'w') as jf:
        simplejson.dump(data, jf, sort_keys=True, indent=2, ignore_nan=True)
        jf.write('\n')


def read_yaml_from_file(yaml_file):
    """
    Parse a yaml configuration or phantom file.
    :param yaml_file: path to the yaml file
    :return: parsed data
    """
    if not os.path.isfile(yaml_file):
        raise AppConfigException("Configuration file '{}' not found".format(yaml_file))
    with open(yaml_file, 'r') as f:
        data = yaml.safe_load(f.read())
    return data


def check_create_folders(folders: List):
    """
    Make sure every folder in the list exists. Empty entries are skipped.
    """
    for folder in folders:
        if not folder:
            continue
        if not os.path.exists(folder):
            try:
                os.makedirs(folder)
            except Exception as e:
                raise ToolBoxException(str(e))
        else:
            if not os.path.isdir(folder):
                raise ToolBoxException("'{}' is not a folder".format(folder))


def list_files_with_extension(folder: str, extensions) -> List[str]:
    """
    List the files of a folder with one of the given extensions, sorted by name so that dataset order is stable.
    :param folder: folder to scan
    :param extensions: tuple of extensions, e.g. ('.pgm',)
    :return: sorted list of paths
    """
    if not os.path.isdir(folder):
        raise ToolBoxException("'{}' is not a folder".format(folder))
    return sorted(os.path.join(folder, f) for f in os.listdir(folder)
                  if f.lower().endswith(tuple(extensions)) and os.path.isfile(os.path.join(folder, f)))
