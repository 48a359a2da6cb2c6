"""
Despeckling module related exceptions
"""
from pycpdm.toolbox.exceptions import AppException


class SolverException(AppException):
    def __init__(self, value):
        super(SolverException, self).__init__(value)


class NewtonDivergenceException(SolverException):
    def __init__(self, value, index=None):
        super(NewtonDivergenceException, self).__init__(value)
        self.index = index


class DespeckleException(SolverException):
    def __init__(self, value, trace=None):
        super(DespeckleException, self).__init__(value)
        self.trace = trace


class MetricException(AppException):
    def __init__(self, value):
        super(MetricException, self).__init__(value)


if __name__ == '__main__':
    print("ERROR: This script is part of a pipeline collection and it is not meant to be run in stand alone mode")
