"""
Diffusion module related exceptions
"""
from pycpdm.toolbox.exceptions import AppException


class DiffusionException(AppException):
    def __init__(self, value):
        super(DiffusionException, self).__init__(value)


class ScheduleException(DiffusionException):
    def __init__(self, value):
        super(ScheduleException, self).__init__(value)


class PredictorException(DiffusionException):
    def __init__(self, value):
        super(PredictorException, self).__init__(value)


class TrainingDivergedException(DiffusionException):
    def __init__(self, value, trace=None):
        super(TrainingDivergedException, self).__init__(value)
        self.trace = list(trace) if trace is not None else []


if __name__ == '__main__':
    print("ERROR: This script is part of a pipeline collection and it is not meant to be run in stand alone mode")
