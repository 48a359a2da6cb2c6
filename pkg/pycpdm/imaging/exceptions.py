"""
Image, checkpoint and region file related exceptions
"""
from pycpdm.toolbox.exceptions import AppException


class ImageFormatException(AppException):
    def __init__(self, value):
        super(ImageFormatException, self).__init__(value)


class UnsupportedFormatException(ImageFormatException):
    def __init__(self, value):
        super(UnsupportedFormatException, self).__init__(value)


class CheckpointException(AppException):
    def __init__(self, value):
        super(CheckpointException, self).__init__(value)


class CheckpointVersionException(CheckpointException):
    def __init__(self, value):
        super(CheckpointVersionException, self).__init__(value)


class CheckpointShapeException(CheckpointException):
    def __init__(self, value):
        super(CheckpointShapeException, self).__init__(value)


class CheckpointTruncatedException(CheckpointException):
    def __init__(self, value):
        super(CheckpointTruncatedException, self).__init__(value)


class PhantomException(AppException):
    def __init__(self, value):
        super(PhantomException, self).__init__(value)


class RoiException(AppException):
    def __init__(self, value):
        super(RoiException, self).__init__(value)


if __name__ == '__main__':
    print("ERROR: This script is part of a pipeline collection and it is not meant to be run in stand alone mode")
