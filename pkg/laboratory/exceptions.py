# coding: utf-8


class LabError(Exception):
    """
    Base error of the laboratory, every computation error maps to an exit code
    """

    exit_code = 3

    @property
    def code(self):
        return self.__class__.__name__


class ConfigError(LabError):
    exit_code = 2


class VerificationFailure(LabError):
    exit_code = 4


class InvalidParameter(LabError):
    pass


class NoValidOrder(LabError):
    pass


class DegenerateProfile(LabError):
    pass


class CoverageFailure(LabError):
    pass


class InvalidSize(LabError):
    pass


class SizeMismatch(LabError):
    pass


class DecompositionFailure(LabError):
    pass


class InvalidMode(LabError):
    pass


class NonConvergence(LabError):
    pass


class WindowTooSmall(LabError):
    pass


class QuadratureFailure(LabError):
    pass


class EnvelopeViolation(LabError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
