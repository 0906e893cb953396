from typing import Optional


class DmdfmError(Exception):
    exit_code = 1


class UsageError(DmdfmError):
    exit_code = 1


class ConfigError(DmdfmError):
    exit_code = 1


class PanelDataError(DmdfmError):
    exit_code = 2


class UnreadablePanel(PanelDataError):
    pass


class MissingCell(PanelDataError):
    pass


class DuplicateCell(PanelDataError):
    pass


class NonNumericValue(PanelDataError):
    pass


class TooFewPeriods(PanelDataError):
    pass


class TooFewIndividuals(PanelDataError):
    pass


class SchemaMismatch(PanelDataError):
    pass


class DimensionMismatch(PanelDataError):
    pass


class LagTooLarge(PanelDataError):
    pass


class KTooLarge(PanelDataError):
    pass


class MissingFutureRegressors(PanelDataError):
    pass


class NumericalError(DmdfmError):
    exit_code = 3


class RankDeficientDesign(NumericalError):
    def __init__(self, message: str, condition_number: Optional[float] = None):
        super().__init__(message)
        self.condition_number = condition_number


class NonConvergence(NumericalError):
    pass
