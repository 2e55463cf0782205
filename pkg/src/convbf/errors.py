"""Exception hierarchy shared by all modules."""


class ConvbfError(Exception):
    pass


class AudioFormatError(ConvbfError):
    pass


class SizeError(ConvbfError, ValueError):
    pass


class NumericalError(ConvbfError):
    """Base for failures the pipeline may isolate to a single frequency bin."""


class SingularMatrixError(NumericalError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


class ConvergenceError(NumericalError):
    def __init__(self, message, iterations):
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations


class EstimationError(NumericalError):
    pass


class DegenerateReferenceError(EstimationError):
    pass
