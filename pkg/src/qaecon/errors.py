"""Exception hierarchy shared by every qaecon module."""


class QAEconError(Exception):
    """Base class for all qaecon errors."""


class DomainError(QAEconError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnknownIdError(QAEconError, KeyError):
    """A fault, application, factor or dataset key does not exist."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep messages readable
        return str(self.args[0]) if self.args else ""


class UndefinedROIError(DomainError):
    """ROI requested where direct + future costs are zero."""


class InfeasibleBudgetError(DomainError):
    """Effort budget cannot satisfy the per-application bounds."""


class ScenarioParseError(QAEconError, ValueError):
    """A scenario file is not valid JSON or does not match the schema."""


class ScenarioValidationError(QAEconError, ValueError):
    """A scenario failed validation; ``violations`` lists every problem."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(str(v) for v in self.violations))
