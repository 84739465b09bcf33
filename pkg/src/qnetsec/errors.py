"""Exception hierarchy shared by all qnetsec modules."""


class QnetsecError(Exception):
    """Base class for all qnetsec errors."""


class DomainError(QnetsecError, ValueError):
    """An argument is outside its mathematical domain (e.g. fidelity not in [0.25, 1])."""


class StateError(QnetsecError):
    """A density matrix violates trace/hermiticity/positivity requirements."""


class PairConsumedError(QnetsecError):
    """A pair record was referenced after swap/purify/measure consumed it."""


class ImpossibleBranchError(QnetsecError):
    """A conditional quantum branch was requested whose probability is ~0."""


class ConfigurationError(QnetsecError):
    """A scenario or attack script is internally inconsistent."""


class ProtocolError(QnetsecError):
    """A protocol operation was invoked outside its preconditions."""


class Violation:
    """One structural rule broken by a scenario document."""

    def __init__(self, rule: str, subject: str, message: str):
        self.rule = rule
        self.subject = subject
        self.message = message

    def __repr__(self):
        return f"Violation({self.rule!r}, {self.subject!r}, {self.message!r})"

    def __str__(self):
        return f"[{self.rule}] {self.subject}: {self.message}"

    def to_dict(self):
        return {"rule": self.rule, "subject": self.subject, "message": self.message}


class ValidationError(QnetsecError):
    """A scenario document failed structural validation.

    Carries the full list of `Violation` objects so callers can report every
    broken rule at once, each with a machine-readable rule identifier.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))
