"""Exception hierarchy; every error carries the diagnostic code the CLI exits with."""


class FacilityLocationError(Exception):
    """Base class for all library errors."""

    code: int = 1


class DomainError(FacilityLocationError, ValueError):
    """An argument lies outside the domain of the operation."""

    code = 10


class DimensionError(FacilityLocationError, ValueError):
    """A vector has the wrong length for the instance it is used with."""

    code = 11


class ParityError(FacilityLocationError):
    """The operation is only defined for an odd number of agents."""

    code = 12


class RegimeError(FacilityLocationError):
    """The mechanism or family is not defined for this information regime."""

    code = 13


class NoReportsError(RegimeError):
    """A mechanism that only reads reports was given none."""

    code = 14


class NoBoundedMechanismError(RegimeError):
    """No truthful mechanism with bounded ratio exists in this regime."""

    code = 15


class InfeasibleOutcomeError(FacilityLocationError):
    """A facility outcome breaks a capacity constraint."""

    code = 16


class InvalidFamilyError(FacilityLocationError):
    """A concentration family or instance family cannot be realized."""

    code = 17


class UnsupportedPlanError(FacilityLocationError):
    """A quantile query plan is not one the mechanism is truthful for."""

    code = 18


class ConfigError(FacilityLocationError):
    """An experiment config or JSON document fails schema validation."""

    code = 2
