"""Exception types raised across the factorbt package."""


class FactorbtError(Exception):
    """Base class for every error this package raises deliberately."""


# -- data loading / cleaning -------------------------------------------------

class EmptySeries(FactorbtError):
    """Series has too few observations for the requested operation."""


class NonPositivePrice(FactorbtError):
    """A close price is zero or negative."""


class AllMissingColumn(FactorbtError):
    """A panel column contains no observed values at all."""


class MissingFundamental(FactorbtError):
    """An asset lacks a required fundamental column (P/E or P/B)."""


class ZeroVarianceFactor(FactorbtError):
    """A factor is constant over the fit range and cannot be standardized."""


class InvalidConfig(FactorbtError):
    """A configuration value is out of range or structurally wrong."""


# -- factor statistics / regression ------------------------------------------

class ZeroVariance(FactorbtError):
    """An input series to a correlation has zero variance."""


class LengthMismatch(FactorbtError):
    """Two series that must align have different lengths."""


class NoFactorsSurvive(FactorbtError):
    """Screening removed every candidate factor."""


class RankDeficient(FactorbtError):
    """The regression design matrix is not full column rank."""


# -- LSTM --------------------------------------------------------------------

class DimensionMismatch(FactorbtError):
    """Array shapes are inconsistent with the network dimensions."""


class NonFiniteInput(FactorbtError):
    """An input or parameter contains NaN or Inf."""


class StaleTape(FactorbtError):
    """A forward tape does not match the current parameter version."""


class TooShort(FactorbtError):
    """Series is shorter than the window the operation requires."""


class DivergedLoss(FactorbtError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training loss became non-finite at epoch {epoch}")


class EmptyInput(FactorbtError):
    """An operation received an empty input."""


# -- risk metrics ------------------------------------------------------------

class ZeroVolatility(FactorbtError):
    """Return series is constant; the Sharpe ratio is undefined."""


class TooFewObservations(FactorbtError):
    """Not enough observations for a reliable estimate."""


# -- backtesting -------------------------------------------------------------

class InsufficientData(FactorbtError):
    """Panel is too short for the requested train/test layout."""


class CalendarMismatch(FactorbtError):
    """Results being compared do not share the same calendar."""
