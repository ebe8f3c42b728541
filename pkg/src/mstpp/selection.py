"""Selection-function families and the mechanistic maps they imply.

Each family defines a positive weight g(w, theta) over covariate vectors,
with log g and its analytic theta-gradient:

  ede        g = 1 + exp(-w'theta)   (inverse of the logistic movement
                                      probability; constant step factors
                                      shared across a step are dropped
                                      because they cancel in the
                                      conditional likelihood)
  exp        g = exp(w'theta)
  linear     g = w'theta             (requires w'theta > 0)
  invlinear  g = 1 / w'theta         (requires w'theta > 0)

The linear families exist to exercise the scale non-identifiability
g(c*theta) = c^k g(theta): the CLI flags them as "non-identifiable scale".

The mechanistic maps tie coefficients to movement: movement probability
psi = logit^-1(w'theta), motility delta = cellsize^2 * psi / (4 dt), and
residence time r = 4 dt / psi, so r * delta = cellsize^2 identically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NonPositiveSelectionError


@dataclass(frozen=True)
class MotilityContext:
    """Spatial grain (cellsize, meters) and step duration (dt, hours)."""

    cellsize: float
    dt: float

    def __post_init__(self):
        if not (self.cellsize > 0 and self.dt > 0):
            raise ValueError("cellsize and dt must be positive")


class Family(enum.Enum):
    """Selection-function family tags as accepted by the CLI."""

    EDE_INVERSE_LOGIT = "ede"
    EXPONENTIAL = "exp"
    LINEAR = "linear"
    INVERSE_LINEAR = "invlinear"

    @classmethod
    def from_tag(cls, tag: str) -> "Family":
        try:
            return cls(tag)
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown selection family {tag!r} (expected one of {valid})") from None

    @property
    def requires_positive_eta(self) -> bool:
        return self in (Family.LINEAR, Family.INVERSE_LINEAR)

    @property
    def scale_identifiable(self) -> bool:
        """False for the linear families, where theta and c*theta coincide."""
        return not self.requires_positive_eta

    def check_eta(self, eta) -> None:
        if self.requires_positive_eta and np.any(np.asarray(eta) <= 0):
            raise NonPositiveSelectionError(
                f"{self.value} family requires w'theta > 0, got min {np.min(eta):g}"
            )

    def log_g_eta(self, eta):
        """log g as a function of the linear predictor eta = w'theta."""
        eta = np.asarray(eta, dtype=float)
        if self is Family.EDE_INVERSE_LOGIT:
            # softplus(-eta), stable for large |eta|
            return np.logaddexp(0.0, -eta)
        if self is Family.EXPONENTIAL:
            return eta
        self.check_eta(eta)
        if self is Family.LINEAR:
            return np.log(eta)
        return -np.log(eta)

    def dlog_g_eta(self, eta):
        """c(eta) with d log g / d theta = c(eta) * w."""
        eta = np.asarray(eta, dtype=float)
        if self is Family.EDE_INVERSE_LOGIT:
            return -expit(eta)
        if self is Family.EXPONENTIAL:
            return np.ones_like(eta)
        self.check_eta(eta)
        if self is Family.LINEAR:
            return 1.0 / eta
        return -1.0 / eta


def g(family: Family, w, theta) -> float:
    """Selection weight g(w, theta); always finite and positive."""
    eta = float(np.dot(w, theta))
    if family is Family.EDE_INVERSE_LOGIT:
        return 1.0 + float(np.exp(-eta))
    return float(np.exp(family.log_g_eta(eta)))


def log_g(family: Family, w, theta) -> float:
    return float(family.log_g_eta(float(np.dot(w, theta))))


def log_g_grad(family: Family, w, theta) -> np.ndarray:
    """Analytic gradient of log g with respect to theta."""
    w = np.asarray(w, dtype=float)
    eta = float(np.dot(w, theta))
    return family.dlog_g_eta(eta) * w


def psi(w, theta) -> float:
    """Per-step movement probability, logit-linked to the covariates."""
    return float(expit(np.dot(w, theta)))


def motility(w, theta, ctx: MotilityContext) -> float:
    """Local diffusion rate delta = cellsize^2 * psi / (4 dt), in m^2/h."""
    return ctx.cellsize**2 * psi(w, theta) / (4.0 * ctx.dt)


def residence_time(w, theta, dt: float) -> float:
    """Expected hours spent in a cell of area cellsize^2: r = 4 dt / psi."""
    return 4.0 * dt / psi(w, theta)
