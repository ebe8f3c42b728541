"""Conditional step-selection likelihood, oracles, and the log posterior.

The fitted quantity is the conditional likelihood of each step's observed
slot against its availability slots,

    sum_i [ log g(w_i1) - log sum_j g(w_ij) ],

with the inner sum evaluated by log-sum-exp (the ede family's g grows
without bound for negative linear predictors, so the raw sum can
overflow). Two deliberately independent small-scale implementations are
kept alongside it:

* a brute-force enumeration of all J one-hot outcomes of the per-step
  binary model with a free step intercept beta0 (whose value must cancel
  in the conditional probability), and
* the closed-form multinomial probability g_1 / sum_j g_j evaluated with
  raw g ratios.

Both must agree with exp(per-step conditional term) to near machine
precision; the test suite and `mstpp check` enforce the triangle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from . import selection
from .availability import AugmentedDataset, StepFrame
from .errors import EnumerationTooLargeError, NonPositiveSelectionError
from .selection import Family

# One-hot enumeration is linear in J, but keep oracle calls cheap in tests.
MAX_ENUMERATION_J = 20


@dataclass(frozen=True)
class Prior:
    """Gaussian prior N(mu, sigma) on the coefficient vector."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(f"sigma shape {sigma.shape} does not match mu length {mu.size}")
        if not np.allclose(sigma, sigma.T):
            raise ValueError("prior covariance must be symmetric")
        try:
            chol = cho_factor(sigma, lower=True)
        except np.linalg.LinAlgError:
            raise ValueError("prior covariance must be positive definite") from None
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def diagonal(cls, mu, variances) -> "Prior":
        variances = np.asarray(variances, dtype=float)
        return cls(mu=np.asarray(mu, dtype=float), sigma=np.diag(variances))

    @property
    def p(self) -> int:
        return self.mu.size

    def log_density(self, theta) -> float:
        """Log density up to the additive normalizing constant."""
        d = np.asarray(theta, dtype=float) - self.mu
        return float(-0.5 * d @ cho_solve(self._chol, d))

    def grad(self, theta) -> np.ndarray:
        d = np.asarray(theta, dtype=float) - self.mu
        return -cho_solve(self._chol, d)


@dataclass(frozen=True)
class LogPosteriorEval:
    log_lik: float
    log_prior: float
    grad: np.ndarray
    per_step_log_lik: np.ndarray | None = None

    @property
    def value(self) -> float:
        return self.log_lik + self.log_prior


def _eta_matrix(data: AugmentedDataset, family: Family, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    eta = data.W @ theta
    if family.requires_positive_eta and np.any(eta <= 0):
        k, j = np.argwhere(eta <= 0)[0]
        raise NonPositiveSelectionError(
            f"{family.value} family requires w'theta > 0; violated at step "
            f"{k + 1}, slot {j + 1} (eta = {eta[k, j]:g})",
            step=int(k + 1),
            slot=int(j + 1),
        )
    return eta


def step_log_terms(data: AugmentedDataset, family: Family, theta) -> np.ndarray:
    """Per-step conditional log-likelihood terms, one per frame."""
    eta = _eta_matrix(data, family, theta)
    lg = family.log_g_eta(eta)
    peak = lg.max(axis=1)
    lse = peak + np.log(np.exp(lg - peak[:, None]).sum(axis=1))
    return lg[:, 0] - lse


def cond_log_lik(data: AugmentedDataset, family: Family, theta) -> float:
    """Conditional log-likelihood summed over steps; always <= 0."""
    return float(step_log_terms(data, family, theta).sum())


def bernoulli_conditional_oracle(
    frame: StepFrame, family: Family, theta, beta0: float = 0.0
) -> float:
    """Per-step conditional probability by brute-force enumeration.

    Treats each slot as an independent Bernoulli with success logit
    beta0 + log g(w_j, theta), then conditions on exactly one success by
    enumerating all J one-hot outcomes. The step intercept beta0 must not
    affect the result; the tests assert that cancellation.
    """
    J = frame.w.shape[0]
    if J > MAX_ENUMERATION_J:
        raise EnumerationTooLargeError(f"enumeration oracle supports J <= {MAX_ENUMERATION_J}, got {J}")
    phi = [expit(beta0 + selection.log_g(family, frame.w[j], theta)) for j in range(J)]
    config_probs = []
    for k in range(J):
        prob = 1.0
        for j in range(J):
            prob *= phi[j] if j == k else (1.0 - phi[j])
        config_probs.append(prob)
    return config_probs[0] / sum(config_probs)


def multinomial_oracle(frame: StepFrame, family: Family, theta) -> float:
    """Per-step probability that slot 1 is the used one: g_1 / sum_j g_j."""
    g_vals = [selection.g(family, frame.w[j], theta) for j in range(frame.w.shape[0])]
    return g_vals[0] / sum(g_vals)


def log_posterior(
    data: AugmentedDataset,
    family: Family,
    theta,
    prior: Prior,
    want_per_step: bool = False,
) -> LogPosteriorEval:
    """Log posterior (up to the prior's normalizing constant) and gradient.

    The gradient is the analytic sum over steps of
    grad log g(w_i1) - sum_j p_ij grad log g(w_ij), with p_ij the softmax
    of log g within the step, plus the Gaussian prior score.
    """
    theta = np.asarray(theta, dtype=float)
    eta = _eta_matrix(data, family, theta)
    lg = family.log_g_eta(eta)
    peak = lg.max(axis=1, keepdims=True)
    expd = np.exp(lg - peak)
    denom = expd.sum(axis=1)
    per_step = lg[:, 0] - (peak[:, 0] + np.log(denom))

    weights = expd / denom[:, None]        # softmax of log g per step
    c = family.dlog_g_eta(eta)
    a = -weights * c
    a[:, 0] += c[:, 0]
    m, J = eta.shape
    grad_lik = a.reshape(m * J) @ data.W.reshape(m * J, -1)

    return LogPosteriorEval(
        log_lik=float(per_step.sum()),
        log_prior=prior.log_density(theta),
        grad=grad_lik + prior.grad(theta),
        per_step_log_lik=per_step if want_per_step else None,
    )


class LogPosterior:
    """Posterior callable bound to a dataset, family, and prior.

    With ``data=None`` the posterior is the bare prior, which is how the
    sampler is validated against a known target. ``value_and_grad`` maps
    selection-domain violations (linear families leaving w'theta > 0) to
    -inf rather than raising, so trajectory integration can treat them as
    divergences.
    """

    def __init__(self, family: Family, prior: Prior, data: AugmentedDataset | None = None):
        self.family = family
        self.prior = prior
        self.data = data

    @property
    def p(self) -> int:
        return self.prior.p

    def __call__(self, theta) -> LogPosteriorEval:
        if self.data is None:
            theta = np.asarray(theta, dtype=float)
            return LogPosteriorEval(
                log_lik=0.0,
                log_prior=self.prior.log_density(theta),
                grad=self.prior.grad(theta),
            )
        return log_posterior(self.data, self.family, theta, self.prior)

    def value_and_grad(self, theta):
        try:
            ev = self(theta)
        except NonPositiveSelectionError:
            return -np.inf, np.zeros(self.p)
        return ev.value, ev.grad
