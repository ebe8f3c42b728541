"""Hamiltonian Monte Carlo for the selection coefficients.

Gaussian momentum with tunable covariance, leapfrog integration with a
fixed trajectory time, and a Metropolis acceptance correction. The
correction can be disabled (``mh_correction=False``) to run the bare
integrator chain instead; without it the finite-step-size chain does not
target the posterior exactly, so the correction is on by default.

Momentum covariance sigma_v enters the dynamics inverted: the position
update is d theta / d tau = sigma_v^-1 v. Defaults: step 0.05, trajectory
time 10, 20000 iterations with 1000 burn-in, sigma_v = 3 I.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky

from .errors import InitializationError, NonFiniteTrajectoryError

DEFAULT_STEP_SIZE = 0.05
DEFAULT_TRAJECTORY_TIME = 10.0
DEFAULT_ITERATIONS = 20000
DEFAULT_BURN_IN = 1000
DEFAULT_MASS_SCALE = 3.0


@dataclass(frozen=True)
class HmcConfig:
    """Sampler tuning. ``mass_matrix=None`` means 3 * identity."""

    step_size: float = DEFAULT_STEP_SIZE
    trajectory_time: float = DEFAULT_TRAJECTORY_TIME
    iterations: int = DEFAULT_ITERATIONS
    burn_in: int = DEFAULT_BURN_IN
    mass_matrix: np.ndarray | None = None
    seed: int = 0
    theta_init: np.ndarray | None = None
    mh_correction: bool = True

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.trajectory_time < self.step_size:
            raise ValueError("trajectory_time must be at least step_size")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")

    @property
    def n_leapfrog(self) -> int:
        return int(round(self.trajectory_time / self.step_size))

    def mass(self, p: int) -> np.ndarray:
        if self.mass_matrix is None:
            return DEFAULT_MASS_SCALE * np.eye(p)
        m = np.atleast_2d(np.asarray(self.mass_matrix, dtype=float))
        if m.shape != (p, p):
            raise ValueError(f"mass matrix shape {m.shape} does not match dimension {p}")
        return m


@dataclass(frozen=True)
class Chain:
    """Post-burn-in draws plus per-iteration sampler traces."""

    draws: np.ndarray          # (iterations - burn_in, p)
    accept_rate: float
    energy_trace: np.ndarray   # (iterations,) Hamiltonian at proposal start
    seed: int
    burn_in: int = 0
    log_post: np.ndarray | None = None       # aligned with draws
    accepted: np.ndarray | None = None       # aligned with draws
    delta_energy: np.ndarray | None = None   # (iterations,), inf on divergence
    divergences: int = 0

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def p(self) -> int:
        return self.draws.shape[1]


def hamiltonian(theta, v, posterior, mass) -> float:
    """Total energy: negative log posterior plus 0.5 v' mass^-1 v."""
    v = np.asarray(v, dtype=float)
    value, _ = posterior.value_and_grad(np.asarray(theta, dtype=float))
    return float(-value + 0.5 * v @ np.linalg.solve(np.atleast_2d(mass), v))


def _integrate(theta, v, grad, posterior, mass_inv, step, n_steps):
    """Leapfrog updates; returns (theta, v, value, grad) at the endpoint.

    Costs n_steps + 1 gradient evaluations including the one passed in.
    """
    value = None
    for _ in range(n_steps):
        # half step for velocity, full step for position, half step again
        v_half = v + 0.5 * step * grad
        theta = theta + step * (mass_inv @ v_half)
        value, grad = posterior.value_and_grad(theta)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise NonFiniteTrajectoryError(f"non-finite posterior along trajectory at theta={theta}")
        v = v_half + 0.5 * step * grad
    return theta, v, value, grad


def leapfrog(theta, v, posterior, cfg: HmcConfig):
    """Integrate round(trajectory_time / step_size) leapfrog steps.

    Raises :class:`NonFiniteTrajectoryError` on divergence; the sampler
    treats that as a rejected proposal.
    """
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    mass = cfg.mass(theta.size)
    mass_inv = np.linalg.inv(mass)
    value, grad = posterior.value_and_grad(theta)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFiniteTrajectoryError("non-finite posterior at trajectory start")
    theta, v, _, _ = _integrate(theta, v, grad, posterior, mass_inv, cfg.step_size, cfg.n_leapfrog)
    return theta, v


def sample(posterior, cfg: HmcConfig) -> Chain:
    """Run the sampler and return the post-burn-in chain.

    Per iteration: draw v ~ N(0, mass), integrate the trajectory, then
    accept theta' with probability min(1, exp(h - h')). Divergent
    trajectories count as rejections. Deterministic given cfg.seed.
    """
    if cfg.theta_init is not None:
        theta = np.asarray(cfg.theta_init, dtype=float).copy()
    elif getattr(posterior, "prior", None) is not None:
        theta = posterior.prior.mu.copy()
    else:
        raise InitializationError("theta_init missing and posterior has no prior mean")
    p = theta.size
    mass = cfg.mass(p)
    mass_chol = cholesky(mass, lower=True)
    mass_inv = np.linalg.inv(mass)
    rng = np.random.default_rng(cfg.seed)

    value, grad = posterior.value_and_grad(theta)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise InitializationError(f"posterior non-finite at theta_init={theta}")

    kept = cfg.iterations - cfg.burn_in
    draws = np.empty((kept, p))
    log_post = np.empty(kept)
    accepted_flags = np.zeros(kept, dtype=int)
    energy = np.empty(cfg.iterations)
    delta_energy = np.empty(cfg.iterations)
    n_accept = 0
    divergences = 0

    for it in range(cfg.iterations):
        v = mass_chol @ rng.standard_normal(p)
        u = rng.random()
        h0 = -value + 0.5 * v @ (mass_inv @ v)
        energy[it] = h0
        try:
            theta_new, v_new, value_new, grad_new = _integrate(
                theta, v, grad, posterior, mass_inv, cfg.step_size, cfg.n_leapfrog
            )
            h1 = -value_new + 0.5 * v_new @ (mass_inv @ v_new)
            delta_energy[it] = h1 - h0
            accept = (not cfg.mh_correction) or (np.log(u) < h0 - h1)
        except NonFiniteTrajectoryError:
            delta_energy[it] = np.inf
            divergences += 1
            accept = False
        if accept:
            theta, value, grad = theta_new, value_new, grad_new
            n_accept += 1
        if it >= cfg.burn_in:
            k = it - cfg.burn_in
            draws[k] = theta
            log_post[k] = value
            accepted_flags[k] = int(accept)

    return Chain(
        draws=draws,
        accept_rate=n_accept / cfg.iterations,
        energy_trace=energy,
        seed=cfg.seed,
        burn_in=cfg.burn_in,
        log_post=log_post,
        accepted=accepted_flags,
        delta_energy=delta_energy,
        divergences=divergences,
    )


def effective_sample_size(x) -> float:
    """ESS by initial-positive-sequence truncation of the autocorrelation.

    Sums consecutive autocorrelation pairs while their sum stays positive.
    A constant series reports 1; the estimate is clipped to [1, n].
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2 or np.var(x) == 0:
        return 1.0
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    if n % 2:
        rho = np.append(rho, 0.0)
    pair = rho[0::2] + rho[1::2]
    tau = -1.0
    for gamma in pair:
        if gamma <= 0:
            break
        tau += 2.0 * gamma
    return float(np.clip(n / max(tau, 1e-12), 1.0, n))


def diagnostics(chain: Chain, names=None) -> dict:
    """Per-coordinate posterior summaries plus sampler health numbers."""
    if chain.n_draws == 0:
        raise ValueError("empty chain")
    coeffs = []
    for k in range(chain.p):
        x = chain.draws[:, k]
        q025, q975 = np.quantile(x, [0.025, 0.975])
        coeffs.append(
            {
                "name": names[k] if names else f"theta_{k}",
                "mean": float(x.mean()),
                "sd": float(x.std()),
                "q025": float(q025),
                "q975": float(q975),
                "ess": effective_sample_size(x),
            }
        )
    return {
        "coefficients": coeffs,
        "accept_rate": chain.accept_rate,
        "divergences": chain.divergences,
        "n_draws": chain.n_draws,
    }


def write_chain_csv(chain: Chain, path) -> None:
    """Chain CSV: iter, theta_0..theta_{p-1}, log_post, accepted."""
    p = chain.p
    header = "iter," + ",".join(f"theta_{k}" for k in range(p)) + ",log_post,accepted"
    log_post = chain.log_post if chain.log_post is not None else np.full(chain.n_draws, np.nan)
    accepted = chain.accepted if chain.accepted is not None else np.zeros(chain.n_draws, dtype=int)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(chain.n_draws):
            theta = ",".join(f"{v:.17g}" for v in chain.draws[i])
            fh.write(f"{chain.burn_in + i},{theta},{log_post[i]:.17g},{accepted[i]}\n")


def read_chain_csv(path):
    """Read a chain CSV; returns (iters, draws, log_post, accepted)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "iter" or header[-2:] != ["log_post", "accepted"]:
            raise ValueError(f"{path}: not a chain CSV (header {header[:3]}...)")
        p = len(header) - 3
        iters, draws, log_post, accepted = [], [], [], []
        for row in reader:
            iters.append(int(row[0]))
            draws.append([float(v) for v in row[1 : 1 + p]])
            log_post.append(float(row[1 + p]))
            accepted.append(int(row[2 + p]))
    return (
        np.array(iters, dtype=int),
        np.array(draws),
        np.array(log_post),
        np.array(accepted, dtype=int),
    )
