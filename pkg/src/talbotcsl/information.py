"""Information gain, evidence and Monte-Carlo expected information.

All information quantities are reported in bits.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .bayes import posterior
from .errors import InfiniteDivergenceError, InvalidConfigurationError, NumericalFailureError
from .rng import substream

LN2 = np.log(2.0)
MODES = ("prior-predictive", "conditioned-on-theta0")


def _weights(grid, shape):
    if grid is None:
        return np.ones(shape)
    return np.asarray(getattr(grid, "weights", grid), dtype=float)


def info_gain(post, prior, grid=None):
    """Kullback-Leibler divergence of ``post`` from ``prior`` in bits.

    Parameters
    ----------
    post : PosteriorGrid or ndarray
        Posterior density. A ``PosteriorGrid`` supplies its own grid.
    prior : ndarray
        Prior density on the same nodes.
    grid : ThetaGrid, DiscreteGrid or ndarray, optional
        Integration weights. Without one the densities are node probabilities.

    Raises
    ------
    InfiniteDivergenceError
        If the prior vanishes where the posterior does not.
    """
    if hasattr(post, "density"):
        grid = post.grid if grid is None else grid
        post = post.density
    post = np.asarray(post, dtype=float)
    prior = np.asarray(prior, dtype=float)
    w = _weights(grid, post.shape)
    support = post > 0
    if np.any(support & (prior <= 0)):
        raise InfiniteDivergenceError("posterior has mass where the prior vanishes")
    # a difference of logs stays finite for subnormal densities where the ratio would underflow
    log_ratio = np.log2(np.where(support, post, 1.0)) - np.log2(np.where(support, prior, 1.0))
    h = np.sum(np.where(support, w * post * log_ratio, 0.0))
    if np.isnan(h):
        raise NumericalFailureError("NaN in information gain")
    # KL is non-negative; tiny negative values are rounding
    return float(max(h, 0.0)) if h > -1e-12 else float(h)


def evidence(data, prior, grid, family):
    """``ln p(x) = ln int prod_i p(x_i | theta) p(theta) dtheta`` in nats."""
    data = np.asarray(data, dtype=float)
    prior = np.ravel(np.asarray(prior, dtype=float))
    w = np.ravel(grid.weights)
    if data.size == 0:
        return 0.0
    ll = family.loglike(data)
    keep = prior > 0
    out = logsumexp(ll[keep] + np.log(prior[keep] * w[keep]))
    if np.isnan(out):
        raise NumericalFailureError("NaN in evidence")
    return float(out)


@dataclass
class InfoResult:
    """Monte-Carlo expected information gain."""

    mean: float
    delta: float
    m_iters: int
    n_points: int
    mode: str
    seed: int
    samples: np.ndarray
    m_completed: int
    interrupted: bool = False

    @property
    def H(self):
        return self.mean

    def row(self):
        return {"N": self.n_points, "M": self.m_completed, "mode": self.mode,
                "H_bits": self.mean, "delta_bits": self.delta, "seed": self.seed}


def mc_error(samples):
    """``Delta = sqrt((<H^2> - <H>^2) / M)``."""
    samples = np.asarray(samples, dtype=float)
    m = samples.size
    if m < 2:
        return float("nan")
    var = max(np.mean(samples**2) - np.mean(samples) ** 2, 0.0)
    return float(np.sqrt(var / m))


def expected_information(family, grid, prior, n_points, m_iters=200, seed=0,
                         mode="conditioned-on-theta0", truth=None):
    """Monte-Carlo estimate of the expected information gain.

    Parameters
    ----------
    family : LikelihoodFamily
        Likelihoods for every node of ``grid``.
    grid : ThetaGrid or DiscreteGrid
    prior : ndarray
        Normalised prior density on ``grid``.
    n_points : int
        Data points per realisation.
    m_iters : int
        Number of realisations, at least 2.
    seed : int
    mode : {"prior-predictive", "conditioned-on-theta0"}
        ``prior-predictive`` draws a node from the prior, data from that node,
        and averages ``ln p(x|theta) - ln p(x)``. ``conditioned-on-theta0``
        draws data from ``truth`` and averages the posterior-prior divergence.
    truth : LikelihoodTable, optional
        Data-generating table for the conditioned mode (the no-collapse
        likelihood for the physical model).

    Returns
    -------
    InfoResult
        On ``KeyboardInterrupt`` the realisations finished so far are
        returned with ``interrupted=True``.
    """
    if mode not in MODES:
        raise InvalidConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    if m_iters < 2:
        raise InvalidConfigurationError("need at least 2 Monte-Carlo iterations")
    if n_points < 0:
        raise InvalidConfigurationError("number of points must be >= 0")
    if mode == "conditioned-on-theta0" and truth is None:
        raise InvalidConfigurationError("conditioned mode needs the data-generating table")
    prior = np.asarray(prior, dtype=float)
    flat_prior = np.ravel(prior)
    w = np.ravel(grid.weights)
    probs = flat_prior * w
    probs = probs / probs.sum()
    keep = flat_prior > 0
    log_pw = np.full(flat_prior.shape, -np.inf)
    log_pw[keep] = np.log(flat_prior[keep] * w[keep])

    samples = []
    interrupted = False
    try:
        for i in range(int(m_iters)):
            rng = substream(seed, "info", mode, int(n_points), i)
            if n_points == 0:
                samples.append(0.0)
                continue
            if mode == "prior-predictive":
                node = int(rng.choice(probs.size, p=probs))
                x = family.sample(node, n_points, rng)
                ll = family.loglike(x)
                h = (ll[node] - logsumexp(ll[keep] + log_pw[keep])) / LN2
            else:
                x = truth.sample(n_points, rng)
                h = info_gain(posterior(x, prior, grid, family), prior)
            samples.append(float(h))
    except KeyboardInterrupt:
        interrupted = True
    samples = np.array(samples)
    mean = float(samples.mean()) if samples.size else float("nan")
    return InfoResult(mean, mc_error(samples), int(m_iters), int(n_points), mode, int(seed),
                      samples, samples.size, interrupted)
