"""Likelihoods, priors and posteriors over the CSL parameters on a log grid.

Densities are with respect to the *linear* parameters ``(lambda_c, r_c)``.
The grid is log-spaced, so every integral carries the width of each node's
cell in linear units.

Point likelihoods use the density that inverse-CDF sampling actually draws
from: the cumulative distribution is linear between window samples, so the
density is constant on each cell and equals the cell's trapezoid mass over its
width. With that choice, simulated data and the likelihood used to analyse
them describe the same distribution.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decoherence import NO_COLLAPSE, CSLParams, combine, csl_Rn, csl_table, environment_channels
from .errors import (
    BracketingError,
    InvalidConfigurationError,
    NumericalFailureError,
)
from .physics import cosine_basis, derive_geometry, fringe_amplitudes

CHUNK = 512
CACHE_LIMIT = 2e7  # cached log-density entries (8 bytes each)
NORM_TOL = 1e-8


# ---------------------------------------------------------------------------
# parameter grid
# ---------------------------------------------------------------------------

def _log_edges(nodes, lo, hi):
    mids = np.sqrt(nodes[1:] * nodes[:-1])
    return np.concatenate(([lo], mids, [hi]))


@dataclass(frozen=True)
class DiscreteGrid:
    """Finite set of parameter nodes with explicit integration weights.

    Useful for toy models; :class:`ThetaGrid` provides the physical grid.
    """

    node_weights: np.ndarray

    @property
    def weights(self):
        return np.asarray(self.node_weights, dtype=float)

    @property
    def shape(self):
        return self.weights.shape

    @property
    def size(self):
        return self.weights.size

    def integrate(self, density):
        return float(np.sum(np.asarray(density) * self.weights))

    def normalize(self, density):
        return ThetaGrid.normalize(self, density)


@dataclass(frozen=True)
class ThetaGrid:
    """Log-spaced grid over ``lambda_c`` (s^-1) and ``r_c`` (m).

    Arrays on the grid have shape ``(n_lambda, n_rc)``. Each node owns the
    cell between the geometric midpoints to its neighbours, clipped to the
    grid bounds, and ``weights`` are the exact linear areas of those cells:
    the log-grid Jacobian ``lambda r (ln 10)^2 dlog10(lambda) dlog10(r)`` in
    integrated form.
    """

    lam: np.ndarray
    rc: np.ndarray
    lam_edges: np.ndarray = field(repr=False)
    rc_edges: np.ndarray = field(repr=False)

    @classmethod
    def log_spaced(cls, lam_range=(1e-20, 1e-6), rc_range=(1e-9, 1e-4), shape=(120, 120)):
        n_lam, n_rc = shape
        if n_lam < 1 or n_rc < 1:
            raise InvalidConfigurationError("grid needs at least one node per axis")
        lo_l, hi_l = lam_range
        lo_r, hi_r = rc_range
        if not (0 < lo_l <= hi_l and 0 < lo_r <= hi_r):
            raise InvalidConfigurationError("grid ranges must be positive and ordered")
        lam = np.logspace(np.log10(lo_l), np.log10(hi_l), n_lam)
        rc = np.logspace(np.log10(lo_r), np.log10(hi_r), n_rc)
        return cls(lam, rc, _log_edges(lam, lo_l, hi_l), _log_edges(rc, lo_r, hi_r))

    @property
    def shape(self):
        return (self.lam.size, self.rc.size)

    @property
    def size(self):
        return self.lam.size * self.rc.size

    @property
    def lam_widths(self):
        return np.diff(self.lam_edges)

    @property
    def rc_widths(self):
        return np.diff(self.rc_edges)

    @property
    def weights(self):
        return np.outer(self.lam_widths, self.rc_widths)

    def integrate(self, density):
        return float(np.sum(np.asarray(density) * self.weights))

    def normalize(self, density):
        density = np.asarray(density, dtype=float)
        total = self.integrate(density)
        if not (np.isfinite(total) and total > 0):
            raise NumericalFailureError(f"density cannot be normalised (integral {total!r})")
        return density / total

    def node(self, i, j):
        return CSLParams(float(self.lam[i]), float(self.rc[j]))

    def key(self):
        return (self.lam.tobytes(), self.rc.tobytes())


# ---------------------------------------------------------------------------
# likelihood tables
# ---------------------------------------------------------------------------

def _cells(x):
    x = np.asarray(x, dtype=float)
    widths = np.diff(x)
    if np.any(widths <= 0):
        raise InvalidConfigurationError("x grid must be strictly increasing")
    return widths


def cell_index(x_grid, x):
    """Cell ``j`` with ``x_grid[j] <= x < x_grid[j+1]``; the right edge joins the last cell."""
    idx = np.searchsorted(x_grid, x, side="right") - 1
    return np.clip(idx, 0, len(x_grid) - 2)


@dataclass(frozen=True)
class LikelihoodTable:
    """Normalised arrival density on the window grid and its CDF."""

    x: np.ndarray
    values: np.ndarray
    cdf: np.ndarray

    @classmethod
    def from_values(cls, x, values):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        widths = _cells(x)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise NumericalFailureError("likelihood table has negative or non-finite values")
        masses = 0.5 * (values[1:] + values[:-1]) * widths
        total = masses.sum()
        if not total > 0:
            raise InvalidConfigurationError("density vanishes on the whole window")
        cdf = np.concatenate(([0.0], np.cumsum(masses) / total))
        cdf[-1] = 1.0
        return cls(x, values / total, cdf)

    def integral(self):
        return float(np.trapezoid(self.values, self.x))

    def density_at(self, x):
        """Cell-average density, the density of :meth:`sample`."""
        j = cell_index(self.x, x)
        return 0.5 * (self.values[j] + self.values[j + 1])

    def sample(self, n, rng):
        """``n`` i.i.d. draws by inverse CDF with linear interpolation."""
        u = rng.random(int(n))
        return np.interp(u, self.cdf, self.x)

    def visibility(self):
        """Peak-to-trough contrast ``(max - min) / (max + min)`` of the table."""
        return float((self.values.max() - self.values.min()) / (self.values.max() + self.values.min()))


class LikelihoodFamily:
    """Likelihood tables for every node of a parameter grid.

    Subclasses supply ``_unnormalized(nodes)`` returning the unnormalised
    density at the window samples for the flat node indices ``nodes``.
    Everything else works on cells, so the cost of a data set depends on the
    number of occupied cells, not on the number of points.
    """

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)
        self.widths = _cells(self.x)

    @property
    def n_nodes(self):
        raise NotImplementedError

    def _unnormalized(self, nodes):
        raise NotImplementedError

    def _cell_masses(self, nodes):
        v = self._unnormalized(nodes)
        if np.any(v < -1e-9 * np.max(np.abs(v), axis=-1, keepdims=True)):
            raise NumericalFailureError("negative fringe density in likelihood family")
        v = np.maximum(v, 0.0)
        return 0.5 * (v[:, 1:] + v[:, :-1]) * self.widths

    def _chunks(self):
        for start in range(0, self.n_nodes, CHUNK):
            yield np.arange(start, min(start + CHUNK, self.n_nodes))

    def table(self, node):
        return LikelihoodTable.from_values(self.x, self._unnormalized(np.array([node]))[0])

    def counts(self, data):
        return np.bincount(cell_index(self.x, data), minlength=self.widths.size)

    def _log_cells(self):
        """Log cell densities and log norms, cached when they fit in memory."""
        cached = getattr(self, "_log_cache", None)
        if cached is not None:
            return cached
        logd = np.empty((self.n_nodes, self.widths.size))
        lognorm = np.empty(self.n_nodes)
        for nodes in self._chunks():
            masses = self._cell_masses(nodes)
            with np.errstate(divide="ignore"):
                logd[nodes] = np.log(masses / self.widths)
                lognorm[nodes] = np.log(masses.sum(axis=1))
        self._log_cache = (logd, lognorm)
        return self._log_cache

    def loglike(self, data):
        """``sum_i ln p(x_i | theta)`` for every node (flat array)."""
        counts = self.counts(np.asarray(data, dtype=float))
        occupied = np.nonzero(counts)[0]
        n = counts.sum()
        if self.n_nodes * self.widths.size <= CACHE_LIMIT:
            logd, lognorm = self._log_cells()
            return logd[:, occupied] @ counts[occupied] - n * lognorm
        out = np.empty(self.n_nodes)
        for nodes in self._chunks():
            masses = self._cell_masses(nodes)
            total = masses.sum(axis=1)
            dens = masses[:, occupied] / self.widths[occupied]
            with np.errstate(divide="ignore"):
                out[nodes] = np.log(dens) @ counts[occupied] - n * np.log(total)
        return out

    def neg_entropy(self):
        """``int p ln p dx`` of each node's (cell-constant) density."""
        out = np.empty(self.n_nodes)
        for nodes in self._chunks():
            masses = self._cell_masses(nodes)
            p = masses / masses.sum(axis=1, keepdims=True)
            dens = p / self.widths
            with np.errstate(divide="ignore", invalid="ignore"):
                out[nodes] = np.sum(np.where(p > 0, p * np.log(dens), 0.0), axis=1)
        return out

    def sample(self, node, n, rng):
        return self.table(node).sample(n, rng)


class TabulatedFamily(LikelihoodFamily):
    """Family given by explicit (unnormalised) tables, one row per node."""

    def __init__(self, x, tables):
        super().__init__(x)
        self.tables = np.atleast_2d(np.asarray(tables, dtype=float))
        if self.tables.shape[1] != self.x.size:
            raise InvalidConfigurationError("tables must match the x grid")

    @property
    def n_nodes(self):
        return self.tables.shape[0]

    def _unnormalized(self, nodes):
        return self.tables[nodes]


class FringeFamily(LikelihoodFamily):
    """Talbot fringe likelihoods ``1 + 2 sum_n R_n^mod(theta) c_n cos(n k x)``.

    Parameters
    ----------
    x : ndarray
        Window samples.
    basis : ndarray, shape (n_max, n_x)
        ``cos(n k x)`` for n = 1..n_max.
    coefficients : ndarray
        ``c_n = R_n^oth A_n`` for n = 1..n_max.
    reduction : ndarray, shape (n_nodes, n_max)
        ``R_n^mod`` per node.
    """

    def __init__(self, x, basis, coefficients, reduction):
        super().__init__(x)
        self.basis = np.asarray(basis, dtype=float)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.reduction = np.atleast_2d(np.asarray(reduction, dtype=float))

    @property
    def n_nodes(self):
        return self.reduction.shape[0]

    def _unnormalized(self, nodes):
        coef = 2.0 * self.reduction[nodes] * self.coefficients
        return 1.0 + coef @ self.basis


# ---------------------------------------------------------------------------
# interferometer model: physics -> likelihood
# ---------------------------------------------------------------------------

class InterferometerModel:
    """Everything needed to turn ``theta`` into an arrival-position likelihood.

    The expensive parts (grating masks, Talbot coefficients, environmental
    decoherence, CSL integrals per grid) are computed once and reused.
    """

    def __init__(self, config, particle):
        self.config = config
        self.particle = particle
        self.geometry = derive_geometry(config, particle)
        self.spectrum = fringe_amplitudes(self.geometry, config, particle)
        self.channels = environment_channels(config, particle, self.geometry)
        self.environment = combine(self.channels, config.n_max, self.geometry)
        self.x = config.x_grid()
        self.basis = cosine_basis(self.x, self.geometry, config.n_max)
        # c_n for n = 1..n_max
        self.coefficients = (self.environment.oth * self.spectrum.A)[1:]
        self._families = {}
        self._csl_tables = {}

    @property
    def separations(self):
        return self.geometry.separation(np.arange(self.config.n_max + 1, dtype=float))

    def csl_reduction(self, theta):
        return csl_Rn(np.arange(self.config.n_max + 1), theta, self.geometry, self.particle)

    def unnormalized(self, theta):
        R = self.csl_reduction(theta)
        return 1.0 + (2.0 * R[1:] * self.coefficients) @ self.basis

    def table(self, theta=NO_COLLAPSE):
        return LikelihoodTable.from_values(self.x, self.unnormalized(theta))

    def csl_table(self, rc):
        rc = np.asarray(rc, dtype=float)
        key = rc.tobytes()
        if key not in self._csl_tables:
            self._csl_tables[key] = csl_table(rc, self.separations, self.particle)
        return self._csl_tables[key]

    def family(self, grid):
        key = grid.key()
        if key not in self._families:
            table = self.csl_table(grid.rc)
            R = table.reduction(grid.lam, self.geometry.total_time)  # (n_lam, n_rc, n)
            self._families[key] = FringeFamily(self.x, self.basis, self.coefficients,
                                               R[..., 1:].reshape(grid.size, -1))
        return self._families[key]


def likelihood(theta, config, particle):
    """Normalised likelihood table ``p(x | theta)`` on the detection window."""
    return InterferometerModel(config, particle).table(theta)


def sample_positions(table, n, rng):
    """``n`` arrival positions drawn from ``table`` (inverse CDF)."""
    if n < 0:
        raise InvalidConfigurationError("number of points must be >= 0")
    return table.sample(n, rng)


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------

def mdip_prior(grid, family):
    """Maximal data information prior ``p(theta) ~ exp[int p(x|theta) ln p(x|theta) dx]``."""
    h = family.neg_entropy().reshape(grid.shape)
    return grid.normalize(np.exp(h - h.max()))


def read_boundary(path):
    """Exclusion boundary CSV with header ``r_c_m,lambda_c_max_per_s``."""
    if not Path(path).is_file():
        raise InvalidConfigurationError(f"boundary file not found: {path}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    if names != ("r_c_m", "lambda_c_max_per_s"):
        raise InvalidConfigurationError(f"boundary header must be r_c_m,lambda_c_max_per_s, got {names}")
    return np.column_stack([np.atleast_1d(data["r_c_m"]), np.atleast_1d(data["lambda_c_max_per_s"])])


def boundary_lambda(boundary, rc):
    """Log-log interpolation of ``lambda_c^max(r_c)``, flat beyond the end rows."""
    boundary = np.asarray(boundary, dtype=float)
    order = np.argsort(boundary[:, 0])
    lr = np.log(boundary[order, 0])
    ll = np.log(boundary[order, 1])
    return np.exp(np.interp(np.log(rc), lr, ll))


def experimental_prior(grid, boundary):
    """Uniform where ``lambda_c < lambda_c^max(r_c)``, zero where already excluded."""
    lam_max = boundary_lambda(boundary, grid.rc)
    allowed = grid.lam[:, None] <= lam_max[None, :] * (1 + 1e-12)
    if not np.any(allowed[:-1]) and not np.any(grid.lam[:, None] < lam_max[None, :]):
        raise InvalidConfigurationError("experimental prior has empty support on the grid")
    density = allowed.astype(float)
    if grid.integrate(density) == 0:
        raise InvalidConfigurationError("experimental prior has empty support on the grid")
    return grid.normalize(density)


def uniform_prior(grid):
    return grid.normalize(np.ones(grid.shape))


# ---------------------------------------------------------------------------
# posterior
# ---------------------------------------------------------------------------

@dataclass
class PosteriorGrid:
    """Normalised posterior density on a :class:`ThetaGrid`."""

    grid: ThetaGrid
    density: np.ndarray
    log_density: np.ndarray
    n_points: int = 0
    seed: int | None = None
    config_hash: str | None = None

    def mass(self):
        return self.grid.integrate(self.density)


def normalize_log(log_density, grid):
    log_density = np.asarray(log_density, dtype=float)
    if np.any(np.isnan(log_density)):
        raise NumericalFailureError("NaN in log posterior")
    top = np.max(log_density)
    if not np.isfinite(top):
        raise NumericalFailureError("posterior vanishes on the whole grid")
    log_w = np.log(grid.weights)
    log_norm = top + np.log(np.sum(np.exp(log_density + log_w - top)))
    log_post = log_density - log_norm
    return np.exp(log_post), log_post


def posterior(data, prior, grid, family, seed=None, config_hash=None):
    """Posterior ``p(theta | x) ~ prod_i p(x_i|theta) p(theta)`` on the grid."""
    data = np.asarray(data, dtype=float)
    prior = np.asarray(prior, dtype=float)
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior)
    if data.size == 0:
        # nothing to update on: hand back the prior untouched
        return PosteriorGrid(grid, prior.copy(), log_prior, 0, seed, config_hash)
    log_like = family.loglike(data).reshape(grid.shape)
    log_like = np.where(prior > 0, log_like, 0.0)
    density, log_post = normalize_log(log_like + log_prior, grid)
    return PosteriorGrid(grid, density, log_post, int(data.size), seed, config_hash)


# ---------------------------------------------------------------------------
# exclusion line
# ---------------------------------------------------------------------------

@dataclass
class ExclusionCurve:
    """Constant-decoherence-strength line holding ``confidence`` of the posterior below it."""

    strength: float
    rc: np.ndarray
    lam: np.ndarray
    confidence: float
    mass: float
    iterations: int

    def lam_at(self, rc):
        """Log-log interpolation of the curve at ``rc``."""
        rc = np.asarray(rc, dtype=float)
        if np.any(rc < self.rc.min() * (1 - 1e-12)) or np.any(rc > self.rc.max() * (1 + 1e-12)):
            raise InvalidConfigurationError(f"r_c={rc!r} outside the curve range")
        return np.exp(np.interp(np.log(rc), np.log(self.rc), np.log(self.lam)))


def strength_curve(strength, kappa_d, rate_per_lambda, one_minus_f1):
    """``lambda_c(Lambda, r_c) = Lambda (kappa d)^2 / (3 Gamma/lambda (1 - f(x_1)))``."""
    with np.errstate(divide="ignore"):
        return strength * kappa_d**2 / (3 * rate_per_lambda * one_minus_f1)


def mass_below(post, lam_curve, sub=8):
    """Posterior mass with ``lambda_c`` below the curve ``lam_curve`` (given on ``grid.rc``).

    The density is constant on each node's cell. Each ``r_c`` cell is split
    into ``sub`` equal columns on which the curve takes its log-log
    interpolated value, and partially covered cells contribute in proportion
    to their covered linear width. The result is continuous and
    non-decreasing in the curve height.
    """
    grid = post.grid
    lam_curve = np.asarray(lam_curve, dtype=float)
    frac = (np.arange(sub) + 0.5) / sub
    cols = grid.rc_edges[:-1, None] + frac[None, :] * grid.rc_widths[:, None]
    if grid.rc.size > 1:
        with np.errstate(divide="ignore"):
            log_curve = np.log(lam_curve)
        curve = np.exp(np.interp(np.log(cols), np.log(grid.rc), log_curve))
    else:
        curve = np.broadcast_to(lam_curve[:, None], cols.shape)
    lo = grid.lam_edges[:-1, None, None]
    hi = grid.lam_edges[1:, None, None]
    covered = np.clip(curve[None, :, :] - lo, 0.0, hi - lo).mean(axis=2)
    return float(np.sum(post.density * covered * grid.rc_widths[None, :]))


def exclusion_line(post, geometry, table, confidence=0.95, tol=1e-4, max_iter=200):
    """Bisect the decoherence strength until ``confidence`` of the posterior is below the line.

    Parameters
    ----------
    post : PosteriorGrid
    geometry : DerivedGeometry
        Supplies ``kappa d`` for the strength scale.
    table : CSLTable
        CSL rate and ``1 - f`` on ``post.grid.rc``; the n = 1 separation is used.
    tol : float
        Stop once ``|mass - confidence| <= tol`` (always inside +-0.005).
    """
    if not 0 < confidence < 1:
        raise InvalidConfigurationError("confidence must lie in (0, 1)")
    kd = geometry.kappa * geometry.pitch
    rate = table.rate_per_lambda
    omf = table.one_minus_f[:, 1]

    def mass(log_s):
        return mass_below(post, strength_curve(np.exp(log_s), kd, rate, omf))

    # start with the curve through the middle of the lambda axis
    mid = np.sqrt(post.grid.lam[0] * post.grid.lam[-1])
    start = np.median(mid * 3 * rate * omf / kd**2)
    lo = hi = np.log(start)
    m_lo = m_hi = mass(lo)
    step = np.log(10.0)
    n = 0
    while m_hi < confidence:
        if np.min(strength_curve(np.exp(hi), kd, rate, omf)) > post.grid.lam_edges[-1] or n > 400:
            # the curve clears the whole grid, so the mass cannot grow further
            raise BracketingError("could not raise below-curve mass to the target", (m_lo, m_hi))
        hi += step
        m_hi = mass(hi)
        n += 1
    while m_lo > confidence:
        lo -= step
        m_lo = mass(lo)
        n += 1
        if n > 400:
            raise BracketingError("could not lower below-curve mass to the target", (m_lo, m_hi))
    m = m_hi
    mid_s = hi
    for it in range(max_iter):
        if abs(m - confidence) <= tol:
            break
        mid_s = 0.5 * (lo + hi)
        m = mass(mid_s)
        if m < confidence:
            lo = mid_s
        else:
            hi = mid_s
    else:
        if abs(m - confidence) > 0.005:
            raise BracketingError("bisection did not reach the target mass", (mass(lo), mass(hi)))
    strength = float(np.exp(mid_s))
    curve = strength_curve(strength, kd, rate, omf)
    return ExclusionCurve(strength, np.asarray(post.grid.rc), curve, confidence, m, n + it)
