"""Diagonal Gaussians, closed-form Rényi divergences and importance-weight laws."""
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

LOG_2PI = math.log(2.0 * math.pi)


class DivergenceUndefined(ValueError):
    """Raised when ``alpha * var_q + (1 - alpha) * var_p`` is not positive."""


@dataclass(frozen=True)
class DiagGaussian:
    """Gaussian with diagonal covariance, parametrized by mean and log std."""

    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        log_std = np.atleast_1d(np.asarray(self.log_std, dtype=float))
        if mean.shape != log_std.shape or mean.ndim != 1:
            raise ValueError(
                f"mean and log_std must be vectors of equal size, got {mean.shape} and {log_std.shape}"
            )
        if not np.all(np.isfinite(log_std)):
            raise ValueError("log_std entries must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "log_std", log_std)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    @property
    def var(self) -> np.ndarray:
        return np.exp(2.0 * self.log_std)

    def log_pdf(self, x) -> np.ndarray:
        """Log density at ``x``; the last axis of ``x`` must have size ``dim``."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        z = (x - self.mean) / self.std
        return -0.5 * np.sum(z**2, axis=-1) - np.sum(self.log_std) - 0.5 * self.dim * LOG_2PI

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.mean + self.std * rng.standard_normal(shape)


def log_pdf(dist: DiagGaussian, x) -> np.ndarray:
    return dist.log_pdf(x)


def sample(dist: DiagGaussian, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    return dist.sample(rng, size)


def renyi_terms(alpha, mean_diff, var_p, var_q):
    """Per-coordinate Rényi divergence between univariate Gaussians.

    Broadcasts over arrays. Returns ``inf`` where the divergence does not exist
    (``alpha * var_q + (1 - alpha) * var_p <= 0``) instead of raising.
    ``alpha == 1`` is the KL limit and ``alpha == inf`` gives ``log ess sup w``.
    """
    mean_diff = np.asarray(mean_diff, dtype=float)
    var_p = np.asarray(var_p, dtype=float)
    var_q = np.asarray(var_q, dtype=float)
    if alpha == 1:
        return 0.5 * (var_p / var_q + mean_diff**2 / var_q - 1.0 + np.log(var_q / var_p))
    if math.isinf(alpha):
        return _log_sup_weight(mean_diff, var_p, var_q)
    var_a = alpha * var_q + (1.0 - alpha) * var_p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * alpha * mean_diff**2 / var_a - (
            np.log(var_a) - (1.0 - alpha) * np.log(var_p) - alpha * np.log(var_q)
        ) / (2.0 * (alpha - 1.0))
    return np.where(var_a > 0, out, np.inf)


def _log_sup_weight(mean_diff, var_p, var_q):
    gap = var_q - var_p
    with np.errstate(divide="ignore", invalid="ignore"):
        bounded = 0.5 * np.log(var_q / var_p) + 0.5 * mean_diff**2 / gap
    same = np.where(mean_diff == 0, 0.0, np.inf)
    return np.where(gap > 0, bounded, np.where(gap == 0, same, np.inf))


def renyi_divergence(alpha: float, p: DiagGaussian, q: DiagGaussian) -> float:
    """D_alpha(p || q) for diagonal Gaussians.

    Raises
    ------
    DivergenceUndefined
        If ``alpha * var_q + (1 - alpha) * var_p`` has a non-positive entry.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    terms = renyi_terms(alpha, p.mean - q.mean, p.var, q.var)
    total = float(np.sum(terms))
    if math.isinf(total) and not math.isinf(alpha):
        raise DivergenceUndefined(
            f"Renyi divergence of order {alpha} is undefined: "
            "alpha * var_q + (1 - alpha) * var_p must be positive"
        )
    return total


def exp_renyi_divergence(alpha: float, p: DiagGaussian, q: DiagGaussian) -> float:
    """d_alpha(p || q) = exp(D_alpha).

    For ``alpha = 2`` this is the second moment ``E_q[w**2]`` of the weights, so
    ``d_2 - 1`` is their variance.
    """
    return math.exp(renyi_divergence(alpha, p, q))


class WeightRegime(enum.Enum):
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"
    EQUAL_VARIANCE = "equal-variance"


class TailRegime(enum.Enum):
    FAT_TAIL = "fat-tail"
    ALL_MOMENTS = "all-moments"


@dataclass(frozen=True)
class WeightLawParams:
    """Parameters of the law of w = p(x)/q(x) for univariate Gaussians, x ~ q.

    ``mu_bar``/``sigma_bar_sq``/``boundary`` are used when the variances differ,
    ``mu_tilde``/``sigma_tilde`` when they coincide (then ``boundary`` is nan).
    """

    mu_bar: float
    sigma_bar_sq: float
    mu_tilde: float
    sigma_tilde: float
    boundary: float
    regime: WeightRegime

    @property
    def support(self):
        if self.regime is WeightRegime.BOUNDED:
            return 0.0, self.boundary
        if self.regime is WeightRegime.UNBOUNDED:
            return self.boundary, math.inf
        return 0.0, math.inf


def weight_law(p: DiagGaussian, q: DiagGaussian) -> WeightLawParams:
    """Weight-law parameters for target ``p`` and behavioral ``q`` (both 1-D)."""
    if p.dim != 1 or q.dim != 1:
        raise ValueError("weight laws are only available for univariate Gaussians")
    mu_p, mu_q = float(p.mean[0]), float(q.mean[0])
    var_p, var_q = float(p.var[0]), float(q.var[0])
    sd_q = math.sqrt(var_q)
    gap = var_q - var_p
    if gap == 0.0:
        if mu_p == mu_q:
            raise ValueError("p == q: the importance weight is identically 1")
        sd = math.sqrt(var_p)
        return WeightLawParams(
            mu_bar=math.nan,
            sigma_bar_sq=math.nan,
            mu_tilde=(mu_p - mu_q) / (2.0 * sd),
            sigma_tilde=sd / (mu_p - mu_q),
            boundary=math.nan,
            regime=WeightRegime.EQUAL_VARIANCE,
        )
    boundary = math.sqrt(var_q / var_p) * math.exp(0.5 * (mu_p - mu_q) ** 2 / gap)
    return WeightLawParams(
        mu_bar=sd_q * (mu_p - mu_q) / gap,
        sigma_bar_sq=var_p / abs(gap),
        mu_tilde=math.nan,
        sigma_tilde=math.nan,
        boundary=boundary,
        regime=WeightRegime.BOUNDED if gap > 0 else WeightRegime.UNBOUNDED,
    )


def weight_pdf(params: WeightLawParams, y):
    """Density of the importance weight at ``y`` (zero outside the support)."""
    y = np.asarray(y, dtype=float)
    lo, hi = params.support
    inside = (y > lo) & (y < hi)
    ys = np.where(inside, y, 1.0 if params.regime is WeightRegime.EQUAL_VARIANCE else np.nan)
    if params.regime is WeightRegime.EQUAL_VARIANCE:
        st = abs(params.sigma_tilde)
        dens = st / (math.sqrt(2.0 * math.pi) * ys**1.5) * np.exp(
            -0.5 * (params.mu_tilde**2 + params.sigma_tilde**2 * np.log(ys) ** 2)
        )
    else:
        a = params.boundary
        sb = math.sqrt(params.sigma_bar_sq)
        mb = params.mu_bar
        with np.errstate(divide="ignore", invalid="ignore"):
            if params.regime is WeightRegime.BOUNDED:
                log_ratio = np.log(a / ys)
                power = params.sigma_bar_sq * np.log(ys / a)
            else:
                log_ratio = np.log(ys / a)
                power = params.sigma_bar_sq * np.log(a / ys)
            # cosh(u) * exp(power) evaluated in log space to avoid overflow
            u = abs(mb) * sb * np.sqrt(2.0 * log_ratio)
            log_dens = (
                math.log(sb)
                - np.log(ys)
                - 0.5 * np.log(math.pi * log_ratio)
                - 0.5 * mb**2
                + power
                + u
                + np.log1p(np.exp(-2.0 * u))
                - math.log(2.0)
            )
            dens = np.exp(log_dens)
    return np.where(inside, dens, 0.0)


def weight_cdf(params: WeightLawParams, y):
    """Distribution function of the importance weight."""
    y = np.asarray(y, dtype=float)
    if params.regime is WeightRegime.EQUAL_VARIANCE:
        with np.errstate(divide="ignore"):
            z = abs(params.mu_tilde) + abs(params.sigma_tilde) * np.log(np.maximum(y, 0.0))
        return np.where(y > 0, ndtr(z), 0.0)
    a = params.boundary
    sb2 = params.sigma_bar_sq
    mb = params.mu_bar
    with np.errstate(divide="ignore", invalid="ignore"):
        if params.regime is WeightRegime.BOUNDED:
            s = np.sqrt(2.0 * sb2 * np.log(a / np.clip(y, 0.0, a)))
            cdf = ndtr(mb - s) + ndtr(-mb - s)
            return np.where(y <= 0, 0.0, np.where(y >= a, 1.0, cdf))
        s = np.sqrt(2.0 * sb2 * np.log(np.maximum(y, a) / a))
        cdf = ndtr(mb + s) - ndtr(mb - s)
        return np.where(y <= a, 0.0, cdf)


def critical_moment_order(params: WeightLawParams) -> float:
    """Smallest moment order that does not exist (``inf`` if all do)."""
    if params.regime is WeightRegime.UNBOUNDED:
        return params.sigma_bar_sq
    return math.inf


def weight_tail_regime(params: WeightLawParams) -> TailRegime:
    if params.regime is WeightRegime.UNBOUNDED:
        return TailRegime.FAT_TAIL
    return TailRegime.ALL_MOMENTS


def sample_weights(p: DiagGaussian, q: DiagGaussian, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``x ~ q`` and return ``p(x) / q(x)``."""
    x = q.sample(rng, size)
    return np.exp(p.log_pdf(x) - q.log_pdf(x))
