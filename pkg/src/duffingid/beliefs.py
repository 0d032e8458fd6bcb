"""Exponential-family beliefs used on factor-graph edges.

Gaussians are kept in information (precision) form so that rank-deficient
likelihood messages are representable. Gammas use the shape-rate convention
(density ~ x^(shape-1) exp(-rate x), mean = shape/rate); the rate convention
makes the conjugate precision update additive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

_LOG_2PI = math.log(2.0 * math.pi)


class ImproperBeliefError(ValueError):
    """An operation required a normalizable belief but got a degenerate one."""


class GaussianBelief:
    """Multivariate Gaussian in information form.

    `precision` must be symmetric PSD. A proper belief (usable as a marginal
    posterior) additionally has strictly positive-definite precision; messages
    may be singular. Construct either from a mean or from the precision-weighted
    mean (`from_natural`); the missing representation, the covariance and the
    log-determinant are computed lazily and cached. Immutable after
    construction, so values are safe to share.
    """

    __slots__ = ("precision", "_mean", "_potential", "_proper", "_cov", "_logdet")

    def __init__(self, mean, precision):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        precision = np.atleast_2d(np.asarray(precision, dtype=float))
        if precision.shape != (mean.size, mean.size):
            raise ValueError(
                f"precision shape {precision.shape} does not match dim {mean.size}")
        # symmetrize to guard against drift from repeated updates
        self.precision = 0.5 * (precision + precision.T)
        self._mean = mean
        self._potential = None
        self._proper = None
        self._cov = None
        self._logdet = None

    @classmethod
    def from_natural(cls, precision, potential) -> "GaussianBelief":
        """Build from (Lambda, h); h must lie in the range of Lambda.

        For singular messages the mean, if ever requested, is the
        minimum-norm representative.
        """
        self = cls.__new__(cls)
        potential = np.atleast_1d(np.asarray(potential, dtype=float))
        precision = np.atleast_2d(np.asarray(precision, dtype=float))
        if precision.shape != (potential.size, potential.size):
            raise ValueError(
                f"precision shape {precision.shape} does not match dim {potential.size}")
        self.precision = 0.5 * (precision + precision.T)
        self._mean = None
        self._potential = potential
        self._proper = None
        self._cov = None
        self._logdet = None
        return self

    @classmethod
    def from_moments(cls, mean, cov) -> "GaussianBelief":
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(mean, np.linalg.inv(cov))

    @property
    def dim(self) -> int:
        return self.precision.shape[0]

    @property
    def mean(self) -> np.ndarray:
        if self._mean is None:
            if self._is_proper():
                self._mean = self._cov @ self._potential
            else:
                self._mean, *_ = np.linalg.lstsq(
                    self.precision, self._potential, rcond=None)
        return self._mean

    @property
    def potential(self) -> np.ndarray:
        """Precision-weighted mean (the natural parameter h = Lambda @ mu)."""
        if self._potential is None:
            self._potential = self.precision @ self._mean
        return self._potential

    def _is_proper(self) -> bool:
        if self._proper is None:
            self._proper = self._factorize()
        return self._proper

    def _factorize(self) -> bool:
        """Invert the precision if positive definite; cache cov and logdet.

        Dimensions up to three use closed-form adjugate inverses with a
        Sylvester-criterion PD check; these dominate the inference hot loop
        and skip the LAPACK call overhead.
        """
        p = self.precision
        d = p.shape[0]
        if d == 1:
            a = p[0, 0]
            if not a > 0.0:
                return False
            self._cov = np.array([[1.0 / a]])
            self._logdet = math.log(a)
            return True
        if d == 2:
            a, b, c = p[0, 0], p[0, 1], p[1, 1]
            det = a * c - b * b
            if not (a > 0.0 and det > 0.0):
                return False
            self._cov = np.array([[c, -b], [-b, a]]) / det
            self._logdet = math.log(det)
            return True
        if d == 3:
            a, b, c = p[0, 0], p[0, 1], p[0, 2]
            e, f = p[1, 1], p[1, 2]
            i = p[2, 2]
            c00 = e * i - f * f
            c01 = f * c - b * i
            c02 = b * f - e * c
            det = a * c00 + b * c01 + c * c02
            if not (a > 0.0 and a * e - b * b > 0.0 and det > 0.0):
                return False
            c11 = a * i - c * c
            c12 = b * c - a * f
            c22 = a * e - b * b
            self._cov = np.array(
                [[c00, c01, c02], [c01, c11, c12], [c02, c12, c22]]) / det
            self._logdet = math.log(det)
            return True
        try:
            low = np.linalg.cholesky(p)
        except np.linalg.LinAlgError:
            return False
        inv_low = np.linalg.solve(low, np.eye(d))
        cov = inv_low.T @ inv_low
        self._cov = 0.5 * (cov + cov.T)
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(low))))
        return True

    def __repr__(self) -> str:
        return f"GaussianBelief(mean={self.mean!r}, precision={self.precision!r})"


@dataclass(frozen=True)
class GammaBelief:
    """Gamma belief in shape-rate form.

    Posteriors need shape > 0 and rate > 0. Messages may carry rate 0
    (improper; only legal when combined with a proper prior).
    """

    shape: float
    rate: float

    def __post_init__(self):
        if not self.shape > 0:
            raise ValueError(f"gamma shape must be positive, got {self.shape}")
        if self.rate < 0:
            raise ValueError(f"gamma rate must be nonnegative, got {self.rate}")

    @property
    def is_proper(self) -> bool:
        return self.rate > 0

    @property
    def mean(self) -> float:
        if not self.is_proper:
            raise ImproperBeliefError("moments undefined for improper belief")
        return self.shape / self.rate

    @property
    def mean_log(self) -> float:
        """E[log x] = digamma(shape) - log(rate)."""
        if not self.is_proper:
            raise ImproperBeliefError("moments undefined for improper belief")
        return float(special.digamma(self.shape) - math.log(self.rate))


def combine_gaussian(a: GaussianBelief, b: GaussianBelief) -> GaussianBelief:
    """Normalized product of two Gaussian densities (information-form addition)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    out = GaussianBelief.from_natural(
        a.precision + b.precision, a.potential + b.potential)
    if not out._is_proper():
        raise ImproperBeliefError("improper posterior")
    return out


def combine_gamma(a: GammaBelief, b: GammaBelief) -> GammaBelief:
    """Normalized product of two Gamma densities."""
    shape = a.shape + b.shape - 1.0
    rate = a.rate + b.rate
    if shape <= 0 or rate <= 0:
        raise ImproperBeliefError("improper posterior")
    return GammaBelief(shape, rate)


def gaussian_moments(g: GaussianBelief) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a proper Gaussian belief."""
    if not g._is_proper():
        raise ImproperBeliefError("moments undefined for improper belief")
    return g.mean, g._cov


def logdet_precision(g: GaussianBelief) -> float:
    """log det Lambda of a proper Gaussian belief."""
    if not g._is_proper():
        raise ImproperBeliefError("log-determinant undefined for improper belief")
    return g._logdet


def entropy_gaussian(g: GaussianBelief) -> float:
    """Differential entropy 0.5*(d*(1+log 2pi) + log det Sigma)."""
    if not g._is_proper():
        raise ImproperBeliefError("entropy undefined for improper belief")
    return 0.5 * (g.dim * (1.0 + _LOG_2PI) - g._logdet)


def entropy_gamma(g: GammaBelief) -> float:
    """Differential entropy of a Gamma(shape, rate) density."""
    if not g.is_proper:
        raise ImproperBeliefError("entropy undefined for improper belief")
    a = g.shape
    return float(a - math.log(g.rate) + special.gammaln(a) + (1.0 - a) * special.digamma(a))
