"""Variational messages of the nonlinear autoregressive transition node and
the measurement likelihood node.

Each message is exp(E_q[log factor]) under the mean-field beliefs on the
remaining edges. Expectations of the cubic drift are taken under a
first-order Taylor surrogate of the regressor phi(z) = (x, x^3, x_prev),
expanded at the mean of the belief over the previous state:

    phi(z) ~= phi(z_bar) + J (z - z_bar),   J = d(phi)/dz at z_bar.

All message math below is exact given that surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beliefs import GammaBelief, GaussianBelief, gaussian_moments
from .duffing import S, g_eval, regressor, s


@dataclass(frozen=True)
class NodeConfig:
    """Per-step node settings: current input, state-noise floor epsilon and
    whether the cubic regressor is active (False gives the linear LARX node)."""

    u: float
    epsilon: float = 1e-8
    cubic: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def n_coeffs(self) -> int:
        return 3 if self.cubic else 2


@dataclass(frozen=True)
class LinearizedG:
    """Affine surrogate of the drift at an expansion point: g value, its
    state gradient, and the regressor (which is also dg/dtheta)."""

    value: float
    grad_z: np.ndarray
    grad_theta: np.ndarray


def linearize_g(theta_mean: np.ndarray, z_mean: np.ndarray) -> LinearizedG:
    """First-order expansion of g(theta, z) around (theta_mean, z_mean)."""
    theta_mean = np.asarray(theta_mean, dtype=float)
    z_mean = np.asarray(z_mean, dtype=float)
    phi = regressor(z_mean, theta_mean.size)
    jac = regressor_jacobian(z_mean, theta_mean.size)
    return LinearizedG(
        value=float(theta_mean @ phi),
        grad_z=jac.T @ theta_mean,
        grad_theta=phi,
    )


def regressor_jacobian(z_mean: np.ndarray, n_coeffs: int = 3) -> np.ndarray:
    """d(phi)/dz at z_mean; shape (n_coeffs, 2)."""
    if n_coeffs == 3:
        return np.array([[1.0, 0.0], [3.0 * z_mean[0] ** 2, 0.0], [0.0, 1.0]])
    return np.eye(2)


def msg_theta(
    q_z: GaussianBelief,
    q_zprev: GaussianBelief,
    q_eta: GaussianBelief,
    q_gamma: GammaBelief,
    cfg: NodeConfig,
) -> GaussianBelief:
    """Message toward the coefficients; may be rank-deficient."""
    zp_mean, zp_cov = gaussian_moments(q_zprev)
    phi = regressor(zp_mean, cfg.n_coeffs)
    jac = regressor_jacobian(zp_mean, cfg.n_coeffs)
    e_gamma = q_gamma.mean
    precision = e_gamma * (np.outer(phi, phi) + jac @ zp_cov @ jac.T)
    potential = e_gamma * phi * (q_z.mean[0] - q_eta.mean[0] * cfg.u)
    return GaussianBelief.from_natural(precision, potential)


def msg_eta(
    q_z: GaussianBelief,
    q_zprev: GaussianBelief,
    q_theta: GaussianBelief,
    q_gamma: GammaBelief,
    cfg: NodeConfig,
) -> GaussianBelief:
    """Message toward the input gain (1-D; vacuous when u == 0)."""
    zp_mean, _ = gaussian_moments(q_zprev)
    phi = regressor(zp_mean, cfg.n_coeffs)
    e_gamma = q_gamma.mean
    precision = e_gamma * cfg.u**2
    potential = e_gamma * cfg.u * (q_z.mean[0] - float(q_theta.mean @ phi))
    return GaussianBelief.from_natural([[precision]], [potential])


def msg_gamma(
    q_z: GaussianBelief,
    q_zprev: GaussianBelief,
    q_theta: GaussianBelief,
    q_eta: GaussianBelief,
    cfg: NodeConfig,
) -> GammaBelief:
    """Message toward the process precision: Gamma(3/2, E[residual^2]/2)."""
    rate = 0.5 * expected_square_residual(q_z, q_zprev, q_theta, q_eta, cfg)
    if rate < 0:
        raise RuntimeError(f"negative gamma message rate {rate}: moment bookkeeping bug")
    return GammaBelief(shape=1.5, rate=rate)


def expected_square_residual(
    q_z: GaussianBelief,
    q_zprev: GaussianBelief,
    q_theta: GaussianBelief,
    q_eta: GaussianBelief,
    cfg: NodeConfig,
) -> float:
    """E[(x_next - g(theta, z_prev) - eta*u)^2] under the mean-field beliefs,
    with the affine surrogate for phi. Sum of the squared mean residual and
    every variance contribution, so nonnegative by construction."""
    z_mean, z_cov = gaussian_moments(q_z)
    zp_mean, zp_cov = gaussian_moments(q_zprev)
    th_mean, th_cov = gaussian_moments(q_theta)
    eta_mean, eta_cov = gaussian_moments(q_eta)
    phi = regressor(zp_mean, cfg.n_coeffs)
    jac = regressor_jacobian(zp_mean, cfg.n_coeffs)
    grad_z = jac.T @ th_mean
    mean_resid = z_mean[0] - float(th_mean @ phi) - eta_mean[0] * cfg.u
    return (
        mean_resid**2
        + z_cov[0, 0]
        + float(grad_z @ zp_cov @ grad_z)
        + float(phi @ th_cov @ phi)
        + float(np.trace(th_cov @ jac @ zp_cov @ jac.T))
        + cfg.u**2 * eta_cov[0, 0]
    )


def msg_forward_state(
    q_zprev: GaussianBelief,
    q_theta: GaussianBelief,
    q_eta: GaussianBelief,
    q_gamma: GammaBelief,
    cfg: NodeConfig,
) -> GaussianBelief:
    """Forward message to the new state: mean E[f], precision diag(E[gamma], 1/eps)."""
    zp_mean, _ = gaussian_moments(q_zprev)
    g_bar = g_eval(q_theta.mean, zp_mean)
    mean = S @ zp_mean + s * (g_bar + q_eta.mean[0] * cfg.u)
    precision = np.diag([q_gamma.mean, 1.0 / cfg.epsilon])
    return GaussianBelief(mean, precision)


def msg_likelihood_state(y: float, q_xi: GammaBelief) -> GaussianBelief:
    """Singular upward message from the observation onto the state."""
    e_xi = q_xi.mean
    precision = np.array([[e_xi, 0.0], [0.0, 0.0]])
    return GaussianBelief(np.array([y, 0.0]), precision)


def msg_xi(y: float, q_z: GaussianBelief) -> GammaBelief:
    """Message toward the measurement precision: Gamma(3/2, E[(y - x)^2]/2)."""
    z_mean, z_cov = gaussian_moments(q_z)
    rate = 0.5 * ((y - z_mean[0]) ** 2 + z_cov[0, 0])
    return GammaBelief(shape=1.5, rate=rate)
