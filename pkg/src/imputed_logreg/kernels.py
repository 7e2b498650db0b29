"""Scalar kernels: the logistic link, the Gaussian CDF, and the proximal
operator / Moreau envelope of the signed logistic loss ``u -> rho(-y u)``.

All functions accept scalars or numpy arrays and broadcast.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .errors import NonFinite

PROX_TOL = 1e-13
PROX_MAX_ITER = 200


def logistic_rho(t):
    """rho(t) = log(1 + e^t), evaluated without overflow."""
    t = np.asarray(t, dtype=float)
    mid = np.clip(t, -30.0, 30.0)
    out = np.where(
        t > 30.0,
        t + np.exp(-np.abs(t)),
        np.where(t < -30.0, np.exp(-np.abs(t)), np.log1p(np.exp(mid))),
    )
    return out[()] if out.ndim == 0 else out


def logistic_rho_prime(t):
    """rho'(t) = 1 / (1 + e^{-t})."""
    return expit(t)


def logistic_rho_second(t):
    """rho''(t) = rho'(t) rho'(-t).

    The product form keeps full relative precision in both tails, where
    ``s * (1 - s)`` would cancel.
    """
    return expit(t) * expit(-np.asarray(t, dtype=float))


def gaussian_cdf(t):
    return ndtr(t)


@dataclass(frozen=True)
class SignedLogisticLoss:
    """f(u) = rho(-label * u) for a label in {+1, -1}."""

    label: int

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label!r}")

    def __call__(self, u):
        return logistic_rho(-self.label * np.asarray(u, dtype=float))

    def derivative(self, u):
        return -self.label * logistic_rho_prime(-self.label * np.asarray(u, dtype=float))

    def second_derivative(self, u):
        return logistic_rho_second(-self.label * np.asarray(u, dtype=float))


@dataclass(frozen=True)
class ProxResult:
    minimizer: np.ndarray
    envelope: np.ndarray
    iterations: int


def _prox_shift_plus(x, gamma):
    """Return d = prox(x) - x for the label +1 loss u -> rho(-u).

    Solves h(d) = gamma*d - rho'(-(x + d)) = 0. The root lies in
    (0, 1/gamma) because 0 < rho' < 1, and h is strictly increasing, so a
    Newton step that leaves the current bracket is replaced by bisection.
    Working in the shift d rather than in u keeps gamma*d exact when |x|
    is large. Only unconverged entries are iterated.
    """
    x, gamma = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(gamma, dtype=float))
    shape = x.shape
    x = x.ravel()
    gamma = gamma.ravel()
    lo = np.zeros_like(x)
    hi = expit(-x) / gamma
    d = np.minimum(expit(-x) / (gamma + logistic_rho_second(x)), hi)
    prev = hi.copy()
    idx = np.arange(x.size)
    iters = 0
    while idx.size and iters < PROX_MAX_ITER:
        iters += 1
        xa, ga, da = x[idx], gamma[idx], d[idx]
        u = xa + da
        h = ga * da - expit(-u)
        done = np.abs(h) <= PROX_TOL * np.maximum(1.0, ga * da)
        la = np.where(h < 0, da, lo[idx])
        ha = np.where(h > 0, da, hi[idx])
        stuck = ha - la <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(ha))
        keep = ~(done | stuck)
        idx, xa, ga, da, u, h, la, ha = (a[keep] for a in (idx, xa, ga, da, u, h, la, ha))
        lo[idx], hi[idx] = la, ha
        newton = h / (ga + logistic_rho_second(u))
        step = da - newton
        # bisect when Newton leaves the bracket or fails to halve the last move
        bad = ~((step > la) & (step < ha)) | (2.0 * np.abs(newton) > prev[idx])
        nxt = np.where(bad, 0.5 * (la + ha), step)
        prev[idx] = np.abs(nxt - da)
        d[idx] = nxt
    return d.reshape(shape), iters


def _check_finite(x, gamma):
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(gamma))):
        raise NonFinite("x and gamma must be finite")
    if np.any(gamma <= 0):
        raise ValueError("gamma must be positive")
    return x, gamma


def _as_output(a):
    a = np.asarray(a)
    return a[()] if a.ndim == 0 else a


def prox_logistic(y, x, gamma):
    """Proximal operator of u -> rho(-y u) with curvature ``gamma``.

    Returns the minimizer of ``rho(-y u) + gamma/2 (u - x)^2`` together with
    the minimal value (the Moreau envelope).

    Parameters
    ----------
    y : {+1, -1} or array of signs
    x : float or array
    gamma : float or array, positive

    Returns
    -------
    ProxResult
    """
    x, gamma = _check_finite(x, gamma)
    y = np.asarray(y, dtype=float)
    # u = y * w where w solves the label +1 problem at y * x
    d, iters = _prox_shift_plus(y * x, gamma)
    w = y * x + d
    u = y * w
    env = logistic_rho(-w) + 0.5 * gamma * d * d
    return ProxResult(minimizer=_as_output(u), envelope=_as_output(env), iterations=iters)


def moreau_envelope_derivatives(y, x, gamma):
    """Partial derivatives of the Moreau envelope of u -> rho(-y u).

    Returns ``(d_x, d_gamma)`` with ``d_x = f'(u_hat) = gamma (x - u_hat)`` and
    ``d_gamma = (u_hat - x)^2 / 2``.
    """
    x, gamma = _check_finite(x, gamma)
    y = np.asarray(y, dtype=float)
    d, _ = _prox_shift_plus(y * x, gamma)
    return _as_output(-gamma * y * d), _as_output(0.5 * d * d)


def prox_stationarity(y, x, gamma, u):
    """|f'(u) + gamma (u - x)| for f(u) = rho(-y u)."""
    y = np.asarray(y, dtype=float)
    return np.abs(-y * expit(-y * u) + gamma * (u - x))
