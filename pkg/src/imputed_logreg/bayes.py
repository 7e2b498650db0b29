"""Conjectured Bayes-optimal baseline for MCAR(alpha) logistic regression.

The replica-symmetric potential

    f_RS(q, r) = psi(r) + delta * Psi(q) - r q / 2

is evaluated for a Gaussian prior N(0, varrho^2) on the coordinates of the
truth and for the missing-data label channel

    P(y | s) = E_G rho'(y sqrt(alpha) s + y varrho sqrt(1 - alpha) G).

The overlap ``q*`` is the maximiser over ``q`` of ``min_r f_RS(q, r)``;
``psi`` is convex in ``r`` so the inner extremum is a minimum. These are
conjectured values for the missing-data model, not proven ones.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import InvalidParams, NotConverged
from .kernels import logistic_rho_prime
from .optim import golden_section_max, golden_section_min
from .quadrature import make_rule


@dataclass(frozen=True)
class BayesParams:
    alpha: float
    delta: float
    varrho: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidParams(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not self.delta > 0 or not self.varrho > 0:
            raise InvalidParams("delta and varrho must be positive")


@dataclass(frozen=True)
class BayesSolution:
    q_star: float
    r_star: float
    rs_value: float
    test_error: float
    angle_error: float
    at_boundary: bool
    params: BayesParams


def psi_prior(r, varrho):
    """Prior term for Theta ~ N(0, varrho^2).

    Completing the square in Theta_1 gives
    ``log E_{Theta_1} exp(b Theta_1 - r Theta_1^2 / 2)
    = -log(1 + r varrho^2) / 2 + varrho^2 b^2 / (2 (1 + r varrho^2))``
    with ``b = r Theta + sqrt(r) G``; averaging ``E b^2 = r^2 varrho^2 + r``
    leaves ``(r varrho^2 - log(1 + r varrho^2)) / 2``.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    a = r * varrho ** 2
    return 0.5 * (a - math.log1p(a))


def channel_prob(alpha, varrho, y, s, rule=None):
    """P_Y^(alpha)(y | s), vectorised over ``s``."""
    s = np.asarray(s, dtype=float)
    if alpha == 1:
        return logistic_rho_prime(y * s)
    rule = rule or make_rule()
    g = rule.nodes.reshape((1,) * s.ndim + (-1,))
    vals = logistic_rho_prime(y * math.sqrt(alpha) * s[..., None] + y * varrho * math.sqrt(1 - alpha) * g)
    out = vals @ rule.weights
    return out[()] if out.ndim == 0 else out


def psi_channel(q, params, rule=None, channel=None):
    """Psi(q) = E_{V, W, Y} log E_{W1} P(Y | sqrt(q) V + sqrt(varrho^2 - q) W1).

    ``channel(y, s)`` overrides the missing-data channel; it must be
    vectorised in ``s``.
    """
    vr2 = params.varrho ** 2
    if not -1e-12 <= q <= vr2 * (1 + 1e-12):
        raise ValueError(f"q={q} outside [0, varrho^2]")
    q = min(max(q, 0.0), vr2)
    rule = rule or make_rule()
    if channel is None:
        def channel(y, s):
            return channel_prob(params.alpha, params.varrho, y, s, rule)

    m = rule.order
    v = rule.nodes.reshape(m, 1)
    w = rule.nodes.reshape(1, m)
    sq, sr = math.sqrt(q), math.sqrt(vr2 - q)
    total = 0.0
    for y in (1, -1):
        # rows index V; columns serve both as W (label weight) and W1 (inner average)
        weight = channel(y, sq * v + sr * w)
        inner = weight @ rule.weights
        with np.errstate(divide="ignore"):
            logs = np.log(inner).reshape(m, 1)
        contrib = np.where(weight > 0, weight * logs, 0.0)
        total += float(rule.weights @ contrib @ rule.weights)
    return total


def f_rs(q, r, params, rule=None, psi_value=None):
    if psi_value is None:
        psi_value = psi_channel(q, params, rule)
    return psi_prior(r, params.varrho) + params.delta * psi_value - r * q / 2.0


def _inf_over_r(q, varrho, r_start=10.0, tol=1e-12):
    """min_{r >= 0} psi(r) - r q / 2 by golden-section with r_max doubling."""
    if q <= 0:
        return 0.0, 0.0
    vr2 = varrho ** 2

    def h(r):
        return psi_prior(r, varrho) - r * q / 2.0

    r_max = float(r_start)
    for _ in range(200):
        res = golden_section_min(h, 0.0, r_max, tol=tol * r_max, max_iter=400)
        if res.x < 0.9 * r_max:
            return res.x, res.fx
        r_max *= 2.0
    raise NotConverged(f"inner minimiser over r not bracketed for q={q} (varrho^2={vr2})")


def solve_overlap(params, rule=None, grid_points=41, tol=1e-10, channel=None):
    """Saddle of the replica-symmetric potential.

    A coarse grid over ``q`` locates the basin and golden-section refines
    it. ``at_boundary`` flags ``q* = 0``, which is legitimate for small
    ``delta``. ``channel`` is passed through to :func:`psi_channel`.
    """
    rule = rule or make_rule()
    vr2 = params.varrho ** 2
    q_hi = vr2 * (1 - 1e-9)
    cache = {}

    def potential(q):
        if q not in cache:
            r_opt, hval = _inf_over_r(q, params.varrho, r_start=10.0 * params.delta)
            cache[q] = (hval + params.delta * psi_channel(q, params, rule, channel), r_opt)
        return cache[q][0]

    grid = np.linspace(0.0, q_hi, grid_points)
    vals = [potential(float(q)) for q in grid]
    k = int(np.argmax(vals))
    a = float(grid[max(k - 1, 0)])
    b = float(grid[min(k + 1, grid_points - 1)])
    res = golden_section_max(potential, a, b, tol=tol * vr2)
    q_star, best = res.x, res.fx
    for q in (a, b):
        if potential(q) > best:
            q_star, best = q, potential(q)
    r_star = cache[q_star][1]
    return BayesSolution(
        q_star=q_star,
        r_star=r_star,
        rs_value=best,
        test_error=bayes_test_error(q_star, params, rule),
        angle_error=bayes_angle_error(q_star, params.varrho),
        at_boundary=q_star <= tol * vr2,
        params=params,
    )


def _sign_half_mass(varrho):
    val, _ = integrate.quad(
        lambda g: logistic_rho_prime(varrho * g) * math.exp(-0.5 * g * g) / math.sqrt(2 * math.pi),
        -np.inf, 0.0, epsabs=1e-14, epsrel=1e-13,
    )
    return 2.0 * val


def bayes_test_error(q_star, params, rule=None):
    """Prediction error of the posterior-marginal classifier at overlap q*."""
    rule = rule or make_rule()
    a, vr = params.alpha, params.varrho
    if q_star < 1e-12:
        return 0.5
    arg = a * q_star * vr ** 2 - a ** 2 * q_star ** 2
    if arg < 1e-14:
        # limit of Phi(-c G) as c -> +inf
        return _sign_half_mass(vr)
    g = rule.nodes
    c = a * q_star / math.sqrt(arg)
    return float(2.0 * rule.weights @ (logistic_rho_prime(vr * g) * ndtr(-c * g)))


def bayes_angle_error(q_star, varrho):
    c = math.sqrt(max(q_star, 0.0)) / varrho
    return math.acos(min(1.0, c))
