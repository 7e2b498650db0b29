"""Deterministic high-dimensional asymptotics of ridge-regularised logistic
regression fitted on a corrupted design ``Z`` while labels come from ``X``.

The problem is summarised by ``(lam, delta, R, alpha_c, alpha_2)``. The
estimator's limiting state ``(sigma, xi)`` together with the dual variable
``gamma`` solve a three-equation system, the stationarity conditions of a
convex-concave scalar loss ``L(sigma, xi, gamma)``.

Expectations over ``(1 + Y) g(Y, Z1, Z2)`` are folded onto the ``Y = +1``
branch: with ``p_plus(z1) = P(Y = 1 | Z1 = z1)`` they equal
``2 E[p_plus(Z1) g(+1, Z1, Z2)]``.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr

from .errors import DegenerateSigma, DegenerateState, InvalidParams, NotConverged
from .kernels import _prox_shift_plus, logistic_rho_prime, prox_logistic
from .quadrature import make_rule
from .optim import golden_section_min

PARAM_BOX = (1e-6, 1e6)


@dataclass(frozen=True)
class ProblemParams:
    lam: float
    delta: float
    R: float
    alpha_c: float
    alpha_2: float

    def __post_init__(self):
        lo, hi = PARAM_BOX
        for name in ("lam", "delta", "R", "alpha_c", "alpha_2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and lo <= v <= hi):
                raise InvalidParams(f"{name}={v!r} outside [{lo:g}, {hi:g}]")
        if self.alpha_c ** 2 > self.alpha_2 * (1 + 1e-12):
            raise InvalidParams(
                f"alpha_c={self.alpha_c} exceeds sqrt(alpha_2)={math.sqrt(self.alpha_2)}"
            )

    @classmethod
    def single_imputation(cls, lam, delta, R, alpha):
        """Zero-fill imputation of MCAR(alpha) data: the (alpha, alpha) class."""
        return cls(lam, delta, R, alpha, alpha)

    @classmethod
    def prior_imputation(cls, lam, delta, R, alpha):
        """Imputation by fresh draws of MCAR(alpha) data: the (alpha, 1) class."""
        return cls(lam, delta, R, alpha, 1.0)

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    @property
    def label_noise_free(self):
        return self.alpha_c ** 2 >= self.alpha_2


@dataclass(frozen=True)
class StatePair:
    sigma: float
    xi: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class SolverOptions:
    damping: float = 0.5
    max_sweeps: int = 500
    tol: float = 1e-9
    # switch to a Newton-type polish once the sweep residual drops below this
    polish_below: float = 0.1
    polish: bool = True
    init: tuple = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class FixedPoint:
    sigma_star: float
    xi_star: float
    gamma_star: float
    loss_value: float
    residuals: tuple
    iterations: int
    converged: bool
    params: ProblemParams = field(repr=False, default=None)

    @property
    def state(self):
        return StatePair(self.sigma_star, self.xi_star)

    @property
    def max_residual(self):
        return max(abs(r) for r in self.residuals)


def label_prob_plus(params, z1, rule=None):
    """P(Y = +1 | Z1 = z1) in the scalar model."""
    z1 = np.asarray(z1, dtype=float)
    R = params.R
    if params.label_noise_free:
        return logistic_rho_prime(R * z1)
    rule = rule or make_rule()
    c = params.alpha_c / math.sqrt(params.alpha_2)
    s = math.sqrt(max(0.0, 1.0 - params.alpha_c ** 2 / params.alpha_2))
    g = rule.nodes.reshape((1,) * z1.ndim + (-1,))
    vals = logistic_rho_prime(c * R * z1[..., None] + s * R * g)
    out = vals @ rule.weights
    return out[()] if out.ndim == 0 else out


class _Grid:
    """Quadrature grid over (Z1, Z2) with the label probabilities cached."""

    def __init__(self, params, rule):
        self.params = params
        self.rule = rule
        m = rule.order
        self.z1 = rule.nodes.reshape(m, 1)
        self.z2 = rule.nodes.reshape(1, m)
        self.w = np.outer(rule.weights, rule.weights)
        self.p_plus = label_prob_plus(params, self.z1, rule)
        self.wp = self.w * self.p_plus

    def v(self, sigma, xi):
        a2 = math.sqrt(self.params.alpha_2)
        return xi * self.params.R * a2 * self.z1 + sigma * a2 * self.z2

    def moments(self, sigma, xi, gamma):
        """(E1, E2, E3) with E1 = E[(1+Y)(u-V)^2], E2 = E[(1+Y) Z2 f'(u)],
        E3 = E[(1+Y) Z1 f'(u)], u the label +1 prox of V, f'(u) = -rho'(-u)."""
        d, _ = _prox_shift_plus(self.v(sigma, xi), gamma)
        e1 = 2.0 * np.sum(self.wp * d * d)
        # f'(u) = -gamma * d at the prox point
        e2 = -2.0 * gamma * np.sum(self.wp * self.z2 * d)
        e3 = -2.0 * gamma * np.sum(self.wp * self.z1 * d)
        return e1, e2, e3

    def residuals(self, sigma, xi, gamma):
        p = self.params
        e1, e2, e3 = self.moments(sigma, xi, gamma)
        a2 = p.alpha_2
        r1 = sigma ** 2 - p.delta / a2 * e1
        r2 = -gamma * sigma * a2 / p.delta + sigma * p.lam + math.sqrt(a2) * e2
        r3 = xi * p.lam * p.R ** 2 + p.R * math.sqrt(a2) * e3
        return r1, r2, r3


def asymptotic_loss(params, sigma, xi, gamma, rule=None):
    """L(sigma, xi, gamma) with the label expectation expanded over both signs."""
    if sigma < 0 or gamma < 0:
        raise ValueError("sigma and gamma must be nonnegative")
    rule = rule or make_rule()
    p = params
    quad = p.lam * (sigma ** 2 + xi ** 2 * p.R ** 2) / 2.0 - p.alpha_2 * gamma * sigma ** 2 / (2.0 * p.delta)
    if gamma == 0:
        # inf_u rho(-Y u) = 0
        return quad
    grid = _Grid(params, rule)
    v = grid.v(sigma, xi)
    m_plus = prox_logistic(1, v, gamma).envelope
    m_minus = prox_logistic(-1, v, gamma).envelope
    pp = grid.p_plus
    return quad + float(np.sum(grid.w * (pp * m_plus + (1.0 - pp) * m_minus)))


def system_expectations(params, sigma, xi, gamma, rule=None):
    """(E[(1+Y)(u-V)^2], E[(1+Y) Z2 f'_Y(u)], E[(1+Y) Z1 f'_Y(u)]) where u is
    the prox of f_Y(u) = rho(-Y u) at V."""
    if sigma < 0 or gamma <= 0:
        raise ValueError("sigma must be nonnegative and gamma positive")
    return _Grid(params, rule or make_rule()).moments(sigma, xi, gamma)


def system_residual(params, sigma, xi, gamma, rule=None):
    """Residuals of the three stationarity equations at (sigma, xi, gamma)."""
    if sigma <= 0 or gamma <= 0:
        raise ValueError("sigma and gamma must be positive")
    return _Grid(params, rule or make_rule()).residuals(sigma, xi, gamma)


def _bracket_root(fn, x0, step, lower=None, max_expand=80):
    """Find [a, b] containing a sign change of ``fn`` near ``x0``."""
    a, b = x0 - step, x0 + step
    if lower is not None:
        a = max(a, lower)
    fa, fb = fn(a), fn(b)
    for _ in range(max_expand):
        if fa * fb <= 0:
            return a, b
        step *= 2.0
        if abs(fa) < abs(fb):
            a = a - step if lower is None else max(lower, a - step)
            fa = fn(a)
        else:
            b = b + step
            fb = fn(b)
    return None


def _solve_gamma(grid, sigma, xi, gamma0):
    # residual 2 is decreasing in gamma; search on log gamma
    def fn(t):
        return grid.residuals(sigma, xi, math.exp(t))[1] / sigma

    br = _bracket_root(fn, math.log(gamma0), 0.5)
    if br is None:
        return gamma0
    return math.exp(optimize.brentq(fn, *br, xtol=1e-14, rtol=1e-15))


def _solve_xi(grid, sigma, xi0, gamma):
    def fn(x):
        return grid.residuals(sigma, x, gamma)[2]

    br = _bracket_root(fn, xi0, max(0.25, 0.25 * abs(xi0)))
    if br is None:
        return xi0
    return optimize.brentq(fn, *br, xtol=1e-14, rtol=1e-15)


def _polish(grid, sigma, xi, gamma):
    def fun(z):
        return grid.residuals(math.exp(z[0]), z[1], math.exp(z[2]))

    sol = optimize.root(fun, [math.log(sigma), xi, math.log(gamma)], method="hybr",
                        options={"xtol": 1e-15})
    s, x, g = math.exp(sol.x[0]), float(sol.x[1]), math.exp(sol.x[2])
    if not all(np.isfinite((s, x, g))):
        return None
    # sigma -> 0, gamma -> inf makes every residual vanish trivially; only
    # accept a polish that stays in the neighbourhood of the sweep iterate
    if not (0.2 < s / sigma < 5 and 0.2 < g / gamma < 5):
        return None
    return s, x, g


def solve_fixed_point(params, rule=None, opts=None, init=None):
    """Solve the stationarity system for (sigma*, xi*, gamma*).

    Damped sweeps: sigma from the gamma-stationarity equation, then gamma and
    xi by one-dimensional root finds of the sigma- and xi-equations. Once the
    residual is small the iterate is refined with a Powell hybrid step on the
    full system.

    Raises
    ------
    NotConverged
        The best iterate is attached as ``err.result``.
    DegenerateSigma
        sigma fell below 1e-10.
    """
    rule = rule or make_rule()
    opts = opts or SolverOptions()
    grid = _Grid(params, rule)
    s, x, g = init if init is not None else opts.init
    damp = opts.damping
    res = grid.residuals(s, x, g)
    prev = max(map(abs, res))
    best = (prev, s, x, g, res)
    sweeps = 0
    converged = prev <= opts.tol

    while not converged and sweeps < opts.max_sweeps:
        sweeps += 1
        e1, _, _ = grid.moments(s, x, g)
        s_new = math.sqrt(max(params.delta / params.alpha_2 * e1, 0.0))
        s = (1 - damp) * s + damp * s_new
        if s < 1e-10:
            fp = _make_fixed_point(params, rule, s, x, g, best[4], sweeps, False)
            raise DegenerateSigma(f"sigma collapsed to {s:.3e}", fp)
        g = (1 - damp) * g + damp * _solve_gamma(grid, s, x, g)
        x = (1 - damp) * x + damp * _solve_xi(grid, s, x, g)
        res = grid.residuals(s, x, g)
        cur = max(map(abs, res))
        if cur < best[0]:
            best = (cur, s, x, g, res)
        if cur <= opts.tol:
            converged = True
            break
        if opts.polish and (cur < opts.polish_below or sweeps % 10 == 0):
            pol = _polish(grid, s, x, g)
            if pol is not None:
                pres = grid.residuals(*pol)
                pcur = max(map(abs, pres))
                if pcur < best[0]:
                    best = (pcur, *pol, pres)
                if pcur <= opts.tol:
                    converged = True
                    break
        if cur > 1.5 * prev:
            damp = max(damp / 2.0, 0.05)
        prev = cur

    _, s, x, g, res = best
    fp = _make_fixed_point(params, rule, s, x, g, res, sweeps, converged)
    if not converged:
        raise NotConverged(
            f"fixed point not converged after {sweeps} sweeps (max residual {fp.max_residual:.3e})", fp
        )
    return fp


def _make_fixed_point(params, rule, s, x, g, res, sweeps, converged):
    return FixedPoint(
        sigma_star=float(s),
        xi_star=float(x),
        gamma_star=float(g),
        loss_value=asymptotic_loss(params, s, x, g, rule),
        residuals=tuple(float(r) for r in res),
        iterations=sweeps,
        converged=converged,
        params=params,
    )


def _sign_half_mass(R):
    """2 E[rho'(R G) 1{G < 0}], by adaptive quadrature on the half line."""
    val, _ = integrate.quad(
        lambda g: logistic_rho_prime(R * g) * math.exp(-0.5 * g * g) / math.sqrt(2 * math.pi),
        -np.inf, 0.0, epsabs=1e-14, epsrel=1e-13,
    )
    return 2.0 * val


def phi_test(params, state, rule=None):
    """Asymptotic probability that sign(<z_new, theta>) differs from y_new."""
    rule = rule or make_rule()
    sigma, xi = state.sigma, state.xi
    R, ac, a2 = params.R, params.alpha_c, params.alpha_2
    den = math.sqrt(sigma ** 2 * a2 + max(a2 - ac ** 2, 0.0) * xi ** 2 * R ** 2)
    if den < 1e-14:
        if xi == 0:
            return 0.5
        half = _sign_half_mass(R)
        return half if xi > 0 else 1.0 - half
    g = rule.nodes
    return float(2.0 * rule.weights @ (logistic_rho_prime(R * g) * ndtr(-xi * R * ac * g / den)))


def phi_angle(state, R):
    """Angle between the estimator and the truth, in [0, pi]."""
    sigma, xi = state.sigma, state.xi
    if sigma == 0 and xi == 0:
        raise DegenerateState("angle undefined at sigma = xi = 0")
    c = xi * R / math.hypot(sigma, xi * R)
    return math.acos(min(1.0, max(-1.0, c)))


@dataclass
class LambdaSearch:
    lambda_opt: float
    test_error: float
    fixed_point: FixedPoint
    n_evals: int
    history: list


def optimal_lambda(base, lambda_range=(1e-3, 1e3), rule=None, tol=1e-4, opts=None):
    """Minimise T(lam) = phi_test(sigma*(lam), xi*(lam)) by golden-section on log lam.

    Each evaluation solves the fixed point, warm-started from the previous one.
    """
    lo, hi = lambda_range
    if not (1e-3 <= lo < hi <= 1e3):
        raise ValueError("lambda_range must lie inside [1e-3, 1e3]")
    rule = rule or make_rule()
    cache = {}

    def T(t):
        if t in cache:
            return cache[t][0]
        params = base.with_lambda(math.exp(t))
        # warm start from the closest lambda solved so far
        init = None
        if cache:
            near = min(cache, key=lambda u: abs(u - t))
            if abs(near - t) < 1.5:
                f = cache[near][1]
                init = (f.sigma_star, f.xi_star, f.gamma_star)
        try:
            fp = solve_fixed_point(params, rule, opts, init=init)
        except (NotConverged, DegenerateSigma):
            if init is None:
                raise
            fp = solve_fixed_point(params, rule, opts)
        val = phi_test(params, fp.state, rule)
        cache[t] = (val, fp)
        return val

    res = golden_section_min(T, math.log(lo), math.log(hi), tol=tol)
    # endpoints, in case the minimiser sits on the boundary
    best_t = res.x
    a_end, b_end = res.history[-1][:2]
    # the bracket never moved off a boundary: check that endpoint too
    for t, edge in ((math.log(lo), a_end), (math.log(hi), b_end)):
        if t == edge and T(t) < cache[best_t][0]:
            best_t = t
    val, fp = cache[best_t]
    return LambdaSearch(
        lambda_opt=math.exp(best_t), test_error=val, fixed_point=fp,
        n_evals=len(cache), history=res.history,
    )
