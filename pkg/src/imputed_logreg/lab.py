"""Monte Carlo laboratory: designs from the universality class, logistic
labels, MCAR masking and imputation, error-in-variables corruption, and a
Newton solver for ridge-regularised logistic regression.

Every random operation takes an integer seed and is a pure function of it.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import linalg
from scipy.special import expit

from .errors import ConstraintViolated, NonPositiveLambda, NotConverged
from .kernels import logistic_rho, logistic_rho_second
from .state_evolution import ProblemParams, StatePair, phi_angle

DESIGN_KINDS = ("gaussian", "rademacher", "uniform")
OBSERVATION_KINDS = ("full", "single", "prior", "eiv")


def derive_seed(master, *path):
    """64-bit seed for the substream ``path`` of ``master``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class DesignSpec:
    kind: str
    n: int
    p: int

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}; expected one of {DESIGN_KINDS}")
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")

    @property
    def entry_variance(self):
        return 1.0 / self.p

    def with_n(self, n):
        return DesignSpec(self.kind, int(n), self.p)


def _draw_entries(kind, shape, p, rng):
    if kind == "gaussian":
        return rng.standard_normal(shape) / math.sqrt(p)
    if kind == "rademacher":
        return (2.0 * rng.integers(0, 2, size=shape) - 1.0) / math.sqrt(p)
    if kind == "uniform":
        b = math.sqrt(3.0 / p)
        return rng.uniform(-b, b, size=shape)
    raise ValueError(f"unknown design kind {kind!r}")


def sample_design(spec, seed):
    """n x p matrix with i.i.d. mean-zero entries of variance 1/p."""
    return _draw_entries(spec.kind, (spec.n, spec.p), spec.p, np.random.default_rng(seed))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    theta0: np.ndarray
    R: float

    @classmethod
    def make(cls, p, R, kind="ones", n=None, seed=None, K=10.0, tau=0.01):
        """Truth with ||theta0||_2 = R sqrt(p).

        ``kind`` is ``"ones"`` (all-ones direction) or ``"gaussian"`` (a
        renormalised i.i.d. N(0, 1) draw). When ``n`` is given the spread
        condition ``||theta0||_inf <= K n^(1/6 - tau)`` is enforced.
        """
        if kind == "ones":
            theta = np.ones(p)
        elif kind == "gaussian":
            theta = np.random.default_rng(seed).standard_normal(p)
        else:
            raise ValueError(f"unknown truth kind {kind!r}")
        theta = theta * (R * math.sqrt(p) / np.linalg.norm(theta))
        if n is not None:
            bound = K * n ** (1.0 / 6.0 - tau)
            if np.max(np.abs(theta)) > bound:
                raise ConstraintViolated(
                    f"||theta0||_inf = {np.max(np.abs(theta)):.3g} exceeds {bound:.3g}"
                )
        theta.setflags(write=False)
        return cls(theta0=theta, R=float(R))


def generate_labels(design, truth, seed):
    """y_i = +1 iff U_i <= rho'(<x_i, theta0>)."""
    u = np.random.default_rng(seed).uniform(size=design.shape[0])
    return np.where(u <= expit(design @ truth.theta0), 1.0, -1.0)


def mcar_mask(shape, alpha, seed):
    """Boolean mask of observed entries, each kept with probability alpha."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1:
        return np.ones(shape, dtype=bool)
    return np.random.default_rng(seed).uniform(size=shape) < alpha


def apply_mcar_single(design, alpha, seed):
    """Zero-fill the entries missing under MCAR(alpha)."""
    return np.where(mcar_mask(design.shape, alpha, seed), design, 0.0)


def apply_mcar_prior(design, alpha, spec, seed):
    """Replace missing entries with fresh draws from the design distribution.

    Uses the same mask as :func:`apply_mcar_single` for the same seed.
    """
    mask = mcar_mask(design.shape, alpha, seed)
    if mask.all():
        return design.copy()
    fill = _draw_entries(spec.kind, design.shape, design.shape[1], np.random.default_rng([seed, 1]))
    return np.where(mask, design, fill)


def make_eiv(design, alpha_c, alpha_2, seed):
    """Z = alpha_c X + sqrt(alpha_2 - alpha_c^2) W with W i.i.d. N(0, 1/p)."""
    if alpha_c ** 2 > alpha_2 * (1 + 1e-12):
        raise ConstraintViolated(f"alpha_c={alpha_c} exceeds sqrt(alpha_2)={math.sqrt(alpha_2)}")
    scale = math.sqrt(max(alpha_2 - alpha_c ** 2, 0.0))
    if scale == 0:
        return alpha_c * design
    w = np.random.default_rng(seed).standard_normal(design.shape) / math.sqrt(design.shape[1])
    return alpha_c * design + scale * w


@dataclass(frozen=True)
class Observation:
    """How the statistician's matrix Z is produced from the design X.

    For ``single``/``prior`` ``alpha`` is the keep probability; for ``eiv``
    ``alpha`` is the cross-moment ``alpha_c`` and ``alpha_2`` the second moment.
    """

    kind: str = "single"
    alpha: float = 1.0
    alpha_2: float = 1.0

    def __post_init__(self):
        if self.kind not in OBSERVATION_KINDS:
            raise ValueError(f"unknown observation kind {self.kind!r}")

    def apply(self, design, spec, seed):
        if self.kind == "full":
            return design.copy()
        if self.kind == "single":
            return apply_mcar_single(design, self.alpha, seed)
        if self.kind == "prior":
            return apply_mcar_prior(design, self.alpha, spec, seed)
        return make_eiv(design, self.alpha, self.alpha_2, seed)

    @property
    def moments(self):
        """(alpha_c, alpha_2) of the universality class of (X, Z)."""
        return {
            "full": (1.0, 1.0),
            "single": (self.alpha, self.alpha),
            "prior": (self.alpha, 1.0),
            "eiv": (self.alpha, self.alpha_2),
        }[self.kind]

    def problem_params(self, lam, delta, R):
        return ProblemParams(lam, delta, R, *self.moments)


@dataclass(eq=False)
class ExperimentDataset:
    design: np.ndarray
    observed: np.ndarray
    labels: np.ndarray
    truth: GroundTruth
    seed: int
    spec: DesignSpec
    observation: Observation
    mask: np.ndarray = field(default=None, repr=False)


def make_dataset(spec, truth, observation, seed):
    """Design, labels (from the design) and observed matrix for one trial."""
    x = sample_design(spec, derive_seed(seed, 0))
    y = generate_labels(x, truth, derive_seed(seed, 1))
    obs_seed = derive_seed(seed, 2)
    z = observation.apply(x, spec, obs_seed)
    mask = None
    if observation.kind in ("single", "prior"):
        mask = mcar_mask(x.shape, observation.alpha, obs_seed)
    return ExperimentDataset(x, z, y, truth, int(seed), spec, observation, mask)


def ridge_loss(theta, Z, y, lam):
    n, p = Z.shape
    return float(np.mean(logistic_rho(-y * (Z @ theta))) + lam / (2.0 * p) * theta @ theta)


def ridge_grad(theta, Z, y, lam):
    n, p = Z.shape
    m = y * (Z @ theta)
    return -(Z.T @ (y * expit(-m))) / n + (lam / p) * theta


@dataclass
class NewtonResult:
    theta: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool


def ridge_logistic_newton(Z, y, lam, max_iter=200, rtol=1e-8):
    """Minimise the ridge-regularised logistic loss by damped Newton from 0.

    Stops when ``||grad|| <= rtol * max(1, ||grad(0)||)``.
    """
    if not lam > 0:
        raise NonPositiveLambda(f"lambda must be positive, got {lam!r}")
    n, p = Z.shape
    theta = np.zeros(p)
    g = ridge_grad(theta, Z, y, lam)
    tol = rtol * max(1.0, float(np.linalg.norm(g)))
    f = ridge_loss(theta, Z, y, lam)
    it = 0
    converged = float(np.linalg.norm(g)) <= tol
    while not converged and it < max_iter:
        it += 1
        m = y * (Z @ theta)
        h = (Z.T * logistic_rho_second(m)) @ Z / n
        h[np.diag_indices_from(h)] += lam / p
        step = linalg.solve(h, g, assume_a="pos")
        slope = float(g @ step)
        t = 1.0
        for _ in range(60):
            cand = theta - t * step
            fc = ridge_loss(cand, Z, y, lam)
            if fc <= f - 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            # no measurable decrease left at machine precision
            cand = theta - step
            fc = ridge_loss(cand, Z, y, lam)
        theta, f = cand, fc
        g = ridge_grad(theta, Z, y, lam)
        converged = float(np.linalg.norm(g)) <= tol
    return NewtonResult(theta, float(np.linalg.norm(g)), it, converged)


def state_of(theta, truth):
    """(sigma, xi) of an estimate relative to the truth."""
    p = theta.shape[0]
    t0 = truth.theta0
    xi = float(theta @ t0) / (truth.R ** 2 * p)
    perp = theta - (float(theta @ t0) / float(t0 @ t0)) * t0
    return StatePair(float(np.linalg.norm(perp)) / math.sqrt(p), xi)


def holdout_error(theta, data, n_test, seed, chunk=10_000):
    """Misclassification rate of sign(<z_new, theta>) on fresh pairs.

    The fresh covariates go through the same observation mechanism as the
    training data; labels come from the clean covariates.
    """
    spec, obs, truth = data.spec, data.observation, data.truth
    wrong = 0
    done = 0
    k = 0
    while done < n_test:
        m = min(chunk, n_test - done)
        cspec = spec.with_n(m)
        x = sample_design(cspec, derive_seed(seed, k, 0))
        y = generate_labels(x, truth, derive_seed(seed, k, 1))
        z = obs.apply(x, cspec, derive_seed(seed, k, 2))
        pred = np.where(z @ theta >= 0, 1.0, -1.0)
        wrong += int(np.sum(pred != y))
        done += m
        k += 1
    return wrong / n_test


@dataclass(eq=False)
class EstimatorReport:
    theta_hat: np.ndarray
    sigma_hat: float
    xi_hat: float
    angle: float
    empirical_test_error: float
    grad_norm: float
    newton_iters: int
    converged: bool = True


def fit_ridge_logistic(data, lam, n_test=100_000, test_seed=None, max_iter=200, strict=True):
    """Fit on (Z, y) and summarise the estimate.

    ``n_test = 0`` skips the holdout (the error is reported as NaN).

    Raises
    ------
    NotConverged
        After ``max_iter`` Newton steps when ``strict``; the report for the
        best iterate is attached as ``err.result``.
    """
    fit = ridge_logistic_newton(data.observed, data.labels, lam, max_iter=max_iter)
    st = state_of(fit.theta, data.truth)
    angle = phi_angle(st, data.truth.R) if (st.sigma > 0 or st.xi != 0) else math.pi / 2
    if n_test > 0:
        seed = derive_seed(data.seed, 3) if test_seed is None else test_seed
        err = holdout_error(fit.theta, data, n_test, seed)
    else:
        err = float("nan")
    report = EstimatorReport(
        theta_hat=fit.theta, sigma_hat=st.sigma, xi_hat=st.xi, angle=angle,
        empirical_test_error=err, grad_norm=fit.grad_norm, newton_iters=fit.iterations,
        converged=fit.converged,
    )
    if strict and not fit.converged:
        raise NotConverged(f"Newton did not converge in {max_iter} steps", report)
    return report
