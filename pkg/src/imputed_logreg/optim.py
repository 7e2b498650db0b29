"""Derivative-free one-dimensional search used by the solvers."""
from dataclasses import dataclass, field
import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class GoldenResult:
    x: float
    fx: float
    n_evals: int
    converged: bool
    # (a, b, x1, x2, f1, f2) after every step
    history: list = field(default_factory=list)


def golden_section_min(f, a, b, tol=1e-8, max_iter=200):
    """Minimise a unimodal ``f`` on ``[a, b]``.

    The interior probes ``x1 < x2`` always satisfy ``a <= x1 < x2 <= b``.
    The endpoints are evaluated at the end so that a minimiser sitting on
    the boundary is returned exactly.
    """
    if not a < b:
        raise ValueError(f"empty interval [{a}, {b}]")
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    n = 2
    hist = [(a, b, x1, x2, f1, f2)]
    it = 0
    while b - a > tol and it < max_iter:
        it += 1
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        n += 1
        hist.append((a, b, x1, x2, f1, f2))
    x, fx = (x1, f1) if f1 <= f2 else (x2, f2)
    return GoldenResult(x=x, fx=fx, n_evals=n, converged=b - a <= tol, history=hist)


def golden_section_max(f, a, b, tol=1e-8, max_iter=200):
    res = golden_section_min(lambda t: -f(t), a, b, tol=tol, max_iter=max_iter)
    res.fx = -res.fx
    res.history = [(a_, b_, x1, x2, -f1, -f2) for a_, b_, x1, x2, f1, f2 in res.history]
    return res
