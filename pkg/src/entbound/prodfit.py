"""Best product-distribution overlap with an observed correlation.

For a fixed setting tuple ``x`` the Bhattacharyya overlap between
``p(.|x)`` and a product distribution ``q_1 x ... x q_n`` equals the
multilinear form ``T(u_1, ..., u_n)`` of the tensor ``T = sqrt(p(.|x))``
evaluated at ``u_i = sqrt(q_i)``. Maximising it is therefore a best
rank-1 approximation problem over nonnegative unit vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .bell import Correlation

MAX_ITER = 10_000
TOL = 1e-12
SHIFT = 1.0


def check_tensor(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim < 1:
        raise ValueError("tensor must have at least one mode")
    if np.min(t) < 0:
        raise ValueError(f"tensor has a negative entry {np.min(t):.3g}")
    return t


def multilinear(t: np.ndarray, vectors) -> float:
    """``T(u_1, ..., u_n) = sum_a T[a] prod_i u_i[a_i]``."""
    out = t
    for u in vectors:
        out = np.tensordot(out, u, axes=([0], [0]))
    return float(out)


def partial_contraction(t: np.ndarray, vectors, skip: int) -> np.ndarray:
    """Contract every mode except ``skip``; returns a vector over that mode."""
    out = t
    # contract from the last mode so earlier axis numbers stay valid
    for i in reversed(range(t.ndim)):
        if i != skip:
            out = np.tensordot(out, vectors[i], axes=([i], [0]))
    return out


@dataclass
class Rank1Fit:
    value: float
    vectors: list[np.ndarray]
    restart_values: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def spread(self) -> float:
        return max(self.restart_values) - min(self.restart_values) if self.restart_values else 0.0

    def product_distribution(self) -> "ProductDistribution":
        return ProductDistribution([u * u for u in self.vectors])

    def __iter__(self):
        return iter((self.value, self.vectors))


@dataclass
class ProductDistribution:
    marginals: list[np.ndarray]

    def __post_init__(self):
        for i, q in enumerate(self.marginals):
            if np.min(q) < 0 or abs(q.sum() - 1.0) > 1e-10:
                raise ValueError(f"marginal {i} is not a probability vector")

    def joint(self) -> np.ndarray:
        out = np.array(1.0)
        for q in self.marginals:
            out = np.multiply.outer(out, q)
        return out


def _unit(v: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    v = np.clip(v, 0.0, None)
    nrm = np.linalg.norm(v)
    return fallback if nrm == 0 else v / nrm


def _alternating(t, vectors, max_iter=MAX_ITER, tol=TOL):
    """Per-mode power updates ``u_i <- normalise(T(u_1, .., ., .., u_n))``.

    Each update maximises the form in ``u_i`` exactly, so the objective is
    nondecreasing. Returns ``(value, vectors, iterations, oscillated)``.
    """
    vectors = [u.copy() for u in vectors]
    value = multilinear(t, vectors)
    for it in range(1, max_iter + 1):
        for i in range(t.ndim):
            vectors[i] = _unit(partial_contraction(t, vectors, i), vectors[i])
        new = multilinear(t, vectors)
        if new < value - 1e-14:
            return value, vectors, it, True
        if new - value < tol:
            return new, vectors, it, False
        value = new
    return value, vectors, max_iter, False


def shopm(t, vectors, alpha: float = SHIFT, max_iter=MAX_ITER, tol=TOL):
    """Shifted symmetric power method on the symmetric embedding of ``t``.

    The order-n tensor on ``R^{m_1} x ... x R^{m_n}`` is embedded as a
    symmetric tensor ``S`` on ``R^{m_1 + ... + m_n}``. For a stacked vector
    ``x = (y_1, ..., y_n)``, ``S(x, ..., x)`` is proportional to
    ``T(y_1, ..., y_n)`` and block ``i`` of ``S(., x, ..., x)`` to
    ``T(y_1, .., ., .., y_n)``, so the embedding is never formed. The
    update is ``x <- normalise(S(., x, ..., x) + alpha * x)``.
    """
    t = check_tensor(t)
    n = t.ndim
    sizes = t.shape
    x = np.concatenate([u / math.sqrt(n) for u in vectors])
    splits = np.cumsum(sizes)[:-1]
    value = -math.inf
    it = 0
    for it in range(1, max_iter + 1):
        ys = np.split(x, splits)
        grad = np.concatenate([partial_contraction(t, ys, i) for i in range(n)])
        x = _unit(grad + alpha * x, x)
        ys = np.split(x, splits)
        units = [_unit(y, np.full(len(y), 1 / math.sqrt(len(y)))) for y in ys]
        new = multilinear(t, units)
        if abs(new - value) < tol:
            value = max(value, new)
            break
        value = max(value, new)
    ys = np.split(x, splits)
    units = [_unit(y, np.full(len(y), 1 / math.sqrt(len(y)))) for y in ys]
    return multilinear(t, units), units, it


def rank1_fit(t, restarts: int = 20, seed=0, method: str = "hopm") -> Rank1Fit:
    """Maximise ``T(u_1, ..., u_n)`` over nonnegative unit vectors.

    Restart 0 starts from uniform vectors, the rest from seeded random
    nonnegative ones. ``method="hopm"`` runs alternating power updates and
    falls back to the shifted symmetric method if the objective ever
    decreases; ``method="shopm"`` uses the shifted symmetric method only.
    The result is a lower estimate of the true maximum.
    """
    t = check_tensor(t)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if method not in ("hopm", "shopm"):
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)
    best = None
    values = []
    iters = 0
    for k in range(restarts):
        if k == 0:
            start = [np.full(m, 1 / math.sqrt(m)) for m in t.shape]
        else:
            start = [_unit(np.abs(rng.standard_normal(m)), np.full(m, 1 / math.sqrt(m))) for m in t.shape]
        if method == "hopm":
            val, vecs, it, oscillated = _alternating(t, start)
            if oscillated:
                val, vecs, it2 = shopm(t, vecs)
                it += it2
        else:
            val, vecs, it = shopm(t, start)
        iters += it
        values.append(val)
        if best is None or val > best[0]:
            best = (val, vecs)
    return Rank1Fit(best[0], best[1], values, iters)


def brute_force_rank1(t, grid: int = 101) -> float:
    """Grid search over ``u_i = (cos th_i, sin th_i)``, ``th_i`` in ``[0, pi/2]``, then local polish.

    Independent check for two-outcome tensors of order at most three.
    """
    t = check_tensor(t)
    if t.ndim > 3 or any(m != 2 for m in t.shape):
        raise ValueError(f"brute force supports 2x..x2 tensors of order <= 3, got shape {t.shape}")
    n = t.ndim
    th = np.linspace(0.0, math.pi / 2, grid)
    basis = np.stack([np.cos(th), np.sin(th)])  # (2, grid)
    vals = t
    for _ in range(n):
        vals = np.tensordot(vals, basis, axes=([0], [0]))
    # vals has shape (grid,)*n
    flat = np.argpartition(-vals.ravel(), 4)[:4]
    step = th[1] - th[0]

    def neg(angles):
        return -multilinear(t, [np.array([math.cos(a), math.sin(a)]) for a in angles])

    best = float(vals.max())
    for idx in flat:
        start = np.array([th[i] for i in np.unravel_index(idx, vals.shape)])
        bounds = [(max(0.0, s - 2 * step), min(math.pi / 2, s + 2 * step)) for s in start]
        res = minimize(neg, start, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 1000})
        best = max(best, -float(res.fun))
    return best


@dataclass
class FhatResult:
    fhat: float
    worst_setting: tuple[int, ...]
    per_setting: dict[tuple[int, ...], float]
    spread: float

    def __iter__(self):
        return iter((self.fhat, self.worst_setting))


def fhat(corr: Correlation, restarts: int = 20, seed: int = 0) -> FhatResult:
    """``min_x max_q sum_a sqrt(q(a|x) p(a|x))`` over product distributions ``q``.

    ``spread`` is the largest gap between the best and worst restart seen
    for any setting tuple.
    """
    per = {}
    spread = 0.0
    for k, x in enumerate(corr.scenario.setting_tuples()):
        t = np.sqrt(np.clip(corr.conditional(x), 0.0, None))
        fit = rank1_fit(t, restarts=restarts, seed=[seed, k])
        per[x] = min(fit.value, 1.0)
        spread = max(spread, fit.spread)
    worst = min(per, key=lambda x: (per[x], x))
    return FhatResult(per[worst], worst, per, spread)
