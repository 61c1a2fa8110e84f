"""Independent numerical oracles shared by the test modules."""
import math

import numpy as np
from scipy.optimize import minimize


def dense_grid_gme(fhat, a1, points=1_000_000):
    """Independent oracle: direct formula on a dense c grid."""
    if fhat > a1:
        return 0.0
    lo, hi = fhat / math.sqrt(a1), math.sqrt(a1)
    c = np.linspace(lo, hi, points)
    s = fhat / math.sqrt(a1)
    overlap = s * c + math.sqrt(1 - s * s) * np.sqrt(np.clip(1 - c * c, 0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        pref = np.where(c < 1, (a1 - c * c) / (1 - c * c), 1.0)
    return float(np.max(pref * (1 - overlap**2)))


def entropy_oracle(a1, r):
    """Maximise the Shannon entropy over the simplex subject to lambda_0 >= a1 (SLSQP)."""
    x0 = np.full(r, 1.0 / r)
    x0[0] = max(a1, 1.0 / r) if a1 < 1 else 1 - 1e-9
    x0[1:] = (1 - x0[0]) / (r - 1)
    x0 = 0.9 * x0 + 0.1 / r

    def neg_h(lam):
        lam = np.clip(lam, 1e-300, None)
        return float(np.sum(lam * np.log2(lam)))

    def grad(lam):
        lam = np.clip(lam, 1e-300, None)
        return np.log2(lam) + 1 / math.log(2)

    cons = [{"type": "eq", "fun": lambda l: np.sum(l) - 1, "jac": lambda l: np.ones(r)},
            {"type": "ineq", "fun": lambda l: l[0] - a1, "jac": lambda l: np.eye(r)[0]}]
    res = minimize(neg_h, x0, jac=grad, bounds=[(1e-15, 1)] * r, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 1000})
    return -res.fun
