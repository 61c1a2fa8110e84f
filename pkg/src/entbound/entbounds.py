"""Lower bounds on the geometric measure and the relative entropy of entanglement.

Both bounds take two inputs. The first is ``fhat``, an upper bound on
``sqrt(<phi|rho|phi>)`` over product pure states. The second is ``a1``, a
lower bound on the largest eigenvalue of ``rho``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .bell import Correlation, mabk, evaluate, BellExpression
from .nondegen import NondegeneracyCertificate, purity_bound
from .prodfit import fhat as estimate_fhat

GRID_POINTS = 1000
C_TOL = 1e-10
_INVPHI = (math.sqrt(5) - 1) / 2

CSV_COLUMNS = ("B", "a1", "fhat", "gme_lower", "ree_lower", "c_star", "feasible")


def _check_unit_interval(name, value):
    if not (0.0 < value <= 1.0):
        raise ValueError(f"{name} must lie in (0, 1], got {value!r}")


def gme_objective(c, fhat: float, a1: float):
    """The bound as a function of the split point ``c`` (vectorised)."""
    c = np.asarray(c, dtype=float)
    s = fhat / math.sqrt(a1)
    s_perp = math.sqrt(max(0.0, 1.0 - s * s))
    overlap = s * c + s_perp * np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    inner = 1.0 - overlap**2
    if a1 >= 1.0:
        # (1 - c^2)/(1 - c^2) = 1, including the c -> 1 limit
        pref = np.ones_like(c)
    else:
        pref = (a1 - c * c) / (1.0 - c * c)
    return pref * inner


def gme_lower_bound(fhat: float, a1: float) -> tuple[float, float]:
    """Maximise the continuity bound over ``c`` in ``[fhat/sqrt(a1), sqrt(a1)]``.

    Returns ``(bound, c_star)``. If ``fhat > a1`` the interval is empty and
    ``(0.0, nan)`` is returned. The maximisation scans a 1000-point grid and
    polishes the best cell by golden-section search to ``1e-10`` in ``c``.
    """
    _check_unit_interval("fhat", fhat)
    _check_unit_interval("a1", a1)
    if fhat > a1:
        return 0.0, math.nan
    lo, hi = fhat / math.sqrt(a1), math.sqrt(a1)
    if hi - lo <= 0.0:
        return 0.0, lo
    grid = np.linspace(lo, hi, GRID_POINTS)
    vals = gme_objective(grid, fhat, a1)
    k = int(np.argmax(vals))
    best_c, best_v = float(grid[k]), float(vals[k])

    f = lambda c: float(gme_objective(c, fhat, a1))
    a = float(grid[max(k - 1, 0)])
    b = float(grid[min(k + 1, GRID_POINTS - 1)])
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > C_TOL:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
    for c in (x1, x2, a, b):
        v = f(c)
        if v > best_v:
            best_c, best_v = c, v
    return max(best_v, 0.0), best_c


def entropy_cap(a1: float, r: int) -> float:
    """Largest von Neumann entropy (bits) of an ``r``-level spectrum whose top eigenvalue is at least ``a1``.

    Attained by ``(a1, (1-a1)/(r-1), ..., (1-a1)/(r-1))``; below ``1/r`` the
    constraint is inactive and the answer is ``log2(r)``.
    """
    if not (0.0 <= a1 <= 1.0):
        raise ValueError(f"a1 must lie in [0, 1], got {a1!r}")
    if int(r) != r or r < 2:
        raise ValueError(f"r must be an integer >= 2, got {r!r}")
    if a1 < 1.0 / r:
        return math.log2(r)
    if a1 >= 1.0:
        return 0.0
    rest = (1.0 - a1) / (r - 1)
    return -a1 * math.log2(a1) - (1.0 - a1) * math.log2(rest)


def ree_lower_bound(fhat: float, a1: float, r: int) -> float:
    """``max(0, -2 log2(fhat) - entropy_cap(a1, r))``."""
    _check_unit_interval("fhat", fhat)
    return max(0.0, -2.0 * math.log2(fhat) - entropy_cap(a1, r))


@dataclass(frozen=True)
class BoundReport:
    B: float
    a1: float
    fhat: float
    gme_lower: float
    ree_lower: float
    entropy_cap: float
    c_star: float
    feasible: bool
    worst_setting: tuple[int, ...] = ()
    fhat_spread: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_setting"] = list(self.worst_setting)
        d["c_star"] = None if math.isnan(self.c_star) else self.c_star
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def csv_values(self) -> list[str]:
        return [fmt(getattr(self, k)) for k in CSV_COLUMNS]

    def csv_row(self) -> str:
        return ",".join(self.csv_values())


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def bounds_from(B: float, a1: float, fhat: float, r: int, worst_setting=(), spread: float = 0.0) -> BoundReport:
    """Combine the three certified quantities into a report."""
    cap = entropy_cap(a1, r)
    feasible = a1 > 0.0 and fhat <= a1
    if feasible:
        gme, c_star = gme_lower_bound(fhat, a1)
    else:
        gme, c_star = 0.0, math.nan
    ree = max(0.0, -2.0 * math.log2(fhat) - cap)
    return BoundReport(float(B), float(a1), float(fhat), float(gme), float(ree), float(cap),
                       float(c_star), bool(feasible), tuple(worst_setting), float(spread))


def analyze(corr: Correlation, cert: NondegeneracyCertificate, expr: BellExpression | None = None,
            restarts: int = 20, seed: int = 0) -> BoundReport:
    """Full pipeline: Bell value, eigenweight bound, product fidelity, entanglement bounds.

    ``expr`` defaults to the MABK expression matching the correlation.
    """
    if expr is None:
        expr = mabk(corr.n)
    if len(cert.dims) != corr.n:
        raise ValueError(f"certificate covers {len(cert.dims)} parties, correlation has {corr.n}")
    if expr.scenario != corr.scenario:
        raise ValueError("expression and correlation scenarios differ")
    B = evaluate(expr, corr)
    pb = purity_bound(cert, B)
    fh = estimate_fhat(corr, restarts=restarts, seed=seed)
    return bounds_from(B, pb.a1_lower, fh.fhat, cert.r, fh.worst_setting, fh.spread)
