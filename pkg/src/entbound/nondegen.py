"""Nondegeneracy certificates and the purity (top eigenweight) bound.

A Bell expression is nondegenerate on a dimension vector when the best sum
of the two largest Bell-operator eigenvalues, ``C2``, stays strictly below
twice the best largest eigenvalue, ``C1``. Given an observed Bell value
``B`` close to ``C1`` this forces the unknown state to carry a large weight
on one eigenvector.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from . import qmat
from ._parallel import pmap
from .bell import (BellExpression, MeasurementConfig, bell_operator, local_effective_operators,
                   random_projective_config)

ANALYTIC_MABK = "analytic-MABK"
HEURISTIC_SEESAW = "heuristic-seesaw"


@dataclass
class SeesawResult:
    value: float
    config: MeasurementConfig
    sweeps: int
    converged: bool
    restart_values: list[float] = field(default_factory=list)
    history: list[float] = field(default_factory=list)

    def __iter__(self):
        # allows ``value, config = seesaw_eigsum(...)``
        return iter((self.value, self.config))


def _update_party(expr: BellExpression, meas: MeasurementConfig, party: int, t: int) -> MeasurementConfig:
    m = bell_operator(expr, meas)
    _, vecs = qmat.hermitian_eig(m)
    eff = local_effective_operators(expr, meas, party, vecs[:, :t])
    X = eff.shape[0]
    d = eff.shape[2]
    new = np.empty((X, 2, d, d), dtype=complex)
    for x in range(X):
        w, v = np.linalg.eigh(eff[x, 0] - eff[x, 1])
        keep = v[:, w >= 0.0]  # zero modes go to outcome 0
        p0 = keep @ qmat.dag(keep)
        new[x, 0] = p0
        new[x, 1] = np.eye(d) - p0
    ops = list(meas.ops)
    ops[party] = new
    return MeasurementConfig(tuple(ops))


def _single_restart(index: int, expr: BellExpression, dims: tuple[int, ...], t: int, seed: int,
                    max_sweeps: int, tol: float):
    rng = np.random.default_rng([seed, index])
    meas = random_projective_config(dims, expr.scenario, rng)
    value = qmat.top_eigsum(bell_operator(expr, meas), t)
    history = [value]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for party in range(expr.scenario.n):
            meas = _update_party(expr, meas, party, t)
        new_value = qmat.top_eigsum(bell_operator(expr, meas), t)
        history.append(new_value)
        gain = new_value - value
        value = max(value, new_value)
        if gain < tol:
            converged = True
            break
    return value, meas, sweeps, converged, history


def seesaw_eigsum(expr: BellExpression, dims: Sequence[int], t: int = 1, restarts: int = 50,
                  seed: int = 0, max_sweeps: int = 200, tol: float = 1e-10,
                  workers: int | None = 1) -> SeesawResult:
    """Heuristic lower estimate of ``C(I, d, t)`` by alternating local optimisation.

    Every sweep visits the parties in order. With the others fixed, the
    objective ``Tr(P M)`` (``P`` the projector on the current top-``t``
    eigenspace) is linear in the party's projectors, and for two outcomes
    the optimum puts the positive eigenspace of ``O[x,0] - O[x,1]`` on
    outcome 0. Restarts begin from seeded Haar-random local bases.
    """
    if t not in (1, 2):
        raise ValueError(f"t must be 1 or 2, got {t}")
    dims = qmat.dimension_vector(dims)
    if len(dims) != expr.scenario.n:
        raise ValueError("dims and expression disagree on the number of parties")
    if any(o != 2 for o in expr.scenario.outcomes):
        raise ValueError("seesaw supports two-outcome measurements only")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    run = partial(_single_restart, expr=expr, dims=dims, t=t, seed=seed, max_sweeps=max_sweeps, tol=tol)
    results = pmap(run, range(restarts), workers)
    # max over (value, -index): ties resolve to the earliest restart
    best = max(range(restarts), key=lambda k: (results[k][0], -k))
    value, meas, sweeps, converged, history = results[best]
    return SeesawResult(value, meas, sweeps, converged, [r[0] for r in results], history)


def mabk_c2_upper(n: int) -> float:
    """Upper bound ``2**(n/2)`` on ``lambda_1 + lambda_2`` for the MABK operator over qubits.

    Follows from ``lambda_1**2 + lambda_2**2 <= 2**(n-1)``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    return 2 ** (n / 2)


@dataclass(frozen=True)
class NondegeneracyCertificate:
    expr_id: str
    dims: tuple[int, ...]
    c1: float
    c2_upper: float
    method: str
    nondegenerate: bool

    @property
    def budget(self) -> float:
        """``eps1 + eps2`` available when nondegenerate: ``2*c1 - c2_upper``."""
        return 2 * self.c1 - self.c2_upper

    @property
    def r(self) -> int:
        return qmat.total_dim(self.dims)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["budget"] = self.budget
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def certify(expr: BellExpression | str, dims: Sequence[int], c1: float, c2_upper: float,
            method: str = HEURISTIC_SEESAW) -> NondegeneracyCertificate:
    if c1 <= 0:
        raise ValueError(f"c1 must be positive, got {c1}")
    if method not in (ANALYTIC_MABK, HEURISTIC_SEESAW):
        raise ValueError(f"unknown certification method {method!r}")
    name = expr if isinstance(expr, str) else expr.name
    dims = qmat.dimension_vector(dims)
    return NondegeneracyCertificate(name, dims, float(c1), float(c2_upper), method,
                                    bool(c2_upper < 2 * c1 - 1e-12))


def mabk_certificate(n: int) -> NondegeneracyCertificate:
    """Certificate from the known MABK values ``C1 = 2**((n-1)/2)`` and ``C2 <= 2**(n/2)``."""
    return certify(f"mabk{n}", (2,) * n, 2 ** ((n - 1) / 2), mabk_c2_upper(n), ANALYTIC_MABK)


@dataclass(frozen=True)
class PurityBound:
    B: float
    eps1: float
    eps2: float
    a1_lower: float
    purity_lower: float


def purity_bound(cert: NondegeneracyCertificate, B: float) -> PurityBound:
    """Lower bound on the largest eigenweight ``a1`` of the state from its Bell value.

    ``eps1`` takes its smallest admissible value ``c1 - B``, which maximises
    ``1 - eps1/eps2`` for the fixed budget ``eps1 + eps2``; ``eps2`` is
    additionally capped at ``c1``. The bound is vacuous (``a1_lower = 0``)
    when the window closes or the certificate is not nondegenerate.
    """
    if B > cert.c1 + 1e-9:
        raise ValueError(f"Bell value {B!r} exceeds the certified maximum {cert.c1!r}; "
                         "check the dimension assumption and the data")
    eps1 = max(cert.c1 - B, 0.0)
    eps2 = min(cert.budget - eps1, cert.c1)
    if cert.nondegenerate and eps1 < eps2:
        a1 = 1.0 - eps1 / eps2
    else:
        a1 = 0.0
    r = cert.r
    a = max(a1, 1.0 / r)  # the top eigenvalue is never below 1/r
    pur = a * a + (1.0 - a) ** 2 / (r - 1)
    return PurityBound(float(B), float(eps1), float(eps2), float(a1), float(pur))
