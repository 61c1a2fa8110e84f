"""Bell scenarios, correlations, Bell expressions and Bell operators.

Conventions
-----------
A correlation table and a coefficient table share one layout: an array of
shape ``settings + outcomes``, so ``table[x1, ..., xn, a1, ..., an]`` is
``p(a|x)``. Measurements are stored per party as an array of shape
``(n_settings, n_outcomes, d, d)`` holding the projectors ``M[x][a]``.
Binary outcomes map to observable eigenvalues by ``a -> (-1)**a``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from . import qmat

NORMALIZATION_TOL = 1e-9
NO_SIGNALING_TOL = 1e-8


@dataclass(frozen=True)
class Scenario:
    settings: tuple[int, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(int(s) for s in self.settings))
        object.__setattr__(self, "outcomes", tuple(int(o) for o in self.outcomes))
        if len(self.settings) != len(self.outcomes):
            raise ValueError("settings and outcomes must list one count per party")
        if len(self.settings) < 2:
            raise ValueError("a Bell scenario needs at least two parties")
        if min(self.settings + self.outcomes) < 2:
            raise ValueError("every party needs at least two settings and two outcomes")

    @classmethod
    def binary(cls, n: int) -> "Scenario":
        return cls((2,) * n, (2,) * n)

    @property
    def n(self) -> int:
        return len(self.settings)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.settings + self.outcomes

    def setting_tuples(self):
        return itertools.product(*(range(s) for s in self.settings))

    def outcome_tuples(self):
        return itertools.product(*(range(o) for o in self.outcomes))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Correlation:
    """Joint conditional distribution ``p(a|x)``."""

    scenario: Scenario
    table: np.ndarray
    atol: float = field(default=NORMALIZATION_TOL, repr=False)

    def __post_init__(self):
        table = _frozen(self.table)
        if table.shape != self.scenario.shape:
            raise ValueError(f"table shape {table.shape} does not match scenario {self.scenario.shape}")
        if np.min(table) < -self.atol:
            raise ValueError(f"negative probability {np.min(table):.3g}")
        object.__setattr__(self, "table", table)
        res = self.normalization_residual()
        if res > self.atol:
            raise ValueError(f"p(.|x) not normalised (worst residual {res:.3g})")

    @property
    def n(self) -> int:
        return self.scenario.n

    def normalization_residual(self) -> float:
        n = self.scenario.n
        sums = self.table.sum(axis=tuple(range(n, 2 * n)))
        return float(np.max(np.abs(sums - 1.0)))

    def conditional(self, x: Sequence[int]) -> np.ndarray:
        """The outcome distribution ``p(.|x)`` as an ``outcomes``-shaped array."""
        return self.table[tuple(x)]

    def no_signaling_residual(self) -> float:
        """Largest dependence of any party-deleted marginal on the deleted party's setting."""
        n = self.scenario.n
        worst = 0.0
        for j in range(n):
            marg = self.table.sum(axis=n + j)
            ref = np.take(marg, [0], axis=j)
            worst = max(worst, float(np.max(np.abs(marg - ref))))
        return worst

    def is_no_signaling(self, tol: float = NO_SIGNALING_TOL) -> bool:
        return self.no_signaling_residual() <= tol


@dataclass(frozen=True, eq=False)
class BellExpression:
    scenario: Scenario
    coefficients: np.ndarray
    classical_bound: float
    quantum_bound: float | None = None
    name: str = "custom"

    def __post_init__(self):
        c = _frozen(self.coefficients)
        if c.shape != self.scenario.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match scenario {self.scenario.shape}")
        object.__setattr__(self, "coefficients", c)


@dataclass(frozen=True, eq=False)
class MeasurementConfig:
    """Projective measurements, ``ops[i][x, a]`` is party ``i``'s projector."""

    ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = []
        for i, e in enumerate(self.ops):
            e = np.array(e, dtype=complex, copy=True)
            if e.ndim != 4 or e.shape[2] != e.shape[3]:
                raise ValueError(f"party {i}: expected (settings, outcomes, d, d), got {e.shape}")
            e.setflags(write=False)
            ops.append(e)
        if len(ops) < 2:
            raise ValueError("need measurements for at least two parties")
        object.__setattr__(self, "ops", tuple(ops))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(e.shape[2] for e in self.ops)

    @property
    def scenario(self) -> Scenario:
        return Scenario(tuple(e.shape[0] for e in self.ops), tuple(e.shape[1] for e in self.ops))

    def validate(self, tol: float = 1e-9) -> "MeasurementConfig":
        for i, e in enumerate(self.ops):
            d = e.shape[2]
            for x in range(e.shape[0]):
                total = e[x].sum(axis=0)
                if np.max(np.abs(total - np.eye(d))) > tol:
                    raise ValueError(f"party {i} setting {x}: projectors do not sum to identity")
                for a in range(e.shape[1]):
                    m = e[x, a]
                    if qmat.hermiticity_residual(m) > tol:
                        raise ValueError(f"party {i} M[{x}][{a}] is not Hermitian")
                    if np.linalg.eigvalsh(0.5 * (m + qmat.dag(m)))[0] < -1e-10:
                        raise ValueError(f"party {i} M[{x}][{a}] is not PSD")
                    if np.max(np.abs(m @ m - m)) > tol:
                        raise ValueError(f"party {i} M[{x}][{a}] is not a projector")
        return self


# --- tensor contractions -------------------------------------------------

@lru_cache(maxsize=256)
def _contraction_plan(shapes: tuple, skip: int | None, n: int, with_state: tuple | None):
    """einsum sublists and a cached contraction path.

    Axis labels: x_i -> i, a_i -> n+i, row k_i -> 2n+i, column l_i -> 3n+i.
    """
    parties = [i for i in range(n) if i != skip]
    operands = [list(range(n)) + [n + i for i in range(n)]]
    for i in parties:
        operands.append([i, n + i, 2 * n + i, 3 * n + i])
    if with_state is None:
        out = ([] if skip is None else [skip, n + skip])
        out += [2 * n + i for i in parties] + [3 * n + i for i in parties]
    else:
        # state tensor rho[l..., k...] closes every row/column pair
        operands.append([3 * n + i for i in range(n)] + [2 * n + i for i in range(n)])
        out = list(range(2 * n))
    dummies = [np.zeros(s) for s in shapes]
    args = []
    for arr, sub in zip(dummies, operands):
        args += [arr, sub]
    path, _ = np.einsum_path(*args, out, optimize="optimal" if len(operands) <= 6 else "greedy")
    return operands, out, path


def _einsum(arrays, skip=None, with_state=False):
    n = len(arrays[0].shape) // 2
    shapes = tuple(a.shape for a in arrays)
    operands, out, path = _contraction_plan(shapes, skip, n, shapes[-1] if with_state else None)
    args = []
    for arr, sub in zip(arrays, operands):
        args += [arr, sub]
    return np.einsum(*args, out, optimize=path)


def _check_compatible(scenario: Scenario, meas: MeasurementConfig):
    if meas.scenario != scenario:
        raise ValueError(f"measurement scenario {meas.scenario} does not match {scenario}")


def bell_operator(expr: BellExpression, meas: MeasurementConfig) -> np.ndarray:
    """``M = sum_{x,a} c[x,a] (M_{x1}^{a1} ⊗ ... ⊗ M_{xn}^{an})``."""
    _check_compatible(expr.scenario, meas)
    n = expr.scenario.n
    arrays = [expr.coefficients.astype(complex)] + [meas.ops[i] for i in range(n)]
    t = _einsum(arrays)
    r = qmat.total_dim(meas.dims)
    m = t.reshape(r, r)
    return 0.5 * (m + qmat.dag(m))


def local_effective_operators(expr: BellExpression, meas: MeasurementConfig, party: int,
                              vectors: np.ndarray) -> np.ndarray:
    """Operators ``O[x, a]`` on ``party`` with ``sum_k <v_k|M|v_k> = sum_{x,a} Tr(M_x^a O[x, a])``.

    ``vectors`` holds the states ``v_k`` as columns.
    """
    _check_compatible(expr.scenario, meas)
    n = expr.scenario.n
    dims = meas.dims
    arrays = [expr.coefficients.astype(complex)] + [meas.ops[i] for i in range(n) if i != party]
    rest = _einsum(arrays, skip=party)  # (X, A, k_rest..., l_rest...)
    X, A = rest.shape[:2]
    d = dims[party]
    D = qmat.total_dim(dims) // d
    rest = rest.reshape(X, A, D, D)
    out = np.zeros((X, A, d, d), dtype=complex)
    for k in range(vectors.shape[1]):
        v = np.moveaxis(vectors[:, k].reshape(dims), party, 0).reshape(d, D)
        # <v|(E ⊗ R)|v> = sum_{p,q} E[p,q] * sum_{b,c} conj(v[p,b]) R[b,c] v[q,c]
        w = np.einsum("pb,xybc,qc->xypq", v.conj(), rest, v)
        out += np.swapaxes(w, -1, -2)
    return 0.5 * (out + qmat.dag(out))


def born_correlation(rho, meas: MeasurementConfig) -> Correlation:
    """``p(a|x) = Tr((⊗_i M_{x_i}^{a_i}) rho)``."""
    dims = meas.dims
    rho = qmat.check_density_matrix(rho)
    r = qmat.total_dim(dims)
    if rho.shape != (r, r):
        raise ValueError(f"state dimension {rho.shape[0]} does not match measurements {dims}")
    scen = meas.scenario
    n = scen.n
    rho_t = rho.reshape(dims + dims)
    terms = [np.ones(scen.shape, dtype=complex)] + list(meas.ops) + [rho_t]
    table = _einsum(terms, with_state=True).real
    # clip round-off negatives before validation
    table = np.where(table < 0, np.maximum(table, 0.0), table)
    return Correlation(scen, table)


def evaluate(expr: BellExpression, corr: Correlation) -> float:
    """``I(p) = sum_{a,x} c[x,a] p(a|x)``."""
    if expr.scenario != corr.scenario:
        raise ValueError(f"expression scenario {expr.scenario} does not match correlation {corr.scenario}")
    return float(np.sum(expr.coefficients * corr.table))


# --- MABK ------------------------------------------------------------------

def mabk_correlators(n: int) -> np.ndarray:
    """Coefficients ``g[x]`` of the MABK polynomial ``sum_x g[x] prod_i A_i^{x_i}``.

    Built from ``M_1 = A_1^0`` and
    ``M_k = (M_{k-1}(A_k^0 + A_k^1) + M'_{k-1}(A_k^0 - A_k^1)) / 2`` where the
    prime exchanges the two settings of every party.
    """
    if n < 2:
        raise ValueError("MABK needs n >= 2")
    g = np.array([1.0, 0.0])
    for _ in range(1, n):
        swapped = np.flip(g)  # flipping every axis of a (2,)*k array swaps 0 <-> 1 everywhere
        g = np.stack([0.5 * (g + swapped), 0.5 * (g - swapped)], axis=-1)
    return g


def correlator_expression(g: np.ndarray, classical_bound: float, quantum_bound: float | None = None,
                          name: str = "custom") -> BellExpression:
    """Expand a correlator polynomial over ±1 observables into ``c[x,a]``."""
    n = g.ndim
    sign = np.array([1.0, -1.0])
    c = g.reshape(g.shape + (1,) * n)
    for i in range(n):
        shape = [1] * (2 * n)
        shape[n + i] = 2
        c = c * sign.reshape(shape)
    return BellExpression(Scenario.binary(n), c, classical_bound, quantum_bound, name)


def mabk(n: int) -> BellExpression:
    """MABK expression with classical bound 1 and quantum bound ``2**((n-1)/2)``."""
    return correlator_expression(mabk_correlators(n), 1.0, 2 ** ((n - 1) / 2), name=f"mabk{n}")


def pauli_config(n: int) -> MeasurementConfig:
    """sigma_x (setting 0) and sigma_y (setting 1) eigenprojectors on every qubit."""
    if n < 2:
        raise ValueError("need n >= 2")
    s = 1 / math.sqrt(2)
    kets = [
        [np.array([s, s]), np.array([s, -s])],
        [np.array([s, 1j * s]), np.array([s, -1j * s])],
    ]
    e = np.array([[qmat.projector(k) for k in pair] for pair in kets])
    return MeasurementConfig(tuple(e.copy() for _ in range(n)))


def random_projective_config(dims: Sequence[int], scenario: Scenario,
                             rng: np.random.Generator) -> MeasurementConfig:
    """Each setting measures in a Haar-random basis; basis vector k goes to outcome k mod |A|."""
    dims = qmat.dimension_vector(dims)
    if len(dims) != scenario.n:
        raise ValueError("dims and scenario disagree on the number of parties")
    ops = []
    for d, X, A in zip(dims, scenario.settings, scenario.outcomes):
        e = np.zeros((X, A, d, d), dtype=complex)
        for x in range(X):
            u = qmat.random_unitary(d, rng)
            for k in range(d):
                e[x, k % A] += qmat.projector(u[:, k])
        ops.append(e)
    return MeasurementConfig(tuple(ops))


# --- classical strategies -------------------------------------------------

def deterministic_correlation(scenario: Scenario, strategy: Sequence[Sequence[int]]) -> Correlation:
    """Correlation where party ``i`` answers ``strategy[i][x_i]`` on setting ``x_i``."""
    table = np.zeros(scenario.shape)
    for x in scenario.setting_tuples():
        a = tuple(strategy[i][xi] for i, xi in enumerate(x))
        table[x + a] = 1.0
    return Correlation(scenario, table)


def uniform_correlation(scenario: Scenario) -> Correlation:
    return Correlation(scenario, np.full(scenario.shape, 1.0 / np.prod(scenario.outcomes)))


def classical_max(expr: BellExpression) -> float:
    """Maximum of the expression over all local deterministic strategies (exhaustive)."""
    scen = expr.scenario
    per_party = [list(itertools.product(range(A), repeat=X))
                 for X, A in zip(scen.settings, scen.outcomes)]
    xs = list(scen.setting_tuples())
    c = expr.coefficients
    best = -math.inf
    for strat in itertools.product(*per_party):
        val = sum(c[x + tuple(strat[i][xi] for i, xi in enumerate(x))] for x in xs)
        best = max(best, val)
    return float(best)


# --- file formats --------------------------------------------------------

def _key(t) -> str:
    return ",".join(str(int(v)) for v in t)


def _parse_key(key: str, width: int, where: str) -> tuple[int, ...]:
    try:
        t = tuple(int(s) for s in key.split(","))
    except ValueError:
        raise ValueError(f"{where}: malformed index key {key!r}") from None
    if len(t) != width:
        raise ValueError(f"{where}: key {key!r} has {len(t)} entries, expected {width}")
    return t


def _read_table(obj: dict, field_name: str, where: str) -> tuple[Scenario, np.ndarray]:
    for k in ("n", "settings", "outcomes", field_name):
        if k not in obj:
            raise ValueError(f"{where}: missing key {k!r}")
    n = int(obj["n"])
    scen = Scenario(tuple(obj["settings"]), tuple(obj["outcomes"]))
    if scen.n != n:
        raise ValueError(f"{where}: n={n} but settings list has {scen.n} parties")
    table = np.zeros(scen.shape)
    data = obj[field_name]
    if not isinstance(data, dict):
        raise ValueError(f"{where}: {field_name!r} must be an object keyed by setting tuples")
    for xk, row in data.items():
        x = _parse_key(xk, n, f"{where}: {field_name}")
        if any(xi >= s or xi < 0 for xi, s in zip(x, scen.settings)):
            raise ValueError(f"{where}: setting {xk!r} out of range")
        if not isinstance(row, dict):
            raise ValueError(f"{where}: {field_name}[{xk!r}] must be an object keyed by outcome tuples")
        for ak, val in row.items():
            a = _parse_key(ak, n, f"{where}: {field_name}[{xk!r}]")
            if any(ai >= o or ai < 0 for ai, o in zip(a, scen.outcomes)):
                raise ValueError(f"{where}: outcome {ak!r} under setting {xk!r} out of range")
            try:
                table[x + a] = float(val)
            except (TypeError, ValueError):
                raise ValueError(f"{where}: {field_name}[{xk!r}][{ak!r}] is not a number") from None
    return scen, table


def correlation_to_json(corr: Correlation) -> dict:
    scen = corr.scenario
    p = {}
    for x in scen.setting_tuples():
        p[_key(x)] = {_key(a): float(f"{corr.table[x + a]:.17g}") for a in scen.outcome_tuples()}
    return {"n": scen.n, "settings": list(scen.settings), "outcomes": list(scen.outcomes), "p": p}


def correlation_from_json(obj: dict, where: str = "correlation", max_residual: float = 1e-4):
    """Parse a correlation object. Returns ``(correlation, worst_normalization_residual)``.

    Every setting tuple must be present; missing outcome entries count as zero.
    Rows within ``max_residual`` of normalised are rescaled to sum to one;
    anything worse is rejected.
    """
    scen, table = _read_table(obj, "p", where)
    n = scen.n
    missing = [x for x in scen.setting_tuples() if _key(x) not in obj["p"]]
    if missing:
        raise ValueError(f"{where}: no distribution for setting {_key(missing[0])!r}")
    if np.min(table) < 0:
        bad = np.unravel_index(np.argmin(table), table.shape)
        raise ValueError(f"{where}: negative probability at x={_key(bad[:n])} a={_key(bad[n:])}")
    sums = table.sum(axis=tuple(range(n, 2 * n)))
    residual = float(np.max(np.abs(sums - 1.0)))
    if residual > max_residual:
        bad = np.unravel_index(np.argmax(np.abs(sums - 1.0)), sums.shape)
        raise ValueError(f"{where}: p(.|x={_key(bad)}) sums to {sums[bad]!r} (residual {residual:.3g})")
    table = table / sums.reshape(sums.shape + (1,) * n)
    return Correlation(scen, table), residual


def load_correlation(path) -> tuple[Correlation, float]:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return correlation_from_json(obj, where=str(path))


def save_correlation(corr: Correlation, path) -> None:
    Path(path).write_text(json.dumps(correlation_to_json(corr), indent=1) + "\n")


def expression_to_json(expr: BellExpression) -> dict:
    scen = expr.scenario
    c = {}
    for x in scen.setting_tuples():
        c[_key(x)] = {_key(a): float(expr.coefficients[x + a]) for a in scen.outcome_tuples()}
    obj = {"name": expr.name, "n": scen.n, "settings": list(scen.settings),
           "outcomes": list(scen.outcomes), "c": c, "classical_bound": expr.classical_bound}
    if expr.quantum_bound is not None:
        obj["quantum_bound"] = expr.quantum_bound
    return obj


def expression_from_json(obj: dict, where: str = "expression") -> tuple[BellExpression, dict]:
    """Parse a coefficient file. Returns the expression and any extra declared keys
    (``c1``, ``c2_upper``, ``dims``)."""
    scen, table = _read_table(obj, "c", where)
    if "classical_bound" not in obj:
        raise ValueError(f"{where}: missing key 'classical_bound'")
    qb = obj.get("quantum_bound")
    expr = BellExpression(scen, table, float(obj["classical_bound"]),
                          None if qb is None else float(qb), str(obj.get("name", "custom")))
    extras = {k: obj[k] for k in ("c1", "c2_upper", "dims") if k in obj}
    return expr, extras


def load_expression(path) -> tuple[BellExpression, dict]:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return expression_from_json(obj, where=str(path))
