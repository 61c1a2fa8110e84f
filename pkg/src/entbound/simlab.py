"""Simulated Bell experiments around the MABK-optimal GHZ configuration."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from . import qmat
from ._parallel import pmap
from .bell import Correlation, MeasurementConfig, born_correlation, evaluate, mabk, pauli_config
from .entbounds import BoundReport, bounds_from, fmt
from .nondegen import mabk_certificate, purity_bound
from .prodfit import fhat as estimate_fhat

SWEEP_COLUMNS = ("n", "v", "delta", "eta", "B", "a1", "fhat", "gme_lower", "ree_lower", "c_star", "feasible")


@dataclass(frozen=True)
class NoiseModel:
    visibility: float = 1.0
    angle_jitter: float = 0.0
    state_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility!r}")
        if self.angle_jitter < 0 or self.state_jitter < 0:
            raise ValueError("jitter strengths must be nonnegative")


def default_grid(start: float = 1.0, stop: float = 0.70, step: float = 0.005) -> list[float]:
    count = int(round(abs(start - stop) / step)) + 1
    sign = -1.0 if stop < start else 1.0
    return [round(start + sign * k * step, 12) for k in range(count)]


@dataclass(frozen=True)
class SweepSpec:
    n: int
    grid: tuple[NoiseModel, ...] = field(default_factory=lambda: tuple(NoiseModel(v) for v in default_grid()))
    restarts: int = 20
    seed: int = 0
    shots: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if self.n < 2:
            raise ValueError("n must be >= 2")


def ideal_configuration(n: int) -> tuple[np.ndarray, MeasurementConfig]:
    """GHZ state with relative phase ``2*pi*(n-1)/8`` and sigma_x / sigma_y measurements."""
    psi = qmat.ghz_state(n, 2 * math.pi * (n - 1) / 8)
    return qmat.projector(psi), pauli_config(n)


def _local_unitary(dims: Sequence[int], strength: float, rng: np.random.Generator) -> np.ndarray:
    return qmat.kron_all([qmat.expm_hermitian(qmat.random_generator(d, rng), strength) for d in dims])


def apply_noise(config: tuple[np.ndarray, MeasurementConfig], model: NoiseModel,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, MeasurementConfig]:
    """Perturb a (state, measurements) pair.

    The state becomes ``v * U rho U^dag + (1 - v) * I / r`` with ``U`` a
    product of local ``exp(i * eta * G)``. Every measurement setting is
    rotated by its own ``exp(i * delta * G)``. Each ``G`` is a random
    Hermitian generator of unit spectral norm.
    """
    rho, meas = config
    rng = np.random.default_rng(model.seed) if rng is None else rng
    dims = meas.dims
    r = qmat.total_dim(dims)
    rho = qmat.check_density_matrix(rho)
    if model.state_jitter > 0:
        u = _local_unitary(dims, model.state_jitter, rng)
        rho = u @ rho @ qmat.dag(u)
    v = model.visibility
    rho = v * rho + (1.0 - v) * qmat.maximally_mixed(r)
    rho = 0.5 * (rho + qmat.dag(rho))
    if model.angle_jitter > 0:
        ops = []
        for e in meas.ops:
            e = e.copy()
            for x in range(e.shape[0]):
                w = qmat.expm_hermitian(qmat.random_generator(e.shape[2], rng), model.angle_jitter)
                e[x] = w @ e[x] @ qmat.dag(w)
            ops.append(e)
        meas = MeasurementConfig(tuple(ops))
    qmat.check_density_matrix(rho)
    meas.validate()
    return rho, meas


def finite_shots(corr: Correlation, shots_per_setting: int, seed=0) -> Correlation:
    """Empirical frequencies from ``shots_per_setting`` multinomial draws per setting tuple."""
    if shots_per_setting < 1:
        raise ValueError("shots_per_setting must be >= 1")
    rng = np.random.default_rng(seed)
    scen = corr.scenario
    table = np.zeros(scen.shape)
    for x in scen.setting_tuples():
        p = corr.conditional(x).ravel()
        p = np.clip(p, 0.0, None)
        counts = rng.multinomial(shots_per_setting, p / p.sum())
        table[x] = (counts / shots_per_setting).reshape(scen.outcomes)
    return Correlation(scen, table)


def simulate(n: int, model: NoiseModel, shots: int | None = None) -> Correlation:
    """Correlation of the perturbed ideal configuration, optionally with finite statistics."""
    rng = np.random.default_rng(model.seed)
    rho, meas = apply_noise(ideal_configuration(n), model, rng)
    corr = born_correlation(rho, meas)
    if shots is not None:
        corr = finite_shots(corr, shots, seed=rng.integers(2**63))
    return corr


def _sweep_point(index: int, spec: SweepSpec) -> BoundReport:
    model = spec.grid[index]
    # one RNG stream per grid point, independent of scheduling
    point_seed = int(np.random.SeedSequence([spec.seed, index]).generate_state(1)[0])
    model = NoiseModel(model.visibility, model.angle_jitter, model.state_jitter, point_seed)
    corr = simulate(spec.n, model, spec.shots)
    cert = mabk_certificate(spec.n)
    B = evaluate(mabk(spec.n), corr)
    # finite statistics can overshoot the quantum maximum; such a point certifies nothing
    a1 = purity_bound(cert, B).a1_lower if B <= cert.c1 + 1e-9 else 0.0
    fh = estimate_fhat(corr, restarts=spec.restarts, seed=point_seed)
    return bounds_from(B, a1, fh.fhat, cert.r, fh.worst_setting, fh.spread)


def sweep(spec: SweepSpec, workers: int | None = None) -> list[BoundReport]:
    """One report per grid point, in grid order."""
    return pmap(partial(_sweep_point, spec=spec), range(len(spec.grid)), workers)


def sweep_csv(spec: SweepSpec, reports: Sequence[BoundReport]) -> str:
    buf = io.StringIO()
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for model, rep in zip(spec.grid, reports):
        row = [fmt(spec.n), fmt(model.visibility), fmt(model.angle_jitter), fmt(model.state_jitter)]
        row += rep.csv_values()
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def first_positive(reports: Sequence[BoundReport], attr: str) -> float | None:
    """Smallest Bell value in a sweep whose ``attr`` bound is positive."""
    vals = [r.B for r in reports if getattr(r, attr) > 0]
    return min(vals) if vals else None
