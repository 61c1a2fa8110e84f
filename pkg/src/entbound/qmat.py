"""Small dense linear algebra for states and operators on joint systems.

Matrices are plain complex ``numpy`` arrays. The helpers here validate the
physical invariants (hermiticity, unit trace, positivity, normalisation)
and raise ``ValueError`` when an input violates them.
"""

from __future__ import annotations

import math
from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-8
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(ops: Sequence) -> np.ndarray:
    if len(ops) == 0:
        raise ValueError("need at least one factor")
    return reduce(kron, ops)


def hermiticity_residual(m) -> float:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return math.inf
    return float(np.max(np.abs(m - dag(m)), initial=0.0))


def is_hermitian(m, tol: float = 1e-12) -> bool:
    return hermiticity_residual(m) <= tol


def hermitian_eig(m, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and the eigenvectors as orthonormal columns. The
    ordering inside a degenerate block carries no meaning.

    Raises
    ------
    ValueError
        If ``m`` is not square or its symmetry residual exceeds ``tol``.
    """
    m = as_matrix(m)
    res = hermiticity_residual(m)
    if res > tol:
        raise ValueError(f"matrix is not Hermitian (residual {res:.3g})")
    h = 0.5 * (m + dag(m))
    w, v = np.linalg.eigh(h)
    return w[::-1].copy(), v[:, ::-1].copy()


def top_eigsum(m, t: int) -> float:
    w, _ = hermitian_eig(m)
    return float(np.sum(w[:t]))


def dimension_vector(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ValueError("a dimension vector needs at least two parties")
    if any(d < 2 for d in dims):
        raise ValueError(f"every local dimension must be >= 2, got {dims}")
    return dims


def total_dim(dims: Sequence[int]) -> int:
    return int(np.prod(dims))


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot normalise the zero vector")
    return psi / nrm


def check_pure_state(psi, tol: float = NORM_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError("a pure state is a 1-d amplitude vector")
    err = abs(np.linalg.norm(psi) - 1.0)
    if err > tol:
        raise ValueError(f"state is not normalised (|norm - 1| = {err:.3g})")
    return psi


def ghz_state(n: int, phase: float = 0.0) -> np.ndarray:
    """``(|0...0> + exp(i*phase)|1...1>) / sqrt(2)`` on ``n`` qubits."""
    if n < 2:
        raise ValueError("GHZ state needs n >= 2")
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1 / math.sqrt(2)
    psi[-1] = np.exp(1j * phase) / math.sqrt(2)
    return psi


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def check_density_matrix(rho, tol: float = TRACE_TOL) -> np.ndarray:
    """Return ``rho`` as a complex array after checking it is a valid state."""
    rho = as_matrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    res = hermiticity_residual(rho)
    if res > HERMITIAN_TOL:
        raise ValueError(f"density matrix is not Hermitian (residual {res:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0]
    if lo < -PSD_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")
    return rho


def maximally_mixed(r: int) -> np.ndarray:
    return np.eye(r, dtype=complex) / r


def purity(rho) -> float:
    rho = as_matrix(rho)
    return float(np.real(np.trace(rho @ rho)))


def spectral_decompose(rho) -> list[tuple[float, np.ndarray]]:
    """Eigen-ensemble ``[(a_i, psi_i)]`` of a density matrix, weights descending.

    Tiny negative eigenvalues from round-off are clipped to zero and the
    weights renormalised, so the list sums to one.
    """
    rho = check_density_matrix(rho)
    w, v = hermitian_eig(rho)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return [(float(w[k]), v[:, k].copy()) for k in range(len(w))]


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary (QR of a Ginibre matrix with phase fix)."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (z + dag(z))


def random_generator(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian matrix scaled to unit spectral norm."""
    h = random_hermitian(d, rng)
    return h / np.max(np.abs(np.linalg.eigvalsh(h)))


def expm_hermitian(h: np.ndarray, scale: float) -> np.ndarray:
    """``exp(i * scale * h)`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(0.5 * (h + dag(h)))
    return (v * np.exp(1j * scale * w)) @ dag(v)


def random_density_matrix(r: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    k = r if rank is None else rank
    g = rng.standard_normal((r, k)) + 1j * rng.standard_normal((r, k))
    rho = g @ dag(g)
    return rho / np.trace(rho).real
