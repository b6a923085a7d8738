"""Dense Hermitian linear algebra and the quantum primitives used everywhere else.

Matrices are plain ``numpy`` complex arrays. Density operators are wrapped in
:class:`DensityOperator`, which carries the subsystem layout and validates the
usual invariants on construction. Subsystems are always ordered Alice first,
Bob second.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)


class InvalidStateError(ValueError):
    """A matrix failed a density operator invariant."""


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Unit-trace PSD matrix over a tensor product of subsystems.

    Construction validates Hermiticity, trace and positivity. Eigenvalues in
    ``[-PSD_TOL, 0)`` are tolerated; :func:`repair` clips them.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        dim = int(np.prod(dims))
        if m.shape != (dim, dim):
            raise InvalidStateError(f"matrix shape {m.shape} does not match dims {dims}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvalidStateError("matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -PSD_TOL:
            raise InvalidStateError(f"minimum eigenvalue {lo:.3e} is negative")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eigensystem(self.matrix)[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_matrix(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    return np.asarray(x, dtype=complex)


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def kron(a, b) -> np.ndarray:
    """Tensor product ``a (x) b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj())


def bloch_operator(axis: Sequence[float]) -> np.ndarray:
    """``u . sigma`` for a Bloch vector ``u``."""
    x, y, z = axis
    return x * SX + y * SY + z * SZ


def hermitian_eigensystem(m, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and column eigenvectors of a Hermitian matrix.

    Raises ``ValueError`` if ``m`` deviates from Hermitian by more than ``tol``.
    """
    m = as_matrix(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(m - dag(m)), initial=0.0) > tol:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh((m + dag(m)) / 2)
    return w[::-1].copy(), v[:, ::-1].copy()


def repair(m, dims: Sequence[int]) -> DensityOperator:
    """Clip tiny negative eigenvalues, renormalize, and wrap as a DensityOperator."""
    w, v = hermitian_eigensystem(m)
    if w[-1] < -PSD_TOL:
        raise InvalidStateError(f"minimum eigenvalue {w[-1]:.3e} is negative")
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return DensityOperator((v * w) @ dag(v), tuple(dims))


def psd_sqrt(rho) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix."""
    w, v = hermitian_eigensystem(rho)
    if w[-1] < -PSD_TOL:
        raise ValueError(f"spectrum is significantly negative ({w[-1]:.3e})")
    return (v * np.sqrt(_floor(w))) @ dag(v)


def _floor(w: np.ndarray) -> np.ndarray:
    # round-off eigenvalues would otherwise leak O(sqrt(eps)) through the square root
    cut = 64 * np.finfo(float).eps * max(float(np.max(np.abs(w))), 1.0)
    return np.where(w > cut, w, 0.0)


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if isinstance(rho, DensityOperator) and isinstance(sigma, DensityOperator):
        if rho.dims != sigma.dims:
            raise ValueError(f"dimension mismatch: {rho.dims} vs {sigma.dims}")
    r = psd_sqrt(a)
    inner = r @ b @ r
    w = np.linalg.eigvalsh((inner + dag(inner)) / 2)
    f = float(np.sum(np.sqrt(_floor(w))) ** 2)
    return min(max(f, 0.0), 1.0)


def expectation(rho, obs) -> float:
    """``Tr(rho obs)`` for a Hermitian observable; the imaginary residue is dropped."""
    a, o = as_matrix(rho), as_matrix(obs)
    if a.shape != o.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {o.shape}")
    val = np.einsum("ij,ji->", a, o)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}; observable not Hermitian?")
    return float(val.real)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Reduce ``rho`` onto the subsystem index (or indices) in ``keep``."""
    dims = rho.dims
    n = len(dims)
    if n < 2:
        raise ValueError("partial trace needs at least two subsystems")
    keep = sorted({keep} if isinstance(keep, (int, np.integer)) else set(keep))
    if not keep or any(k < 0 or k >= n for k in keep):
        raise IndexError(f"subsystem index out of range for dims {dims}")
    t = rho.matrix.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum labels: row indices 0..n-1, column indices n..2n-1
    row = list(range(n))
    col = [i + n for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    reduced = np.einsum(t, row + col, out)
    kd = tuple(dims[i] for i in keep)
    d = int(np.prod(kd))
    return repair(reduced.reshape(d, d), kd)


def embed(m: np.ndarray, dim: int) -> np.ndarray:
    """Pad a square matrix with zeros into the top-left block of ``dim x dim``."""
    out = np.zeros((dim, dim), dtype=complex)
    k = m.shape[0]
    out[:k, :k] = m
    return out
