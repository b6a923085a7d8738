"""State and channel constructors.

Two-qubit states live on ``2 (x) 2``. After the erasure channel, Bob holds a
qutrit whose level 2 is the vacuum ``|v>``, so lossy states live on
``2 (x) 3``. Continuous-variable states are two truncated Fock modes of
dimension ``n_trunc + 1`` each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .qmat import DensityOperator, I2, kron, partial_trace, projector, repair

VACUUM = 2
DEFAULT_CUTOFF = 24


def _check_unit(name: str, x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name}={x!r} outside [0, 1]")
    return x


def singlet() -> DensityOperator:
    psi = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
    return DensityOperator(projector(psi), (2, 2))


def werner(mu: float) -> DensityOperator:
    """``mu |psi_s><psi_s| + (1 - mu) I/4``."""
    mu = _check_unit("mu", mu)
    return DensityOperator(mu * singlet().matrix + (1 - mu) / 4 * np.eye(4), (2, 2))


def vacuum_projector() -> np.ndarray:
    return projector(np.eye(3)[VACUUM])


def lossy_channel(rho: DensityOperator, p: float) -> DensityOperator:
    """Replace Bob's qubit by the vacuum with probability ``p``.

    The qubit block of Bob's qutrit holds ``(1 - p) rho`` and the vacuum block
    holds ``p rho_A (x) |v><v|``. For the Werner family ``rho_A = I/2``.
    """
    if rho.dims != (2, 2):
        raise ValueError(f"lossy_channel expects a two-qubit state, got dims {rho.dims}")
    p = _check_unit("p", p)
    t = np.zeros((2, 3, 2, 3), dtype=complex)
    t[:, :2, :, :2] = (1 - p) * rho.matrix.reshape(2, 2, 2, 2)
    rho_a = partial_trace(rho, 0).matrix
    t[:, VACUUM, :, VACUUM] = p * rho_a
    return DensityOperator(t.reshape(6, 6), (2, 3))


def quintino_lift(tau: DensityOperator) -> DensityOperator:
    """Lift a projective-one-way state to a POVM-one-way state.

    Returns ``tau/3 + (2/3) tr_B(tau) (x) |v><v|``: the orthogonal projector of
    the lift is identified with Bob's vacuum level, so the result is the input
    sent through one more erasure channel. The local dimension is fixed to 2.
    """
    if tau.dims != (2, 3):
        raise ValueError(f"quintino_lift expects a qubit-qutrit state, got dims {tau.dims}")
    rho_a = partial_trace(tau, 0).matrix
    m = tau.matrix / 3 + (2 / 3) * kron(rho_a, vacuum_projector())
    return DensityOperator(m, (2, 3))


def oneway_povm_state(mu: float, p: float) -> DensityOperator:
    """``(1-p)/3 rho_W + (p+2)/3 I_A/2 (x) |v><v|`` on ``2 (x) 3``."""
    mu = _check_unit("mu", mu)
    p = _check_unit("p", p)
    t = np.zeros((2, 3, 2, 3), dtype=complex)
    t[:, :2, :, :2] = (1 - p) / 3 * werner(mu).matrix.reshape(2, 2, 2, 2)
    t[:, VACUUM, :, VACUUM] = (p + 2) / 3 * I2 / 2
    return DensityOperator(t.reshape(6, 6), (2, 3))


def vacuum_weight(rho: DensityOperator) -> float:
    """Population of Bob's vacuum level."""
    return float(partial_trace(rho, 1).matrix[VACUUM, VACUUM].real)


def db_to_variance(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class EprParams:
    """Two-mode squeezed vacuum parameters.

    ``v_sq`` is the squeezed-resource variance in shot-noise units (vacuum = 1).
    """

    v_sq: float
    n_trunc: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.v_sq < 1:
            raise ValueError(f"v_sq={self.v_sq!r} must be >= 1")
        if self.n_trunc < 1:
            raise ValueError("n_trunc must be >= 1")

    @property
    def chi(self) -> float:
        return math.sqrt((self.v_sq - 1) / (self.v_sq + 1))

    @classmethod
    def from_chi(cls, chi: float, n_trunc: int = DEFAULT_CUTOFF) -> "EprParams":
        if not 0 <= chi < 1:
            raise ValueError(f"chi={chi!r} outside [0, 1)")
        return cls((1 + chi**2) / (1 - chi**2), n_trunc)

    def norm_deficit(self) -> float:
        """Probability mass lost above the cutoff before renormalization."""
        return self.chi ** (2 * (self.n_trunc + 1))


def epr_amplitudes(chi: float, n_trunc: int) -> np.ndarray:
    if not 0 <= chi < 1:
        raise ValueError(f"chi={chi!r} outside [0, 1)")
    c = math.sqrt(1 - chi**2) * chi ** np.arange(n_trunc + 1)
    return c / np.linalg.norm(c)


def epr_vector(params: EprParams) -> np.ndarray:
    d = params.n_trunc + 1
    psi = np.zeros((d, d), dtype=complex)
    np.fill_diagonal(psi, epr_amplitudes(params.chi, params.n_trunc))
    return psi.ravel()


def epr_state(params: EprParams) -> DensityOperator:
    """Truncated, renormalized ``sqrt(1-chi^2) sum_n chi^n |n, n>``."""
    d = params.n_trunc + 1
    return DensityOperator(projector(epr_vector(params)), (d, d))


def loss_kraus(T: float, dim: int) -> list[np.ndarray]:
    """Kraus operators of a pure-loss channel with transmission ``T``."""
    T = _check_unit("T", T)
    ops = []
    n = np.arange(dim)
    for k in range(dim):
        A = np.zeros((dim, dim))
        src = n[n >= k]
        A[src - k, src] = np.sqrt(comb(src, k) * T ** (src - k) * (1 - T) ** k)
        ops.append(A)
    return ops


def fock_loss_channel(rho: DensityOperator, T: float, mode: int) -> DensityOperator:
    """Pass one Fock mode of ``rho`` through a loss channel of transmission ``T``."""
    if not 0 <= mode < len(rho.dims):
        raise IndexError(f"mode {mode} out of range for dims {rho.dims}")
    dims = rho.dims
    d = dims[mode]
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    out = np.zeros_like(t)
    idx = list(range(2 * n))
    a_row, a_col = 2 * n, 2 * n + 1
    for A in loss_kraus(T, d):
        if not A.any():
            continue
        # (A)_{i m} rho_{m ..., m' ...} (A^T)_{m' j}
        r_in = idx.copy()
        r_in[mode] = a_col
        r_in[mode + n] = a_row + 10
        out += np.einsum(A, [mode, a_col], t, r_in, A, [mode + n, a_row + 10], idx, optimize=True)
    dim = int(np.prod(dims))
    return repair(out.reshape(dim, dim), dims)
