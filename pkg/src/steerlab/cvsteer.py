"""Steering a lossy two-mode squeezed vacuum with pseudo-spin measurements.

The pseudo-spin operators pair Fock levels ``|2n>`` and ``|2n+1>`` into
qubits. They are normalized to be dichotomic: ``S_x = S_+ + S_-`` and
``S_y = -i (S_+ - S_-)`` square to the identity on every complete pair.

The equatorial inequality compares the theta-averaged correlation

    lhs = (1/2 pi) int <A_theta S_theta> dtheta

against ``(2/pi) (P_+ sqrt(1 - Z_+^2) + P_- sqrt(1 - Z_-^2))`` where ``P_+-``
are the untrusted party's parity announcement probabilities and ``Z_+-`` the
trusted party's conditional parity. An honest untrusted party measures
``S_{-theta}`` for equatorial rounds (the phase-conjugate axis maximizes the
correlation of ``sum chi^n |n, n>``) and ``S_Z`` for parity rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .states import DEFAULT_CUTOFF, EprParams, epr_state, fock_loss_channel

CONVERGENCE_TOL = 1e-5
CUTOFF_STEP = 4


class ConvergenceError(RuntimeError):
    """Results changed by more than the tolerance when the Fock cutoff grew."""


@dataclass(frozen=True, eq=False)
class PseudoSpinSet:
    s_z: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray
    s_x: np.ndarray
    s_y: np.ndarray

    @property
    def dim(self) -> int:
        return self.s_z.shape[0]

    def s_theta(self, theta: float) -> np.ndarray:
        return math.cos(theta) * self.s_x + math.sin(theta) * self.s_y

    def interior(self) -> np.ndarray:
        """Projector onto the levels that belong to a complete ``(2n, 2n+1)`` pair."""
        d = self.dim
        keep = np.zeros(d)
        keep[: d - d % 2] = 1.0
        return np.diag(keep)


def pseudo_spin_ops(n_trunc: int) -> PseudoSpinSet:
    """Pseudo-spin operators on a Fock mode truncated at photon number ``n_trunc``."""
    if n_trunc < 2:
        raise ValueError("n_trunc must be >= 2")
    d = n_trunc + 1
    sp = np.zeros((d, d), dtype=complex)
    for n in range(0, d - 1, 2):
        sp[n + 1, n] = 1.0
    sm = sp.conj().T
    sz = np.diag([(-1.0) ** (n + 1) for n in range(d)]).astype(complex)
    return PseudoSpinSet(s_z=sz, s_plus=sp, s_minus=sm, s_x=sp + sm, s_y=-1j * (sp - sm))


def _ev2(t: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    """``Tr(rho (a (x) b))`` for ``rho`` stored as a ``(d, d, d, d)`` tensor."""
    return np.einsum("ijkl,ki,lj->", t, a, b)


def pseudo_spin_correlation(rho, ops: PseudoSpinSet, theta_a: float, theta_b: float) -> float:
    d = ops.dim
    t = np.asarray(rho).reshape(d, d, d, d)
    return float(_ev2(t, ops.s_theta(theta_a), ops.s_theta(theta_b)).real)


@dataclass(frozen=True)
class EquatorialResult:
    lhs: float
    rhs_bound: float
    direction: str
    n_trunc: int = DEFAULT_CUTOFF

    @property
    def violated(self) -> bool:
        return self.lhs > self.rhs_bound


def _parity_bound(t: np.ndarray, ops: PseudoSpinSet, untrusted: int) -> float:
    d = ops.dim
    eye = np.eye(d)
    odd = np.diag((np.diag(ops.s_z).real > 0).astype(float))
    total = 0.0
    for proj in (odd, eye - odd):
        if untrusted == 1:
            P = _ev2(t, eye, proj).real
            z = _ev2(t, ops.s_z, proj).real
        else:
            P = _ev2(t, proj, eye).real
            z = _ev2(t, proj, ops.s_z).real
        if P <= 1e-300:
            continue
        Z = z / P
        gap = 1.0 - Z * Z
        # |Z| = 1 up to round-off must not leak sqrt(eps) into the bound
        total += P * math.sqrt(gap) if gap > 64 * np.finfo(float).eps else 0.0
    return 2 / math.pi * total


def _equatorial_once(rho, direction: str, n_theta: int) -> EquatorialResult:
    d = rho.dims[0]
    ops = pseudo_spin_ops(d - 1)
    t = rho.matrix.reshape(d, d, d, d)
    # periodic trapezoid rule on [-pi, pi)
    thetas = -math.pi + 2 * math.pi * np.arange(n_theta) / n_theta
    vals = [_ev2(t, ops.s_theta(th), ops.s_theta(-th)).real for th in thetas]
    lhs = float(np.mean(vals))
    untrusted = 0 if direction == "alice_steers_bob" else 1
    return EquatorialResult(lhs, _parity_bound(t, ops, untrusted), direction, d - 1)


DIRECTIONS = ("alice_steers_bob", "bob_steers_alice")


def equatorial_test(rho, direction: str = "bob_steers_alice", n_theta: int = 64) -> EquatorialResult:
    """Evaluate the equatorial steering inequality on a two-mode Fock state.

    ``rho`` is used as given, so any loss must already be applied. See
    :func:`lossy_epr_test` for the version with the cutoff convergence guard.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    if n_theta < 32:
        raise ValueError("n_theta must be >= 32")
    if len(rho.dims) != 2 or rho.dims[0] != rho.dims[1]:
        raise ValueError(f"expected two equal Fock modes, got dims {rho.dims}")
    return _equatorial_once(rho, direction, n_theta)


def lossy_epr_state(v_sq: float, T: float, n_trunc: int = DEFAULT_CUTOFF):
    """EPR state with Bob's mode (index 1) sent through loss ``T``."""
    return fock_loss_channel(epr_state(EprParams(v_sq, n_trunc)), T, 1)


def lossy_epr_test(
    v_sq: float,
    T: float,
    n_trunc: int = DEFAULT_CUTOFF,
    n_theta: int = 64,
    check_convergence: bool = True,
) -> dict[str, EquatorialResult]:
    """Both steering directions for the lossy EPR state, cutoff-checked.

    Raises :class:`ConvergenceError` if recomputing at ``n_trunc + 4`` moves
    any scalar by more than ``1e-5``.
    """
    rho = lossy_epr_state(v_sq, T, n_trunc)
    out = {d: equatorial_test(rho, d, n_theta) for d in DIRECTIONS}
    if check_convergence:
        rho2 = lossy_epr_state(v_sq, T, n_trunc + CUTOFF_STEP)
        for d in DIRECTIONS:
            r2 = equatorial_test(rho2, d, n_theta)
            drift = max(abs(r2.lhs - out[d].lhs), abs(r2.rhs_bound - out[d].rhs_bound))
            if drift > CONVERGENCE_TOL:
                raise ConvergenceError(
                    f"cutoff {n_trunc} -> {n_trunc + CUTOFF_STEP} changed {d} by {drift:.2e}"
                )
    return out


@dataclass(frozen=True)
class ReidResult:
    v_xa_given_xb: float
    v_pa_given_pb: float
    v_xb_given_xa: float
    v_pb_given_pa: float

    @property
    def product_ba(self) -> float:
        """Bob steers Alice when this drops below 1."""
        return self.v_xa_given_xb * self.v_pa_given_pb

    @property
    def product_ab(self) -> float:
        """Alice steers Bob when this drops below 1."""
        return self.v_xb_given_xa * self.v_pb_given_pa


def reid_products(v_sq: float, T: float) -> ReidResult:
    """Conditional quadrature variances of the lossy two-mode squeezed state.

    Covariance blocks (vacuum variance 1): Alice ``a = V``, Bob
    ``b = T V + 1 - T``, correlation ``c = sqrt(T (V^2 - 1))``. Inference
    variances are ``a - c^2/b`` and ``b - c^2/a``; X and P are symmetric.
    """
    if v_sq < 1:
        raise ValueError(f"v_sq={v_sq!r} must be >= 1")
    if not 0 <= T <= 1:
        raise ValueError(f"T={T!r} outside [0, 1]")
    a = v_sq
    b = T * v_sq + 1 - T
    c2 = T * (v_sq**2 - 1)
    va = a - c2 / b
    vb = b - c2 / a
    return ReidResult(va, va, vb, vb)


SWEEP_COLUMNS = ("T", "lhs", "rhs_ab", "rhs_ba", "reid_ab", "reid_ba")


def transmission_sweep(v_sq: float, t_grid, n_trunc: int = DEFAULT_CUTOFF, n_theta: int = 64) -> np.ndarray:
    """Rows ``(T, lhs, rhs_ab, rhs_ba, reid_ab, reid_ba)``; loss on Bob only.

    ``_ab`` is Alice steering Bob, ``_ba`` Bob steering Alice.
    """
    rows = []
    for T in np.asarray(t_grid, dtype=float):
        if -1e-12 < T < 1 + 1e-12:
            T = min(max(float(T), 0.0), 1.0)  # snap float-grid overshoot
        res = lossy_epr_test(v_sq, T, n_trunc, n_theta)
        reid = reid_products(v_sq, T)
        ab, ba = res["alice_steers_bob"], res["bob_steers_alice"]
        rows.append((T, ab.lhs, ab.rhs_bound, ba.rhs_bound, reid.product_ab, reid.product_ba))
    return np.array(rows)


def two_way_threshold(v_sq: float, lo: float = 0.05, hi: float = 0.95, n_trunc: int = DEFAULT_CUTOFF,
                      n_theta: int = 64, xtol: float = 1e-6) -> float:
    """Transmission at which Bob's equatorial steering of Alice switches on."""

    def gap(T):
        r = lossy_epr_test(v_sq, T, n_trunc, n_theta)["bob_steers_alice"]
        return r.lhs - r.rhs_bound

    return float(brentq(gap, lo, hi, xtol=xtol))
